#include "redmoment/certification.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace redmoment::certification {

namespace {

// ceil with a dust guard so that budgets landing on an integer up to
// floating-point rounding are not bumped to the next one.
long dust_ceil(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("budget computation produced a non-positive "
                                "or non-finite value");
  }
  return static_cast<long>(std::ceil(v - 1e-9));
}

long triple_count(int n_s) {
  return static_cast<long>(n_s) * (n_s - 1) * (n_s - 2) / 6;
}

void check_targets(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be positive");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
}

}  // namespace

Plan plan(double epsilon, double delta) {
  check_targets(epsilon, delta);
  Plan p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.n_s = 3;
  p.n_tot = dust_ceil(15.0 / (delta * epsilon * epsilon));
  p.n_u = (p.n_tot + p.n_s - 1) / p.n_s;
  return p;
}

double covariance_trace_bound(long n_u, int n_s) {
  if (n_u < 1 || n_s < 3) {
    throw std::invalid_argument("covariance bound needs n_u >= 1, n_s >= 3");
  }
  return 2.5 * (1.0 / static_cast<double>(triple_count(n_s)) + 1.0) /
         static_cast<double>(n_u);
}

CovarianceReport covariance_report(const protocol::ProtocolResult& result) {
  const long n_u = result.global.n_u;
  const int n_s = result.global.n_s;
  if (n_u < 2 || static_cast<long>(result.per_setting.size()) != n_u) {
    throw std::invalid_argument(
        "covariance report needs at least two per-setting vectors");
  }
  protocol::Correlators mean = protocol::Correlators::Zero();
  for (const auto& y : result.per_setting) mean += y;
  mean /= static_cast<double>(n_u);
  double ss = 0.0;
  for (const auto& y : result.per_setting) ss += (y - mean).squaredNorm();
  CovarianceReport rep;
  rep.n_u = n_u;
  rep.n_s = n_s;
  // Unbiased per-setting covariance trace, divided by n_u for the mean.
  rep.trace = ss / static_cast<double>(n_u - 1) / static_cast<double>(n_u);
  rep.bound = covariance_trace_bound(n_u, n_s);
  rep.ratio = rep.trace / rep.bound;
  return rep;
}

Certificate certify(const protocol::ProtocolResult& result,
                    const inversion::InversionMaps& maps, double epsilon,
                    double delta) {
  check_targets(epsilon, delta);
  const long n_u = result.global.n_u;
  const int n_s = result.global.n_s;
  if (n_u < 1 || n_s < 3) {
    throw std::invalid_argument("certification needs n_u >= 1 and n_s >= 3");
  }

  const double trace_bound = covariance_trace_bound(n_u, n_s);
  const double delta_achieved = trace_bound / (epsilon * epsilon);
  // Dust guard: budgets produced by plan() must round-trip through this
  // check even when delta * epsilon^2 loses an ulp.
  if (delta_achieved > delta * (1.0 + 1e-9)) {
    const long n_u_required = dust_ceil(
        2.5 * (1.0 / static_cast<double>(triple_count(n_s)) + 1.0) /
        (delta * epsilon * epsilon));
    throw std::invalid_argument(
        "measurement budget too small for the requested confidence: n_u = " +
        std::to_string(n_u) + " at n_s = " + std::to_string(n_s) +
        " reaches delta = " + std::to_string(delta_achieved) +
        "; need n_u >= " + std::to_string(n_u_required));
  }

  const moments::WitnessValue value =
      inversion::estimate_witness(result.global.y, maps);
  Certificate cert;
  cert.e4_hat = value.e4;
  cert.e4_tilde_hat = value.e4_tilde.value();
  cert.epsilon = epsilon;
  cert.delta_requested = delta;
  cert.delta_achieved = delta_achieved;
  cert.n_u = n_u;
  cert.n_s = n_s;
  cert.n_tot = n_u * static_cast<long>(n_s);
  cert.margin = -cert.e4_tilde_hat - epsilon;
  cert.certified = cert.margin > 0.0;
  return cert;
}

}  // namespace redmoment::certification
