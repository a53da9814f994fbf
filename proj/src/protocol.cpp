#include "redmoment/protocol.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace redmoment::protocol {

using states::Complex;
using states::CMatrix;

UnitarySetting make_setting(int d_a, int d_b, std::uint64_t setting_seed) {
  rng::SplitMix64 gen(setting_seed);
  UnitarySetting s;
  s.u_a = haar::sample_haar_unitary(d_a, gen);
  s.u_b = haar::sample_haar_unitary(d_b, gen);
  s.setting_seed = setting_seed;
  return s;
}

Eigen::VectorXd outcome_distribution(const states::DensityMatrix& rho,
                                     const UnitarySetting& setting) {
  const int d_a = rho.d_a, d_b = rho.d_b, dim = rho.dim();
  if (setting.u_a.rows() != d_a || setting.u_b.rows() != d_b) {
    throw std::invalid_argument("outcome_distribution: setting/state dimension mismatch");
  }
  Eigen::VectorXd p(dim);
  Eigen::VectorXcd column(dim);
  for (int i = 0; i < d_a; ++i) {
    for (int j = 0; j < d_b; ++j) {
      for (int a = 0; a < d_a; ++a)
        for (int b = 0; b < d_b; ++b)
          column[states::flat_index(a, b, d_b)] =
              setting.u_a(a, i) * setting.u_b(b, j);
      p[states::flat_index(i, j, d_b)] =
          (column.adjoint() * rho.m * column).value().real();
    }
  }
  double total = 0.0;
  for (int k = 0; k < dim; ++k) {
    if (p[k] < -1e-12) {
      throw std::invalid_argument(
          "outcome_distribution: probability " + std::to_string(p[k]) +
          " is negative beyond rounding tolerance");
    }
    if (p[k] < 0.0) p[k] = 0.0;
    total += p[k];
  }
  p /= total;
  return p;
}

int fine_pattern(int i1, int i2, int i3) {
  if (i1 == i2 && i2 == i3) return 0;
  if (i1 == i2) return 1;
  if (i2 == i3) return 2;
  if (i3 == i1) return 3;
  return 4;
}

namespace {

// Reduced class from the per-subsystem fine patterns.
int reduced_class(int q_a, int q_b) {
  const int coarse_a = q_a == 0 ? 0 : (q_a == 4 ? 2 : 1);
  const int coarse_b = q_b == 0 ? 0 : (q_b == 4 ? 2 : 1);
  switch (coarse_a * 3 + coarse_b) {
    case 0: return 0;  // ([1^3],[1^3])
    case 1: return 1;  // ([1^3],[21])
    case 2: return 2;  // ([1^3],[123])
    case 3: return 3;  // ([21],[1^3])
    case 4: return q_a == q_b ? 4 : 5;  // parallel vs cross pair position
    case 5: return 6;  // ([21],[123])
    case 6: return 7;  // ([123],[1^3])
    case 7: return 8;  // ([123],[21])
    default: return 9; // ([123],[123])
  }
}

}  // namespace

int classify_triple(int o1, int o2, int o3, int d_b) {
  const int q_a = fine_pattern(o1 / d_b, o2 / d_b, o3 / d_b);
  const int q_b = fine_pattern(o1 % d_b, o2 % d_b, o3 % d_b);
  return reduced_class(q_a, q_b);
}

int classify_triple(const OutcomeTriple& t, int d_a, int d_b) {
  for (const auto& outcome : t.outcomes) {
    if (outcome[0] < 0 || outcome[0] >= d_a || outcome[1] < 0 ||
        outcome[1] >= d_b) {
      throw std::invalid_argument("classify_triple: outcome index out of range");
    }
  }
  const auto flat = [d_b](const std::array<int, 2>& o) {
    return states::flat_index(o[0], o[1], d_b);
  };
  return classify_triple(flat(t.outcomes[0]), flat(t.outcomes[1]),
                         flat(t.outcomes[2]), d_b);
}

namespace {

int sample_outcome(const Eigen::VectorXd& cdf, rng::SplitMix64& gen) {
  const double u = rng::uniform01(gen);
  const int n = static_cast<int>(cdf.size());
  for (int k = 0; k < n; ++k) {
    if (u < cdf[k]) return k;
  }
  return n - 1;
}

}  // namespace

Correlators estimate_setting(const states::DensityMatrix& rho,
                             const UnitarySetting& setting, int n_s,
                             rng::SplitMix64& gen) {
  if (n_s < 3) {
    throw std::invalid_argument(
        "estimate_setting: the triple estimator needs at least 3 shots");
  }
  if (n_s > kMaxShots) {
    throw std::invalid_argument("estimate_setting: shots capped at " +
                                std::to_string(kMaxShots));
  }
  const Eigen::VectorXd p = outcome_distribution(rho, setting);
  Eigen::VectorXd cdf(p.size());
  double run = 0.0;
  for (int k = 0; k < p.size(); ++k) {
    run += p[k];
    cdf[k] = run;
  }

  std::array<int, kMaxShots> shots{};
  for (int s = 0; s < n_s; ++s) shots[s] = sample_outcome(cdf, gen);

  Correlators counts = Correlators::Zero();
  long triples = 0;
  for (int a = 0; a < n_s; ++a)
    for (int b = a + 1; b < n_s; ++b)
      for (int c = b + 1; c < n_s; ++c) {
        counts[classify_triple(shots[a], shots[b], shots[c], rho.d_b)] += 1.0;
        ++triples;
      }
  return counts / static_cast<double>(triples);
}

Correlators estimate_setting(const states::DensityMatrix& rho,
                             const UnitarySetting& setting, int n_s,
                             std::uint64_t seed) {
  rng::SplitMix64 gen(seed);
  return estimate_setting(rho, setting, n_s, gen);
}

ProtocolResult run_protocol(const ProtocolConfig& cfg) {
  if (cfg.n_u < 1) throw std::invalid_argument("run_protocol: n_u must be >= 1");
  if (cfg.n_s < 3 || cfg.n_s > kMaxShots) {
    throw std::invalid_argument("run_protocol: n_s out of range");
  }

  ProtocolResult result;
  result.per_setting.resize(cfg.n_u);
  result.setting_seeds.resize(cfg.n_u);
  for (long s = 0; s < cfg.n_u; ++s) {
    result.setting_seeds[s] =
        rng::derive_seed(cfg.master_seed, static_cast<std::uint64_t>(s));
  }

  const bool parallel = cfg.policy == ExecutionPolicy::Parallel;
#ifdef _OPENMP
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (parallel)
#endif
  for (long s = 0; s < cfg.n_u; ++s) {
    rng::SplitMix64 gen(result.setting_seeds[s]);
    UnitarySetting setting;
    setting.u_a = haar::sample_haar_unitary(cfg.state.d_a, gen);
    setting.u_b = haar::sample_haar_unitary(cfg.state.d_b, gen);
    setting.setting_seed = result.setting_seeds[s];
    result.per_setting[s] = estimate_setting(cfg.state, setting, cfg.n_s, gen);
  }
  (void)parallel;

  Correlators acc = Correlators::Zero();
  for (long s = 0; s < cfg.n_u; ++s) acc += result.per_setting[s];
  result.global.y = acc / static_cast<double>(cfg.n_u);
  result.global.n_u = cfg.n_u;
  result.global.n_s = cfg.n_s;
  return result;
}

// ---------------------------------------------------------------------------
// Exact Haar average via the third-moment twirl.

namespace {

using Perm = std::array<int, 3>;

constexpr std::array<Perm, 6> kPerms = {
    Perm{0, 1, 2}, Perm{0, 2, 1}, Perm{1, 0, 2},
    Perm{1, 2, 0}, Perm{2, 0, 1}, Perm{2, 1, 0}};

Perm perm_inverse(const Perm& a) {
  Perm out{};
  for (int k = 0; k < 3; ++k) out[a[k]] = k;
  return out;
}

Perm perm_compose(const Perm& a, const Perm& b) {
  // (a o b)(k) = a(b(k))
  return Perm{a[b[0]], a[b[1]], a[b[2]]};
}

int cycle_count(const Perm& a) {
  bool seen[3] = {false, false, false};
  int cycles = 0;
  for (int start = 0; start < 3; ++start) {
    if (seen[start]) continue;
    ++cycles;
    int k = start;
    while (!seen[k]) {
      seen[k] = true;
      k = a[k];
    }
  }
  return cycles;
}

// Coefficients c[q][sigma] with E_U[ indicator of fine pattern q after
// rotation ] = sum_sigma c[q][sigma] Tr[W_sigma rho^{(x)3}]-type pairings;
// built from the Gram matrix G_{sigma,pi} = d^{#cycles(sigma^-1 pi)} whose
// pseudo-inverse stays valid when the W_sigma are linearly dependent (d=2).
Eigen::Matrix<double, 5, 6> twirl_coefficients(int d) {
  Eigen::Matrix<double, 6, 6> gram;
  for (int s = 0; s < 6; ++s)
    for (int t = 0; t < 6; ++t)
      gram(s, t) = std::pow(static_cast<double>(d),
                            cycle_count(perm_compose(perm_inverse(kPerms[s]),
                                                     kPerms[t])));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(gram);
  const auto& vals = es.eigenvalues();
  const double cut = 1e-12 * vals.cwiseAbs().maxCoeff();
  Eigen::Matrix<double, 6, 6> inv_vals = Eigen::Matrix<double, 6, 6>::Zero();
  for (int k = 0; k < 6; ++k) {
    if (std::abs(vals[k]) > cut) inv_vals(k, k) = 1.0 / vals[k];
  }
  const Eigen::Matrix<double, 6, 6> pinv =
      es.eigenvectors() * inv_vals * es.eigenvectors().transpose();

  Eigen::Matrix<double, 5, 6> coeffs;
  for (int q = 0; q < 5; ++q) {
    Eigen::Matrix<double, 6, 1> fixed = Eigen::Matrix<double, 6, 1>::Zero();
    for (int pi = 0; pi < 6; ++pi) {
      int count = 0;
      for (int t1 = 0; t1 < d; ++t1)
        for (int t2 = 0; t2 < d; ++t2)
          for (int t3 = 0; t3 < d; ++t3) {
            if (fine_pattern(t1, t2, t3) != q) continue;
            const int triple[3] = {t1, t2, t3};
            const Perm& p = kPerms[pi];
            if (triple[p[0]] == t1 && triple[p[1]] == t2 && triple[p[2]] == t3)
              ++count;
          }
      fixed[pi] = static_cast<double>(count);
    }
    coeffs.row(q) = (pinv * fixed).transpose();
  }
  return coeffs;
}

// F(sigma, tau) = sum over index vectors a, b of
// prod_k rho[(a_k, b_k), (a_sigma(k), b_tau(k))].
Complex permutation_moment(const states::DensityMatrix& rho, const Perm& sigma,
                           const Perm& tau) {
  const int d_a = rho.d_a, d_b = rho.d_b;
  Complex total(0.0, 0.0);
  int a[3], b[3];
  for (a[0] = 0; a[0] < d_a; ++a[0])
    for (a[1] = 0; a[1] < d_a; ++a[1])
      for (a[2] = 0; a[2] < d_a; ++a[2])
        for (b[0] = 0; b[0] < d_b; ++b[0])
          for (b[1] = 0; b[1] < d_b; ++b[1])
            for (b[2] = 0; b[2] < d_b; ++b[2]) {
              Complex prod(1.0, 0.0);
              for (int k = 0; k < 3; ++k) {
                prod *= rho.m(states::flat_index(a[k], b[k], d_b),
                              states::flat_index(a[sigma[k]], b[tau[k]], d_b));
              }
              total += prod;
            }
  return total;
}

}  // namespace

Correlators expected_correlators(const states::DensityMatrix& rho) {
  if (rho.d_a > kMaxTwirlDim || rho.d_b > kMaxTwirlDim) {
    throw std::invalid_argument("expected_correlators: local dimensions above " +
                                std::to_string(kMaxTwirlDim) +
                                " exceed the cost guard");
  }
  const Eigen::Matrix<double, 5, 6> ca = twirl_coefficients(rho.d_a);
  const Eigen::Matrix<double, 5, 6> cb = twirl_coefficients(rho.d_b);

  Eigen::Matrix<std::complex<double>, 6, 6> f;
  for (int s = 0; s < 6; ++s)
    for (int t = 0; t < 6; ++t)
      f(s, t) = permutation_moment(rho, kPerms[s], kPerms[t]);

  Correlators y = Correlators::Zero();
  for (int q_a = 0; q_a < 5; ++q_a) {
    for (int q_b = 0; q_b < 5; ++q_b) {
      Complex value(0.0, 0.0);
      for (int s = 0; s < 6; ++s)
        for (int t = 0; t < 6; ++t)
          value += ca(q_a, s) * cb(q_b, t) * f(s, t);
      y[reduced_class(q_a, q_b)] += value.real();
    }
  }
  return y;
}

}  // namespace redmoment::protocol
