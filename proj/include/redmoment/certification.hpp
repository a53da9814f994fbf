#pragma once

#include "redmoment/inversion.hpp"
#include "redmoment/protocol.hpp"

namespace redmoment::certification {

// Measurement budget sized so that a Chebyshev tail bound on the estimator
// covariance guarantees P(|e4_tilde_hat - e4_tilde| >= epsilon) <= delta.
// At n_s = 3 the covariance-trace bound is 5/n_u = 15/n_tot, giving
// n_tot >= 15 / (delta * epsilon^2).
struct Plan {
  long n_tot = 0;
  long n_u = 0;
  int n_s = 3;
  double epsilon = 0.0;
  double delta = 0.0;
};

Plan plan(double epsilon, double delta);

// Trace of the covariance-of-the-mean bound at arbitrary n_s:
// (10/4) * (1/C(n_s,3) + 1) / n_u.
double covariance_trace_bound(long n_u, int n_s);

struct CovarianceReport {
  double trace = 0.0;  // empirical covariance trace of the global estimator
  double bound = 0.0;
  double ratio = 0.0;
  long n_u = 0;
  int n_s = 0;
};

CovarianceReport covariance_report(const protocol::ProtocolResult& result);

struct Certificate {
  double e4_hat = 0.0;        // lambda_min of the reconstructed moment matrix
  double e4_tilde_hat = 0.0;  // normalized by the operator norm of b_d
  double epsilon = 0.0;
  double delta_requested = 0.0;
  double delta_achieved = 0.0;  // tail probability the executed budget buys
  long n_tot = 0;
  long n_u = 0;
  int n_s = 0;
  bool certified = false;
  double margin = 0.0;  // -e4_tilde_hat - epsilon; certified iff > 0
};

// Throws std::invalid_argument when the executed budget cannot reach the
// requested delta at this epsilon; the message names the required n_u.
Certificate certify(const protocol::ProtocolResult& result,
                    const inversion::InversionMaps& maps, double epsilon,
                    double delta);

}  // namespace redmoment::certification
