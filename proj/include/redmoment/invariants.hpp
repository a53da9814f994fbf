#pragma once

#include "redmoment/state.hpp"

#include <Eigen/Dense>

#include <string>

namespace redmoment::invariants {

// The nine unitarily-invariant moments entering the moment matrix, in the
// fixed order x1..x8, xS. Tr(rho^3) is carried alongside on the exact path
// only: it is not reachable by the measurement protocol.
struct InvariantVector {
  Eigen::Matrix<double, 9, 1> x = Eigen::Matrix<double, 9, 1>::Zero();
  double tr_rho3 = 0.0;
  bool has_tr_rho3 = false;

  double x1() const { return x[0]; }
  double x2() const { return x[1]; }
  double x3() const { return x[2]; }
  double x4() const { return x[3]; }
  double x5() const { return x[4]; }
  double x6() const { return x[5]; }
  double x7() const { return x[6]; }
  double x8() const { return x[7]; }
  double xS() const { return x[8]; }
};

// x1 = Tr rho_B^2, x2 = Tr rho_B^3, x3 = Tr rho_A^2,
// x4 = Tr[(rho_A (x) rho_B) rho], x5 = Tr rho^2, x6 = Tr[rho_B Tr_A(rho^2)],
// x7 = Tr rho_A^3, x8 = Tr[rho_A Tr_B(rho^2)],
// xS = (Tr rho^3 + Tr (rho^{T_A})^3) / 2.
InvariantVector compute_invariants(const states::DensityMatrix& rho);

// Closed forms for the isotropic family on d x d; analytic oracle for the
// dense path.
InvariantVector isotropic_invariants(int d, double p);

std::string csv_header();
std::string csv_row(const InvariantVector& inv);

}  // namespace redmoment::invariants
