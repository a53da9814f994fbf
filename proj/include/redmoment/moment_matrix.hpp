#pragma once

#include "redmoment/invariants.hpp"
#include "redmoment/state.hpp"

#include <Eigen/Dense>

#include <optional>

namespace redmoment::moments {

enum class Kind { Raw, PartialTransposed, Symmetrized, Homogeneous };

struct MomentMatrix {
  Eigen::MatrixXd m;  // symmetric, 4x4 (3x3 for Homogeneous)
  Kind kind = Kind::Symmetrized;
  int d_b = 0;
};

enum class Verdict { EntanglementCertified, Inconclusive };

struct WitnessValue {
  double e4 = 0.0;
  std::optional<double> e4_tilde;  // filled when inversion maps are supplied
  Verdict verdict = Verdict::Inconclusive;
};

// Decision tolerance separating numerical noise from a genuine negative
// eigenvalue on the exact path.
constexpr double kDecisionTol = 1e-12;

// Entry layout (d_B = local dimension of subsystem B):
//   row 0:   d_B-1,        (d_B-1)*x3,  1-x1,   x3-x5
//   diag:    (d_B-1)*x7,   x1-x2,       x8-xS
//   offdiag: x3-x4 (1,2),  x7-x8 (1,3), x4-x6 (2,3)
MomentMatrix build_mbar(const invariants::InvariantVector& x, int d_b);

// Same layout with entry (3,3) = x8 - Tr rho^3; exact path only.
MomentMatrix build_m_raw(const invariants::InvariantVector& x, int d_b);

MomentMatrix homogeneous_block(const MomentMatrix& m);

double min_eigenvalue(const Eigen::MatrixXd& sym);

// op_norm, when supplied from the inversion maps, fills e4_tilde = e4/op_norm.
WitnessValue witness(const states::DensityMatrix& rho,
                     std::optional<double> op_norm = std::nullopt,
                     double decision_tol = kDecisionTol);

// Closed form for lambda_min at the maximally entangled state on d x d.
double mes_lambda_min(int d);

// Isotropic-family detection thresholds.
double isotropic_threshold_3rd(int d);
double purity_threshold(int d);
double ppt_threshold(int d);

enum class ScanVariant { Affine4, Homogeneous3 };

// Smallest p in [0,1] where lambda_min of the chosen block turns negative;
// bisection to ~1e-9 (60 iterations). Empty when no sign change exists.
std::optional<double> threshold_scan(const states::FamilyParams& family,
                                     ScanVariant variant,
                                     double decision_tol = kDecisionTol);

}  // namespace redmoment::moments
