#include "redmoment/moment_matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace redmoment::moments {

namespace {

Eigen::MatrixXd assemble(const invariants::InvariantVector& inv, int d_b,
                         double entry33) {
  if (d_b < 2) throw std::invalid_argument("moment matrix requires d_B >= 2");
  const double x1 = inv.x1(), x2 = inv.x2(), x3 = inv.x3(), x4 = inv.x4(),
               x5 = inv.x5(), x6 = inv.x6(), x7 = inv.x7(), x8 = inv.x8();
  const double c = static_cast<double>(d_b) - 1.0;
  Eigen::MatrixXd m(4, 4);
  m << c, c * x3, 1.0 - x1, x3 - x5,
      c * x3, c * x7, x3 - x4, x7 - x8,
      1.0 - x1, x3 - x4, x1 - x2, x4 - x6,
      x3 - x5, x7 - x8, x4 - x6, entry33;
  return m;
}

}  // namespace

MomentMatrix build_mbar(const invariants::InvariantVector& x, int d_b) {
  return MomentMatrix{assemble(x, d_b, x.x8() - x.xS()), Kind::Symmetrized,
                      d_b};
}

MomentMatrix build_m_raw(const invariants::InvariantVector& x, int d_b) {
  if (!x.has_tr_rho3) {
    throw std::invalid_argument(
        "raw moment matrix needs Tr rho^3, which only the exact path carries");
  }
  return MomentMatrix{assemble(x, d_b, x.x8() - x.tr_rho3), Kind::Raw, d_b};
}

MomentMatrix homogeneous_block(const MomentMatrix& m) {
  if (m.m.rows() != 4) {
    throw std::invalid_argument("homogeneous block expects a 4x4 input");
  }
  return MomentMatrix{m.m.bottomRightCorner(3, 3), Kind::Homogeneous, m.d_b};
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

WitnessValue witness(const states::DensityMatrix& rho,
                     std::optional<double> op_norm, double decision_tol) {
  const auto inv = invariants::compute_invariants(rho);
  const MomentMatrix mbar = build_mbar(inv, rho.d_b);
  WitnessValue out;
  out.e4 = min_eigenvalue(mbar.m);
  if (op_norm) out.e4_tilde = out.e4 / *op_norm;
  out.verdict = out.e4 < -decision_tol ? Verdict::EntanglementCertified
                                       : Verdict::Inconclusive;
  return out;
}

double mes_lambda_min(int d) {
  if (d < 2) throw std::invalid_argument("mes_lambda_min: d must be >= 2");
  const double dd = static_cast<double>(d);
  const double s =
      4.0 * dd * dd * dd * dd + 4.0 * dd * dd * dd + 29.0 * dd * dd + 6.0 * dd + 41.0;
  return (dd - 1.0) * (2.0 * dd * dd - dd + 5.0 - std::sqrt(s)) /
         (4.0 * dd * dd);
}

double isotropic_threshold_3rd(int d) {
  if (d < 2) throw std::invalid_argument("isotropic_threshold_3rd: d must be >= 2");
  const double dd = static_cast<double>(d);
  return (4.0 - dd * dd + dd * std::sqrt(dd * dd + 8.0)) / (4.0 * (dd + 1.0));
}

double purity_threshold(int d) {
  if (d < 2) throw std::invalid_argument("purity_threshold: d must be >= 2");
  return 1.0 / std::sqrt(static_cast<double>(d) + 1.0);
}

double ppt_threshold(int d) {
  if (d < 2) throw std::invalid_argument("ppt_threshold: d must be >= 2");
  return 1.0 / (static_cast<double>(d) + 1.0);
}

namespace {

double scan_lambda_min(const states::FamilyParams& family, double p,
                       ScanVariant variant) {
  states::FamilyParams at = family;
  at.p = p;
  const states::DensityMatrix rho = states::make_state(at);
  const auto inv = invariants::compute_invariants(rho);
  const MomentMatrix mbar = build_mbar(inv, rho.d_b);
  if (variant == ScanVariant::Affine4) return min_eigenvalue(mbar.m);
  return min_eigenvalue(homogeneous_block(mbar).m);
}

}  // namespace

std::optional<double> threshold_scan(const states::FamilyParams& family,
                                     ScanVariant variant, double decision_tol) {
  if (family.family != states::Family::Isotropic &&
      family.family != states::Family::BiasedTwoQubit) {
    throw std::invalid_argument(
        "threshold_scan requires a family with a free mixing parameter p");
  }
  const auto negative = [&](double p) {
    return scan_lambda_min(family, p, variant) < -decision_tol;
  };
  double lo = 0.0, hi = 1.0;
  if (negative(lo) || !negative(hi)) return std::nullopt;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (negative(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace redmoment::moments
