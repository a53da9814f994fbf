#include "redmoment/invariants.hpp"

#include <cstdio>
#include <stdexcept>

namespace redmoment::invariants {

using states::CMatrix;
using states::Subsystem;

InvariantVector compute_invariants(const states::DensityMatrix& rho) {
  const CMatrix& r = rho.m;
  const CMatrix r_a = partial_trace(rho, Subsystem::B).m;
  const CMatrix r_b = partial_trace(rho, Subsystem::A).m;
  const CMatrix r2 = r * r;

  const states::DensityMatrix rho2_view{rho.d_a, rho.d_b, r2};
  const CMatrix tra_r2 = partial_trace(rho2_view, Subsystem::A).m;
  const CMatrix trb_r2 = partial_trace(rho2_view, Subsystem::B).m;

  CMatrix kron(rho.dim(), rho.dim());
  for (int i = 0; i < rho.d_a; ++i)
    for (int j = 0; j < rho.d_a; ++j)
      for (int k = 0; k < rho.d_b; ++k)
        for (int l = 0; l < rho.d_b; ++l)
          kron(states::flat_index(i, k, rho.d_b),
               states::flat_index(j, l, rho.d_b)) = r_a(i, j) * r_b(k, l);

  const CMatrix pt = partial_transpose(rho).m;

  InvariantVector out;
  out.x[0] = (r_b * r_b).trace().real();
  out.x[1] = (r_b * r_b * r_b).trace().real();
  out.x[2] = (r_a * r_a).trace().real();
  out.x[3] = (kron * r).trace().real();
  out.x[4] = r2.trace().real();
  out.x[5] = (r_b * tra_r2).trace().real();
  out.x[6] = (r_a * r_a * r_a).trace().real();
  out.x[7] = (r_a * trb_r2).trace().real();
  out.tr_rho3 = (r2 * r).trace().real();
  const double tr_pt3 = (pt * pt * pt).trace().real();
  out.x[8] = 0.5 * (out.tr_rho3 + tr_pt3);
  out.has_tr_rho3 = true;
  return out;
}

InvariantVector isotropic_invariants(int d, double p) {
  if (d < 2) throw std::invalid_argument("isotropic_invariants: d must be >= 2");
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("isotropic_invariants: p must lie in [0,1]");
  const double dd = static_cast<double>(d);
  const double d2 = dd * dd, d4 = d2 * d2;

  InvariantVector out;
  out.x[0] = out.x[2] = 1.0 / dd;
  out.x[1] = out.x[6] = 1.0 / d2;
  out.x[3] = 1.0 / d2;
  out.x[4] = p * p + (1.0 - p * p) / d2;
  out.x[5] = out.x[7] = out.x[4] / dd;
  out.x[8] = p * p * p * (d4 - 5.0 * d2 + 4.0) / (2.0 * d4) +
             3.0 * p * p * (d2 - 1.0) / d4 + 1.0 / d4;
  out.tr_rho3 = p * p * p * (1.0 - 3.0 / d2 + 2.0 / d4) +
                3.0 * p * p * (1.0 / d2 - 1.0 / d4) + 1.0 / d4;
  out.has_tr_rho3 = true;
  return out;
}

std::string csv_header() { return "x1,x2,x3,x4,x5,x6,x7,x8,xS,tr_rho3"; }

std::string csv_row(const InvariantVector& inv) {
  char buf[64];
  std::string out;
  for (int i = 0; i < 9; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", inv.x[i]);
    out += buf;
    out += ',';
  }
  if (inv.has_tr_rho3) {
    std::snprintf(buf, sizeof(buf), "%.17g", inv.tr_rho3);
    out += buf;
  } else {
    out += "nan";
  }
  return out;
}

}  // namespace redmoment::invariants
