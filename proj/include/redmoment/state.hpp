#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace redmoment::states {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

// Global index convention: basis state |i_A, i_B> sits at row i_A*d_B + i_B.
inline int flat_index(int i_a, int i_b, int d_b) { return i_a * d_b + i_b; }

constexpr double kHermitianTol = 1e-10;
constexpr double kTraceTol = 1e-10;
constexpr double kPsdTol = 1e-10;

enum class RejectReason {
  BadDimension,
  ShapeMismatch,
  NonHermitian,
  TraceNotOne,
  NotPositive,
  ParseError,
};

// Machine-readable token for each rejection, stable across releases.
const char* reject_code(RejectReason reason);

class StateError : public std::runtime_error {
 public:
  StateError(RejectReason reason, const std::string& message)
      : std::runtime_error(message), reason_(reason) {}
  RejectReason reason() const { return reason_; }

 private:
  RejectReason reason_;
};

struct DensityMatrix {
  int d_a = 0;
  int d_b = 0;
  CMatrix m;

  int dim() const { return d_a * d_b; }
};

struct LocalState {
  int dim = 0;
  CMatrix m;
};

// Validates Hermiticity, unit trace and (optionally) positivity. Families
// that are PSD by construction pass check_psd = false to skip the eigensolve.
DensityMatrix make_density(int d_a, int d_b, CMatrix m, bool check_psd = true);
LocalState make_local(CMatrix m);

enum class Subsystem { A, B };

enum class Family {
  MaxEntangled,
  Isotropic,
  BiasedTwoQubit,
  MaximallyMixed,
  ProductPure,
  Custom,
};

struct FamilyParams {
  Family family = Family::MaxEntangled;
  int d = 2;            // MaxEntangled / Isotropic (square families)
  int d_a = 2;          // MaximallyMixed / ProductPure
  int d_b = 2;
  double p = 0.0;       // Isotropic / BiasedTwoQubit mixing weight
  double x = 0.5;       // BiasedTwoQubit bias
  std::uint64_t seed = 0;  // ProductPure local factors
};

// Mini-language "name:key=val,..." with names mes, iso, biased, mixed,
// product; unknown names or keys reject with ParseError.
FamilyParams parse_family(const std::string& spec);
std::string family_to_string(const FamilyParams& params);

DensityMatrix make_state(const FamilyParams& params);

LocalState partial_trace(const DensityMatrix& rho, Subsystem over);

// Output is Hermitian and unit-trace but in general not PSD, so the PSD
// check is skipped on this path.
DensityMatrix partial_transpose(const DensityMatrix& rho);

DensityMatrix swap_subsystems(const DensityMatrix& rho);

// Ascending eigenvalues of a Hermitian matrix (input checked to 1e-8).
Eigen::VectorXd spectrum(const CMatrix& h);

}  // namespace redmoment::states
