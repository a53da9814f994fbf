#pragma once

#include "redmoment/haar.hpp"
#include "redmoment/rng.hpp"
#include "redmoment/state.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace redmoment::protocol {

using Correlators = Eigen::Matrix<double, 10, 1>;

struct UnitarySetting {
  Eigen::MatrixXcd u_a, u_b;
  std::uint64_t setting_seed = 0;
};

UnitarySetting make_setting(int d_a, int d_b, std::uint64_t setting_seed);

struct OutcomeTriple {
  // Three measurement outcomes, each a pair (i_A, i_B).
  std::array<std::array<int, 2>, 3> outcomes{};
};

struct CorrelatorVector {
  Correlators y = Correlators::Zero();
  long n_u = 0;
  int n_s = 0;
};

enum class ExecutionPolicy { Serial, Parallel };

struct ProtocolConfig {
  states::DensityMatrix state;
  long n_u = 1;
  int n_s = 3;
  std::uint64_t master_seed = 0;
  ExecutionPolicy policy = ExecutionPolicy::Parallel;
  int threads = 0;  // 0 = runtime default
};

struct ProtocolResult {
  CorrelatorVector global;
  std::vector<Correlators> per_setting;
  std::vector<std::uint64_t> setting_seeds;
};

// p(i,j|U) = <ij| (U_A (x) U_B)^dagger rho (U_A (x) U_B) |ij>, flattened by
// the global index convention. Rounding negatives above -1e-12 are clipped
// and the table renormalized; anything more negative is an input error.
Eigen::VectorXd outcome_distribution(const states::DensityMatrix& rho,
                                     const UnitarySetting& setting);

// Coincidence pattern of one index triple: 0 = all equal, 1/2/3 = exactly one
// equal pair at positions (1,2)/(2,3)/(3,1), 4 = all distinct.
int fine_pattern(int i1, int i2, int i3);

// Reduced class 0..9 of an outcome triple, flattened outcomes o = i_A*d_b+i_B.
// The two one-pair patterns split by whether the equal pair sits at the same
// positions on both subsystems (parallel, class 4) or not (cross, class 5).
int classify_triple(int o1, int o2, int o3, int d_b);
int classify_triple(const OutcomeTriple& t, int d_a, int d_b);

constexpr int kMaxShots = 64;  // triples are enumerated exactly

// Unbiased per-setting estimator: draws n_s outcomes and averages the class
// indicator over all C(n_s,3) index-ordered triples. Requires n_s >= 3.
Correlators estimate_setting(const states::DensityMatrix& rho,
                             const UnitarySetting& setting, int n_s,
                             rng::SplitMix64& gen);
Correlators estimate_setting(const states::DensityMatrix& rho,
                             const UnitarySetting& setting, int n_s,
                             std::uint64_t seed);

// Independently seeded settings (seed stream derived from master_seed by
// counter), averaged in fixed index order so results are bit-identical for
// any thread count and either execution policy.
ProtocolResult run_protocol(const ProtocolConfig& cfg);

constexpr int kMaxTwirlDim = 6;

// Exact E_U[y] via the third-moment twirl on each subsystem (Gram-matrix
// pseudo-inverse construction, valid at every dimension including d = 2
// where the permutation operators are linearly dependent).
Correlators expected_correlators(const states::DensityMatrix& rho);

}  // namespace redmoment::protocol
