#pragma once

#include "redmoment/moment_matrix.hpp"
#include "redmoment/protocol.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>

namespace redmoment::inversion {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10x9 = Eigen::Matrix<double, 10, 9>;
using Mat9x10 = Eigen::Matrix<double, 9, 10>;
using Mat10x10 = Eigen::Matrix<double, 10, 10>;

inline constexpr const char* kBuilderVersion = "redmoment-maps-2";

struct InversionMaps {
  int d_a = 0, d_b = 0;
  Mat10x9 w = Mat10x9::Zero();   // linear part of x -> E[y]
  Vec10 w0 = Vec10::Zero();      // constant part of the same affine map
  Mat9x10 l = Mat9x10::Zero();   // x_hat = l * y_hat (see note below)
  Mat10x9 a = Mat10x9::Zero();   // svec(Mbar) = a*x + b
  Vec10 b = Vec10::Zero();
  Mat10x10 b_d = Mat10x10::Zero();  // a * l
  double op_norm = 0.0;
  int rank = 0;  // numerical rank of w
  std::string builder_version = kBuilderVersion;
  double oracle_residual = 0.0;
};
// Note: estimator vectors sum to exactly 1, so the affine reconstruction
// offset is folded into `l` as a rank-one update along the all-ones row;
// x_hat = l * y_hat is then exact on every vector the protocol can produce,
// and the reconstruction stays a single matrix product.

// svec packs the upper triangle row-major with off-diagonals scaled by
// sqrt(2), making ||svec(X)||_2 = ||X||_F.
Vec10 svec(const Eigen::Matrix4d& x);
Eigen::Matrix4d unsvec(const Vec10& v);

std::pair<Mat10x9, Vec10> build_a_b(int d_b);

// Affine regression of the exact Haar-averaged correlators against the exact
// invariants over a deterministic roster of random states. The residual
// doubles as the certificate that the forward map really is affine.
std::pair<Mat10x9, Vec10> build_w(int d_a, int d_b,
                                  double* residual_out = nullptr);

// Cubic moments of a qubit marginal are fixed by quadratic ones through the
// characteristic polynomial; these rows (C, c with C x = c) carry those
// identities for whichever subsystem has dimension 2.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> marginal_constraints(int d_a,
                                                                 int d_b);

// Pseudo-inverse of w restricted to the attainable invariant subspace, with
// constraint completion filling the unidentifiable directions. Errors out if
// the constraints cannot close the gap.
std::pair<Mat9x10, int> build_ld(const Mat10x9& w, const Vec10& w0, int d_a,
                                 int d_b);

std::pair<Mat10x10, double> build_bd(const Mat10x9& a, const Mat9x10& l);

InversionMaps build_maps(int d_a, int d_b);

// In-process memo plus optional on-disk JSON cache. cache_dir overrides the
// REDMOMENT_CACHE_DIR environment variable; with neither set, maps are built
// in memory only.
const InversionMaps& load_or_build(
    int d_a, int d_b, const std::optional<std::string>& cache_dir = std::nullopt);

std::string cache_file_path(const std::string& dir, int d_a, int d_b);
void save_maps(const InversionMaps& maps, const std::string& path);
std::optional<InversionMaps> try_load_maps(const std::string& path, int d_a,
                                           int d_b);

moments::WitnessValue estimate_witness(const protocol::Correlators& y_hat,
                                       const InversionMaps& maps);

}  // namespace redmoment::inversion
