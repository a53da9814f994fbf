#include "redmoment/inversion.hpp"

#include "redmoment/hashing.hpp"
#include "redmoment/haar.hpp"
#include "redmoment/invariants.hpp"
#include "redmoment/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace redmoment::inversion {

namespace {

// Upper-triangle index pairs in svec order.
constexpr int kSvecRow[10] = {0, 0, 0, 0, 1, 1, 1, 2, 2, 3};
constexpr int kSvecCol[10] = {0, 1, 2, 3, 1, 2, 3, 2, 3, 3};
const double kSqrt2 = std::sqrt(2.0);

}  // namespace

Vec10 svec(const Eigen::Matrix4d& x) {
  Vec10 v;
  for (int k = 0; k < 10; ++k) {
    const int i = kSvecRow[k], j = kSvecCol[k];
    v[k] = (i == j) ? x(i, j) : kSqrt2 * x(i, j);
  }
  return v;
}

Eigen::Matrix4d unsvec(const Vec10& v) {
  Eigen::Matrix4d x;
  for (int k = 0; k < 10; ++k) {
    const int i = kSvecRow[k], j = kSvecCol[k];
    const double e = (i == j) ? v[k] : v[k] / kSqrt2;
    x(i, j) = e;
    x(j, i) = e;
  }
  return x;
}

std::pair<Mat10x9, Vec10> build_a_b(int d_b) {
  // svec(Mbar) as an affine function of x = (x1..x8, xS); the constant part
  // carries the two entries of the moment matrix that do not involve x.
  const double c = static_cast<double>(d_b) - 1.0;
  Mat10x9 a = Mat10x9::Zero();
  Vec10 b = Vec10::Zero();
  // k = 0: (0,0) = d_b - 1
  b[0] = c;
  // k = 1: (0,1) = c*x3
  a(1, 2) = kSqrt2 * c;
  // k = 2: (0,2) = 1 - x1
  a(2, 0) = -kSqrt2;
  b[2] = kSqrt2;
  // k = 3: (0,3) = x3 - x5
  a(3, 2) = kSqrt2;
  a(3, 4) = -kSqrt2;
  // k = 4: (1,1) = c*x7
  a(4, 6) = c;
  // k = 5: (1,2) = x3 - x4
  a(5, 2) = kSqrt2;
  a(5, 3) = -kSqrt2;
  // k = 6: (1,3) = x7 - x8
  a(6, 6) = kSqrt2;
  a(6, 7) = -kSqrt2;
  // k = 7: (2,2) = x1 - x2
  a(7, 0) = 1.0;
  a(7, 1) = -1.0;
  // k = 8: (2,3) = x4 - x6
  a(8, 3) = kSqrt2;
  a(8, 5) = -kSqrt2;
  // k = 9: (3,3) = x8 - xS
  a(9, 7) = 1.0;
  a(9, 8) = -1.0;
  return {a, b};
}

namespace {

constexpr std::uint64_t kTrainingSeed = 0x52454d4f4d454e54ull;
constexpr int kTrainingStates = 80;

states::CMatrix ginibre(int rows, int cols, rng::SplitMix64& gen) {
  states::CMatrix g(rows, cols);
  const double s = std::sqrt(0.5);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      const auto z = rng::gaussian_pair(gen);
      g(i, j) = states::Complex(z.a * s, z.b * s);
    }
  }
  return g;
}

states::CMatrix random_mixed(int dim, int rank, rng::SplitMix64& gen) {
  const states::CMatrix g = ginibre(dim, rank, gen);
  states::CMatrix m = g * g.adjoint();
  return m / m.trace().real();
}

Eigen::VectorXcd random_pure_vec(int dim, rng::SplitMix64& gen) {
  Eigen::VectorXcd v = ginibre(dim, 1, gen);
  return v / v.norm();
}

// Mixes of product states, mixed full-rank states of every rank, and pure
// states: together they span the attainable invariant set well enough that
// the regression sees every identifiable direction.
states::DensityMatrix training_state(int d_a, int d_b, int index) {
  const std::uint64_t seed = rng::derive_seed(
      kTrainingSeed ^ (static_cast<std::uint64_t>(d_a) << 32 | d_b),
      static_cast<std::uint64_t>(index));
  rng::SplitMix64 gen(seed);
  const int dim = d_a * d_b;
  states::CMatrix m;
  switch (index % 5) {
    case 0: {
      const Eigen::VectorXcd v = random_pure_vec(dim, gen);
      m = v * v.adjoint();
      break;
    }
    case 1:
      m = random_mixed(dim, 1 + index % dim, gen);
      break;
    case 2: {
      // Convex mix of three product states with Dirichlet weights.
      m = states::CMatrix::Zero(dim, dim);
      double wsum = 0.0;
      std::array<double, 3> w{};
      for (double& wk : w) {
        wk = -std::log(1.0 - rng::uniform01(gen));
        wsum += wk;
      }
      for (double wk : w) {
        const states::CMatrix ra = random_mixed(d_a, d_a, gen);
        const states::CMatrix rb = random_mixed(d_b, d_b, gen);
        states::CMatrix prod(dim, dim);
        for (int i = 0; i < d_a; ++i)
          for (int j = 0; j < d_a; ++j)
            prod.block(i * d_b, j * d_b, d_b, d_b) = ra(i, j) * rb;
        m += (wk / wsum) * prod;
      }
      break;
    }
    case 3: {
      const Eigen::VectorXcd va = random_pure_vec(d_a, gen);
      const Eigen::VectorXcd vb = random_pure_vec(d_b, gen);
      Eigen::VectorXcd v(dim);
      for (int i = 0; i < d_a; ++i)
        for (int j = 0; j < d_b; ++j)
          v[states::flat_index(i, j, d_b)] = va[i] * vb[j];
      m = v * v.adjoint();
      break;
    }
    default:
      m = random_mixed(dim, dim, gen);
      break;
  }
  return states::make_density(d_a, d_b, m, /*check_psd=*/false);
}

}  // namespace

std::pair<Mat10x9, Vec10> build_w(int d_a, int d_b, double* residual_out) {
  const int n = kTrainingStates;
  Eigen::MatrixXd xa(n, 10);  // invariants plus a constant column
  Eigen::MatrixXd y(n, 10);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int k = 0; k < n; ++k) {
    const states::DensityMatrix rho = training_state(d_a, d_b, k);
    const invariants::InvariantVector inv = invariants::compute_invariants(rho);
    xa.block<1, 9>(k, 0) = inv.x.transpose();
    xa(k, 9) = 1.0;
    y.row(k) = protocol::expected_correlators(rho).transpose();
  }

  Eigen::MatrixXd coef = xa.completeOrthogonalDecomposition().solve(y);

  // The correlator vector sums to one for every state, so the fitted map must
  // carry the simplex hyperplane identically, not only on the span of the
  // training invariants: column sums of the linear part must vanish and the
  // offsets must sum to one. The minimum-norm solve does not see directions
  // outside that span, so spread each row's sum defect evenly over the
  // classes that are reachable at this dimension pair (classes needing three
  // distinct outcomes on a qubit side stay identically zero). On the span the
  // correction is at residual scale, so the fit itself is unchanged.
  std::vector<int> live;
  for (int mu = 0; mu < 10; ++mu)
    if (y.col(mu).cwiseAbs().maxCoeff() > 0.0) live.push_back(mu);
  Eigen::VectorXd defect = coef.rowwise().sum() / static_cast<double>(live.size());
  defect(9) -= 1.0 / static_cast<double>(live.size());
  for (int mu : live) coef.col(mu) -= defect;

  const double residual = (xa * coef - y).cwiseAbs().maxCoeff();
  if (residual_out != nullptr) *residual_out = residual;
  if (residual > 1e-9) {
    throw std::runtime_error(
        "inversion map construction failed: correlator/invariant regression "
        "residual " +
        std::to_string(residual) + " exceeds 1e-9 at " + std::to_string(d_a) +
        "x" + std::to_string(d_b));
  }
  Mat10x9 w = coef.topRows(9).transpose();
  Vec10 w0 = coef.row(9).transpose();
  return {w, w0};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> marginal_constraints(int d_a,
                                                                 int d_b) {
  // The antisymmetrizer over three copies of a qubit is zero, so the signed
  // sum of three-copy permutation moments vanishes whenever one subsystem is
  // a qubit. Grouping the signed sum by the permutation acting on the other
  // subsystem yields three identities per qubit side:
  //   x7 = (3 x3 - 1) / 2,   x8 = (x5 + 2 x4 - x1) / 2,   xS = (3 x6 - x2) / 2
  // for a qubit A, and the A<->B mirror images for a qubit B. Indices into x
  // follow the x1..x8, xS order.
  std::vector<Eigen::Matrix<double, 1, 9>> rows;
  std::vector<double> rhs;
  auto add = [&](std::initializer_list<std::pair<int, double>> terms,
                 double c) {
    Eigen::Matrix<double, 1, 9> r = Eigen::Matrix<double, 1, 9>::Zero();
    for (const auto& [idx, val] : terms) r[idx] = val;
    rows.push_back(r);
    rhs.push_back(c);
  };
  if (d_a == 2) {
    add({{6, 1.0}, {2, -1.5}}, -0.5);                          // x7 from x3
    add({{7, 1.0}, {3, -1.0}, {4, -0.5}, {0, 0.5}}, 0.0);      // x8
    add({{8, 1.0}, {5, -1.5}, {1, 0.5}}, 0.0);                 // xS
  }
  if (d_b == 2) {
    add({{1, 1.0}, {0, -1.5}}, -0.5);                          // x2 from x1
    add({{5, 1.0}, {3, -1.0}, {4, -0.5}, {2, 0.5}}, 0.0);      // x6
    add({{8, 1.0}, {7, -1.5}, {6, 0.5}}, 0.0);                 // xS
  }
  Eigen::MatrixXd c(static_cast<int>(rows.size()), 9);
  Eigen::VectorXd cv(static_cast<int>(rows.size()));
  for (int i = 0; i < c.rows(); ++i) {
    c.row(i) = rows[static_cast<std::size_t>(i)];
    cv[i] = rhs[static_cast<std::size_t>(i)];
  }
  return {c, cv};
}

std::pair<Mat9x10, int> build_ld(const Mat10x9& w, const Vec10& w0, int d_a,
                                 int d_b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = 1e-10 * sv[0];
  int rank = 0;
  while (rank < sv.size() && sv[rank] > cut) ++rank;

  const Eigen::MatrixXd wp = svd.matrixV().leftCols(rank) *
                             sv.head(rank).cwiseInverse().asDiagonal() *
                             svd.matrixU().leftCols(rank).transpose();

  Eigen::MatrixXd lh;
  Eigen::VectorXd n0 = Eigen::VectorXd::Zero(9);
  if (rank < 9) {
    const Eigen::MatrixXd nullb = svd.matrixV().rightCols(9 - rank);
    const auto [c, cv] = marginal_constraints(d_a, d_b);
    if (c.rows() == 0) {
      throw std::runtime_error(
          "inversion map construction failed: forward map rank " +
          std::to_string(rank) +
          " < 9 and no marginal constraints apply at " + std::to_string(d_a) +
          "x" + std::to_string(d_b));
    }
    const Eigen::MatrixXd cn = c * nullb;
    const auto cod = cn.completeOrthogonalDecomposition();
    if (cod.rank() < 9 - rank) {
      throw std::runtime_error(
          "inversion map construction failed: constraints close only " +
          std::to_string(cod.rank()) + " of " + std::to_string(9 - rank) +
          " unidentifiable directions at " + std::to_string(d_a) + "x" +
          std::to_string(d_b));
    }
    const Eigen::MatrixXd cnp = cod.pseudoInverse();
    lh = (Eigen::MatrixXd::Identity(9, 9) - nullb * cnp * c) * wp;
    n0 = nullb * cnp * cv;
  } else {
    lh = wp;
  }

  // Fold the affine offset into the matrix along the all-ones direction:
  // estimator vectors satisfy sum(y) = 1 exactly, so (l0 * ones^T) y = l0.
  const Eigen::VectorXd l0 = n0 - lh * w0;
  Mat9x10 l = lh + l0 * Eigen::RowVectorXd::Ones(10);
  return {l, rank};
}

std::pair<Mat10x10, double> build_bd(const Mat10x9& a, const Mat9x10& l) {
  Mat10x10 b_d = a * l;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b_d);
  return {b_d, svd.singularValues()[0]};
}

InversionMaps build_maps(int d_a, int d_b) {
  if (d_a < 2 || d_b < 2) {
    throw std::invalid_argument("inversion maps need local dimensions >= 2");
  }
  if (d_a > protocol::kMaxTwirlDim || d_b > protocol::kMaxTwirlDim) {
    throw std::invalid_argument(
        "inversion maps limited to local dimensions <= " +
        std::to_string(protocol::kMaxTwirlDim));
  }
  InversionMaps maps;
  maps.d_a = d_a;
  maps.d_b = d_b;
  std::tie(maps.a, maps.b) = build_a_b(d_b);
  std::tie(maps.w, maps.w0) = build_w(d_a, d_b, &maps.oracle_residual);
  std::tie(maps.l, maps.rank) = build_ld(maps.w, maps.w0, d_a, d_b);
  std::tie(maps.b_d, maps.op_norm) = build_bd(maps.a, maps.l);
  maps.builder_version = kBuilderVersion;

  // Held-out self-check: forward consistency, reconstruction round trip and
  // the moment-matrix identity on fresh states.
  for (int k = 0; k < 8; ++k) {
    const states::DensityMatrix rho =
        training_state(d_a, d_b, kTrainingStates + 7 * k + 3);
    const invariants::InvariantVector inv = invariants::compute_invariants(rho);
    const protocol::Correlators y = protocol::expected_correlators(rho);
    const double fwd = (maps.w * inv.x + maps.w0 - y).cwiseAbs().maxCoeff();
    const double round = (maps.l * y - inv.x).cwiseAbs().maxCoeff();
    const Vec10 mv = maps.a * inv.x + maps.b;
    const double mm =
        (mv - svec(moments::build_mbar(inv, d_b).m)).cwiseAbs().maxCoeff();
    if (fwd > 1e-8 || round > 1e-8 || mm > 1e-8) {
      throw std::runtime_error(
          "inversion map construction failed self-check at " +
          std::to_string(d_a) + "x" + std::to_string(d_b) +
          ": forward " + std::to_string(fwd) + ", round-trip " +
          std::to_string(round) + ", moment " + std::to_string(mm));
    }
  }
  return maps;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw std::runtime_error("matrix row count mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw std::runtime_error("matrix column count mismatch");
    }
    for (int jj = 0; jj < cols; ++jj)
      m(i, jj) = row[static_cast<std::size_t>(jj)].get<double>();
  }
  return m;
}

// Canonical digest over every numeric field; guards against truncated or
// hand-edited cache files.
std::uint64_t maps_digest(const InversionMaps& maps) {
  std::ostringstream os;
  os.precision(17);
  os << maps.d_a << '|' << maps.d_b << '|' << maps.builder_version << '|'
     << maps.rank << '|' << maps.op_norm << '|' << maps.oracle_residual;
  const auto dump = [&os](const Eigen::MatrixXd& m) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) os << '|' << m(i, j);
  };
  dump(maps.w);
  dump(maps.w0);
  dump(maps.l);
  dump(maps.a);
  dump(maps.b);
  dump(maps.b_d);
  return hashing::fnv1a64(os.str());
}

}  // namespace

std::string cache_file_path(const std::string& dir, int d_a, int d_b) {
  return (std::filesystem::path(dir) /
          ("redmoment_maps_v1_" + std::to_string(d_a) + "_" +
           std::to_string(d_b) + ".json"))
      .string();
}

void save_maps(const InversionMaps& maps, const std::string& path) {
  json j;
  j["d_a"] = maps.d_a;
  j["d_b"] = maps.d_b;
  j["w"] = matrix_to_json(maps.w);
  j["w0"] = matrix_to_json(maps.w0);
  j["l"] = matrix_to_json(maps.l);
  j["a"] = matrix_to_json(maps.a);
  j["b"] = matrix_to_json(maps.b);
  j["b_d"] = matrix_to_json(maps.b_d);
  j["op_norm"] = maps.op_norm;
  j["rank"] = maps.rank;
  j["builder_version"] = maps.builder_version;
  j["oracle_residual"] = maps.oracle_residual;
  j["content_hash"] = maps_digest(maps);

  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write map cache: " + tmp);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, target);
}

std::optional<InversionMaps> try_load_maps(const std::string& path, int d_a,
                                           int d_b) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    json j;
    in >> j;
    InversionMaps maps;
    maps.d_a = j.at("d_a").get<int>();
    maps.d_b = j.at("d_b").get<int>();
    maps.builder_version = j.at("builder_version").get<std::string>();
    if (maps.d_a != d_a || maps.d_b != d_b ||
        maps.builder_version != kBuilderVersion) {
      return std::nullopt;
    }
    maps.w = matrix_from_json(j.at("w"), 10, 9);
    maps.w0 = matrix_from_json(j.at("w0"), 10, 1);
    maps.l = matrix_from_json(j.at("l"), 9, 10);
    maps.a = matrix_from_json(j.at("a"), 10, 9);
    maps.b = matrix_from_json(j.at("b"), 10, 1);
    maps.b_d = matrix_from_json(j.at("b_d"), 10, 10);
    maps.op_norm = j.at("op_norm").get<double>();
    maps.rank = j.at("rank").get<int>();
    maps.oracle_residual = j.at("oracle_residual").get<double>();
    if (j.at("content_hash").get<std::uint64_t>() != maps_digest(maps)) {
      return std::nullopt;  // stale or corrupted; rebuild
    }
    return maps;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

const InversionMaps& load_or_build(int d_a, int d_b,
                                   const std::optional<std::string>& cache_dir) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<InversionMaps>> memo;

  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(d_a, d_b);
  if (auto it = memo.find(key); it != memo.end()) return *it->second;

  std::string dir;
  if (cache_dir.has_value()) {
    dir = *cache_dir;
  } else if (const char* env = std::getenv("REDMOMENT_CACHE_DIR")) {
    dir = env;
  }

  std::unique_ptr<InversionMaps> maps;
  if (!dir.empty()) {
    if (auto loaded = try_load_maps(cache_file_path(dir, d_a, d_b), d_a, d_b)) {
      maps = std::make_unique<InversionMaps>(std::move(*loaded));
    }
  }
  if (!maps) {
    maps = std::make_unique<InversionMaps>(build_maps(d_a, d_b));
    if (!dir.empty()) {
      try {
        save_maps(*maps, cache_file_path(dir, d_a, d_b));
      } catch (const std::exception&) {
        // A read-only cache directory degrades to in-memory operation.
      }
    }
  }
  auto [it, inserted] = memo.emplace(key, std::move(maps));
  return *it->second;
}

moments::WitnessValue estimate_witness(const protocol::Correlators& y_hat,
                                       const InversionMaps& maps) {
  const Vec10 m_hat = maps.b_d * y_hat + maps.b;
  const double e4 = moments::min_eigenvalue(unsvec(m_hat));
  moments::WitnessValue value;
  value.e4 = e4;
  value.e4_tilde = e4 / maps.op_norm;
  value.verdict = (e4 < -moments::kDecisionTol)
                      ? moments::Verdict::EntanglementCertified
                      : moments::Verdict::Inconclusive;
  return value;
}

}  // namespace redmoment::inversion
