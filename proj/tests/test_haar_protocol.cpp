#include "redmoment/haar.hpp"
#include "redmoment/protocol.hpp"
#include "redmoment/rng.hpp"
#include "redmoment/state.hpp"

#include "testkit.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace {

using redmoment::protocol::Correlators;
using redmoment::protocol::OutcomeTriple;
using redmoment::protocol::ProtocolConfig;
using redmoment::protocol::ProtocolResult;
using redmoment::protocol::UnitarySetting;
using redmoment::states::CMatrix;
using redmoment::states::DensityMatrix;

DensityMatrix family_state(const std::string& spec) {
  return redmoment::states::make_state(redmoment::states::parse_family(spec));
}

UnitarySetting identity_setting(int d_a, int d_b) {
  UnitarySetting s;
  s.u_a = CMatrix::Identity(d_a, d_a);
  s.u_b = CMatrix::Identity(d_b, d_b);
  s.setting_seed = 0;
  return s;
}

// Re-transcription of the coincidence-class contract, written from the
// coarse-pattern table rather than the library's switch.
int oracle_fine(int a, int b, int c) {
  if (a == b && b == c) return 0;
  if (a == b) return 1;
  if (b == c) return 2;
  if (c == a) return 3;
  return 4;
}

int oracle_class(const std::array<int, 2>& o1, const std::array<int, 2>& o2,
                 const std::array<int, 2>& o3) {
  const int qa = oracle_fine(o1[0], o2[0], o3[0]);
  const int qb = oracle_fine(o1[1], o2[1], o3[1]);
  const int ca = qa == 0 ? 0 : (qa == 4 ? 2 : 1);
  const int cb = qb == 0 ? 0 : (qb == 4 ? 2 : 1);
  if (ca == 1 && cb == 1) return qa == qb ? 4 : 5;
  static const int table[3][3] = {{0, 1, 2}, {3, -1, 6}, {7, 8, 9}};
  return table[ca][cb];
}

// Class sizes |C_mu| by brute-force enumeration with the oracle classifier.
Eigen::Matrix<double, 10, 1> counting_fractions(int d_a, int d_b) {
  Eigen::Matrix<double, 10, 1> frac = Eigen::Matrix<double, 10, 1>::Zero();
  const int dim = d_a * d_b;
  for (int o1 = 0; o1 < dim; ++o1)
    for (int o2 = 0; o2 < dim; ++o2)
      for (int o3 = 0; o3 < dim; ++o3) {
        const std::array<int, 2> a{o1 / d_b, o1 % d_b};
        const std::array<int, 2> b{o2 / d_b, o2 % d_b};
        const std::array<int, 2> c{o3 / d_b, o3 % d_b};
        frac[oracle_class(a, b, c)] += 1.0;
      }
  return frac / static_cast<double>(dim * dim * dim);
}

}  // namespace

TEST_SUITE("haar-protocol") {

TEST_CASE("sampled unitaries are unitary at every dimension") {
  for (int d = 1; d <= 8; ++d) {
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
      CAPTURE(d);
      const CMatrix u = redmoment::haar::sample_haar_unitary(d, seed);
      REQUIRE(u.rows() == d);
      const CMatrix gram = u.adjoint() * u;
      CHECK((gram - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
  const CMatrix scalar = redmoment::haar::sample_haar_unitary(1, 7);
  CHECK(std::abs(std::abs(scalar(0, 0)) - 1.0) <= 1e-12);
}

TEST_CASE("sampled unitaries carry the flat first-moment statistics") {
  // E |U_00|^2 = 1/d under the invariant measure.
  for (int d : {2, 3}) {
    const int n = 20000;
    redmoment::rng::SplitMix64 gen(0x5eedULL + d);
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const CMatrix u = redmoment::haar::sample_haar_unitary(d, gen);
      const double v = std::norm(u(0, 0));
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    const double se = std::sqrt(var / n);
    CAPTURE(d);
    CHECK(std::abs(mean - 1.0 / d) <= 5.0 * se);
  }
}

TEST_CASE("phase convention matters: distinct seeds decorrelate") {
  const CMatrix a = redmoment::haar::sample_haar_unitary(3, 5);
  const CMatrix b = redmoment::haar::sample_haar_unitary(3, 5);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const CMatrix c = redmoment::haar::sample_haar_unitary(3, 6);
  CHECK((a - c).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("outcome distribution: analytic cases") {
  const DensityMatrix uniform = family_state("mixed:da=2,db=3");
  const UnitarySetting setting = redmoment::protocol::make_setting(2, 3, 42);
  const Eigen::VectorXd p =
      redmoment::protocol::outcome_distribution(uniform, setting);
  REQUIRE(p.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(p[i] - 1.0 / 6.0) <= 1e-12);

  // |00><00| measured in the computational basis: a point mass.
  redmoment::states::FamilyParams bp;
  bp.family = redmoment::states::Family::BiasedTwoQubit;
  bp.x = 0.5;
  bp.p = 0.0;
  const DensityMatrix vac = redmoment::states::make_state(bp);
  const Eigen::VectorXd q =
      redmoment::protocol::outcome_distribution(vac, identity_setting(2, 2));
  CHECK(std::abs(q[0] - 1.0) <= 1e-14);
  CHECK(q.tail(3).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("outcome distribution matches the elementwise oracle") {
  for (int idx = 0; idx < 6; ++idx) {
    const DensityMatrix rho = redmoment::testkit::mixed_ginibre(
        2, 3, 1 + idx, 300 + static_cast<std::uint64_t>(idx));
    const UnitarySetting setting =
        redmoment::protocol::make_setting(2, 3, 1000 + idx);
    const Eigen::VectorXd got =
        redmoment::protocol::outcome_distribution(rho, setting);
    const CMatrix u = redmoment::testkit::kron(setting.u_a, setting.u_b);
    const CMatrix rotated = u.adjoint() * rho.m * u;
    double total = 0.0;
    for (int i = 0; i < 6; ++i) {
      CHECK(std::abs(got[i] - rotated(i, i).real()) <= 1e-12);
      total += got[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("outcome distribution rejects genuinely negative input") {
  DensityMatrix bogus;
  bogus.d_a = bogus.d_b = 2;
  bogus.m = CMatrix::Identity(4, 4) / 4.0;
  bogus.m(0, 0) = -0.05;
  bogus.m(1, 1) = 0.55;
  CHECK_THROWS_AS(redmoment::protocol::outcome_distribution(
                      bogus, identity_setting(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("coincidence patterns: all five cases and totality") {
  CHECK(redmoment::protocol::fine_pattern(5, 5, 5) == 0);
  CHECK(redmoment::protocol::fine_pattern(1, 1, 2) == 1);
  CHECK(redmoment::protocol::fine_pattern(2, 1, 1) == 2);
  CHECK(redmoment::protocol::fine_pattern(1, 2, 1) == 3);
  CHECK(redmoment::protocol::fine_pattern(0, 1, 2) == 4);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        CHECK(redmoment::protocol::fine_pattern(a, b, c) ==
              oracle_fine(a, b, c));
}

TEST_CASE("triple classification: contract examples") {
  using redmoment::protocol::classify_triple;
  CHECK(classify_triple(0, 0, 0, 2) == 0);
  // (0,0), (0,1), (1,0): A-pair equal at positions (1,2), B-pair at (3,1).
  CHECK(classify_triple(0, 1, 2, 2) == 5);
  // d = 3: (0,0), (1,1), (2,2) -- all distinct on both sides.
  CHECK(classify_triple(0, 4, 8, 3) == 9);

  OutcomeTriple t;
  t.outcomes = {{{0, 0}, {0, 1}, {1, 0}}};
  CHECK(classify_triple(t, 2, 2) == 5);
  t.outcomes = {{{0, 0}, {1, 1}, {2, 2}}};
  CHECK(classify_triple(t, 3, 3) == 9);

  t.outcomes = {{{0, 0}, {1, 2}, {0, 0}}};  // i_B = 2 on a qubit
  CHECK_THROWS_AS(classify_triple(t, 2, 2), std::invalid_argument);
}

TEST_CASE("triple classification agrees with the oracle everywhere") {
  for (const auto [d_a, d_b] : {std::pair{2, 2}, {2, 3}, {3, 3}}) {
    const int dim = d_a * d_b;
    for (int o1 = 0; o1 < dim; ++o1)
      for (int o2 = 0; o2 < dim; ++o2)
        for (int o3 = 0; o3 < dim; ++o3) {
          const std::array<int, 2> a{o1 / d_b, o1 % d_b};
          const std::array<int, 2> b{o2 / d_b, o2 % d_b};
          const std::array<int, 2> c{o3 / d_b, o3 % d_b};
          const int got =
              redmoment::protocol::classify_triple(o1, o2, o3, d_b);
          CHECK(got == oracle_class(a, b, c));
          CHECK(got >= 0);
          CHECK(got <= 9);
          OutcomeTriple t;
          t.outcomes = {{a, b, c}};
          CHECK(redmoment::protocol::classify_triple(t, d_a, d_b) == got);
        }
  }
}

TEST_CASE("per-setting estimator: exact shots and guard rails") {
  const DensityMatrix phi = family_state("mes:d=2");
  const UnitarySetting setting = redmoment::protocol::make_setting(2, 2, 5);

  // n_s = 3: a single triple, so the estimate is a one-hot vector.
  const Correlators y =
      redmoment::protocol::estimate_setting(phi, setting, 3, 77);
  int ones = 0;
  for (int i = 0; i < 10; ++i) {
    if (std::abs(y[i] - 1.0) <= 1e-15) ++ones;
    CHECK((std::abs(y[i]) <= 1e-15 || std::abs(y[i] - 1.0) <= 1e-15));
  }
  CHECK(ones == 1);

  // The vacuum measured in its own basis always lands in class 0.
  redmoment::states::FamilyParams bp;
  bp.family = redmoment::states::Family::BiasedTwoQubit;
  bp.x = 0.5;
  bp.p = 0.0;
  const DensityMatrix vac = redmoment::states::make_state(bp);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Correlators z = redmoment::protocol::estimate_setting(
        vac, identity_setting(2, 2), 3, seed);
    CHECK(std::abs(z[0] - 1.0) <= 1e-15);
  }

  CHECK_THROWS_AS(redmoment::protocol::estimate_setting(phi, setting, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      redmoment::protocol::estimate_setting(
          phi, setting, redmoment::protocol::kMaxShots + 1, 1),
      std::invalid_argument);
}

TEST_CASE("per-setting estimator is unbiased for a fixed setting") {
  const DensityMatrix rho = redmoment::testkit::haar_pure(2, 2, 17);
  const UnitarySetting setting = redmoment::protocol::make_setting(2, 2, 23);
  const Correlators exact = redmoment::testkit::enumerate_y(rho, setting);

  const int n = 10000;
  Correlators sum = Correlators::Zero();
  Correlators sum_sq = Correlators::Zero();
  for (int i = 0; i < n; ++i) {
    const Correlators y = redmoment::protocol::estimate_setting(
        rho, setting, 3, 5000 + static_cast<std::uint64_t>(i));
    sum += y;
    sum_sq += y.cwiseProduct(y);
  }
  const Correlators mean = sum / n;
  for (int mu = 0; mu < 10; ++mu) {
    const double var = sum_sq[mu] / n - mean[mu] * mean[mu];
    const double se = std::sqrt(std::max(var, 1e-12) / n);
    CAPTURE(mu);
    CHECK(std::abs(mean[mu] - exact[mu]) <= 5.0 * se + 1e-12);
  }
}

TEST_CASE("larger shot counts average all index-ordered triples") {
  // With n_s shots the estimate lives on a grid of multiples of 1/C(n_s,3);
  // the estimator stays on the simplex for every n_s.
  const DensityMatrix rho = family_state("iso:d=2,p=0.8");
  const UnitarySetting setting = redmoment::protocol::make_setting(2, 2, 3);
  for (int n_s : {3, 4, 5, 8}) {
    const double triples = n_s * (n_s - 1) * (n_s - 2) / 6.0;
    const Correlators y =
        redmoment::protocol::estimate_setting(rho, setting, n_s, 9);
    CHECK(std::abs(y.sum() - 1.0) <= 1e-12);
    for (int mu = 0; mu < 10; ++mu) {
      const double scaled = y[mu] * triples;
      CHECK(std::abs(scaled - std::round(scaled)) <= 1e-9);
    }
  }
}

TEST_CASE("protocol output sits exactly on the simplex") {
  ProtocolConfig cfg;
  cfg.state = family_state("iso:d=2,p=0.9");
  cfg.n_u = 200;
  cfg.master_seed = 31;
  const ProtocolResult res = redmoment::protocol::run_protocol(cfg);
  CHECK(std::abs(res.global.y.sum() - 1.0) <= 1e-12);
  REQUIRE(static_cast<long>(res.per_setting.size()) == cfg.n_u);
  for (const Correlators& y : res.per_setting)
    CHECK(std::abs(y.sum() - 1.0) <= 1e-12);
  CHECK(res.global.n_u == 200);
  CHECK(res.global.n_s == 3);
}

TEST_CASE("protocol runs are bit-identical across execution policies") {
  ProtocolConfig cfg;
  cfg.state = family_state("mes:d=2");
  cfg.n_u = 300;
  cfg.master_seed = 12345;

  cfg.policy = redmoment::protocol::ExecutionPolicy::Serial;
  const ProtocolResult serial = redmoment::protocol::run_protocol(cfg);

  cfg.policy = redmoment::protocol::ExecutionPolicy::Parallel;
  cfg.threads = 4;
  const ProtocolResult par4 = redmoment::protocol::run_protocol(cfg);
  cfg.threads = 2;
  const ProtocolResult par2 = redmoment::protocol::run_protocol(cfg);

  for (int mu = 0; mu < 10; ++mu) {
    CHECK(serial.global.y[mu] == par4.global.y[mu]);
    CHECK(serial.global.y[mu] == par2.global.y[mu]);
  }
  REQUIRE(serial.per_setting.size() == par4.per_setting.size());
  for (std::size_t i = 0; i < serial.per_setting.size(); ++i)
    for (int mu = 0; mu < 10; ++mu)
      CHECK(serial.per_setting[i][mu] == par4.per_setting[i][mu]);

  // Seed stream: derived deterministically from the master seed by counter.
  REQUIRE(serial.setting_seeds.size() == 300);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(serial.setting_seeds[i] ==
          redmoment::rng::derive_seed(12345, static_cast<std::uint64_t>(i)));

  cfg.master_seed = 54321;
  const ProtocolResult other = redmoment::protocol::run_protocol(cfg);
  CHECK((other.global.y - serial.global.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("uniform-state protocol mean matches counting fractions") {
  ProtocolConfig cfg;
  cfg.state = family_state("mixed:d=2");
  cfg.n_u = 4000;
  cfg.master_seed = 777;
  const ProtocolResult res = redmoment::protocol::run_protocol(cfg);

  const Eigen::Matrix<double, 10, 1> frac = counting_fractions(2, 2);
  // Empirical standard error per class from the per-setting spread.
  for (int mu = 0; mu < 10; ++mu) {
    double var = 0.0;
    for (const Correlators& y : res.per_setting) {
      const double dev = y[mu] - res.global.y[mu];
      var += dev * dev;
    }
    var /= (cfg.n_u - 1);
    const double se = std::sqrt(var / cfg.n_u);
    CAPTURE(mu);
    CHECK(std::abs(res.global.y[mu] - frac[mu]) <= 5.0 * se + 1e-9);
  }

  // For the uniform state the exact per-setting mean is setting-independent.
  const Correlators exact = redmoment::testkit::enumerate_y(
      cfg.state, redmoment::protocol::make_setting(2, 2, 5));
  CHECK((exact - frac).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("twirl expectation: simplex, vanishing classes, entangled values") {
  const DensityMatrix phi = family_state("mes:d=2");
  const Correlators y = redmoment::protocol::expected_correlators(phi);
  CHECK(std::abs(y.sum() - 1.0) <= 1e-12);
  const double want[10] = {0.125, 0.125, 0.0, 0.125, 0.375,
                           0.25,  0.0,   0.0, 0.0,   0.0};
  for (int mu = 0; mu < 10; ++mu) {
    CAPTURE(mu);
    CHECK(std::abs(y[mu] - want[mu]) <= 1e-12);
  }

  // Classes needing three distinct outcomes on a qubit side are unreachable.
  for (int idx = 0; idx < 4; ++idx) {
    const DensityMatrix r22 = redmoment::testkit::mixed_ginibre(
        2, 2, 2, 60 + static_cast<std::uint64_t>(idx));
    const Correlators y22 = redmoment::protocol::expected_correlators(r22);
    for (int mu : {2, 6, 7, 8, 9}) CHECK(std::abs(y22[mu]) <= 1e-12);
    CHECK(std::abs(y22.sum() - 1.0) <= 1e-12);

    const DensityMatrix r23 = redmoment::testkit::mixed_ginibre(
        2, 3, 2, 70 + static_cast<std::uint64_t>(idx));
    const Correlators y23 = redmoment::protocol::expected_correlators(r23);
    for (int mu : {7, 8, 9}) CHECK(std::abs(y23[mu]) <= 1e-12);
    CHECK(std::abs(y23.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("twirl expectation matches the Clifford 3-design average") {
  for (int idx = 0; idx < 3; ++idx) {
    const DensityMatrix rho = redmoment::testkit::StateGenerator{
        redmoment::testkit::GenKind::MixedGinibre, 2, 2, 88}(idx);
    const Correlators twirl = redmoment::protocol::expected_correlators(rho);
    const Correlators cliff = redmoment::testkit::clifford_average_y(rho);
    CHECK((twirl - cliff).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("twirl expectation matches the sampled average beyond qubits") {
  const DensityMatrix rho = redmoment::testkit::haar_pure(2, 3, 41);
  const Correlators twirl = redmoment::protocol::expected_correlators(rho);
  const int n = 400;
  Correlators sum = Correlators::Zero();
  Correlators sum_sq = Correlators::Zero();
  for (int i = 0; i < n; ++i) {
    const Correlators y = redmoment::testkit::enumerate_y(
        rho, redmoment::protocol::make_setting(2, 3, 9000 + i));
    sum += y;
    sum_sq += y.cwiseProduct(y);
  }
  const Correlators mean = sum / n;
  for (int mu = 0; mu < 10; ++mu) {
    const double var = sum_sq[mu] / n - mean[mu] * mean[mu];
    const double se = std::sqrt(std::max(var, 1e-14) / n);
    CAPTURE(mu);
    CHECK(std::abs(mean[mu] - twirl[mu]) <= 5.0 * se + 1e-10);
  }
}

TEST_CASE("twirl expectation enforces the dimension cap") {
  const DensityMatrix big = family_state("mixed:da=7,db=2");
  CHECK_THROWS_AS(redmoment::protocol::expected_correlators(big),
                  std::invalid_argument);
}

TEST_CASE("single-qubit Clifford set: size, unitarity, closure") {
  const auto& cl = redmoment::testkit::clifford24();
  REQUIRE(cl.size() == 24);
  for (const auto& u : cl) {
    const Eigen::Matrix2cd gram = u.adjoint() * u;
    CHECK((gram - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() <=
          1e-12);
  }
  // Spot-check closure: products land back in the set up to a global phase.
  redmoment::rng::SplitMix64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto& a = cl[gen() % 24];
    const auto& b = cl[gen() % 24];
    const Eigen::Matrix2cd prod = a * b;
    bool found = false;
    for (const auto& c : cl) {
      // Compare up to phase via the modulus of the Hilbert-Schmidt overlap.
      const double overlap = std::abs((c.adjoint() * prod).trace());
      if (std::abs(overlap - 2.0) <= 1e-9) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

}  // TEST_SUITE
