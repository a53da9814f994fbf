#include "redmoment/haar.hpp"

#include <cmath>
#include <stdexcept>

namespace redmoment::haar {

Eigen::MatrixXcd sample_haar_unitary(int d, rng::SplitMix64& gen) {
  if (d < 1) throw std::invalid_argument("haar: dimension must be >= 1");
  Eigen::MatrixXcd z(d, d);
  const double scale = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const auto [re, im] = rng::gaussian_pair(gen);
      z(i, j) = std::complex<double>(re * scale, im * scale);
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::VectorXcd r_diag = qr.matrixQR().diagonal();
  for (int j = 0; j < d; ++j) {
    const std::complex<double> rj = r_diag(j);
    q.col(j) *= rj / std::abs(rj);
  }
  return q;
}

Eigen::MatrixXcd sample_haar_unitary(int d, std::uint64_t seed) {
  rng::SplitMix64 gen(seed);
  return sample_haar_unitary(d, gen);
}

}  // namespace redmoment::haar
