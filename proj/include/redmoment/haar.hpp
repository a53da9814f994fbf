#pragma once

#include "redmoment/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace redmoment::haar {

// Haar-distributed unitary: QR of a standard complex Ginibre matrix with the
// R-diagonal phase correction (plain QR alone is not Haar -- the R sign
// convention biases the distribution).
Eigen::MatrixXcd sample_haar_unitary(int d, rng::SplitMix64& gen);
Eigen::MatrixXcd sample_haar_unitary(int d, std::uint64_t seed);

}  // namespace redmoment::haar
