#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace htbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

/// Engine for (seed, stream). Distinct streams give independent sequences, so
/// workers can share a base seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Uniform on the open interval (0, 1).
double uniform_open(Rng& rng);

double standard_normal(Rng& rng);

double standard_exponential(Rng& rng);

/// Fill `out` with i.i.d. N(0, 1) entries.
void fill_normal(Rng& rng, Eigen::Ref<Matrix> out);

/// 64-bit FNV-1a over a byte string; used for config hashes.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace htbench
