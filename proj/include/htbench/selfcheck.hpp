#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "htbench/nn.hpp"
#include "htbench/rng.hpp"

namespace htbench {

/// Ten fixed frequency vectors in R^dim with norms from 0.1 to 3.
std::vector<Vector> probe_frequencies(std::size_t dim);

/// Largest |empirical CF - exp(-||u||^alpha)| over the probe frequencies for
/// n unit-scale isotropic draws.
double cf_max_error(double alpha, std::size_t dim, std::size_t n, std::uint64_t seed);

/// Central finite differences against mlp_backward for `checks` randomly
/// chosen parameters. Returns the largest relative error.
double fd_gradient_max_error(const MlpConfig& config, std::size_t checks, std::uint64_t seed,
                             std::size_t batch = 4);

/// Largest |a_t - sqrt(alpha_bar_t)| and |b_t - sqrt(1 - alpha_bar_t)| between
/// the alpha = 2 stable chain and the Gaussian chain on the default schedule.
double alpha2_schedule_gap(std::size_t steps);

/// Direct double loop over all pairs for the unbiased MMD^2.
double mmd_brute_force(const Matrix& x, const Matrix& y, double bandwidth);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant battery behind the `selfcheck` command.
std::vector<CheckResult> run_selfcheck();

}  // namespace htbench
