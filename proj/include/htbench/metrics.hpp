#pragma once

#include <optional>
#include <vector>

#include "htbench/rng.hpp"

namespace htbench {

struct MmdResult {
  double value = 0.0;      // unbiased MMD^2, may be slightly negative
  double bandwidth = 0.0;
  bool degenerate = false;  // median distance was zero; value forced to 0
};

/// Median pairwise Euclidean distance of the pooled rows of X and Y. Pools
/// larger than `cap` rows are thinned by even striding.
double median_bandwidth(const Matrix& x, const Matrix& y, std::size_t cap = 2000);

/// Unbiased U-statistic estimate of squared MMD with kernel
/// exp(-||x - y||^2 / (2 h^2)); h defaults to the median heuristic.
MmdResult mmd_rbf(const Matrix& x, const Matrix& y, std::optional<double> bandwidth = std::nullopt);

/// Prescribed exceedance levels; defaults to 90%, 95% and 99%.
struct TceLevels {
  std::vector<double> levels{0.90, 0.95, 0.99};

  void validate() const;
};

/// Coordinatewise median of the rows (midpoint for even counts).
Vector coordinatewise_median(const Matrix& x);

/// Tail statistic r(x) = ||x - center||.
std::vector<double> centered_norms(const Matrix& x, const Vector& center);

/// Lower order-statistic quantile: sorted[floor(q (n - 1))].
double lower_quantile(std::vector<double> values, double q);

/// Thresholds t_q on the centered norms of the reference, one per level.
std::vector<double> tail_thresholds(const Matrix& reference, const TceLevels& levels);

/// Fraction of values strictly above `threshold`.
double exceedance(const std::vector<double>& values, double threshold);

/// Tail-coverage error |p_gen / p_ref - 1| where both are the fractions of
/// centered norms strictly above the reference threshold t_q. The reference
/// median is the centre for both samples. When no reference point exceeds t_q,
/// p_ref falls back to the nominal 1 - q.
double tce(const Matrix& generated, const Matrix& reference, double level);

/// TCE at every level, sharing one centre and one set of norms.
std::vector<double> tce_all(const Matrix& generated, const Matrix& reference, const TceLevels& levels);

}  // namespace htbench
