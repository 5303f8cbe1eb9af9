#include "htbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "htbench/error.hpp"

namespace htbench {

namespace {

// Sum of k(a_i, b_j) over all pairs, skipping i == j when `same` is set.
double kernel_sum(const Matrix& a, const Matrix& b, double inv_two_h2, bool same) {
  const Matrix at = a.transpose();
  const Matrix bt = b.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < at.cols(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < bt.cols(); ++j) {
      if (same && i == j) continue;
      row += std::exp(-(at.col(i) - bt.col(j)).squaredNorm() * inv_two_h2);
    }
    total += row;
  }
  return total;
}

// Total order on matrices so that mmd_rbf can evaluate both argument orders
// with the same floating-point summation.
bool ordered_before(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

Matrix thin_rows(const Matrix& m, std::size_t keep) {
  const auto n = static_cast<std::size_t>(m.rows());
  if (n <= keep) return m;
  Matrix out(static_cast<Eigen::Index>(keep), m.cols());
  for (std::size_t i = 0; i < keep; ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(i * n / keep));
  return out;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

double median_bandwidth(const Matrix& x, const Matrix& y, std::size_t cap) {
  require(x.cols() == y.cols(), "median_bandwidth: column counts differ");
  const std::size_t total = static_cast<std::size_t>(x.rows() + y.rows());
  Matrix pooled(static_cast<Eigen::Index>(total), x.cols());
  pooled << x, y;
  pooled = thin_rows(pooled, cap);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  require(!d.empty(), "median_bandwidth: need at least two pooled rows");
  return median_of(std::move(d));
}

MmdResult mmd_rbf(const Matrix& x, const Matrix& y, std::optional<double> bandwidth) {
  require(x.rows() >= 2 && y.rows() >= 2, "mmd_rbf: need at least 2 rows per sample");
  require(x.cols() == y.cols(), "mmd_rbf: column counts differ");
  if (ordered_before(y, x)) return mmd_rbf(y, x, bandwidth);
  MmdResult r;
  if (bandwidth) {
    require(*bandwidth > 0.0, "mmd_rbf: bandwidth must be positive");
    r.bandwidth = *bandwidth;
  } else {
    r.bandwidth = median_bandwidth(x, y);
    if (r.bandwidth == 0.0) {
      r.degenerate = true;
      return r;
    }
  }
  const double inv = 1.0 / (2.0 * r.bandwidth * r.bandwidth);
  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(y.rows());
  const double kxx = kernel_sum(x, x, inv, true) / (m * (m - 1.0));
  const double kyy = kernel_sum(y, y, inv, true) / (n * (n - 1.0));
  const double kxy = kernel_sum(x, y, inv, false) / (m * n);
  r.value = kxx + kyy - 2.0 * kxy;
  return r;
}

void TceLevels::validate() const {
  require(!levels.empty(), "TceLevels: need at least one level");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    require(levels[i] > 0.0 && levels[i] < 1.0, "TceLevels: levels must lie in (0, 1)");
    require(i == 0 || levels[i] > levels[i - 1], "TceLevels: levels must be strictly increasing");
  }
}

Vector coordinatewise_median(const Matrix& x) {
  require(x.rows() > 0, "coordinatewise_median: empty matrix");
  Vector med(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
    med[j] = median_of(std::move(col));
  }
  return med;
}

std::vector<double> centered_norms(const Matrix& x, const Vector& center) {
  require(x.cols() == center.size(), "centered_norms: dimension mismatch");
  std::vector<double> r(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    r[static_cast<std::size_t>(i)] = (x.row(i) - center.transpose()).norm();
  return r;
}

double lower_quantile(std::vector<double> values, double q) {
  require(!values.empty(), "lower_quantile: empty input");
  require(q >= 0.0 && q <= 1.0, "lower_quantile: q must lie in [0, 1]");
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
  return values[idx];
}

std::vector<double> tail_thresholds(const Matrix& reference, const TceLevels& levels) {
  require(reference.rows() > 0, "tail_thresholds: empty reference");
  levels.validate();
  const auto r = centered_norms(reference, coordinatewise_median(reference));
  std::vector<double> out;
  for (double q : levels.levels) out.push_back(lower_quantile(r, q));
  return out;
}

double exceedance(const std::vector<double>& values, double threshold) {
  require(!values.empty(), "exceedance: empty input");
  const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v > threshold; });
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

std::vector<double> tce_all(const Matrix& generated, const Matrix& reference, const TceLevels& levels) {
  require(generated.rows() > 0 && reference.rows() > 0, "tce: empty input");
  require(generated.cols() == reference.cols(), "tce: column counts differ");
  levels.validate();
  const Vector center = coordinatewise_median(reference);
  const auto r_ref = centered_norms(reference, center);
  const auto r_gen = centered_norms(generated, center);
  std::vector<double> out;
  for (double q : levels.levels) {
    const double t = lower_quantile(r_ref, q);
    double p_ref = exceedance(r_ref, t);
    if (p_ref == 0.0) p_ref = 1.0 - q;
    out.push_back(std::abs(exceedance(r_gen, t) / p_ref - 1.0));
  }
  return out;
}

double tce(const Matrix& generated, const Matrix& reference, double level) {
  TceLevels one{{level}};
  return tce_all(generated, reference, one).front();
}

}  // namespace htbench
