#include "htbench/stable.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "htbench/error.hpp"

namespace htbench {

namespace {

constexpr double kPi = std::numbers::pi;

// Standard S(alpha, skew, 1, 0) draw, alpha in (0, 2), alpha != 1.
double cms_standard(double alpha, double skew, Rng& rng) {
  const double v = kPi * (uniform_open(rng) - 0.5);
  const double w = standard_exponential(rng);
  if (skew == 0.0) {
    return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
  }
  const double zeta = skew * std::tan(kPi * alpha / 2.0);
  const double shift = std::atan(zeta) / alpha;
  const double norm = std::pow(1.0 + zeta * zeta, 1.0 / (2.0 * alpha));
  return norm * std::sin(alpha * (v + shift)) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - alpha * (v + shift)) / w, (1.0 - alpha) / alpha);
}

// alpha == 1 branch, S(1, skew, 1, 0).
double cms_cauchy_like(double skew, Rng& rng) {
  const double v = kPi * (uniform_open(rng) - 0.5);
  const double w = standard_exponential(rng);
  const double half_pi = kPi / 2.0;
  return (2.0 / kPi) * ((half_pi + skew * v) * std::tan(v) -
                        skew * std::log(half_pi * w * std::cos(v) / (half_pi + skew * v)));
}

// Positive (alpha/2)-stable mixing variable with Laplace transform exp(-s^(alpha/2)).
double positive_stable_mixer(double alpha, Rng& rng) {
  const double half = alpha / 2.0;
  const double scale = std::pow(std::cos(kPi * alpha / 4.0), 2.0 / alpha);
  return scale * cms_standard(half, 1.0, rng);
}

}  // namespace

void StableLaw::validate() const {
  require(alpha > 0.0 && alpha <= 2.0, "stable law: alpha must lie in (0, 2]");
  require(std::abs(skew) <= 1.0, "stable law: skew must lie in [-1, 1]");
  require(scale > 0.0 && std::isfinite(scale), "stable law: scale must be positive");
  require(std::isfinite(loc), "stable law: loc must be finite");
}

void IsotropicStableLaw::validate() const {
  require(alpha > 0.0 && alpha <= 2.0, "isotropic stable law: alpha must lie in (0, 2]");
  require(dim > 0, "isotropic stable law: dim must be positive");
  require(scale > 0.0 && std::isfinite(scale), "isotropic stable law: scale must be positive");
  require(loc.size() == 0 || static_cast<std::size_t>(loc.size()) == dim,
          "isotropic stable law: loc length must equal dim");
}

double draw_stable(const StableLaw& law, Rng& rng) {
  if (law.alpha == 2.0) return law.loc + law.scale * std::numbers::sqrt2 * standard_normal(rng);
  if (law.alpha == 1.0) {
    const double x = cms_cauchy_like(law.skew, rng);
    return law.scale * x + (2.0 / kPi) * law.skew * law.scale * std::log(law.scale) + law.loc;
  }
  return law.scale * cms_standard(law.alpha, law.skew, rng) + law.loc;
}

std::vector<double> sample_univariate_stable(const StableLaw& law, std::size_t n,
                                             std::uint64_t seed) {
  law.validate();
  require(n > 0, "sample_univariate_stable: n must be at least 1");
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = draw_stable(law, rng);
  return out;
}

void fill_isotropic_stable(const IsotropicStableLaw& law, Rng& rng, Eigen::Ref<Matrix> out) {
  law.validate();
  require(static_cast<std::size_t>(out.cols()) == law.dim,
          "fill_isotropic_stable: output width must equal dim");
  const bool gaussian = law.alpha == 2.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mix = gaussian ? 1.0 : positive_stable_mixer(law.alpha, rng);
    const double radius = law.scale * std::sqrt(2.0 * mix);
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = radius * standard_normal(rng);
  }
  if (law.loc.size() > 0) out.rowwise() += law.loc.transpose();
}

Matrix sample_isotropic_stable(const IsotropicStableLaw& law, std::size_t n, std::uint64_t seed) {
  law.validate();
  require(n > 0, "sample_isotropic_stable: n must be at least 1");
  Rng rng = make_rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(law.dim));
  fill_isotropic_stable(law, rng, out);
  return out;
}

std::complex<double> stable_char_fn(const IsotropicStableLaw& law, const Vector& u) {
  law.validate();
  require(static_cast<std::size_t>(u.size()) == law.dim, "stable_char_fn: u length must equal dim");
  require(u.allFinite(), "stable_char_fn: u must be finite");
  const double phase = law.loc.size() > 0 ? law.loc.dot(u) : 0.0;
  const double modulus = std::exp(-std::pow(law.scale, law.alpha) * std::pow(u.norm(), law.alpha));
  return std::polar(modulus, phase);
}

std::complex<double> empirical_char_fn(const Matrix& samples, const Vector& u) {
  require(samples.rows() > 0, "empirical_char_fn: empty sample set");
  require(samples.cols() == u.size(), "empirical_char_fn: u length must equal sample width");
  const Vector proj = samples * u;
  double re = 0.0;
  double im = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    re += std::cos(proj[i]);
    im += std::sin(proj[i]);
  }
  const double n = static_cast<double>(proj.size());
  return {re / n, im / n};
}

double hill_tail_index(std::span<const double> samples, std::size_t k) {
  const std::size_t n = samples.size();
  require(k >= 2 && k < n, "hill_tail_index: k must satisfy 2 <= k < n");
  std::vector<double> mags(n);
  std::transform(samples.begin(), samples.end(), mags.begin(), [](double x) { return std::abs(x); });
  // Top k+1 magnitudes in descending order.
  std::partial_sort(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k + 1), mags.end(),
                    std::greater<>());
  const double pivot = mags[k];
  require(pivot > 0.0, "hill_tail_index: order statistics must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(mags[i] / pivot);
  require(sum > 0.0, "hill_tail_index: degenerate upper tail (all top order statistics equal)");
  return static_cast<double>(k) / sum;
}

std::size_t default_hill_k(std::size_t n) {
  require(n >= 3, "default_hill_k: need at least 3 samples");
  const auto k = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 0.6) * (1.0 + 1e-12)));
  return std::clamp<std::size_t>(k, 2, n - 1);
}

}  // namespace htbench
