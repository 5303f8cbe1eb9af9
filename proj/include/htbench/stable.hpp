#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "htbench/rng.hpp"

namespace htbench {

/// Univariate stable law S(alpha, skew, scale, loc), characteristic function
/// exp(i loc u - scale^alpha |u|^alpha (1 - i skew sign(u) tan(pi alpha / 2)))
/// for alpha != 1. At alpha = 2 this is N(loc, 2 scale^2).
struct StableLaw {
  double alpha = 2.0;
  double skew = 0.0;
  double scale = 1.0;
  double loc = 0.0;

  void validate() const;
};

/// Rotationally invariant law on R^dim with characteristic function
/// exp(i loc.u - scale^alpha ||u||^alpha). An empty `loc` means the origin.
struct IsotropicStableLaw {
  double alpha = 2.0;
  std::size_t dim = 1;
  double scale = 1.0;
  Vector loc;

  void validate() const;
};

/// One Chambers-Mallows-Stuck draw.
double draw_stable(const StableLaw& law, Rng& rng);

std::vector<double> sample_univariate_stable(const StableLaw& law, std::size_t n,
                                             std::uint64_t seed);

/// Fill each row of `out` with an isotropic draw. `out.cols()` must equal law.dim.
void fill_isotropic_stable(const IsotropicStableLaw& law, Rng& rng, Eigen::Ref<Matrix> out);

/// n x dim matrix of i.i.d. isotropic stable rows, built as sqrt(2A) * scale * Z
/// with A positive (alpha/2)-stable and Z standard normal.
Matrix sample_isotropic_stable(const IsotropicStableLaw& law, std::size_t n, std::uint64_t seed);

std::complex<double> stable_char_fn(const IsotropicStableLaw& law, const Vector& u);

/// Mean of exp(i u.x) over the rows of `samples`.
std::complex<double> empirical_char_fn(const Matrix& samples, const Vector& u);

/// Hill estimate k / sum_{i<k} log(X_(n-i) / X_(n-k)) on |samples|.
double hill_tail_index(std::span<const double> samples, std::size_t k);

/// floor(n^0.6), clamped into the admissible range [2, n-1].
std::size_t default_hill_k(std::size_t n);

}  // namespace htbench
