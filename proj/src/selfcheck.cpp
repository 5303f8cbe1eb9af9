#include "htbench/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "htbench/bounds.hpp"
#include "htbench/error.hpp"
#include "htbench/metrics.hpp"
#include "htbench/models.hpp"
#include "htbench/stable.hpp"

namespace htbench {

std::vector<Vector> probe_frequencies(std::size_t dim) {
  static const double radii[] = {0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
  std::vector<Vector> out;
  for (std::size_t k = 0; k < 10; ++k) {
    Vector dir(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      dir(static_cast<Eigen::Index>(i)) = std::cos(0.7 * static_cast<double>(k + 1) * static_cast<double>(i + 1) + 0.3);
    }
    if (dir.norm() == 0.0) dir(0) = 1.0;
    out.push_back(radii[k] * dir.normalized());
  }
  return out;
}

double cf_max_error(double alpha, std::size_t dim, std::size_t n, std::uint64_t seed) {
  IsotropicStableLaw law;
  law.alpha = alpha;
  law.dim = dim;
  const Matrix x = sample_isotropic_stable(law, n, seed);
  double worst = 0.0;
  for (const auto& u : probe_frequencies(dim)) {
    const double want = std::exp(-std::pow(u.norm(), alpha));
    worst = std::max(worst, std::abs(empirical_char_fn(x, u) - want));
  }
  return worst;
}

double fd_gradient_max_error(const MlpConfig& config, std::size_t checks, std::uint64_t seed, std::size_t batch) {
  MlpParams params = init_mlp(config, seed);
  Rng rng = make_rng(seed, 0xfd);
  Matrix x(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(config.in_dim));
  fill_normal(rng, x);
  std::vector<double> t(batch);
  for (auto& v : t) v = uniform_open(rng);
  Matrix g(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(config.out_dim));
  fill_normal(rng, g);

  auto objective = [&](const MlpParams& p) { return mlp_forward(p, x, t).cwiseProduct(g).sum(); };
  MlpCache cache;
  mlp_forward(params, x, t, &cache);
  const MlpGrads grads = mlp_backward(params, cache, g);

  double worst = 0.0;
  for (std::size_t c = 0; c < checks; ++c) {
    const auto layer = static_cast<std::size_t>(rng() % params.layers.size());
    auto& L = params.layers[layer];
    const bool use_bias = (rng() % 4) == 0;
    double* slot = nullptr;
    double analytic = 0.0;
    if (use_bias) {
      const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(L.bias.size()));
      slot = &L.bias(i);
      analytic = grads.layers[layer].bias(i);
    } else {
      const auto r = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(L.weight.rows()));
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(L.weight.cols()));
      slot = &L.weight(r, k);
      analytic = grads.layers[layer].weight(r, k);
    }
    const double orig = *slot;
    const double h = 1e-5 * std::max(1.0, std::fabs(orig));
    *slot = orig + h;
    const double up = objective(params);
    *slot = orig - h;
    const double down = objective(params);
    *slot = orig;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::fabs(fd), std::fabs(analytic), 1e-6});
    worst = std::max(worst, std::fabs(fd - analytic) / scale);
  }
  return worst;
}

double alpha2_schedule_gap(std::size_t steps) {
  const auto betas = default_betas(steps);
  const auto ddpm = DdpmSchedule::from_betas(betas);
  const auto dlpm = DlpmSchedule::from_betas(betas, 2.0);
  double gap = 0.0;
  for (std::size_t t = 0; t <= steps; ++t) {
    gap = std::max(gap, std::fabs(dlpm.a[t] - std::sqrt(ddpm.alpha_bar[t])));
    gap = std::max(gap, std::fabs(dlpm.b[t] - std::sqrt(1.0 - ddpm.alpha_bar[t])));
  }
  return gap;
}

double mmd_brute_force(const Matrix& x, const Matrix& y, double bandwidth) {
  auto k = [&](const auto& a, const auto& b) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
  };
  const auto m = x.rows();
  const auto n = y.rows();
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) kxx += k(x.row(i), x.row(j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) kyy += k(y.row(i), y.row(j));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kxy += k(x.row(i), y.row(j));
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return kxx / (dm * (dm - 1.0)) + kyy / (dn * (dn - 1.0)) - 2.0 * kxy / (dm * dn);
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> out;
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      out.push_back(body());
      out.back().name = name;
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };

  guarded("stable characteristic function", [] {
    double worst = 0.0;
    for (double a : {1.3, 1.7, 2.0})
      for (std::size_t d : {1u, 5u}) worst = std::max(worst, cf_max_error(a, d, 40000, 11));
    return CheckResult{"", worst < 0.02, fmt("max |CF error| = %.2e", worst)};
  });

  guarded("finite-difference gradients", [] {
    MlpConfig c;
    c.in_dim = 3;
    c.out_dim = 3;
    c.width = 32;
    c.depth = 4;
    c.t_embed_dim = 8;
    const double err = fd_gradient_max_error(c, 40, 5);
    return CheckResult{"", err < 1e-5, fmt("max relative error = %.2e", err)};
  });

  guarded("alpha = 2 schedule reduction", [] {
    const double gap = alpha2_schedule_gap(512);
    return CheckResult{"", gap < 1e-12, fmt("max gap = %.2e", gap)};
  });

  guarded("alpha = 2 sampler matches Gaussian", [] {
    IsotropicStableLaw law;
    law.alpha = 2.0;
    law.dim = 2;
    law.scale = 0.8;
    const Matrix s = sample_isotropic_stable(law, 1500, 21);
    Rng rng = make_rng(22, 0);
    Matrix g(1500, 2);
    fill_normal(rng, g);
    g *= std::sqrt(2.0) * 0.8;
    const double v = mmd_rbf(s, g).value;
    return CheckResult{"", std::fabs(v) < 5e-3, fmt("MMD^2 = %.2e", v)};
  });

  guarded("MMD U-statistic vs brute force", [] {
    Rng rng = make_rng(3, 0);
    double worst = 0.0;
    for (Eigen::Index m = 2; m <= 6; ++m) {
      for (Eigen::Index n = 2; n <= 6; ++n) {
        Matrix x(m, 3), y(n, 3);
        fill_normal(rng, x);
        fill_normal(rng, y);
        y.array() += 0.5;
        const auto r = mmd_rbf(x, y);
        worst = std::max(worst, std::fabs(r.value - mmd_brute_force(x, y, r.bandwidth)));
      }
    }
    return CheckResult{"", worst < 1e-12, fmt("max difference = %.2e", worst)};
  });

  guarded("TCE of a sample against itself", [] {
    const Matrix x = sample_isotropic_stable({1.5, 4, 1.0, {}}, 3000, 8);
    double worst = 0.0;
    for (double v : tce_all(x, x, TceLevels{})) worst = std::max(worst, v);
    return CheckResult{"", worst == 0.0, fmt("max TCE = %g", worst)};
  });

  guarded("optimized DDPM rate identity", [] {
    Rng rng = make_rng(4, 0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double beta = 2.0 * uniform_open(rng);
      const double gamma = 1.0 + 5.0 * uniform_open(rng);
      const double d = 1.0 + std::floor(50.0 * uniform_open(rng));
      const auto e = ddpm_exponents(beta, gamma, d);
      worst = std::max(worst, std::fabs(ddpm_optimized_rate(beta, gamma, d) - e.c * e.a / (e.a + e.b)));
    }
    return CheckResult{"", worst < 1e-12, fmt("max difference = %.2e", worst)};
  });

  return out;
}

}  // namespace htbench
