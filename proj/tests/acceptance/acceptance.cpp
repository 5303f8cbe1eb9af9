// Acceptance battery: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "htbench/bench.hpp"
#include "htbench/bounds.hpp"
#include "htbench/data.hpp"
#include "htbench/metrics.hpp"
#include "htbench/models.hpp"
#include "htbench/selfcheck.hpp"
#include "htbench/stable.hpp"

using namespace htbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ------------------------------------------------------------------ 1
Outcome stable_fidelity() {
  double worst = 0.0;
  std::uint64_t seed = 100;
  for (double alpha : {1.3, 1.7, 1.9, 2.0}) {
    for (std::size_t dim : {1u, 30u}) worst = std::max(worst, cf_max_error(alpha, dim, 100000, seed++));
  }
  return {worst < 0.01, "max |ecf - cf| = " + fmt("%.4g", worst) + " over 8 laws x 10 frequencies (< 0.01)"};
}

// ------------------------------------------------------------------ 2
Outcome gradient_exactness() {
  MlpConfig c;
  c.in_dim = 30;
  c.out_dim = 30;
  c.depth = 5;
  c.width = 256;
  c.t_embed_dim = 128;
  const double err = fd_gradient_max_error(c, 20, 7);
  return {err < 1e-4, "max relative error " + fmt("%.3g", err) + " over 20 checks (< 1e-4)"};
}

// ------------------------------------------------------------------ 3
Outcome alpha2_reduction() {
  const double gap = alpha2_schedule_gap(512);
  return {gap < 1e-12, "max |(a_t, b_t) - (sqrt(abar), sqrt(1 - abar))| = " + fmt("%.3g", gap) + " at T = 512"};
}

// ------------------------------------------------------------------ 4
Outcome snr_slope() {
  std::vector<double> ts, ys;
  for (std::size_t T = 64; T <= 512; T += 16) {
    ts.push_back(static_cast<double>(T));
    ys.push_back(std::log(DlpmSchedule::make_default(T, 1.7).rho_terminal()));
  }
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (ys[i] - my);
    sxx += (ts[i] - mt) * (ts[i] - mt);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  return {r2 > 0.99 && sxy < 0.0,
          "R^2 = " + fmt("%.6f", r2) + ", slope " + fmt("%.4g", sxy / sxx) + " per step over T in [64, 512]"};
}

// ------------------------------------------------------------------ 5
Outcome metric_oracles() {
  Rng rng = make_rng(5);
  double worst = 0.0;
  for (Eigen::Index nx = 2; nx <= 6; ++nx) {
    for (Eigen::Index ny = 2; ny <= 6; ++ny) {
      for (int rep = 0; rep < 4; ++rep) {
        Matrix x(nx, 3), y(ny, 3);
        fill_normal(rng, x);
        fill_normal(rng, y);
        y *= 1.0 + rep;
        const double h = median_bandwidth(x, y);
        worst = std::max(worst, std::fabs(mmd_rbf(x, y, h).value - mmd_brute_force(x, y, h)));
      }
    }
  }
  const Matrix ref = sample_isotropic_stable({1.7, 30, 1.0, {}}, 409, 6);
  double self = 0.0;
  for (double v : tce_all(ref, ref, TceLevels{})) self = std::max(self, v);

  Matrix big(1000, 1);
  for (int i = 0; i < 1000; ++i) big(i, 0) = i + 1;
  Matrix gen = Matrix::Constant(100, 1, 500.0);
  gen.topRows(16).setConstant(1000.0);
  const double sixteen = tce(gen, big, 0.99);

  const bool ok = worst < 1e-12 && self == 0.0 && sixteen >= 10.0 && sixteen < 100.0;
  return {ok, "brute-force gap " + fmt("%.2g", worst) + ", TCE(self) = " + fmt("%g", self) +
                  ", TCE at 16x exceedance = " + fmt("%g", sixteen)};
}

// ------------------------------------------------------------------ 6
Outcome bound_algebra() {
  Rng rng = make_rng(6);
  double rate_gap = 0.0;
  bool monotone = true;
  for (int i = 0; i < 100; ++i) {
    const double beta = 0.05 + 1.9 * uniform_open(rng);
    const double gamma = 1.0 + 20.0 * uniform_open(rng);
    const double d = 1.0 + std::floor(50.0 * uniform_open(rng));
    const auto e = ddpm_exponents(beta, gamma, d);
    rate_gap = std::max(rate_gap, std::fabs(ddpm_optimized_rate(beta, gamma, d) - e.c * e.a / (e.a + e.b)));
    monotone = monotone && ddpm_optimized_rate(beta, gamma, d + 1.0) < ddpm_optimized_rate(beta, gamma, d);
    monotone = monotone && ddpm_optimized_rate(std::min(2.0, beta * 1.05), gamma, d) > ddpm_optimized_rate(beta, gamma, d);
  }

  // Geometric t0 grid: the argmin sits within one cell of the exact
  // minimizer, and its ratio to n^(-c/(a+b)) does not drift with n.
  const auto t0_grid = geometric_grid(1e-14, 1e6, 401);
  const double t0_cell = std::log(t0_grid[1] / t0_grid[0]);
  bool ddpm_ok = true;
  for (int i = 0; i < 10; ++i) {
    DdpmBoundParams p;
    p.beta = 0.2 + 1.8 * uniform_open(rng);
    p.gamma = 1.5 + 10.0 * uniform_open(rng);
    p.d = 1.0 + std::floor(4.0 * uniform_open(rng));
    p.T = 1e8;
    p.polylog_power = 0.0;
    std::vector<double> log_ratio;
    for (double n : {1e3, 1e5, 1e7}) {
      p.n = n;
      std::vector<double> totals;
      for (double t0 : t0_grid) {
        p.t0 = t0;
        totals.push_back(ddpm_bound(p).total);
      }
      const double hat = t0_grid[argmin(totals)];
      ddpm_ok = ddpm_ok && std::fabs(std::log(hat / ddpm_t0_minimizer(p))) <= t0_cell + 1e-9;
      log_ratio.push_back(std::log(hat / ddpm_optimal_t0(n, ddpm_exponents(p.beta, p.gamma, p.d))));
    }
    const auto [lo, hi] = std::minmax_element(log_ratio.begin(), log_ratio.end());
    ddpm_ok = ddpm_ok && *hi - *lo <= t0_cell + 1e-9;
  }

  const auto m_grid = geometric_grid(1.0, 1e12, 241);
  const double m_cell = std::log(m_grid[1] / m_grid[0]);
  bool dlpm_ok = true;
  for (double beta : {0.5, 1.0, 2.0}) {
    for (double d : {1.0, 2.0, 4.0}) {
      DlpmBoundParams p;
      p.beta_alpha = beta;
      p.d = d;
      p.delta = 0.5;
      std::vector<double> log_ratio;
      for (double n : {1e4, 1e6, 1e8}) {
        p.n = n;
        std::vector<double> totals;
        for (double m : m_grid) {
          p.m = m;
          p.comp = m;
          totals.push_back(dlpm_bound(p).total);
        }
        log_ratio.push_back(std::log(m_grid[argmin(totals)] / static_cast<double>(dlpm_optimal_m(n, beta, d))));
      }
      const auto [lo, hi] = std::minmax_element(log_ratio.begin(), log_ratio.end());
      dlpm_ok = dlpm_ok && *hi - *lo <= 2.0 * m_cell + 0.05;
    }
  }

  DdpmBoundParams dp;
  DlpmBoundParams lp;
  double prev_est = 1e300, prev_init = 1e300, prev_lest = 1e300;
  for (double n = 10; n <= 1e12; n *= 10) {
    dp.n = n;
    lp.n = n;
    monotone = monotone && ddpm_bound(dp).est < prev_est && dlpm_bound(lp).est < prev_lest;
    prev_est = ddpm_bound(dp).est;
    prev_lest = dlpm_bound(lp).est;
  }
  double prev_linit = 1e300;
  for (double T = 1; T <= 1000; T *= 2) {
    dp.T = T;
    lp.T = T;
    monotone = monotone && ddpm_bound(dp).init < prev_init && dlpm_bound(lp).init < prev_linit;
    prev_init = ddpm_bound(dp).init;
    prev_linit = dlpm_bound(lp).init;
    DlpmBoundParams twice = lp;
    twice.T = 2.0 * T;
    monotone = monotone && std::fabs(dlpm_bound(twice).approx / dlpm_bound(lp).approx - 2.0) < 1e-12 &&
               std::fabs(dlpm_bound(twice).est / dlpm_bound(lp).est - 2.0) < 1e-12;
  }

  const bool ok = rate_gap < 1e-12 && ddpm_ok && dlpm_ok && monotone;
  return {ok, "rate identity gap " + fmt("%.2g", rate_gap) + ", t0 grid " + (ddpm_ok ? "ok" : "off") + ", m grid " +
                  (dlpm_ok ? "ok" : "off") + ", monotonicity " + (monotone ? "ok" : "broken")};
}

// ------------------------------------------------------------------ 7
Outcome trainability(double* family_seconds) {
  DatasetConfig g;
  g.name = "gauss2";
  g.kind = "gaussian";
  g.dim = 2;
  const Dataset data = make_dataset(g, 4096, 0);
  const auto n_test = static_cast<std::size_t>(data.test.rows());
  const std::size_t n_gen = 4096;

  double null = 0.0;
  for (std::uint64_t r = 0; r < 20; ++r) {
    Rng rng = make_rng(1000 + r);
    Matrix a(static_cast<Eigen::Index>(n_gen), 2), b(data.test.rows(), 2);
    fill_normal(rng, a);
    fill_normal(rng, b);
    null += std::fabs(mmd_rbf(a, b).value) / 20.0;
  }

  TrainConfig tc;
  tc.epochs = 32;
  tc.batch = 16;
  tc.lr = 5e-4;
  tc.depth = 5;
  tc.width = 256;
  tc.t_embed_dim = 128;

  bool ok = true;
  std::string detail;
  *family_seconds = 0.0;
  for (Family f : {Family::gf_linear, Family::ddpm, Family::dlpm}) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelSpec spec;
    spec.family = f;
    spec.steps = 128;
    spec.alpha = 1.7;
    const Model model(spec);
    const auto trained = train_model(model, data.train, tc, 1);
    const Matrix gen = model.sample(mlp_predictor(trained.params), n_gen, 2, 1);
    const double mmd = mmd_rbf(gen, data.test).value;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    *family_seconds = std::max(*family_seconds, secs);
    const bool pass = mmd < 3.0 * null && secs < 300.0;
    ok = ok && pass;
    detail += spec.label() + " MMD^2 " + fmt("%.3g", mmd) + " (" + fmt("%.0f", secs) + " s); ";
  }
  detail += "threshold 3 x empirical null = " + fmt("%.3g", 3.0 * null) + " (4/sqrt(n) = " +
            fmt("%.3g", 4.0 / std::sqrt(static_cast<double>(n_test))) + ")";
  return {ok, detail};
}

// ------------------------------------------------------------------ 8, 9
fs::path main_mini_run(const fs::path& workdir, std::uint64_t seed, const std::string& tag) {
  BenchConfig cfg = BenchConfig::from_json({{"preset", "main-mini"}, {"base_seed", seed}});
  cfg.output_dir = (workdir / tag).string();
  fs::remove_all(cfg.output_dir);
  run_bench(cfg);
  return cfg.output_dir;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::map<std::string, double> tce99_medians(const fs::path& dir) {
  std::map<std::string, std::vector<double>> by_model;
  for (const auto& r : read_results_csv(dir / "results.csv")) {
    if (r.dataset == "alpha_stable_iso" && r.metric == "tce" && r.level && std::fabs(*r.level - 0.99) < 1e-12) {
      by_model[r.model].push_back(r.value);
    }
  }
  std::map<std::string, double> out;
  for (auto& [m, v] : by_model) out[m] = median(v);
  return out;
}

Outcome tce99_ordering(const fs::path& s0, const fs::path& s1) {
  int held = 0, total = 0;
  std::string detail;
  for (const auto& [seed, dir] : {std::pair{0, s0}, std::pair{1, s1}}) {
    const auto med = tce99_medians(dir);
    const auto get = [&](const std::string& k) { return med.count(k) ? med.at(k) : std::nan(""); };
    const double dlpm = get("dlpm_a1.7"), ddpm = get("ddpm"), gf = get("gf_linear");
    held += (ddpm < dlpm) + (gf < dlpm);
    total += 2;
    detail += "seed " + std::to_string(seed) + ": DDPM " + fmt("%.3g", ddpm) + ", GF-Linear " + fmt("%.3g", gf) +
              ", DLPM(1.7) " + fmt("%.3g", dlpm) + "; ";
  }
  detail += std::to_string(held) + "/" + std::to_string(total) + " comparisons hold (need 3)";
  return {held >= 3, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"htbench acceptance battery"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Directory for benchmark runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path root = fs::absolute(workdir);
  fs::create_directories(root);
  const auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  int failures = 0;
  const auto report = [&](int k, const std::string& name, double limit, const std::function<Outcome()>& fn) {
    if (!wanted(k)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0.0 && secs >= limit) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", limit) + " s budget";
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %d. %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "stable sampler fidelity", 10.0, stable_fidelity);
  report(2, "gradient exactness", 30.0, gradient_exactness);
  report(3, "alpha = 2 reduction", 0.0, alpha2_reduction);
  report(4, "terminal SNR decay", 0.0, snr_slope);
  report(5, "metric oracles", 0.0, metric_oracles);
  report(6, "bound algebra", 5.0, bound_algebra);
  double family_seconds = 0.0;
  report(7, "trainability on a 2-D Gaussian", 0.0, [&] { return trainability(&family_seconds); });

  fs::path seed0, seed1;
  double secs0 = 0.0;
  if (wanted(8) || wanted(9)) {
    const auto t0 = std::chrono::steady_clock::now();
    seed0 = main_mini_run(root, 0, "main-mini-seed0");
    secs0 = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("      main-mini seed 0 finished in %.1f s\n", secs0);
    std::fflush(stdout);
  }
  report(8, "TCE(99%) ordering at main-mini scale", 0.0, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    seed1 = main_mini_run(root, 1, "main-mini-seed1");
    const double total = secs0 + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Outcome o = tce99_ordering(seed0, seed1);
    o.detail += "; both seeds " + fmt("%.0f", total) + " s";
    if (total >= 1800.0) {
      o.pass = false;
      o.detail += ", over the 1800 s budget";
    }
    return o;
  });
  report(9, "end-to-end determinism", 0.0, [&] {
    const fs::path again = main_mini_run(root, 0, "main-mini-seed0-repeat");
    const std::string a = slurp(seed0 / "results.csv"), b = slurp(again / "results.csv");
    const bool same = !a.empty() && a == b;
    return Outcome{same, std::string(same ? "identical" : "different") + " results.csv (" +
                             std::to_string(a.size()) + " bytes)"};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
