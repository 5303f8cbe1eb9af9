#include <doctest.h>

#include <cmath>
#include <numeric>

#include "htbench/error.hpp"
#include "htbench/models.hpp"
#include "htbench/selfcheck.hpp"
#include "htbench/stable.hpp"

using namespace htbench;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MlpParams tiny_net(std::size_t dim, std::uint64_t seed) {
  MlpConfig c;
  c.in_dim = dim;
  c.out_dim = dim;
  c.width = 12;
  c.depth = 3;
  c.t_embed_dim = 4;
  return init_mlp(c, seed);
}

std::size_t step_of(double model_time, std::size_t steps) {
  return static_cast<std::size_t>(std::lround(model_time * static_cast<double>(steps)));
}

// FD check of a loss functional; every evaluation replays the same noise.
template <class LossFn>
double loss_fd_error(const MlpParams& params, LossFn&& loss_fn, std::uint64_t seed) {
  Rng base = make_rng(seed, 1);
  Rng r0 = base;
  const auto res = loss_fn(params, r0, true);
  Rng pick = make_rng(seed, 2);
  double worst = 0.0;
  for (int k = 0; k < 12; ++k) {
    MlpParams p = params;
    const auto l = static_cast<std::size_t>(pick() % p.layers.size());
    const auto r = static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(p.layers[l].weight.rows()));
    const auto c = static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(p.layers[l].weight.cols()));
    const double h = 1e-5;
    const double w = p.layers[l].weight(r, c);
    p.layers[l].weight(r, c) = w + h;
    Rng r1 = base;
    const double up = loss_fn(p, r1, false).loss;
    p.layers[l].weight(r, c) = w - h;
    Rng r2 = base;
    const double down = loss_fn(p, r2, false).loss;
    const double fd = (up - down) / (2.0 * h);
    const double an = res.grads.layers[l].weight(r, c);
    worst = std::max(worst, std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-7}));
  }
  return worst;
}

double mean_of(const Matrix& x) { return x.mean(); }
double var_of(const Matrix& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("DDPM schedule invariants") {
  const auto s = DdpmSchedule::make_default(512);
  CHECK(s.steps() == 512);
  CHECK(s.alpha_bar[0] == 1.0);
  for (std::size_t t = 1; t <= 512; ++t) {
    CHECK(s.beta[t - 1] > 0.0);
    CHECK(s.beta[t - 1] < 1.0);
    CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
  }
  CHECK_THROWS_AS(DdpmSchedule::from_betas({0.5, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(DdpmSchedule::from_betas({}), InvalidArgument);
}

TEST_CASE("DDPM forward corruption") {
  auto s = DdpmSchedule::from_betas({0.75, 0.5});
  CHECK(s.alpha_bar[1] == doctest::Approx(0.25));
  const Vector x = ddpm_forward(vec({1.0, 0.0}), 1, vec({0.0, 1.0}), s);
  CHECK(x(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(x(1) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));

  const auto near_clean = DdpmSchedule::from_betas({1e-15});
  CHECK((ddpm_forward(vec({3.0, -1.0}), 1, vec({5.0, 5.0}), near_clean) - vec({3.0, -1.0})).norm() < 1e-6);
  const auto near_noise = DdpmSchedule::from_betas({1.0 - 1e-15});
  CHECK((ddpm_forward(vec({3.0, -1.0}), 1, vec({5.0, 5.0}), near_noise) - vec({5.0, 5.0})).norm() < 1e-6);

  CHECK_THROWS_AS(ddpm_forward(vec({1.0}), 0, vec({1.0}), s), InvalidArgument);
  CHECK_THROWS_AS(ddpm_forward(vec({1.0}), 3, vec({1.0}), s), InvalidArgument);
}

TEST_CASE("DLPM schedule closed form equals the brute-force recursion") {
  Rng rng = make_rng(1);
  for (double alpha : {1.1, 1.5, 1.7, 1.9, 2.0}) {
    std::vector<double> betas(64);
    for (auto& b : betas) b = 0.001 + 0.2 * uniform_open(rng);
    const auto s = DlpmSchedule::from_betas(betas, alpha);
    double b_rec = 0.0;
    double a_rec = 1.0;
    for (std::size_t t = 1; t <= betas.size(); ++t) {
      const double g = std::sqrt(1.0 - betas[t - 1]);
      const double d = std::pow(betas[t - 1], 1.0 / alpha);
      b_rec = std::pow(std::pow(g * b_rec, alpha) + std::pow(d, alpha), 1.0 / alpha);
      a_rec *= g;
      CHECK(std::fabs(s.b[t] - b_rec) < 1e-10);
      CHECK(std::fabs(s.a[t] - a_rec) < 1e-14);
    }
  }
}

TEST_CASE("DLPM at alpha = 2 reduces to DDPM") {
  CHECK(alpha2_schedule_gap(512) < 1e-12);
  const auto betas = default_betas(64);
  const auto d = DdpmSchedule::from_betas(betas);
  const auto l = DlpmSchedule::from_betas(betas, 2.0);
  Rng rng = make_rng(2);
  Vector x0(3), eps(3);
  for (auto& v : x0) v = standard_normal(rng);
  for (auto& v : eps) v = standard_normal(rng);
  for (std::size_t t : {1u, 10u, 64u}) {
    CHECK((dlpm_forward(x0, t, eps, l) - ddpm_forward(x0, t, eps, d)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("DLPM forward corruption") {
  DlpmSchedule s;
  s.alpha = 1.5;
  s.gamma = {0.5};
  s.delta = {0.1};
  s.a = {1.0, 0.5};
  s.b = {0.0, 0.1};
  CHECK(dlpm_forward(vec({2.0}), 1, vec({3.0}), s)(0) == doctest::Approx(1.3).epsilon(1e-15));
  s.a = {1.0, 1.0};
  s.b = {0.0, 0.0};
  CHECK(dlpm_forward(vec({2.0}), 1, vec({3.0}), s)(0) == 2.0);
  CHECK_THROWS_AS(dlpm_forward(vec({2.0}), 2, vec({3.0}), s), InvalidArgument);
}

TEST_CASE("terminal signal-to-noise ratio decays exponentially") {
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> ts, logs;
  for (std::size_t T = 64; T <= 512; T += 32) {
    const auto s = DlpmSchedule::make_default(T, 1.7);
    const double rho = s.rho_terminal();
    CHECK(rho < prev);
    prev = rho;
    ts.push_back(static_cast<double>(T));
    logs.push_back(std::log(rho));
  }
  CHECK(prev < 1e-3);
  const double n = static_cast<double>(ts.size());
  const double mt = std::accumulate(ts.begin(), ts.end(), 0.0) / n;
  const double ml = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (logs[i] - ml);
    sxx += (ts[i] - mt) * (ts[i] - mt);
    syy += (logs[i] - ml) * (logs[i] - ml);
  }
  CHECK(sxy * sxy / (sxx * syy) > 0.99);
  CHECK(sxy / sxx < 0.0);
}

TEST_CASE("regression losses") {
  Matrix t(2, 2);
  t << 0.3, -0.2, 0.1, 0.4;
  CHECK(regression_loss(t, t, LossKind::squared).loss == 0.0);
  CHECK(regression_loss(t, t, LossKind::huber).loss == 0.0);

  // Small residuals: Huber equals the squared loss.
  Matrix p = t;
  p(0, 0) += 0.2;
  p(1, 1) -= 0.5;
  const auto sq = regression_loss(p, t, LossKind::squared);
  const auto hu = regression_loss(p, t, LossKind::huber);
  CHECK(hu.loss == doctest::Approx(sq.loss).epsilon(1e-15));
  CHECK((hu.grad - sq.grad).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(sq.loss == doctest::Approx((0.04 + 0.25) / 2.0));

  // Large residual r = 3: 2 r - 1 = 5, gradient 2 (residual / r).
  Matrix big = Matrix::Zero(1, 2);
  Matrix zero = Matrix::Zero(1, 2);
  big << 3.0, 0.0;
  const auto h = regression_loss(big, zero, LossKind::huber);
  CHECK(h.loss == doctest::Approx(5.0));
  CHECK(h.grad(0, 0) == doctest::Approx(2.0));
  CHECK(regression_loss(big, zero, LossKind::squared).loss == doctest::Approx(9.0));
}

TEST_CASE("zero network losses are close to the dimension") {
  MlpConfig c;
  c.in_dim = 4;
  c.out_dim = 4;
  c.width = 8;
  c.depth = 2;
  c.t_embed_dim = 4;
  const auto zero = zero_mlp(c);
  Rng rng = make_rng(3);
  Matrix x0 = Matrix::Zero(20000, 4);
  const auto dd = ddpm_loss(zero, x0, DdpmSchedule::make_default(64), rng, false);
  CHECK(dd.loss == doctest::Approx(4.0).epsilon(0.03));
  const auto fl = flow_loss(zero, x0, FlowPath{64, 1.0}, rng, false);
  CHECK(fl.loss == doctest::Approx(4.0).epsilon(0.03));
  CHECK(dd.loss >= 0.0);
  const auto dl = dlpm_loss(zero, x0, DlpmSchedule::make_default(64, 1.7), rng, false);
  CHECK(dl.loss >= 0.0);
}

TEST_CASE("regression batches hit zero loss at the oracle") {
  Rng rng = make_rng(4);
  Matrix x0(50, 3);
  fill_normal(rng, x0);
  const auto d = ddpm_regression_batch(x0, DdpmSchedule::make_default(32, 2.0), rng);
  CHECK(regression_loss(d.targets, d.targets, LossKind::squared).loss == 0.0);
  const auto l = dlpm_regression_batch(x0, DlpmSchedule::make_default(32, 1.7), rng);
  CHECK(regression_loss(l.targets, l.targets, LossKind::huber).loss == 0.0);
  const auto f = flow_regression_batch(x0, FlowPath{32, 1.0}, rng);
  CHECK(regression_loss(f.targets, f.targets, LossKind::squared).loss == 0.0);

  // Inputs are consistent with the forward maps.
  const auto sched = DdpmSchedule::make_default(32, 2.0);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const std::size_t t = step_of(d.times[static_cast<std::size_t>(i)], 32);
    const Vector want = ddpm_forward(x0.row(i).transpose(), t, d.targets.row(i).transpose(), sched);
    CHECK((d.inputs.row(i).transpose() - want).norm() < 1e-12);
  }
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double t = f.times[static_cast<std::size_t>(i)];
    const Vector x1 = f.targets.row(i).transpose() + x0.row(i).transpose();
    const Vector want = (1.0 - t) * x0.row(i).transpose() + t * x1;
    CHECK((f.inputs.row(i).transpose() - want).norm() < 1e-12);
  }
}

TEST_CASE("loss gradients match finite differences on a three-sample batch") {
  Rng rng = make_rng(5);
  Matrix batch(3, 2);
  fill_normal(rng, batch);
  const auto net = tiny_net(2, 6);
  const auto ds = DdpmSchedule::make_default(16, 2.0);
  const auto ls = DlpmSchedule::make_default(16, 1.7);
  const FlowPath fp{16, 2.0};
  CHECK(loss_fd_error(net, [&](const MlpParams& p, Rng& r, bool g) { return ddpm_loss(p, batch, ds, r, g); }, 1) <
        1e-4);
  CHECK(loss_fd_error(net, [&](const MlpParams& p, Rng& r, bool g) { return dlpm_loss(p, batch, ls, r, g); }, 2) <
        1e-4);
  CHECK(loss_fd_error(net, [&](const MlpParams& p, Rng& r, bool g) { return flow_loss(p, batch, fp, r, g); }, 3) <
        1e-4);
}

TEST_CASE("DDPM one-step inversion of a point mass") {
  const auto s = DdpmSchedule::from_betas({0.999});
  const Predictor oracle = [&](const Matrix& x, double) -> Matrix {
    return x / (s.sigma_max * std::sqrt(1.0 - s.alpha_bar[1]));
  };
  const Matrix out = ddpm_sample(oracle, 100, 2, s, 7);
  CHECK(out.cwiseAbs().maxCoeff() < 1e-9);
}

static std::vector<double> fine_betas() {
  std::vector<double> b(1000);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 1e-4 + (0.02 - 1e-4) * static_cast<double>(i) / 999.0;
  return b;
}

static Predictor ddpm_gaussian_oracle(const DdpmSchedule& s, double mu, double sd) {
  return [&s, mu, sd](const Matrix& x, double mt) -> Matrix {
    const std::size_t t = step_of(mt, s.steps());
    const double ab = s.alpha_bar[t];
    const double noise = s.sigma_max * std::sqrt(1.0 - ab);
    const double v = ab * sd * sd + noise * noise;
    return (noise / v) * (x.array() - std::sqrt(ab) * mu).matrix();
  };
}

TEST_CASE("DDPM sampler with the Gaussian oracle recovers the target") {
  const double mu = 1.5, sd = 0.7;
  const auto s = DdpmSchedule::from_betas(fine_betas(), 2.0);
  const Matrix out = ddpm_sample(ddpm_gaussian_oracle(s, mu, sd), 10000, 1, s, 8);
  CHECK(std::fabs(mean_of(out) / mu - 1.0) < 0.10);
  CHECK(std::fabs(var_of(out) / (sd * sd) - 1.0) < 0.10);
}

TEST_CASE("DDPM sampler moments follow the exact linear recursion") {
  // With a linear oracle every step is affine plus Gaussian noise, so the
  // output mean and variance have a closed form for any schedule.
  const double mu = 1.5, sd = 0.7;
  const auto s = DdpmSchedule::make_default(256, 2.0);
  double m = 0.0, v = s.sigma_max * s.sigma_max;
  for (std::size_t t = s.steps(); t >= 1; --t) {
    const double be = s.beta[t - 1], ab = s.alpha_bar[t], ap = s.alpha_bar[t - 1];
    const double noise = s.sigma_max * std::sqrt(1.0 - ab);
    const double k = noise / (ab * sd * sd + noise * noise);
    const double c = be / std::sqrt(1.0 - ab) * s.sigma_max;
    const double a = (1.0 - c * k) / std::sqrt(1.0 - be);
    m = a * m + c * k * std::sqrt(ab) * mu / std::sqrt(1.0 - be);
    v = a * a * v + (t > 1 ? s.sigma_max * s.sigma_max * be * (1.0 - ap) / (1.0 - ab) : 0.0);
  }
  const Matrix out = ddpm_sample(ddpm_gaussian_oracle(s, mu, sd), 10000, 1, s, 8);
  CHECK(std::fabs(mean_of(out) - m) < 4.0 * std::sqrt(v / 10000.0));
  CHECK(std::fabs(var_of(out) / v - 1.0) < 0.05);

  // Early stopping returns the state at ceil(t0 T); at t0 close to 1 it is nearly the prior.
  const Matrix early = ddpm_sample(ddpm_gaussian_oracle(s, mu, sd), 10000, 1, s, 8, 0.99);
  CHECK(var_of(early) > 2.0);
}

TEST_CASE("samplers with untrained networks stay finite and are deterministic") {
  const auto net = tiny_net(3, 9);
  const auto pred = mlp_predictor(net);
  const Matrix a = ddpm_sample(pred, 64, 3, DdpmSchedule::make_default(512, 5.0), 10);
  CHECK(a.allFinite());
  CHECK((a.array() == ddpm_sample(pred, 64, 3, DdpmSchedule::make_default(512, 5.0), 10).array()).all());
  const Matrix b = dlpm_sample(pred, 64, 3, DlpmSchedule::make_default(512, 1.7), 11);
  CHECK(b.allFinite());
  CHECK((b.array() == dlpm_sample(pred, 64, 3, DlpmSchedule::make_default(512, 1.7), 11).array()).all());
  const Matrix c = flow_sample(pred, 64, 3, FlowPath{512, 2.0}, 12);
  CHECK(c.allFinite());
  CHECK((c.array() == flow_sample(pred, 64, 3, FlowPath{512, 2.0}, 12).array()).all());
}

TEST_CASE("DLPM sampler at alpha = 2 collapses a point mass") {
  const auto s = DlpmSchedule::make_default(64, 2.0);
  const Predictor oracle = [&](const Matrix& x, double mt) -> Matrix { return x / s.b[step_of(mt, 64)]; };
  const Matrix out = dlpm_sample(oracle, 200, 2, s, 13);
  CHECK(out.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("DLPM reverse step at alpha = 2 is the DDPM posterior") {
  // A unit-scale alpha = 2 stable coordinate has variance 2, which the oracle accounts for.
  const double mu = -0.5, sd = 0.4;
  const auto s = DlpmSchedule::from_betas(fine_betas(), 2.0);
  const double noise_var = 2.0;
  const Predictor oracle = [&](const Matrix& x, double mt) -> Matrix {
    const std::size_t t = step_of(mt, s.steps());
    const double a = s.a[t], b = s.b[t];
    const double v = a * a * sd * sd + b * b * noise_var;
    return (b * noise_var / v) * (x.array() - a * mu).matrix();
  };
  const Matrix out = dlpm_sample(oracle, 10000, 1, s, 14);
  CHECK(std::fabs(mean_of(out) / mu - 1.0) < 0.10);
  CHECK(std::fabs(var_of(out) / (sd * sd) - 1.0) < 0.10);
}

TEST_CASE("DLPM sampler aborts with the step index on a non-finite state") {
  const auto s = DlpmSchedule::make_default(32, 1.7);
  const Predictor bad = [&](const Matrix& x, double mt) -> Matrix {
    if (step_of(mt, 32) == 20) return Matrix::Constant(x.rows(), x.cols(), std::nan(""));
    return Matrix::Zero(x.rows(), x.cols());
  };
  try {
    dlpm_sample(bad, 4, 2, s, 15);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 20);
  }
}

TEST_CASE("flow sampler") {
  const Vector c = vec({2.0, -1.0});
  const Predictor point = [&](const Matrix& x, double t) -> Matrix {
    return (x.rowwise() - c.transpose()) / t;
  };
  const Matrix out = flow_sample(point, 50, 2, FlowPath{37, 3.0}, 16);
  CHECK((out.rowwise() - c.transpose()).cwiseAbs().maxCoeff() < 1e-9);

  // One step is a single Euler jump from the source draw.
  const Predictor shift = [](const Matrix& x, double t) -> Matrix {
    CHECK(t == 1.0);
    return Matrix::Constant(x.rows(), x.cols(), 0.25);
  };
  const Matrix x1 = flow_sample([](const Matrix& x, double) -> Matrix { return Matrix::Zero(x.rows(), x.cols()); },
                                10, 2, FlowPath{1, 1.0}, 17);
  const Matrix one = flow_sample(shift, 10, 2, FlowPath{1, 1.0}, 17);
  CHECK(((x1.array() - 0.25) - one.array()).abs().maxCoeff() < 1e-15);

  // Gaussian target under the analytic conditional field.
  const double mu = 0.8, sd = 0.5, sig = 2.0;
  const Predictor gauss = [&](const Matrix& x, double t) -> Matrix {
    const double v = (1 - t) * (1 - t) * sd * sd + t * t * sig * sig;
    const double cov = t * sig * sig - (1 - t) * sd * sd;
    return (-mu + (cov / v) * (x.array() - (1 - t) * mu)).matrix();
  };
  const Matrix g = flow_sample(gauss, 10000, 1, FlowPath{512, sig}, 18);
  CHECK(std::fabs(var_of(g) / (sd * sd) - 1.0) < 0.10);
  CHECK(std::fabs(mean_of(g) / mu - 1.0) < 0.10);
}

TEST_CASE("model specs") {
  ModelSpec d;
  CHECK(d.label() == "DDPM");
  CHECK(d.key() == "ddpm");
  ModelSpec f;
  f.family = Family::gf_linear;
  CHECK(f.label() == "GF-Linear");
  CHECK(f.key() == "gf_linear");
  ModelSpec l;
  l.family = Family::dlpm;
  l.alpha = 1.9;
  CHECK(l.key() == "dlpm_a1.9");
  CHECK(parse_family("dlpm") == Family::dlpm);
  CHECK(family_name(Family::gf_linear) == "gf_linear");
  CHECK_THROWS_AS(parse_family("vae"), InvalidArgument);
}

TEST_CASE("training budget and determinism") {
  Rng rng = make_rng(19);
  Matrix train(100, 2);
  fill_normal(rng, train);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch = 32;
  tc.width = 16;
  tc.depth = 3;
  tc.t_embed_dim = 8;
  tc.lr = 1e-3;
  for (Family fam : {Family::ddpm, Family::dlpm, Family::gf_linear}) {
    ModelSpec spec;
    spec.family = fam;
    spec.steps = 16;
    const Model model(spec);
    const auto a = train_model(model, train, tc, 20);
    CHECK(a.optimizer_steps == 3 * 4);
    CHECK(a.epoch_loss.size() == 3);
    const auto b = train_model(model, train, tc, 20);
    CHECK(a.epoch_loss == b.epoch_loss);
    const double v1 = validation_objective(model, a.params, train, 5, 32);
    CHECK(std::isfinite(v1));
    CHECK(v1 == validation_objective(model, a.params, train, 5, 32));
  }
}

TEST_CASE("training lowers the DDPM objective on a Gaussian") {
  Rng rng = make_rng(21);
  Matrix train(512, 2);
  fill_normal(rng, train);
  ModelSpec spec;
  spec.steps = 32;
  const Model model(spec);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch = 32;
  tc.width = 32;
  tc.depth = 3;
  tc.t_embed_dim = 8;
  tc.lr = 2e-3;
  const auto r = train_model(model, train, tc, 22);
  CHECK(r.epoch_loss.back() < 0.8 * r.epoch_loss.front());
}
