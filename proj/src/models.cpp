#include "htbench/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "htbench/error.hpp"
#include "htbench/stable.hpp"

namespace htbench {

namespace {

constexpr double kBetaMin = 1e-4;
constexpr double kBetaMax = 0.06;
constexpr std::size_t kRampSteps = 32;

void check_step(std::size_t t, std::size_t steps, const char* who) {
  if (t < 1 || t > steps)
    throw InvalidArgument(std::string(who) + ": step index must lie in [1, T]");
}

double model_time(std::size_t t, std::size_t steps) {
  return static_cast<double>(t) / static_cast<double>(steps);
}

void check_finite(const Matrix& x, std::size_t step, const char* who) {
  if (!x.allFinite()) throw NumericError(std::string(who) + ": non-finite sampler state", step);
}

LossResult fit_loss(const MlpParams& params, const RegressionBatch& rb, LossKind kind,
                    double huber, bool with_grads, const char* who) {
  MlpCache cache;
  Matrix pred = mlp_forward(params, rb.inputs, rb.times, with_grads ? &cache : nullptr);
  PointLoss pl = regression_loss(pred, rb.targets, kind, huber);
  if (!std::isfinite(pl.loss)) throw NumericError(std::string(who) + ": non-finite loss", 0);
  LossResult out;
  out.loss = pl.loss;
  if (with_grads) out.grads = mlp_backward(params, cache, pl.grad);
  return out;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::ddpm: return "ddpm";
    case Family::dlpm: return "dlpm";
    case Family::gf_linear: return "gf_linear";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "ddpm" || name == "DDPM") return Family::ddpm;
  if (name == "dlpm" || name == "DLPM") return Family::dlpm;
  if (name == "gf_linear" || name == "gf-linear" || name == "GF-Linear" || name == "flow")
    return Family::gf_linear;
  throw InvalidArgument("unknown model family: " + std::string(name));
}

std::vector<double> default_betas(std::size_t steps) {
  require(steps >= 1, "default_betas: need at least one step");
  std::vector<double> b(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    if (i + 1 >= kRampSteps) {
      b[i] = kBetaMax;
    } else {
      const double frac = static_cast<double>(i) / static_cast<double>(kRampSteps - 1);
      b[i] = kBetaMin + (kBetaMax - kBetaMin) * frac;
    }
  }
  return b;
}

DdpmSchedule DdpmSchedule::from_betas(std::vector<double> betas, double sigma_max) {
  require(!betas.empty(), "DdpmSchedule: need at least one step");
  require(sigma_max > 0.0, "DdpmSchedule: sigma_max must be positive");
  DdpmSchedule s;
  s.sigma_max = sigma_max;
  s.alpha_bar.resize(betas.size() + 1);
  s.alpha_bar[0] = 1.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    require(betas[i] > 0.0 && betas[i] < 1.0, "DdpmSchedule: beta_t must lie in (0, 1)");
    s.alpha_bar[i + 1] = s.alpha_bar[i] * (1.0 - betas[i]);
  }
  s.beta = std::move(betas);
  return s;
}

DdpmSchedule DdpmSchedule::make_default(std::size_t steps, double sigma_max) {
  return from_betas(default_betas(steps), sigma_max);
}

DlpmSchedule DlpmSchedule::from_betas(const std::vector<double>& betas, double alpha) {
  require(!betas.empty(), "DlpmSchedule: need at least one step");
  require(alpha > 0.0 && alpha <= 2.0, "DlpmSchedule: alpha must lie in (0, 2]");
  const std::size_t steps = betas.size();
  DlpmSchedule s;
  s.alpha = alpha;
  s.gamma.resize(steps);
  s.delta.resize(steps);
  s.a.assign(steps + 1, 1.0);
  s.b.assign(steps + 1, 0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    require(betas[i] > 0.0 && betas[i] < 1.0, "DlpmSchedule: beta_t must lie in (0, 1)");
    s.gamma[i] = std::sqrt(1.0 - betas[i]);
    s.delta[i] = std::pow(betas[i], 1.0 / alpha);
  }
  // a_t = prod_{s<=t} gamma_s;  b_t^alpha = sum_{s<=t} (delta_s prod_{s<u<=t} gamma_u)^alpha.
  for (std::size_t t = 1; t <= steps; ++t) {
    s.a[t] = s.a[t - 1] * s.gamma[t - 1];
    double acc = 0.0;
    double carry = 1.0;  // prod_{s<u<=t} gamma_u, built from s = t downward
    for (std::size_t src = t; src >= 1; --src) {
      acc += std::pow(s.delta[src - 1] * carry, alpha);
      carry *= s.gamma[src - 1];
    }
    s.b[t] = std::pow(acc, 1.0 / alpha);
  }
  return s;
}

DlpmSchedule DlpmSchedule::make_default(std::size_t steps, double alpha) {
  return from_betas(default_betas(steps), alpha);
}

void FlowPath::validate() const {
  require(steps >= 1, "FlowPath: steps must be at least 1");
  require(sigma_max > 0.0, "FlowPath: sigma_max must be positive");
}

Predictor mlp_predictor(const MlpParams& params, std::size_t chunk) {
  return [&params, chunk](const Matrix& x, double t) -> Matrix {
    if (static_cast<std::size_t>(x.rows()) <= chunk) return mlp_forward(params, x, t);
    Matrix out(x.rows(), static_cast<Eigen::Index>(params.config.out_dim));
    for (Eigen::Index r = 0; r < x.rows(); r += static_cast<Eigen::Index>(chunk)) {
      const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), x.rows() - r);
      out.middleRows(r, len) = mlp_forward(params, Matrix(x.middleRows(r, len)), t);
    }
    return out;
  };
}

Vector ddpm_forward(const Vector& x0, std::size_t t, const Vector& eps, const DdpmSchedule& sched) {
  check_step(t, sched.steps(), "ddpm_forward");
  require(x0.size() == eps.size(), "ddpm_forward: x0 and eps must have equal length");
  const double ab = sched.alpha_bar[t];
  return std::sqrt(ab) * x0 + sched.sigma_max * std::sqrt(1.0 - ab) * eps;
}

Vector dlpm_forward(const Vector& x0, std::size_t t, const Vector& s_alpha, const DlpmSchedule& sched) {
  check_step(t, sched.steps(), "dlpm_forward");
  require(x0.size() == s_alpha.size(), "dlpm_forward: x0 and noise must have equal length");
  return sched.a[t] * x0 + sched.b[t] * s_alpha;
}

RegressionBatch ddpm_regression_batch(const Matrix& x0, const DdpmSchedule& sched, Rng& rng) {
  require(x0.rows() > 0, "ddpm loss: empty batch");
  const auto n = x0.rows();
  const std::size_t steps = sched.steps();
  RegressionBatch rb;
  rb.targets.resize(n, x0.cols());
  fill_normal(rng, rb.targets);
  rb.inputs.resize(n, x0.cols());
  rb.times.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t t = 1 + static_cast<std::size_t>(rng() % steps);
    const double ab = sched.alpha_bar[t];
    rb.inputs.row(i) = std::sqrt(ab) * x0.row(i) + sched.sigma_max * std::sqrt(1.0 - ab) * rb.targets.row(i);
    rb.times[static_cast<std::size_t>(i)] = model_time(t, steps);
  }
  return rb;
}

RegressionBatch dlpm_regression_batch(const Matrix& x0, const DlpmSchedule& sched, Rng& rng) {
  require(x0.rows() > 0, "dlpm loss: empty batch");
  const auto n = x0.rows();
  const std::size_t steps = sched.steps();
  RegressionBatch rb;
  rb.targets.resize(n, x0.cols());
  fill_isotropic_stable({sched.alpha, static_cast<std::size_t>(x0.cols()), 1.0, {}}, rng, rb.targets);
  rb.inputs.resize(n, x0.cols());
  rb.times.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t t = 1 + static_cast<std::size_t>(rng() % steps);
    rb.inputs.row(i) = sched.a[t] * x0.row(i) + sched.b[t] * rb.targets.row(i);
    rb.times[static_cast<std::size_t>(i)] = model_time(t, steps);
  }
  return rb;
}

RegressionBatch flow_regression_batch(const Matrix& x0, const FlowPath& path, Rng& rng) {
  path.validate();
  require(x0.rows() > 0, "flow loss: empty batch");
  const auto n = x0.rows();
  Matrix x1(n, x0.cols());
  fill_normal(rng, x1);
  x1 *= path.sigma_max;
  RegressionBatch rb;
  rb.inputs.resize(n, x0.cols());
  rb.times.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = uniform_open(rng);
    rb.inputs.row(i) = (1.0 - t) * x0.row(i) + t * x1.row(i);
    rb.times[static_cast<std::size_t>(i)] = t;
  }
  rb.targets = x1 - x0;
  return rb;
}

PointLoss regression_loss(const Matrix& pred, const Matrix& target, LossKind kind,
                          double huber_threshold) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "regression_loss: prediction and target shapes differ");
  require(pred.rows() > 0, "regression_loss: empty batch");
  require(huber_threshold > 0.0, "regression_loss: Huber threshold must be positive");
  const double inv_n = 1.0 / static_cast<double>(pred.rows());
  PointLoss out;
  out.grad = pred - target;
  if (kind == LossKind::squared) {
    out.loss = out.grad.squaredNorm() * inv_n;
    out.grad *= 2.0 * inv_n;
    return out;
  }
  const double h = huber_threshold;
  double total = 0.0;
  for (Eigen::Index i = 0; i < out.grad.rows(); ++i) {
    const double r = out.grad.row(i).norm();
    if (r <= h) {
      total += r * r;
      out.grad.row(i) *= 2.0 * inv_n;
    } else {
      total += 2.0 * h * r - h * h;
      out.grad.row(i) *= 2.0 * h * inv_n / r;
    }
  }
  out.loss = total * inv_n;
  return out;
}

LossResult ddpm_loss(const MlpParams& params, const Matrix& batch, const DdpmSchedule& sched, Rng& rng,
                     bool with_grads) {
  return fit_loss(params, ddpm_regression_batch(batch, sched, rng), LossKind::squared, 1.0, with_grads,
                  "ddpm_loss");
}

LossResult dlpm_loss(const MlpParams& params, const Matrix& batch, const DlpmSchedule& sched, Rng& rng,
                     bool with_grads, double huber_threshold) {
  return fit_loss(params, dlpm_regression_batch(batch, sched, rng), LossKind::huber, huber_threshold,
                  with_grads, "dlpm_loss");
}

LossResult flow_loss(const MlpParams& params, const Matrix& batch, const FlowPath& path, Rng& rng,
                     bool with_grads) {
  return fit_loss(params, flow_regression_batch(batch, path, rng), LossKind::squared, 1.0, with_grads,
                  "flow_loss");
}

Matrix ddpm_sample(const Predictor& eps_model, std::size_t n, std::size_t dim,
                   const DdpmSchedule& sched, std::uint64_t seed, double t0) {
  require(n > 0 && dim > 0, "ddpm_sample: n and dim must be positive");
  require(t0 >= 0.0 && t0 < 1.0, "ddpm_sample: t0 must lie in [0, 1)");
  const std::size_t steps = sched.steps();
  const auto stop = static_cast<std::size_t>(std::ceil(t0 * static_cast<double>(steps)));
  const double sm = sched.sigma_max;
  Rng rng = make_rng(seed, 0xdd);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  fill_normal(rng, x);
  x *= sm;
  Matrix z(x.rows(), x.cols());
  for (std::size_t t = steps; t > stop; --t) {
    const double beta = sched.beta[t - 1];
    const double ab = sched.alpha_bar[t];
    const double ab_prev = sched.alpha_bar[t - 1];
    const Matrix eps_hat = eps_model(x, model_time(t, steps));
    x = (x - (beta / std::sqrt(1.0 - ab)) * sm * eps_hat) / std::sqrt(1.0 - beta);
    if (t > 1) {
      const double var = beta * (1.0 - ab_prev) / (1.0 - ab);
      fill_normal(rng, z);
      x += sm * std::sqrt(var) * z;
    }
    check_finite(x, t, "ddpm_sample");
  }
  return x;
}

Matrix dlpm_sample(const Predictor& noise_model, std::size_t n, std::size_t dim,
                   const DlpmSchedule& sched, std::uint64_t seed) {
  require(n > 0 && dim > 0, "dlpm_sample: n and dim must be positive");
  const std::size_t steps = sched.steps();
  const double alpha = sched.alpha;
  const IsotropicStableLaw law{alpha, dim, 1.0, {}};
  Rng rng = make_rng(seed, 0xd1);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  fill_isotropic_stable(law, rng, x);
  x *= sched.b[steps];
  Matrix noise(x.rows(), x.cols());
  for (std::size_t t = steps; t >= 1; --t) {
    const double g = sched.gamma[t - 1];
    const double bt = sched.b[t];
    const double bp = sched.b[t - 1];
    const double keep = std::pow(g * bp / bt, alpha);
    const double innov = std::pow(std::pow(bp, alpha) * (1.0 - keep), 1.0 / alpha);
    const double carry = bp * std::pow(keep, 1.0 / alpha);
    const Matrix s_hat = noise_model(x, model_time(t, steps));
    x = (x - bt * s_hat) / g + carry * s_hat;
    if (innov > 0.0) {
      fill_isotropic_stable(law, rng, noise);
      x += innov * noise;
    }
    check_finite(x, t, "dlpm_sample");
  }
  return x;
}

Matrix flow_sample(const Predictor& velocity, std::size_t n, std::size_t dim, const FlowPath& path,
                   std::uint64_t seed) {
  path.validate();
  require(n > 0 && dim > 0, "flow_sample: n and dim must be positive");
  Rng rng = make_rng(seed, 0xf1);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  fill_normal(rng, x);
  x *= path.sigma_max;
  const double dt = 1.0 / static_cast<double>(path.steps);
  for (std::size_t k = path.steps; k >= 1; --k) {
    const double t = static_cast<double>(k) * dt;
    x -= dt * velocity(x, t);
    check_finite(x, k, "flow_sample");
  }
  return x;
}

std::string ModelSpec::label() const {
  std::ostringstream os;
  switch (family) {
    case Family::ddpm: os << "DDPM"; break;
    case Family::gf_linear: os << "GF-Linear"; break;
    case Family::dlpm: os << "DLPM (alpha=" << alpha << ")"; break;
  }
  return os.str();
}

std::string ModelSpec::key() const {
  std::ostringstream os;
  os << family_name(family);
  if (family == Family::dlpm) os << "_a" << alpha;
  return os.str();
}

Model::Model(ModelSpec spec) : spec_(spec) {
  require(spec_.steps >= 1, "model: steps must be at least 1");
  switch (spec_.family) {
    case Family::ddpm:
      schedule_ = DdpmSchedule::make_default(spec_.steps, spec_.sigma_max);
      break;
    case Family::dlpm:
      schedule_ = DlpmSchedule::make_default(spec_.steps, spec_.alpha);
      break;
    case Family::gf_linear: {
      FlowPath path{spec_.steps, spec_.sigma_max};
      path.validate();
      schedule_ = path;
      break;
    }
  }
}

RegressionBatch Model::regression_batch(const Matrix& x0, Rng& rng) const {
  return std::visit(
      [&](const auto& s) -> RegressionBatch {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, DdpmSchedule>) return ddpm_regression_batch(x0, s, rng);
        else if constexpr (std::is_same_v<S, DlpmSchedule>) return dlpm_regression_batch(x0, s, rng);
        else return flow_regression_batch(x0, s, rng);
      },
      schedule_);
}

LossResult Model::loss(const MlpParams& params, const Matrix& batch, Rng& rng, bool with_grads) const {
  return std::visit(
      [&](const auto& s) -> LossResult {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, DdpmSchedule>) return ddpm_loss(params, batch, s, rng, with_grads);
        else if constexpr (std::is_same_v<S, DlpmSchedule>)
          return dlpm_loss(params, batch, s, rng, with_grads, spec_.huber_threshold);
        else return flow_loss(params, batch, s, rng, with_grads);
      },
      schedule_);
}

Matrix Model::sample(const Predictor& predictor, std::size_t n, std::size_t dim, std::uint64_t seed) const {
  return std::visit(
      [&](const auto& s) -> Matrix {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, DdpmSchedule>) return ddpm_sample(predictor, n, dim, s, seed, spec_.t0);
        else if constexpr (std::is_same_v<S, DlpmSchedule>) return dlpm_sample(predictor, n, dim, s, seed);
        else return flow_sample(predictor, n, dim, s, seed);
      },
      schedule_);
}

TrainResult train_model(const Model& model, const Matrix& train, const TrainConfig& cfg,
                        std::uint64_t seed) {
  require(train.rows() > 0, "train_model: empty training split");
  require(cfg.epochs >= 1 && cfg.batch >= 1, "train_model: epochs and batch must be positive");
  require(cfg.lr > 0.0, "train_model: learning rate must be positive");
  const auto rows = static_cast<std::size_t>(train.rows());
  const auto dim = static_cast<std::size_t>(train.cols());
  MlpConfig mc{dim, dim, cfg.width, cfg.depth, cfg.t_embed_dim};

  TrainResult out;
  out.params = init_mlp(mc, seed);
  AdamWState opt = AdamWState::init(out.params, cfg.adamw);
  const std::size_t per_epoch = (rows + cfg.batch - 1) / cfg.batch;
  const std::size_t total = cfg.epochs * per_epoch;

  Rng rng = make_rng(seed, 0x7a);
  std::vector<Eigen::Index> order(rows);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Matrix batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = rows - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    double sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t begin = b * cfg.batch;
      const std::size_t len = std::min(cfg.batch, rows - begin);
      batch.resize(static_cast<Eigen::Index>(len), train.cols());
      for (std::size_t r = 0; r < len; ++r)
        batch.row(static_cast<Eigen::Index>(r)) = train.row(order[begin + r]);
      LossResult lr = model.loss(out.params, batch, rng, true);
      if (!std::isfinite(lr.loss)) throw NumericError("train_model: non-finite loss", out.optimizer_steps);
      adamw_step(opt, out.params, lr.grads, cosine_lr(out.optimizer_steps, total, cfg.lr));
      ++out.optimizer_steps;
      sum += lr.loss;
    }
    out.epoch_loss.push_back(sum / static_cast<double>(per_epoch));
  }
  return out;
}

double validation_objective(const Model& model, const MlpParams& params, const Matrix& data,
                            std::uint64_t seed, std::size_t batch) {
  require(data.rows() > 0, "validation_objective: empty split");
  require(batch > 0, "validation_objective: batch must be positive");
  Rng rng = make_rng(seed, 0x7b);
  double weighted = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); r += static_cast<Eigen::Index>(batch)) {
    const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch), data.rows() - r);
    const double l = model.loss(params, Matrix(data.middleRows(r, len)), rng, false).loss;
    weighted += l * static_cast<double>(len);
  }
  return weighted / static_cast<double>(data.rows());
}

}  // namespace htbench
