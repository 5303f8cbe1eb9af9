#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "htbench/nn.hpp"
#include "htbench/rng.hpp"

namespace htbench {

enum class Family { ddpm, dlpm, gf_linear };

std::string family_name(Family f);
Family parse_family(std::string_view name);

/// Default per-step variances: linear ramp from 1e-4 to 0.06 over the first
/// 32 steps, then constant. Per-step values do not depend on T, so longer
/// chains only add plateau steps.
std::vector<double> default_betas(std::size_t steps);

/// Variance-preserving Gaussian chain. `alpha_bar[t]` for t = 0..T with
/// alpha_bar[0] = 1; `beta[t - 1]` for t = 1..T. Noise is scaled by sigma_max,
/// so the terminal marginal is close to N(0, sigma_max^2 I).
struct DdpmSchedule {
  std::vector<double> beta;
  std::vector<double> alpha_bar;
  double sigma_max = 1.0;

  std::size_t steps() const { return beta.size(); }

  static DdpmSchedule from_betas(std::vector<double> betas, double sigma_max = 1.0);
  static DdpmSchedule make_default(std::size_t steps, double sigma_max = 1.0);
};

/// Stable-noise chain x_t = gamma_t x_{t-1} + delta_t eps_t with
/// gamma_t = sqrt(1 - beta_t), delta_t = beta_t^(1/alpha). Marginals are
/// x_t = a_t x_0 + b_t S with a_t = prod gamma and
/// b_t = (sum_s (delta_s prod_{u>s} gamma_u)^alpha)^(1/alpha).
struct DlpmSchedule {
  double alpha = 2.0;
  std::vector<double> gamma;  // index t - 1
  std::vector<double> delta;  // index t - 1
  std::vector<double> a;      // index t = 0..T
  std::vector<double> b;      // index t = 0..T

  std::size_t steps() const { return gamma.size(); }
  double rho(std::size_t t) const { return a.at(t) / b.at(t); }
  double rho_terminal() const { return rho(steps()); }

  static DlpmSchedule from_betas(const std::vector<double>& betas, double alpha);
  static DlpmSchedule make_default(std::size_t steps, double alpha);
};

/// Linear path x_t = (1 - t) x_0 + t x_1 with x_1 ~ N(0, sigma_max^2 I).
struct FlowPath {
  std::size_t steps = 512;
  double sigma_max = 1.0;

  void validate() const;
};

/// Batched predictor: rows of x at model time t in [0, 1].
using Predictor = std::function<Matrix(const Matrix& x, double model_time)>;

Predictor mlp_predictor(const MlpParams& params, std::size_t chunk = 4096);

Vector ddpm_forward(const Vector& x0, std::size_t t, const Vector& eps, const DdpmSchedule& sched);
Vector dlpm_forward(const Vector& x0, std::size_t t, const Vector& s_alpha, const DlpmSchedule& sched);

/// Network inputs, per-row model times, and regression targets for one batch.
struct RegressionBatch {
  Matrix inputs;
  std::vector<double> times;
  Matrix targets;
};

/// eps-prediction: t ~ U{1..T}, x_t from ddpm_forward, target eps.
RegressionBatch ddpm_regression_batch(const Matrix& x0, const DdpmSchedule& sched, Rng& rng);
/// Stable-noise prediction: target is the cumulative noise S in x_t = a_t x0 + b_t S.
RegressionBatch dlpm_regression_batch(const Matrix& x0, const DlpmSchedule& sched, Rng& rng);
/// Velocity regression: t ~ U(0, 1), target x_1 - x_0.
RegressionBatch flow_regression_batch(const Matrix& x0, const FlowPath& path, Rng& rng);

enum class LossKind { squared, huber };

/// Batch-mean loss and its gradient with respect to `pred`.
struct PointLoss {
  double loss = 0.0;
  Matrix grad;
};

/// squared: ||r||^2 per row. huber: ||r||^2 if ||r|| <= h else 2 h ||r|| - h^2.
PointLoss regression_loss(const Matrix& pred, const Matrix& target, LossKind kind,
                          double huber_threshold = 1.0);

struct LossResult {
  double loss = 0.0;
  MlpGrads grads;
};

LossResult ddpm_loss(const MlpParams& params, const Matrix& batch, const DdpmSchedule& sched, Rng& rng,
                     bool with_grads = true);
LossResult dlpm_loss(const MlpParams& params, const Matrix& batch, const DlpmSchedule& sched, Rng& rng,
                     bool with_grads = true, double huber_threshold = 1.0);
LossResult flow_loss(const MlpParams& params, const Matrix& batch, const FlowPath& path, Rng& rng,
                     bool with_grads = true);

/// Ancestral eps-parameterized sampler from x_T ~ N(0, sigma_max^2 I). With
/// t0 > 0 the chain stops at step ceil(t0 * T) and returns that state.
Matrix ddpm_sample(const Predictor& eps_model, std::size_t n, std::size_t dim,
                   const DdpmSchedule& sched, std::uint64_t seed, double t0 = 0.0);

/// Reverse stable chain from x_T = b_T S. Each step is
/// x_{t-1} = (x_t - b_t S_hat) / gamma_t + c_t S_hat + s_t eps,
/// with s_t = (b_{t-1}^a (1 - (gamma_t b_{t-1} / b_t)^a))^(1/a) and
/// c_t = (b_{t-1}^a - s_t^a)^(1/a). At alpha = 2 this is the DDPM posterior.
Matrix dlpm_sample(const Predictor& noise_model, std::size_t n, std::size_t dim,
                   const DlpmSchedule& sched, std::uint64_t seed);

/// Explicit Euler for dx/dt = -v(x, t) from t = 1 to t = 0.
Matrix flow_sample(const Predictor& velocity, std::size_t n, std::size_t dim, const FlowPath& path,
                   std::uint64_t seed);

/// Family tag plus the knobs that define its schedule.
struct ModelSpec {
  Family family = Family::ddpm;
  std::size_t steps = 512;
  double sigma_max = 1.0;  // ddpm and gf_linear
  double alpha = 1.7;      // dlpm
  double huber_threshold = 1.0;
  double t0 = 0.0;         // ddpm early stopping

  /// Display name, e.g. "DLPM (alpha=1.7)".
  std::string label() const;
  /// File-safe identifier, e.g. "dlpm_a1.7".
  std::string key() const;
};

/// A model family with its schedule materialized once.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }

  LossResult loss(const MlpParams& params, const Matrix& batch, Rng& rng, bool with_grads) const;
  RegressionBatch regression_batch(const Matrix& x0, Rng& rng) const;
  Matrix sample(const Predictor& predictor, std::size_t n, std::size_t dim, std::uint64_t seed) const;

 private:
  ModelSpec spec_;
  std::variant<DdpmSchedule, DlpmSchedule, FlowPath> schedule_;
};

struct TrainConfig {
  std::size_t epochs = 16;
  std::size_t batch = 1024;
  double lr = 2e-4;
  std::size_t width = 256;
  std::size_t depth = 5;
  std::size_t t_embed_dim = 128;
  AdamWConfig adamw;
};

struct TrainResult {
  MlpParams params;
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
  std::size_t optimizer_steps = 0;
};

/// AdamW with cosine decay over epochs * ceil(rows / batch) steps.
TrainResult train_model(const Model& model, const Matrix& train, const TrainConfig& cfg,
                        std::uint64_t seed);

/// The model's own training objective on `data`, with noise drawn from `seed`.
double validation_objective(const Model& model, const MlpParams& params, const Matrix& data,
                            std::uint64_t seed, std::size_t batch = 1024);

}  // namespace htbench
