#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "htbench/rng.hpp"

namespace htbench {

/// Time-conditioned MLP: [x; emb(t)] -> width -> ... -> out_dim with SiLU on
/// hidden layers. `depth` counts weight matrices.
struct MlpConfig {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::size_t width = 256;
  std::size_t depth = 5;
  std::size_t t_embed_dim = 128;

  void validate() const;
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct MlpParams {
  MlpConfig config;
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Same layout as MlpParams; one entry per layer.
struct MlpGrads {
  std::vector<Layer> layers;

  static MlpGrads zeros_like(const MlpParams& params);
  MlpGrads& operator+=(const MlpGrads& other);
  MlpGrads& operator*=(double s);
  double dot(const MlpGrads& other) const;
};

/// Kaiming-uniform (fan-in) weights, zero biases.
MlpParams init_mlp(const MlpConfig& config, std::uint64_t seed);

MlpParams zero_mlp(const MlpConfig& config);

/// Sinusoidal embedding [sin(f_0 t) .. sin(f_{h-1} t), cos(f_0 t) .. cos(f_{h-1} t)]
/// with h = dim / 2 and f_j = 1000 * 10000^(-j / h).
Vector time_embedding(double t, std::size_t dim);

/// Frequency grid used by `time_embedding`.
std::vector<double> time_embedding_frequencies(std::size_t dim);

/// Activations stored column-per-sample for the backward pass.
struct MlpCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> preact;       // pre-activation of each hidden layer
  std::size_t batch = 0;
};

/// Batched forward on rows of `x` (batch x in_dim) at per-row times `t`.
/// Returns batch x out_dim. Fills `cache` when given.
Matrix mlp_forward(const MlpParams& params, const Matrix& x, std::span<const double> t,
                   MlpCache* cache = nullptr);

/// Batched forward with every row at the same time.
Matrix mlp_forward(const MlpParams& params, const Matrix& x, double t);

/// Single-sample forward.
std::pair<Vector, MlpCache> mlp_forward(const MlpParams& params, const Vector& x, double t);

/// Gradient of sum_rows <output, grad_out> with respect to every parameter.
MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix& grad_out);

MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache, const Vector& grad_out);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWConfig config;
  MlpGrads first;
  MlpGrads second;
  std::int64_t step = 0;

  static AdamWState init(const MlpParams& params, const AdamWConfig& config = {});
};

/// Decoupled weight decay p *= (1 - lr * wd), then bias-corrected Adam update.
/// Throws NumericError carrying the layer index on non-finite gradients.
void adamw_step(AdamWState& state, MlpParams& params, const MlpGrads& grads, double lr);

/// lr0 * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

/// Binary checkpoint: "HTBCKPT1", u64 little-endian header length, JSON header
/// (config, shapes, step, extra), then all weights and biases as little-endian f64.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     std::int64_t step, const std::string& extra_json = "{}");

struct Checkpoint {
  MlpParams params;
  std::int64_t step = 0;
  std::string header_json;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace htbench
