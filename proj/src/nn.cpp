#include "htbench/nn.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "htbench/error.hpp"

namespace htbench {

namespace {

Eigen::ArrayXXd sigmoid(const Matrix& z) { return 1.0 / (1.0 + (-z.array()).exp()); }

Matrix embed_batch(std::span<const double> t, std::size_t dim) {
  const auto freqs = time_embedding_frequencies(dim);
  const auto half = static_cast<Eigen::Index>(dim / 2);
  Matrix e(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(t.size()));
  for (std::size_t c = 0; c < t.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    for (Eigen::Index j = 0; j < half; ++j) {
      const double arg = freqs[static_cast<std::size_t>(j)] * t[c];
      e(j, col) = std::sin(arg);
      e(j + half, col) = std::cos(arg);
    }
  }
  return e;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

template <typename Fn>
void for_each_block(MlpParams& p, Fn&& fn) {
  for (auto& layer : p.layers) {
    fn(layer.weight.data(), layer.weight.size());
    fn(layer.bias.data(), layer.bias.size());
  }
}

}  // namespace

void MlpConfig::validate() const {
  require(in_dim > 0 && out_dim > 0, "mlp: in_dim and out_dim must be positive");
  require(width > 0, "mlp: width must be positive");
  require(depth >= 1, "mlp: depth must be at least 1");
  require(t_embed_dim % 2 == 0, "mlp: time embedding dimension must be even");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers)
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return g;
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  require(layers.size() == other.layers.size(), "grads: layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

MlpGrads& MlpGrads::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

double MlpGrads::dot(const MlpGrads& other) const {
  require(layers.size() == other.layers.size(), "grads: layer count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    acc += layers[i].weight.cwiseProduct(other.layers[i].weight).sum();
    acc += layers[i].bias.dot(other.layers[i].bias);
  }
  return acc;
}

MlpParams zero_mlp(const MlpConfig& config) {
  config.validate();
  MlpParams p;
  p.config = config;
  auto fan_in = static_cast<Eigen::Index>(config.in_dim + config.t_embed_dim);
  for (std::size_t l = 0; l < config.depth; ++l) {
    const bool last = l + 1 == config.depth;
    const auto fan_out = static_cast<Eigen::Index>(last ? config.out_dim : config.width);
    p.layers.push_back({Matrix::Zero(fan_out, fan_in), Vector::Zero(fan_out)});
    fan_in = fan_out;
  }
  return p;
}

MlpParams init_mlp(const MlpConfig& config, std::uint64_t seed) {
  MlpParams p = zero_mlp(config);
  Rng rng = make_rng(seed, 0x6d6c70);
  for (auto& layer : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        layer.weight(i, j) = bound * (2.0 * uniform_open(rng) - 1.0);
  }
  return p;
}

std::vector<double> time_embedding_frequencies(std::size_t dim) {
  require(dim % 2 == 0 && dim > 0, "time_embedding: dim must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> f(half);
  for (std::size_t j = 0; j < half; ++j)
    f[j] = 1000.0 * std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(half));
  return f;
}

Vector time_embedding(double t, std::size_t dim) {
  const double ts[1] = {t};
  return embed_batch(ts, dim).col(0);
}

Matrix mlp_forward(const MlpParams& params, const Matrix& x, std::span<const double> t,
                   MlpCache* cache) {
  const auto& cfg = params.config;
  require(static_cast<std::size_t>(x.cols()) == cfg.in_dim, "mlp_forward: input width mismatch");
  require(static_cast<std::size_t>(x.rows()) == t.size(), "mlp_forward: one time per row required");
  require(params.layers.size() == cfg.depth, "mlp_forward: layer count does not match depth");

  const auto batch = x.rows();
  Matrix act(static_cast<Eigen::Index>(cfg.in_dim + cfg.t_embed_dim), batch);
  act.topRows(static_cast<Eigen::Index>(cfg.in_dim)) = x.transpose();
  if (cfg.t_embed_dim > 0)
    act.bottomRows(static_cast<Eigen::Index>(cfg.t_embed_dim)) = embed_batch(t, cfg.t_embed_dim);

  if (cache) {
    cache->inputs.clear();
    cache->preact.clear();
    cache->batch = static_cast<std::size_t>(batch);
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z = layer.weight * act;
    z.colwise() += layer.bias;
    if (cache) cache->inputs.push_back(std::move(act));
    if (l + 1 == params.layers.size()) return z.transpose();
    act = (z.array() * sigmoid(z)).matrix();
    if (cache) cache->preact.push_back(std::move(z));
  }
  return {};  // unreachable: depth >= 1
}

Matrix mlp_forward(const MlpParams& params, const Matrix& x, double t) {
  std::vector<double> ts(static_cast<std::size_t>(x.rows()), t);
  return mlp_forward(params, x, ts);
}

std::pair<Vector, MlpCache> mlp_forward(const MlpParams& params, const Vector& x, double t) {
  MlpCache cache;
  const double ts[1] = {t};
  Matrix out = mlp_forward(params, Matrix(x.transpose()), ts, &cache);
  return {out.row(0).transpose(), std::move(cache)};
}

MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix& grad_out) {
  const std::size_t depth = params.layers.size();
  require(cache.inputs.size() == depth && cache.preact.size() + 1 == depth,
          "mlp_backward: cache does not match network depth");
  require(static_cast<std::size_t>(grad_out.rows()) == cache.batch &&
              static_cast<std::size_t>(grad_out.cols()) == params.config.out_dim,
          "mlp_backward: grad_out shape does not match cached forward");
  for (std::size_t l = 0; l < depth; ++l)
    require(cache.inputs[l].rows() == params.layers[l].weight.cols(),
            "mlp_backward: stale cache (layer shape mismatch)");

  MlpGrads grads;
  grads.layers.resize(depth);
  Matrix delta = grad_out.transpose();
  for (std::size_t l = depth; l-- > 0;) {
    grads.layers[l].weight.noalias() = delta * cache.inputs[l].transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    const Matrix& z = cache.preact[l - 1];
    const Eigen::ArrayXXd s = sigmoid(z);
    const Eigen::ArrayXXd dsilu = s * (1.0 + z.array() * (1.0 - s));
    Matrix back = params.layers[l].weight.transpose() * delta;
    delta = (back.array() * dsilu).matrix();
  }
  return grads;
}

MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache, const Vector& grad_out) {
  return mlp_backward(params, cache, Matrix(grad_out.transpose()));
}

AdamWState AdamWState::init(const MlpParams& params, const AdamWConfig& config) {
  return AdamWState{config, MlpGrads::zeros_like(params), MlpGrads::zeros_like(params), 0};
}

void adamw_step(AdamWState& state, MlpParams& params, const MlpGrads& grads, double lr) {
  require(grads.layers.size() == params.layers.size() &&
              state.first.layers.size() == params.layers.size(),
          "adamw_step: layer count mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    require(grads.layers[l].weight.rows() == params.layers[l].weight.rows() &&
                grads.layers[l].weight.cols() == params.layers[l].weight.cols() &&
                grads.layers[l].bias.size() == params.layers[l].bias.size(),
            "adamw_step: gradient shape mismatch at layer " + std::to_string(l));
    if (!grads.layers[l].weight.allFinite() || !grads.layers[l].bias.allFinite())
      throw NumericError("adamw_step: non-finite gradient", l);
  }

  const auto& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * c.weight_decay;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    p *= decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, state.first.layers[l].weight, state.second.layers[l].weight,
           grads.layers[l].weight);
    update(params.layers[l].bias, state.first.layers[l].bias, state.second.layers[l].bias,
           grads.layers[l].bias);
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  require(total_steps > 0, "cosine_lr: total_steps must be positive");
  require(step <= total_steps, "cosine_lr: step exceeds total_steps");
  return lr0 * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params, std::int64_t step,
                     const std::string& extra_json) {
  using nlohmann::json;
  json shapes = json::array();
  for (const auto& l : params.layers) shapes.push_back({l.weight.rows(), l.weight.cols()});
  const auto& c = params.config;
  json header = {{"format", "htbench-mlp"},
                 {"config", {{"in_dim", c.in_dim}, {"out_dim", c.out_dim}, {"width", c.width},
                             {"depth", c.depth}, {"t_embed_dim", c.t_embed_dim}}},
                 {"shapes", shapes},
                 {"step", step},
                 {"parameter_count", params.parameter_count()},
                 {"extra", json::parse(extra_json)}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write("HTBCKPT1", 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto copy = params;
  for_each_block(copy, [&](double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "HTBCKPT1") throw std::runtime_error("not an htbench checkpoint");
  const auto len = get_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const json header = json::parse(text);
  MlpConfig cfg;
  const auto& jc = header.at("config");
  cfg.in_dim = jc.at("in_dim");
  cfg.out_dim = jc.at("out_dim");
  cfg.width = jc.at("width");
  cfg.depth = jc.at("depth");
  cfg.t_embed_dim = jc.at("t_embed_dim");
  Checkpoint ck{zero_mlp(cfg), header.at("step").get<std::int64_t>(), text};
  for_each_block(ck.params, [&](double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(in));
  });
  return ck;
}

}  // namespace htbench
