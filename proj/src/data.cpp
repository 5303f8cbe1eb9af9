#include "htbench/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "htbench/error.hpp"
#include "htbench/stable.hpp"

namespace htbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Matrix take_rows(const Matrix& m, Eigen::Index begin, Eigen::Index count) {
  return m.middleRows(begin, count);
}

std::uint64_t hash_json(const json& j) { return fnv1a64(j.dump()); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void shuffle_rows(Matrix& m, Rng& rng) {
  for (Eigen::Index i = m.rows() - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(i + 1));
    if (i != j) m.row(i).swap(m.row(j));
  }
}

}  // namespace

SplitSizes split_sizes(std::size_t n) {
  require(n >= 3, "split_sizes: need at least 3 rows for a train/val/test split");
  SplitSizes s;
  s.train = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n))),
                                  n - 2);
  s.val = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))),
                                n - s.train - 1);
  s.test = n - s.train - s.val;
  return s;
}

Dataset split_rows(const Matrix& rows, std::string name, DataSource source, std::uint64_t seed) {
  const auto sizes = split_sizes(static_cast<std::size_t>(rows.rows()));
  Dataset ds;
  ds.name = std::move(name);
  ds.source = source;
  ds.seed = seed;
  const auto tr = static_cast<Eigen::Index>(sizes.train);
  const auto va = static_cast<Eigen::Index>(sizes.val);
  const auto te = static_cast<Eigen::Index>(sizes.test);
  ds.train = take_rows(rows, 0, tr);
  ds.val = take_rows(rows, tr, va);
  ds.test = take_rows(rows, tr + va, te);
  return ds;
}

void MixtureConfig::validate(std::size_t dim) const {
  require(modes >= 1, "mixture: modes must be at least 1");
  require(latent_rank >= 1, "mixture: latent_rank must be at least 1");
  require(latent_rank <= dim, "mixture: latent_rank must not exceed the ambient dimension");
  require(imbalance_tau > 0.0, "mixture: imbalance_tau must be positive");
  require(mean_scale > 0.0, "mixture: mean_scale must be positive");
  require(base_scale > 0.0, "mixture: base_scale must be positive");
  require(anisotropy >= 1.0, "mixture: anisotropy must be at least 1");
  require(alpha > 0.0 && alpha <= 2.0, "mixture: alpha must lie in (0, 2]");
}

std::vector<double> MixtureConfig::mode_probabilities() const {
  std::vector<double> p(modes);
  for (std::size_t k = 0; k < modes; ++k)
    p[k] = std::pow(static_cast<double>(k + 1), -imbalance_tau);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

MixtureGeometry make_mixture_geometry(std::size_t dim, const MixtureConfig& cfg,
                                      std::uint64_t seed) {
  cfg.validate(dim);
  Rng rng = make_rng(seed, 1);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto r = static_cast<Eigen::Index>(cfg.latent_rank);
  Matrix gauss(d, r);
  fill_normal(rng, gauss);
  Eigen::HouseholderQR<Matrix> qr(gauss);
  MixtureGeometry g;
  g.basis = qr.householderQ() * Matrix::Identity(d, r);
  g.latent_centers.resize(static_cast<Eigen::Index>(cfg.modes), r);
  fill_normal(rng, g.latent_centers);
  g.axis_multipliers.resize(d);
  const double log_a = std::log(cfg.anisotropy);
  for (Eigen::Index j = 0; j < d; ++j)
    g.axis_multipliers[j] = std::exp(log_a * (2.0 * uniform_open(rng) - 1.0));
  return g;
}

MixtureDraw sample_alpha_stable_mix(std::size_t n, std::size_t dim, const MixtureConfig& cfg,
                                    std::uint64_t seed) {
  require(n > 0, "sample_alpha_stable_mix: n must be positive");
  const MixtureGeometry geo = make_mixture_geometry(dim, cfg, seed);
  const auto probs = cfg.mode_probabilities();
  std::vector<double> cdf(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cdf.begin());

  const Matrix centers = cfg.mean_scale * (geo.latent_centers * geo.basis.transpose());  // modes x dim

  Rng rng = make_rng(seed, 2);
  MixtureDraw out;
  out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  out.mode.resize(n);
  IsotropicStableLaw noise{cfg.alpha, dim, 1.0, {}};
  fill_isotropic_stable(noise, rng, out.x);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform_open(rng);
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cfg.modes - 1);
    out.mode[i] = k;
    const auto row = static_cast<Eigen::Index>(i);
    out.x.row(row) = centers.row(static_cast<Eigen::Index>(k)) +
                     cfg.base_scale * out.x.row(row).cwiseProduct(geo.axis_multipliers.transpose());
  }
  return out;
}

Dataset gen_alpha_stable_iso(std::size_t n, std::size_t dim, double alpha, std::uint64_t seed) {
  require(n >= 10, "gen_alpha_stable_iso: n must be at least 10");
  IsotropicStableLaw law{alpha, dim, 1.0, {}};
  Matrix rows = sample_isotropic_stable(law, n, seed);
  Dataset ds = split_rows(rows, "alpha_stable_iso", DataSource::synthetic, seed);
  ds.config_hash = hash_json({{"kind", "alpha_stable_iso"}, {"n", n}, {"dim", dim},
                              {"alpha", alpha}, {"seed", seed}});
  return ds;
}

Dataset gen_alpha_stable_mix(std::size_t n, std::size_t dim, const MixtureConfig& cfg,
                             std::uint64_t seed) {
  require(n >= 10, "gen_alpha_stable_mix: n must be at least 10");
  auto draw = sample_alpha_stable_mix(n, dim, cfg, seed);
  Dataset ds = split_rows(draw.x, "alpha_stable_mix", DataSource::synthetic, seed);
  ds.config_hash = hash_json({{"kind", "alpha_stable_mix"}, {"n", n}, {"dim", dim},
                              {"modes", cfg.modes}, {"latent_rank", cfg.latent_rank},
                              {"tau", cfg.imbalance_tau}, {"mean_scale", cfg.mean_scale},
                              {"base_scale", cfg.base_scale}, {"anisotropy", cfg.anisotropy},
                              {"alpha", cfg.alpha}, {"seed", seed}});
  return ds;
}

Dataset gen_gaussian(std::size_t n, std::size_t dim, double mean, double std, std::uint64_t seed) {
  require(n >= 10, "gen_gaussian: n must be at least 10");
  require(dim > 0 && std > 0.0, "gen_gaussian: need dim > 0 and std > 0");
  Rng rng = make_rng(seed);
  Matrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  fill_normal(rng, rows);
  rows = (rows.array() * std + mean).matrix();
  Dataset ds = split_rows(rows, "gaussian", DataSource::synthetic, seed);
  ds.config_hash = hash_json({{"kind", "gaussian"}, {"n", n}, {"dim", dim}, {"mean", mean},
                              {"std", std}, {"seed", seed}});
  return ds;
}

CsvTable read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw InvalidArgument("CSV file has no header row: " + path.string());
  const auto names = split_commas(header);
  const std::size_t ncols = names.size();

  std::vector<std::vector<double>> cols(ncols);
  std::vector<bool> numeric(ncols, true);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != ncols)
      throw InvalidArgument("CSV row " + std::to_string(row + 2) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(ncols));
    for (std::size_t c = 0; c < ncols; ++c) {
      if (!numeric[c]) continue;
      if (auto v = parse_double(cells[c])) {
        cols[c].push_back(*v);
      } else {
        numeric[c] = false;
        cols[c].clear();
      }
    }
    ++row;
  }

  CsvTable t;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < ncols; ++c) {
    if (numeric[c] && row > 0) {
      keep.push_back(c);
      t.columns.emplace_back(names[c]);
    } else {
      t.dropped.emplace_back(names[c]);
    }
  }
  if (keep.empty()) throw InvalidArgument("CSV file has no numeric columns: " + path.string());
  t.values.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    for (std::size_t i = 0; i < row; ++i)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[keep[j]][i];
  return t;
}

Dataset load_tabular(const fs::path& path, bool standardize, std::size_t n, std::uint64_t seed) {
  if (!fs::exists(path)) throw std::runtime_error("tabular dataset not found: " + path.string());
  CsvTable table = read_numeric_csv(path);
  Matrix rows = std::move(table.values);
  Rng rng = make_rng(seed);
  shuffle_rows(rows, rng);

  std::vector<std::string> warnings;
  const auto available = static_cast<std::size_t>(rows.rows());
  if (n > available) {
    warnings.push_back("requested " + std::to_string(n) + " rows but file has " +
                       std::to_string(available) + "; clamped");
    n = available;
  }
  Dataset ds = split_rows(rows.topRows(static_cast<Eigen::Index>(n)), path.stem().string(),
                          DataSource::tabular, seed);
  ds.warnings = std::move(warnings);
  if (standardize) {
    Standardizer s = fit_standardizer(ds.train);
    ds.train = apply_standardizer(ds.train, s);
    ds.val = apply_standardizer(ds.val, s);
    ds.test = apply_standardizer(ds.test, s);
    ds.standardizer = std::move(s);
  }
  ds.config_hash = hash_json({{"kind", "tabular"}, {"path", path.filename().string()}, {"n", n},
                              {"standardize", standardize}, {"seed", seed}});
  return ds;
}

Standardizer fit_standardizer(const Matrix& x) {
  require(x.rows() > 0, "fit_standardizer: empty matrix");
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.std = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j)
    if (!(s.std[j] > 0.0))
      throw InvalidArgument("fit_standardizer: zero standard deviation in column " +
                            std::to_string(j));
  return s;
}

Matrix apply_standardizer(const Matrix& x, const Standardizer& s) {
  require(x.cols() == s.mean.size() && x.cols() == s.std.size(),
          "apply_standardizer: dimension mismatch");
  return ((x.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array()).matrix();
}

Matrix invert_standardizer(const Matrix& x, const Standardizer& s) {
  require(x.cols() == s.mean.size() && x.cols() == s.std.size(),
          "invert_standardizer: dimension mismatch");
  return ((x.array().rowwise() * s.std.transpose().array()).matrix().rowwise() + s.mean.transpose());
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << "x" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const std::size_t ncols = split_commas(line).size();
  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != ncols) throw InvalidArgument("ragged matrix CSV: " + path.string());
    for (auto c : cells) {
      auto v = parse_double(c);
      if (!v) throw InvalidArgument("non-numeric cell in matrix CSV: " + path.string());
      flat.push_back(*v);
    }
    ++rows;
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ncols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < ncols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * ncols + j];
  return m;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix_csv(dir / "train.csv", ds.train);
  write_matrix_csv(dir / "val.csv", ds.val);
  write_matrix_csv(dir / "test.csv", ds.test);
  json meta = {{"name", ds.name},
               {"dim", ds.dim()},
               {"seed", ds.seed},
               {"source", ds.source == DataSource::synthetic ? "synthetic" : "tabular"},
               {"config_hash", ds.config_hash},
               {"sizes", {{"train", ds.train.rows()}, {"val", ds.val.rows()}, {"test", ds.test.rows()}}},
               {"warnings", ds.warnings}};
  if (ds.standardizer) {
    meta["standardizer"] = {
        {"mean", std::vector<double>(ds.standardizer->mean.data(),
                                     ds.standardizer->mean.data() + ds.standardizer->mean.size())},
        {"std", std::vector<double>(ds.standardizer->std.data(),
                                    ds.standardizer->std.data() + ds.standardizer->std.size())}};
  } else {
    meta["standardizer"] = nullptr;
  }
  std::ofstream(dir / "dataset.json") << meta.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in) throw std::runtime_error("missing dataset.json in " + dir.string());
  const json meta = json::parse(in);
  Dataset ds;
  ds.name = meta.at("name").get<std::string>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.source = meta.at("source").get<std::string>() == "tabular" ? DataSource::tabular
                                                                 : DataSource::synthetic;
  ds.config_hash = meta.value("config_hash", std::uint64_t{0});
  ds.warnings = meta.value("warnings", std::vector<std::string>{});
  ds.train = read_matrix_csv(dir / "train.csv");
  ds.val = read_matrix_csv(dir / "val.csv");
  ds.test = read_matrix_csv(dir / "test.csv");
  if (meta.contains("standardizer") && !meta["standardizer"].is_null()) {
    const auto mean = meta["standardizer"]["mean"].get<std::vector<double>>();
    const auto sd = meta["standardizer"]["std"].get<std::vector<double>>();
    ds.standardizer = Standardizer{Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                                   Eigen::Map<const Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()))};
  }
  require(ds.train.cols() == ds.val.cols() && ds.val.cols() == ds.test.cols(),
          "load_dataset: split widths differ");
  return ds;
}

}  // namespace htbench
