#include "htbench/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "htbench/error.hpp"

namespace htbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t w = requested;
  if (w == 0) w = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, jobs));
}

// Runs fn(i) for i in [0, count) on a bounded pool. fn must not throw.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (count == 0) return;
  workers = worker_count(workers, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

TrainConfig pilot_train_config(const PilotGrid& g, double lr) {
  TrainConfig tc;
  tc.epochs = g.epochs;
  tc.batch = g.batch;
  tc.lr = lr;
  tc.width = g.width;
  tc.depth = g.depth;
  tc.t_embed_dim = g.t_embed_dim;
  return tc;
}

TrainConfig main_train_config(const MainConfig& m, double lr) {
  TrainConfig tc;
  tc.epochs = m.epochs;
  tc.batch = m.batch;
  tc.lr = lr;
  tc.width = m.width;
  tc.depth = m.depth;
  tc.t_embed_dim = m.t_embed_dim;
  return tc;
}

json model_json(const ModelSpec& m) {
  json j = {{"family", family_name(m.family)}, {"steps", m.steps}};
  if (m.family == Family::dlpm) {
    j["alpha"] = m.alpha;
    j["huber_threshold"] = m.huber_threshold;
  } else {
    j["sigma_max"] = m.sigma_max;
  }
  return j;
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    require(allowed.count(k) > 0, "unknown key '" + k + "' in " + where);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << text;
}

std::string level_text(const std::optional<double>& level) {
  return level ? format_number(*level) : std::string();
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- datasets

json DatasetConfig::to_json() const {
  json j = {{"name", name}, {"kind", kind}};
  if (kind == "alpha_stable_iso") {
    j["dim"] = dim;
    j["alpha"] = alpha;
  } else if (kind == "alpha_stable_mix") {
    j["dim"] = dim;
    j["mixture"] = {{"modes", mixture.modes},
                    {"latent_rank", mixture.latent_rank},
                    {"imbalance_tau", mixture.imbalance_tau},
                    {"mean_scale", mixture.mean_scale},
                    {"base_scale", mixture.base_scale},
                    {"anisotropy", mixture.anisotropy},
                    {"alpha", mixture.alpha}};
  } else if (kind == "tabular") {
    j["path"] = path;
    j["standardize"] = standardize;
  } else if (kind == "gaussian") {
    j["dim"] = dim;
    j["mean"] = mean;
    j["std"] = std;
  }
  return j;
}

DatasetConfig DatasetConfig::from_json(const json& j) {
  check_keys(j, {"name", "kind", "dim", "alpha", "mixture", "path", "standardize", "mean", "std"},
             "dataset entry");
  DatasetConfig c;
  read_if(j, "kind", c.kind);
  c.name = j.value("name", c.kind);
  read_if(j, "dim", c.dim);
  read_if(j, "alpha", c.alpha);
  read_if(j, "path", c.path);
  read_if(j, "standardize", c.standardize);
  read_if(j, "mean", c.mean);
  read_if(j, "std", c.std);
  if (j.contains("mixture")) {
    const auto& m = j.at("mixture");
    check_keys(m, {"modes", "latent_rank", "imbalance_tau", "mean_scale", "base_scale", "anisotropy", "alpha"},
               "mixture");
    read_if(m, "modes", c.mixture.modes);
    read_if(m, "latent_rank", c.mixture.latent_rank);
    read_if(m, "imbalance_tau", c.mixture.imbalance_tau);
    read_if(m, "mean_scale", c.mixture.mean_scale);
    read_if(m, "base_scale", c.mixture.base_scale);
    read_if(m, "anisotropy", c.mixture.anisotropy);
    read_if(m, "alpha", c.mixture.alpha);
  }
  static const std::set<std::string> kinds{"alpha_stable_iso", "alpha_stable_mix", "tabular", "gaussian"};
  require(kinds.count(c.kind) > 0, "unknown dataset kind '" + c.kind + "'");
  require(!c.name.empty(), "dataset name must be nonempty");
  require(c.kind != "tabular" || !c.path.empty(), "tabular dataset '" + c.name + "' needs a path");
  return c;
}

Dataset make_dataset(const DatasetConfig& cfg, std::size_t n, std::uint64_t seed) {
  Dataset ds;
  if (cfg.kind == "alpha_stable_iso") {
    ds = gen_alpha_stable_iso(n, cfg.dim, cfg.alpha, seed);
  } else if (cfg.kind == "alpha_stable_mix") {
    ds = gen_alpha_stable_mix(n, cfg.dim, cfg.mixture, seed);
  } else if (cfg.kind == "tabular") {
    ds = load_tabular(cfg.path, cfg.standardize, n, seed);
  } else if (cfg.kind == "gaussian") {
    ds = gen_gaussian(n, cfg.dim, cfg.mean, cfg.std, seed);
  } else {
    throw InvalidArgument("unknown dataset kind '" + cfg.kind + "'");
  }
  ds.name = cfg.name;
  return ds;
}

// ---------------------------------------------------------------- configs

void PilotGrid::validate() const {
  require(trials >= 1, "pilot trials must be >= 1");
  require(!learning_rates.empty(), "pilot needs at least one learning rate");
  require(!sigma_max_values.empty(), "pilot needs at least one sigma_max value");
  for (double lr : learning_rates) require(lr > 0.0 && std::isfinite(lr), "pilot learning rates must be positive");
  for (double s : sigma_max_values) require(s > 0.0 && std::isfinite(s), "pilot sigma_max values must be positive");
  require(steps >= 1 && epochs >= 1 && batch >= 1 && depth >= 1 && width >= 1,
          "pilot steps, epochs, batch, depth and width must be positive");
  require(samples >= 10, "pilot samples must be >= 10");
}

void MainConfig::validate() const {
  require(trials >= 1, "main trials must be >= 1");
  require(steps >= 1 && epochs >= 1 && batch >= 1 && depth >= 1 && width >= 1,
          "main steps, epochs, batch, depth and width must be positive");
  require(samples >= 10, "main samples must be >= 10");
  for (double a : dlpm_alphas) require(a > 0.0 && a <= 2.0, "dlpm alphas must lie in (0, 2]");
  levels.validate();
}

std::string selection_key(const std::string& dataset, const ModelSpec& model) {
  return dataset + "/" + model.key();
}

std::vector<ModelSpec> BenchConfig::models(std::size_t steps) const {
  std::vector<ModelSpec> out;
  for (Family f : families) {
    if (f == Family::dlpm) {
      for (double a : main.dlpm_alphas) {
        ModelSpec m;
        m.family = f;
        m.steps = steps;
        m.alpha = a;
        out.push_back(m);
      }
    } else {
      ModelSpec m;
      m.family = f;
      m.steps = steps;
      out.push_back(m);
    }
  }
  return out;
}

BenchConfig BenchConfig::preset(const std::string& name) {
  BenchConfig c;
  DatasetConfig iso;
  iso.name = "alpha_stable_iso";
  iso.kind = "alpha_stable_iso";
  DatasetConfig mix;
  mix.name = "alpha_stable_mix";
  mix.kind = "alpha_stable_mix";
  if (name == "full" || name == "main" || name == "pilot") {
    c.datasets = {iso, mix};
    c.output_dir = "runs/" + name;
    if (name == "pilot") c.main.trials = 1;
    return c;
  }
  if (name == "pilot-mini" || name == "main-mini" || name == "mini") {
    c.datasets = {iso};
    c.pilot.samples = 1024;
    c.pilot.epochs = 4;
    c.pilot.trials = 2;
    c.pilot.batch = 16;
    c.main.samples = 4096;
    c.main.batch = 16;
    c.main.epochs = 32;
    c.main.trials = 3;
    c.main.steps = 128;
    c.output_dir = "runs/" + name;
    return c;
  }
  throw InvalidArgument("unknown preset '" + name + "' (expected full, pilot, main, pilot-mini, main-mini)");
}

BenchConfig BenchConfig::from_json(const json& j) {
  check_keys(j, {"preset", "datasets", "models", "pilot", "main", "output_dir", "base_seed", "workers", "overrides"},
             "config");
  BenchConfig c = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : BenchConfig{};
  if (j.contains("datasets")) {
    c.datasets.clear();
    for (const auto& d : j.at("datasets")) c.datasets.push_back(DatasetConfig::from_json(d));
  }
  if (j.contains("models")) {
    c.families.clear();
    for (const auto& m : j.at("models")) c.families.push_back(parse_family(m.get<std::string>()));
  }
  if (j.contains("pilot")) {
    const auto& p = j.at("pilot");
    check_keys(p, {"enabled", "samples", "learning_rates", "sigma_max_values", "steps", "trials", "epochs", "batch",
                   "depth", "width", "t_embed_dim"},
               "pilot");
    read_if(p, "enabled", c.pilot.enabled);
    read_if(p, "samples", c.pilot.samples);
    read_if(p, "learning_rates", c.pilot.learning_rates);
    read_if(p, "sigma_max_values", c.pilot.sigma_max_values);
    read_if(p, "steps", c.pilot.steps);
    read_if(p, "trials", c.pilot.trials);
    read_if(p, "epochs", c.pilot.epochs);
    read_if(p, "batch", c.pilot.batch);
    read_if(p, "depth", c.pilot.depth);
    read_if(p, "width", c.pilot.width);
    read_if(p, "t_embed_dim", c.pilot.t_embed_dim);
  }
  if (j.contains("main")) {
    const auto& m = j.at("main");
    check_keys(m, {"samples", "epochs", "trials", "batch", "steps", "depth", "width", "t_embed_dim", "dlpm_alphas",
                   "tce_levels"},
               "main");
    read_if(m, "samples", c.main.samples);
    read_if(m, "epochs", c.main.epochs);
    read_if(m, "trials", c.main.trials);
    read_if(m, "batch", c.main.batch);
    read_if(m, "steps", c.main.steps);
    read_if(m, "depth", c.main.depth);
    read_if(m, "width", c.main.width);
    read_if(m, "t_embed_dim", c.main.t_embed_dim);
    read_if(m, "dlpm_alphas", c.main.dlpm_alphas);
    read_if(m, "tce_levels", c.main.levels.levels);
  }
  read_if(j, "output_dir", c.output_dir);
  read_if(j, "base_seed", c.base_seed);
  read_if(j, "workers", c.workers);
  if (j.contains("overrides")) {
    for (const auto& [key, v] : j.at("overrides").items()) {
      check_keys(v, {"lr", "sigma_max"}, "override '" + key + "'");
      Selection s;
      read_if(v, "lr", s.lr);
      read_if(v, "sigma_max", s.sigma_max);
      s.objective = std::numeric_limits<double>::quiet_NaN();
      require(s.lr > 0.0 && s.sigma_max > 0.0, "override '" + key + "' needs positive lr and sigma_max");
      c.overrides[key] = s;
    }
  }
  require(!c.datasets.empty(), "config declares no datasets");
  require(!c.families.empty(), "config declares no models");
  c.pilot.validate();
  c.main.validate();
  return c;
}

BenchConfig BenchConfig::load(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json BenchConfig::to_json() const {
  json ds = json::array();
  for (const auto& d : datasets) ds.push_back(d.to_json());
  json fams = json::array();
  for (Family f : families) fams.push_back(family_name(f));
  json ov = json::object();
  for (const auto& [k, s] : overrides) ov[k] = {{"lr", s.lr}, {"sigma_max", s.sigma_max}};
  return {{"datasets", ds},
          {"models", fams},
          {"pilot",
           {{"enabled", pilot.enabled},
            {"samples", pilot.samples},
            {"learning_rates", pilot.learning_rates},
            {"sigma_max_values", pilot.sigma_max_values},
            {"steps", pilot.steps},
            {"trials", pilot.trials},
            {"epochs", pilot.epochs},
            {"batch", pilot.batch},
            {"depth", pilot.depth},
            {"width", pilot.width},
            {"t_embed_dim", pilot.t_embed_dim}}},
          {"main",
           {{"samples", main.samples},
            {"epochs", main.epochs},
            {"trials", main.trials},
            {"batch", main.batch},
            {"steps", main.steps},
            {"depth", main.depth},
            {"width", main.width},
            {"t_embed_dim", main.t_embed_dim},
            {"dlpm_alphas", main.dlpm_alphas},
            {"tce_levels", main.levels.levels}}},
          {"output_dir", output_dir},
          {"base_seed", base_seed},
          {"workers", workers},
          {"overrides", ov}};
}

std::uint64_t BenchConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  j.erase("workers");
  return fnv1a64(j.dump());
}

// ---------------------------------------------------------------- pilot

PilotOutcome run_pilot(const std::vector<std::pair<DatasetConfig, Dataset>>& datasets, const BenchConfig& cfg,
                       const BenchHooks& hooks) {
  const PilotGrid& g = cfg.pilot;
  g.validate();

  struct Point {
    std::size_t dataset;
    ModelSpec model;
    double lr;
  };
  std::vector<Point> points;
  const auto models = cfg.models(g.steps);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (const auto& base : models) {
      std::vector<double> lrs = g.learning_rates;
      std::vector<double> sigmas = g.sigma_max_values;
      std::sort(lrs.begin(), lrs.end());
      std::sort(sigmas.begin(), sigmas.end());
      if (base.family == Family::dlpm) sigmas = {1.0};
      for (double lr : lrs) {
        for (double s : sigmas) {
          ModelSpec m = base;
          m.sigma_max = s;
          points.push_back({d, m, lr});
        }
      }
    }
  }

  PilotOutcome out;
  out.records.resize(points.size() * g.trials);
  parallel_for(out.records.size(), cfg.workers, [&](std::size_t job) {
    const Point& p = points[job / g.trials];
    const std::size_t trial = job % g.trials;
    const auto& [dcfg, data] = datasets[p.dataset];
    PilotRecord& rec = out.records[job];
    rec.dataset = dcfg.name;
    rec.model = p.model.key();
    rec.lr = p.lr;
    rec.sigma_max = p.model.sigma_max;
    rec.trial = trial;
    rec.seed = cfg.base_seed + trial;
    try {
      if (hooks.before_trial) hooks.before_trial(dcfg.name, p.model, p.lr, p.model.sigma_max, trial);
      if (hooks.pilot_objective) {
        rec.objective = hooks.pilot_objective(data, p.model, p.lr, trial);
      } else {
        const Model model(p.model);
        const auto trained = train_model(model, data.train, pilot_train_config(g, p.lr), rec.seed);
        rec.objective = validation_objective(model, trained.params, data.val, rec.seed, g.batch);
      }
      if (!std::isfinite(rec.objective)) rec.error = "nonfinite validation objective";
    } catch (const std::exception& e) {
      rec.objective = std::numeric_limits<double>::quiet_NaN();
      rec.error = e.what();
    }
  });

  // Points are already in (lr, sigma) ascending order, so a strict
  // comparison keeps the tie-breaking rule.
  std::map<std::string, std::pair<double, Selection>> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    const std::string key = selection_key(datasets[p.dataset].first.name, p.model);
    double sum = 0.0;
    bool ok = true;
    for (std::size_t t = 0; t < g.trials; ++t) {
      const auto& rec = out.records[i * g.trials + t];
      if (!rec.error.empty()) ok = false;
      sum += rec.objective;
    }
    if (!ok) {
      out.disqualified.push_back(key + "@lr=" + format_number(p.lr) + ",sigma_max=" + format_number(p.model.sigma_max));
      continue;
    }
    const double mean = sum / static_cast<double>(g.trials);
    auto it = best.find(key);
    if (it == best.end() || mean < it->second.first) {
      best[key] = {mean, Selection{p.lr, p.model.sigma_max, mean}};
    }
  }
  for (const auto& [k, v] : best) out.selected[k] = v.second;
  return out;
}

// ---------------------------------------------------------------- main

namespace {

std::uint64_t pair_hash(const DatasetConfig& d, const ModelSpec& m, const Selection& s, const BenchConfig& cfg) {
  const json j = {{"dataset", d.to_json()},
                  {"model", model_json(m)},
                  {"lr", s.lr},
                  {"sigma_max", s.sigma_max},
                  {"main", cfg.to_json().at("main")},
                  {"base_seed", cfg.base_seed}};
  return fnv1a64(j.dump());
}

}  // namespace

MainOutcome run_main(const std::vector<std::pair<DatasetConfig, Dataset>>& datasets, const SelectionMap& selected,
                     const BenchConfig& cfg, const BenchHooks& hooks) {
  const MainConfig& mc = cfg.main;
  mc.validate();

  struct Pair {
    std::size_t dataset;
    ModelSpec model;
    Selection sel;
    std::uint64_t hash;
  };
  std::vector<Pair> pairs;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (ModelSpec m : cfg.models(mc.steps)) {
      const std::string key = selection_key(datasets[d].first.name, m);
      auto it = selected.find(key);
      require(it != selected.end(), "no selected configuration for " + key + " (run the pilot or add an override)");
      if (m.family != Family::dlpm) m.sigma_max = it->second.sigma_max;
      pairs.push_back({d, m, it->second, pair_hash(datasets[d].first, m, it->second, cfg)});
    }
  }

  struct TrialOut {
    std::vector<BenchResult> rows;
    std::optional<TrialFailure> failure;
    std::vector<double> curve;
  };
  std::vector<TrialOut> trials(pairs.size() * mc.trials);

  parallel_for(trials.size(), cfg.workers, [&](std::size_t job) {
    const Pair& p = pairs[job / mc.trials];
    const std::size_t trial = job % mc.trials;
    const auto& [dcfg, data] = datasets[p.dataset];
    const std::uint64_t seed = cfg.base_seed + trial;
    TrialOut& out = trials[job];
    const auto t_start = std::chrono::steady_clock::now();
    try {
      if (hooks.before_trial) hooks.before_trial(dcfg.name, p.model, p.sel.lr, p.sel.sigma_max, trial);
      const Model model(p.model);
      auto trained = train_model(model, data.train, main_train_config(mc, p.sel.lr), seed);
      const Matrix gen = model.sample(mlp_predictor(trained.params), static_cast<std::size_t>(data.test.rows()),
                                      data.dim(), seed);
      if (!gen.allFinite()) throw NumericError("generated samples contain nonfinite values", 0);
      const auto mmd = mmd_rbf(gen, data.test);
      const auto tces = tce_all(gen, data.test, mc.levels);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      const std::string curve_ref = "curves/" + dcfg.name + "_" + p.model.key() + ".csv";
      auto row = [&](std::string metric, std::optional<double> level, double value) {
        out.rows.push_back({dcfg.name, p.model.key(), p.hash, trial, seed, std::move(metric), level, value, wall,
                            curve_ref});
      };
      row("mmd_rbf", std::nullopt, mmd.value);
      for (std::size_t l = 0; l < tces.size(); ++l) row("tce", mc.levels.levels[l], tces[l]);
      out.curve = std::move(trained.epoch_loss);
    } catch (const std::exception& e) {
      out.rows.clear();
      out.failure = TrialFailure{dcfg.name, p.model.key(), trial, seed, e.what()};
    }
  });

  MainOutcome result;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t failed = 0;
    for (std::size_t t = 0; t < mc.trials; ++t) {
      auto& tr = trials[i * mc.trials + t];
      const auto& dname = datasets[pairs[i].dataset].first.name;
      if (tr.failure) {
        ++failed;
        result.failures.push_back(*tr.failure);
        continue;
      }
      for (auto& r : tr.rows) result.results.push_back(std::move(r));
      result.curves.push_back({dname, pairs[i].model.key(), t, std::move(tr.curve)});
    }
    if (2 * failed > mc.trials) {
      result.aborted.push_back(selection_key(datasets[pairs[i].dataset].first.name, pairs[i].model));
    }
  }
  return result;
}

// ---------------------------------------------------------------- summaries

std::vector<AggregateRow> aggregate(const std::vector<BenchResult>& results) {
  require(!results.empty(), "aggregate: no results");
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> values;
  auto same_cell = [](const AggregateRow& a, const BenchResult& r) {
    return a.dataset == r.dataset && a.model == r.model && a.metric == r.metric && a.level == r.level;
  };
  for (const auto& r : results) {
    std::size_t i = 0;
    while (i < rows.size() && !same_cell(rows[i], r)) ++i;
    if (i == rows.size()) {
      rows.push_back({r.dataset, r.model, r.metric, r.level});
      values.emplace_back();
    }
    values[i].push_back(r.value);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = values[i];
    require(!v.empty(), "aggregate: empty cell");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    rows[i].mean = mean;
    rows[i].std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    rows[i].count = v.size();
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool best = std::isfinite(rows[i].mean);
    for (std::size_t j = 0; j < rows.size() && best; ++j) {
      if (rows[j].dataset == rows[i].dataset && rows[j].metric == rows[i].metric && rows[j].level == rows[i].level &&
          rows[j].mean < rows[i].mean)
        best = false;
    }
    rows[i].best = best;
  }
  return rows;
}

std::vector<CurveSummary> loss_curves(const std::vector<TrialCurve>& curves) {
  require(!curves.empty(), "loss_curves: no curves recorded");
  std::vector<CurveSummary> out;
  for (const auto& c : curves) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const CurveSummary& s) { return s.dataset == c.dataset && s.model == c.model; });
    if (it == out.end()) {
      out.push_back({c.dataset, c.model, {}, {}, {}});
      it = std::prev(out.end());
    }
    if (!it->trials.empty() && it->trials.front().size() != c.loss.size()) {
      throw InvalidArgument("loss_curves: epochs misaligned across trials for " + c.dataset + "/" + c.model);
    }
    require(!c.loss.empty(), "loss_curves: empty curve for " + c.dataset + "/" + c.model);
    it->trials.push_back(c.loss);
  }
  for (auto& s : out) {
    const std::size_t epochs = s.trials.front().size();
    const double k = static_cast<double>(s.trials.size());
    s.mean.assign(epochs, 0.0);
    s.std.assign(epochs, 0.0);
    for (std::size_t e = 0; e < epochs; ++e) {
      double m = 0.0;
      for (const auto& t : s.trials) m += t[e];
      m /= k;
      double ss = 0.0;
      for (const auto& t : s.trials) ss += (t[e] - m) * (t[e] - m);
      s.mean[e] = m;
      s.std[e] = s.trials.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------- files

void write_results_csv(const fs::path& path, const std::vector<BenchResult>& rows) {
  std::ostringstream os;
  os << "dataset,model,config_hash,trial,seed,metric,level,value,curve_ref\n";
  for (const auto& r : rows) {
    os << r.dataset << ',' << r.model << ',' << hex64(r.config_hash) << ',' << r.trial << ',' << r.seed << ','
       << r.metric << ',' << level_text(r.level) << ',' << format_number(r.value) << ',' << r.curve_ref << '\n';
  }
  write_text(path, os.str());
}

std::vector<BenchResult> read_results_csv(const fs::path& path, std::vector<std::string>* malformed) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  std::string line;
  std::vector<BenchResult> rows;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) {
    if (malformed) malformed->push_back("line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() < 8) {
      bad("expected at least 8 fields, got " + std::to_string(cells.size()));
      continue;
    }
    BenchResult r;
    r.dataset = cells[0];
    r.model = cells[1];
    r.metric = cells[5];
    try {
      std::size_t used = 0;
      r.config_hash = std::stoull(cells[2], &used, 16);
      if (used != cells[2].size()) throw std::invalid_argument("hash");
      r.trial = std::stoull(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument("trial");
      r.seed = std::stoull(cells[4], &used);
      if (used != cells[4].size()) throw std::invalid_argument("seed");
      if (!cells[6].empty()) {
        r.level = std::stod(cells[6], &used);
        if (used != cells[6].size()) throw std::invalid_argument("level");
      }
      r.value = std::stod(cells[7], &used);
      if (used != cells[7].size()) throw std::invalid_argument("value");
    } catch (const std::exception&) {
      bad("unparsable numeric field");
      continue;
    }
    if (r.dataset.empty() || r.model.empty() || r.metric.empty()) {
      bad("empty dataset, model or metric");
      continue;
    }
    if (!std::isfinite(r.value)) {
      bad("nonfinite value");
      continue;
    }
    if (cells.size() > 8) r.curve_ref = cells[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

void write_curves(const fs::path& dir, const std::vector<CurveSummary>& curves) {
  fs::create_directories(dir);
  for (const auto& c : curves) {
    std::ostringstream os;
    os << "# training objective of " << c.model
       << "; model-specific scale, not comparable across model families\n";
    os << "epoch,mean,std";
    for (std::size_t t = 0; t < c.trials.size(); ++t) os << ",trial_" << t;
    os << '\n';
    for (std::size_t e = 0; e < c.mean.size(); ++e) {
      os << e + 1 << ',' << format_number(c.mean[e]) << ',' << format_number(c.std[e]);
      for (const auto& t : c.trials) os << ',' << format_number(t[e]);
      os << '\n';
    }
    write_text(dir / (c.dataset + "_" + c.model + ".csv"), os.str());
  }
}

void write_pilot_csv(const fs::path& path, const PilotOutcome& p) {
  std::ostringstream os;
  os << "dataset,model,lr,sigma_max,trial,seed,objective,error\n";
  for (const auto& r : p.records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << r.dataset << ',' << r.model << ',' << format_number(r.lr) << ',' << format_number(r.sigma_max) << ','
       << r.trial << ',' << r.seed << ',' << format_number(r.objective) << ',' << err << '\n';
  }
  write_text(path, os.str());
}

json selection_json(const SelectionMap& m) {
  json j = json::object();
  for (const auto& [k, s] : m) {
    j[k] = {{"lr", s.lr}, {"sigma_max", s.sigma_max}};
    if (std::isfinite(s.objective)) j[k]["objective"] = s.objective;
  }
  return j;
}

}  // namespace

bool run_bench(const BenchConfig& cfg, const BenchHooks& hooks, bool pilot_only) {
  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);

  SelectionMap selected;
  const auto main_models = cfg.models(cfg.main.steps);
  bool all_overridden = true;
  for (const auto& d : cfg.datasets) {
    for (const auto& m : main_models) {
      if (!cfg.overrides.count(selection_key(d.name, m))) all_overridden = false;
    }
  }

  json manifest = {{"tool", "htbench"},
                   {"version", kVersion},
                   {"config_hash", hex64(cfg.hash())},
                   {"base_seed", cfg.base_seed},
                   {"config", cfg.to_json()}};
  manifest["config"].erase("output_dir");
  manifest["config"].erase("workers");

  if (cfg.pilot.enabled && (pilot_only || !all_overridden)) {
    std::vector<std::pair<DatasetConfig, Dataset>> pilot_data;
    for (const auto& d : cfg.datasets) pilot_data.emplace_back(d, make_dataset(d, cfg.pilot.samples, cfg.base_seed));
    const PilotOutcome pilot = run_pilot(pilot_data, cfg, hooks);
    write_pilot_csv(out_dir / "pilot.csv", pilot);
    selected = pilot.selected;
    manifest["pilot"] = {{"disqualified", pilot.disqualified},
                         {"seeds", cfg.pilot.trials},
                         {"selection_metric",
                          "own training objective on the validation split; scales differ across families"}};
  }
  for (const auto& [k, s] : cfg.overrides) selected[k] = s;
  write_text(out_dir / "selected.json", selection_json(selected).dump(2) + "\n");
  if (pilot_only) {
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return true;
  }

  std::vector<std::pair<DatasetConfig, Dataset>> main_data;
  for (const auto& d : cfg.datasets) main_data.emplace_back(d, make_dataset(d, cfg.main.samples, cfg.base_seed));
  const MainOutcome main = run_main(main_data, selected, cfg, hooks);

  write_results_csv(out_dir / "results.csv", main.results);

  std::ostringstream fails;
  fails << "dataset,model,trial,seed,message\n";
  for (const auto& f : main.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    fails << f.dataset << ',' << f.model << ',' << f.trial << ',' << f.seed << ',' << msg << '\n';
  }
  write_text(out_dir / "failures.csv", fails.str());

  std::ostringstream timing;
  timing << "dataset,model,trial,wall_seconds\n";
  std::set<std::tuple<std::string, std::string, std::size_t>> seen;
  for (const auto& r : main.results) {
    if (!seen.insert({r.dataset, r.model, r.trial}).second) continue;
    timing << r.dataset << ',' << r.model << ',' << r.trial << ',' << format_number(r.wall_seconds) << '\n';
  }
  write_text(out_dir / "timings.csv", timing.str());

  if (!main.curves.empty()) write_curves(out_dir / "curves", loss_curves(main.curves));

  json seeds = json::array();
  for (std::size_t t = 0; t < cfg.main.trials; ++t) seeds.push_back(cfg.base_seed + t);
  manifest["trial_seeds"] = seeds;
  manifest["failures"] = main.failures.size();
  manifest["aborted"] = main.aborted;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return main.aborted.empty();
}

}  // namespace htbench
