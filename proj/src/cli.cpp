#include "htbench/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "htbench/bench.hpp"
#include "htbench/bounds.hpp"
#include "htbench/data.hpp"
#include "htbench/error.hpp"
#include "htbench/metrics.hpp"
#include "htbench/models.hpp"
#include "htbench/report.hpp"
#include "htbench/selfcheck.hpp"

namespace htbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutputEnv = "HTBENCH_OUTPUT_DIR";

struct Common {
  std::string output_dir;
};

// Flag beats environment beats `fallback`.
fs::path resolve_output_dir(const Common& common, const std::string& fallback) {
  if (!common.output_dir.empty()) return common.output_dir;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return fallback;
}

fs::path output_path(const fs::path& root, const std::string& name) {
  const fs::path rel(name);
  require(!name.empty(), "output name must be nonempty");
  require(rel.is_relative(), "output name '" + name + "' must be relative to the output directory");
  for (const auto& part : rel) require(part != "..", "output name '" + name + "' may not leave the output directory");
  return root / rel;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec m;
  m.family = parse_family(j.at("family").get<std::string>());
  m.steps = j.at("steps").get<std::size_t>();
  m.sigma_max = j.value("sigma_max", 1.0);
  m.alpha = j.value("alpha", 1.7);
  m.huber_threshold = j.value("huber_threshold", 1.0);
  return m;
}

json spec_to_json(const ModelSpec& m) {
  return {{"family", family_name(m.family)},
          {"steps", m.steps},
          {"sigma_max", m.sigma_max},
          {"alpha", m.alpha},
          {"huber_threshold", m.huber_threshold}};
}

struct GenDataArgs {
  std::string kind = "alpha_stable_iso";
  std::string name;
  std::size_t n = 4096;
  std::size_t dim = 30;
  double alpha = 1.7;
  double mean = 0.0;
  double std = 1.0;
  std::string path;
  bool standardize = false;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataArgs& a, const Common& common) {
  DatasetConfig cfg;
  cfg.kind = a.kind;
  cfg.name = a.name.empty() ? a.kind : a.name;
  cfg.dim = a.dim;
  cfg.alpha = a.alpha;
  cfg.mixture.alpha = a.alpha;
  cfg.mean = a.mean;
  cfg.std = a.std;
  cfg.path = a.path;
  cfg.standardize = a.standardize;
  require(a.kind != "tabular" || !a.path.empty(), "--path is required for tabular data");
  const fs::path dir = output_path(resolve_output_dir(common, "runs"), cfg.name);
  const Dataset ds = make_dataset(cfg, a.n, a.seed);
  save_dataset(ds, dir);
  for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << ds.train.rows() << '/' << ds.val.rows() << '/' << ds.test.rows() << " rows of dim "
            << ds.dim() << " to " << dir.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string family = "ddpm";
  std::string name;
  std::size_t steps = 512;
  double sigma_max = 1.0;
  double alpha = 1.7;
  std::size_t epochs = 16;
  std::size_t batch = 1024;
  double lr = 2e-4;
  std::size_t width = 256;
  std::size_t depth = 5;
  std::size_t t_embed = 128;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, const Common& common) {
  ModelSpec spec;
  spec.family = parse_family(a.family);
  spec.steps = a.steps;
  spec.sigma_max = a.sigma_max;
  spec.alpha = a.alpha;
  const Model model(spec);
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch = a.batch;
  tc.lr = a.lr;
  tc.width = a.width;
  tc.depth = a.depth;
  tc.t_embed_dim = a.t_embed;
  require(tc.epochs >= 1 && tc.batch >= 1 && tc.lr > 0.0, "epochs, batch and lr must be positive");
  const std::string name = a.name.empty() ? spec.key() : a.name;
  const fs::path root = resolve_output_dir(common, "runs");
  const fs::path ckpt = output_path(root, name + ".ckpt");

  const Dataset ds = load_dataset(a.data);
  const auto result = train_model(model, ds.train, tc, a.seed);
  const double val = validation_objective(model, result.params, ds.val, a.seed, tc.batch);

  fs::create_directories(ckpt.parent_path());
  const json extra = {{"model", spec_to_json(spec)},
                      {"dataset", ds.name},
                      {"lr", a.lr},
                      {"epochs", a.epochs},
                      {"seed", a.seed},
                      {"validation_objective", val}};
  save_checkpoint(ckpt, result.params, static_cast<std::int64_t>(result.optimizer_steps), extra.dump());
  std::ofstream curve(output_path(root, name + "_loss.csv"));
  curve << "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    curve << e + 1 << ',' << format_number(result.epoch_loss[e]) << '\n';
  std::cout << "trained " << spec.label() << " for " << result.optimizer_steps << " steps; final loss "
            << format_number(result.epoch_loss.back()) << ", validation objective " << format_number(val)
            << "; checkpoint " << ckpt.string() << '\n';
  return 0;
}

struct SampleArgs {
  std::string checkpoint;
  std::string name = "samples";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a, const Common& common) {
  require(a.n >= 1, "--n must be positive");
  const fs::path out = output_path(resolve_output_dir(common, "runs"), a.name + ".csv");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const json header = json::parse(ck.header_json);
  require(header.contains("extra") && header.at("extra").contains("model"),
          "checkpoint " + a.checkpoint + " has no model description");
  const Model model(spec_from_json(header.at("extra").at("model")));
  const Matrix x = model.sample(mlp_predictor(ck.params), a.n, ck.params.config.out_dim, a.seed);
  fs::create_directories(out.parent_path());
  write_matrix_csv(out, x);
  std::cout << "wrote " << a.n << " samples from " << model.spec().label() << " to " << out.string() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string generated;
  std::string reference;
  std::string data;
};

int cmd_evaluate(const EvaluateArgs& a) {
  require(a.reference.empty() != a.data.empty(), "give exactly one of --reference and --data");
  const Matrix gen = read_matrix_csv(a.generated);
  const Matrix ref = a.data.empty() ? read_matrix_csv(a.reference) : load_dataset(a.data).test;
  require(gen.cols() == ref.cols(), "generated and reference samples differ in dimension");
  const auto mmd = mmd_rbf(gen, ref);
  const TceLevels levels;
  const auto t = tce_all(gen, ref, levels);
  json j = {{"mmd_rbf", mmd.value}, {"bandwidth", mmd.bandwidth}, {"degenerate", mmd.degenerate}};
  for (std::size_t i = 0; i < t.size(); ++i) j["tce_" + format_number(levels.levels[i])] = t[i];
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct BenchArgs {
  std::string config;
  std::optional<std::uint64_t> base_seed;
  std::optional<std::size_t> workers;
};

int cmd_bench(const BenchArgs& a, const Common& common, bool pilot_only) {
  BenchConfig cfg = BenchConfig::load(a.config);
  if (a.base_seed) cfg.base_seed = *a.base_seed;
  if (a.workers) cfg.workers = *a.workers;
  cfg.output_dir = resolve_output_dir(common, cfg.output_dir).string();
  const bool ok = run_bench(cfg, {}, pilot_only);
  std::cout << (pilot_only ? "pilot" : "benchmark") << " written to " << cfg.output_dir << '\n';
  if (!ok) {
    std::cerr << "htbench: error: more than half of the trials failed for some dataset/model pair; see "
              << (fs::path(cfg.output_dir) / "failures.csv").string() << '\n';
    return 1;
  }
  return 0;
}

struct BoundsArgs {
  double beta = 1.0;
  double gamma = 2.0;
  double d = 1.0;
  std::optional<double> n;
  bool table = false;
};

int cmd_bounds(const BoundsArgs& a) {
  DdpmBoundParams p;
  p.beta = a.beta;
  p.gamma = a.gamma;
  p.d = a.d;
  p.validate();
  const auto e = ddpm_exponents(a.beta, a.gamma, a.d);
  std::printf("a=%.10g\nb=%.10g\nc=%.10g\nrate=%.10g\n", e.a, e.b, e.c, ddpm_optimized_rate(a.beta, a.gamma, a.d));
  if (a.n) {
    require(*a.n >= 1.0, "--n must be >= 1");
    std::printf("t0=%.10g\nm=%zu\n", ddpm_optimal_t0(*a.n, e), dlpm_optimal_m(*a.n, a.beta, a.d));
  }
  if (a.table) {
    DlpmBoundParams q;
    q.beta_alpha = a.beta;
    q.d = a.d;
    const auto rows = tradeoff_table(p, q, geometric_grid(1e2, 1e8, 7), {1, 2, 5, 10, 20, 50, 100});
    write_tradeoff_csv(std::cout, rows);
  }
  return 0;
}

int cmd_report(const std::string& results, const std::string& out) {
  const auto r = render_report(results, out);
  for (const auto& m : r.malformed) std::cerr << "skipped malformed row " << m << '\n';
  std::cout << "report written to " << (r.directory / "report.md").string() << '\n';
  return 0;
}

int cmd_selfcheck() {
  bool ok = true;
  for (const auto& c : run_selfcheck()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"Heavy-tailed generative model benchmark"};
  app.name("htbench");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--output-dir", common.output_dir,
                 std::string("Directory for every file the command writes (env ") + kOutputEnv + ")");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate or load a dataset and cache its splits");
  gen_cmd->add_option("--kind", gen.kind)
      ->check(CLI::IsMember({"alpha_stable_iso", "alpha_stable_mix", "gaussian", "tabular"}));
  gen_cmd->add_option("--name", gen.name, "Cache directory name (default: kind)");
  gen_cmd->add_option("--n", gen.n)->check(CLI::Range(std::size_t{3}, std::size_t{100000000}));
  gen_cmd->add_option("--dim", gen.dim)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--alpha", gen.alpha)->check(CLI::Range(1e-9, 2.0));
  gen_cmd->add_option("--mean", gen.mean);
  gen_cmd->add_option("--std", gen.std)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--path", gen.path, "CSV file for tabular data")->check(CLI::ExistingFile);
  gen_cmd->add_flag("--standardize", gen.standardize);
  gen_cmd->add_option("--seed", gen.seed);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model on a cached dataset");
  train_cmd->add_option("--data", tr.data, "Dataset directory from gen-data")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--family", tr.family)->check(CLI::IsMember({"ddpm", "dlpm", "gf_linear"}));
  train_cmd->add_option("--name", tr.name, "Checkpoint name (default: model key)");
  train_cmd->add_option("--steps", tr.steps)->check(CLI::PositiveNumber);
  train_cmd->add_option("--sigma-max", tr.sigma_max)->check(CLI::PositiveNumber);
  train_cmd->add_option("--alpha", tr.alpha)->check(CLI::Range(1e-9, 2.0));
  train_cmd->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  train_cmd->add_option("--width", tr.width)->check(CLI::PositiveNumber);
  train_cmd->add_option("--depth", tr.depth)->check(CLI::PositiveNumber);
  train_cmd->add_option("--t-embed", tr.t_embed)->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed);

  SampleArgs sm;
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a checkpoint");
  sample_cmd->add_option("--checkpoint", sm.checkpoint)->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--name", sm.name, "Output CSV name");
  sample_cmd->add_option("--n", sm.n)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sm.seed);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score generated samples with MMD-RBF and TCE");
  eval_cmd->add_option("--generated", ev.generated)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--reference", ev.reference, "Reference CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset directory; its test split is the reference")
      ->check(CLI::ExistingDirectory);

  BenchArgs pa;
  auto* pilot_cmd = app.add_subcommand("pilot", "Run the pilot grid and write the selected configurations");
  pilot_cmd->add_option("--config", pa.config)->required()->check(CLI::ExistingFile);
  pilot_cmd->add_option("--base-seed", pa.base_seed);
  pilot_cmd->add_option("--workers", pa.workers);

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Run the pilot and the main benchmark");
  bench_cmd->add_option("--config", ba.config)->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--base-seed", ba.base_seed);
  bench_cmd->add_option("--workers", ba.workers);

  BoundsArgs bo;
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate the sampling-error bound exponents");
  bounds_cmd->add_option("--beta", bo.beta)->check(CLI::PositiveNumber);
  bounds_cmd->add_option("--gamma", bo.gamma)->check(CLI::PositiveNumber);
  bounds_cmd->add_option("--d", bo.d)->check(CLI::PositiveNumber);
  bounds_cmd->add_option("--n", bo.n, "Sample count for the optimal t0 and m");
  bounds_cmd->add_flag("--table", bo.table, "Print the (n, T) trade-off table as CSV");

  std::string report_in, report_out;
  auto* report_cmd = app.add_subcommand("report", "Render Markdown tables from a results directory");
  report_cmd->add_option("--results", report_in, "Directory holding results.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "Report directory (default: <results>/report)");

  app.add_subcommand("selfcheck", "Run the invariant battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "htbench: error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, common);
    if (*train_cmd) return cmd_train(tr, common);
    if (*sample_cmd) return cmd_sample(sm, common);
    if (*eval_cmd) return cmd_evaluate(ev);
    if (*pilot_cmd) return cmd_bench(pa, common, true);
    if (*bench_cmd) return cmd_bench(ba, common, false);
    if (*bounds_cmd) return cmd_bounds(bo);
    if (*report_cmd) return cmd_report(report_in, report_out);
    return cmd_selfcheck();
  } catch (const InvalidArgument& e) {
    std::cerr << "htbench: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "htbench: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace htbench
