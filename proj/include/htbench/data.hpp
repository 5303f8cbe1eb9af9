#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "htbench/rng.hpp"

namespace htbench {

/// Per-column affine map fitted on a training split.
struct Standardizer {
  Vector mean;
  Vector std;
};

enum class DataSource { synthetic, tabular };

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// 80/10/10 split: train gets ceil(0.8 n), val ceil(0.1 n) capped so that
/// test keeps at least one row, test the rest.
SplitSizes split_sizes(std::size_t n);

struct Dataset {
  std::string name;
  DataSource source = DataSource::synthetic;
  Matrix train;
  Matrix val;
  Matrix test;
  std::optional<Standardizer> standardizer;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::string> warnings;

  std::size_t dim() const { return static_cast<std::size_t>(train.cols()); }
  std::size_t size() const {
    return static_cast<std::size_t>(train.rows() + val.rows() + test.rows());
  }
};

/// Mixture of isotropic stable clouds around centers in a low-rank subspace.
/// Defaults describe the 16-mode, rank-6 benchmark target.
struct MixtureConfig {
  std::size_t modes = 16;
  std::size_t latent_rank = 6;
  double imbalance_tau = 1.2;
  double mean_scale = 7.5;
  double base_scale = 0.55;
  double anisotropy = 1.0;
  double alpha = 1.7;

  void validate(std::size_t dim) const;
  /// p_k proportional to k^-tau, k = 1..modes.
  std::vector<double> mode_probabilities() const;
};

/// Fixed geometry of a mixture: orthonormal basis, latent centers and
/// per-axis noise multipliers, all derived from the dataset seed.
struct MixtureGeometry {
  Matrix basis;              // dim x latent_rank, orthonormal columns
  Matrix latent_centers;     // modes x latent_rank
  Vector axis_multipliers;   // dim
};

MixtureGeometry make_mixture_geometry(std::size_t dim, const MixtureConfig& cfg,
                                      std::uint64_t seed);

struct MixtureDraw {
  Matrix x;
  std::vector<std::size_t> mode;  // 0-based component index per row
};

/// Raw (unsplit) mixture rows with their component labels.
MixtureDraw sample_alpha_stable_mix(std::size_t n, std::size_t dim, const MixtureConfig& cfg,
                                    std::uint64_t seed);

Dataset gen_alpha_stable_iso(std::size_t n, std::size_t dim, double alpha, std::uint64_t seed);

Dataset gen_alpha_stable_mix(std::size_t n, std::size_t dim, const MixtureConfig& cfg,
                             std::uint64_t seed);

/// Gaussian N(mean, std^2 I) target; used for trainability smoke runs.
Dataset gen_gaussian(std::size_t n, std::size_t dim, double mean, double std, std::uint64_t seed);

/// Split already-shuffled rows into train/val/test.
Dataset split_rows(const Matrix& rows, std::string name, DataSource source, std::uint64_t seed);

/// Numeric columns of a comma-separated file with a header row. A column is
/// numeric iff every cell parses as a finite double.
struct CsvTable {
  std::vector<std::string> columns;
  Matrix values;  // rows x numeric columns
  std::vector<std::string> dropped;
};

CsvTable read_numeric_csv(const std::filesystem::path& path);

/// Shuffle with `seed`, keep `n` rows (clamped, with a warning), split, and
/// optionally standardize with statistics from the training split.
Dataset load_tabular(const std::filesystem::path& path, bool standardize, std::size_t n,
                     std::uint64_t seed);

Standardizer fit_standardizer(const Matrix& x);
Matrix apply_standardizer(const Matrix& x, const Standardizer& s);
Matrix invert_standardizer(const Matrix& x, const Standardizer& s);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Cache layout: train.csv, val.csv, test.csv and dataset.json in `dir`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace htbench
