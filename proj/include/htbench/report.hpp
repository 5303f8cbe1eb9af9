#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "htbench/bench.hpp"

namespace htbench {

/// Three significant digits with a unicode power of ten, e.g. "1.11·10⁻³".
/// Values whose exponent is zero print without the power, e.g. "1.18".
std::string format_sci(double v);

/// "mean ± std" with both parts in format_sci style.
std::string format_cell(double mean, double std);

/// Display name for a model key such as "dlpm_a1.7".
std::string model_label(const std::string& key);

/// One Markdown table per dataset: rows per model, columns MMD-RBF and one
/// TCE column per level, column minimum in bold.
std::string render_tables(const std::vector<AggregateRow>& rows);

struct ReportOutput {
  std::filesystem::path directory;
  std::string markdown;
  std::vector<std::string> malformed;
};

/// Reads `results_dir`/results.csv and writes report.md, summary.csv and a copy
/// of the loss curves under `out_dir` (default: `results_dir`/report).
ReportOutput render_report(const std::filesystem::path& results_dir, std::filesystem::path out_dir = {});

}  // namespace htbench
