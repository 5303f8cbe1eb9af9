#include "htbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "htbench/error.hpp"

namespace htbench {

namespace fs = std::filesystem;

namespace {

std::string superscript(int e) {
  static const char* digits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
  std::string out = e < 0 ? "⁻" : "";
  const std::string s = std::to_string(e < 0 ? -e : e);
  for (char c : s) out += digits[c - '0'];
  return out;
}

std::string column_title(const AggregateRow& r) {
  if (r.metric == "mmd_rbf") return "MMD-RBF";
  if (r.metric == "tce" && r.level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "TCE(%g)", *r.level * 100.0);
    return buf;
  }
  return r.level ? r.metric + "(" + format_number(*r.level) + ")" : r.metric;
}

}  // namespace

std::string format_sci(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  const bool neg = v < 0;
  const double a = std::fabs(v);
  int e = static_cast<int>(std::floor(std::log10(a)));
  double m = std::round(a / std::pow(10.0, e) * 100.0) / 100.0;
  if (m >= 10.0) {
    m /= 10.0;
    ++e;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", m);
  std::string out = neg ? "-" : "";
  out += buf;
  if (e != 0) out += "·10" + superscript(e);
  return out;
}

std::string format_cell(double mean, double std) { return format_sci(mean) + " ± " + format_sci(std); }

std::string model_label(const std::string& key) {
  if (key == "ddpm") return "DDPM";
  if (key == "gf_linear") return "GF-Linear";
  if (key.rfind("dlpm_a", 0) == 0) return "DLPM (α=" + key.substr(6) + ")";
  return key;
}

std::string render_tables(const std::vector<AggregateRow>& rows) {
  std::vector<std::string> datasets;
  for (const auto& r : rows) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
  }
  std::ostringstream os;
  for (const auto& ds : datasets) {
    std::vector<std::string> columns;
    std::vector<std::string> models;
    std::map<std::pair<std::string, std::string>, const AggregateRow*> cells;
    for (const auto& r : rows) {
      if (r.dataset != ds) continue;
      const std::string col = column_title(r);
      if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
      if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
      cells[{r.model, col}] = &r;
    }
    os << "## " << ds << "\n\n| Model |";
    for (const auto& c : columns) os << ' ' << c << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& m : models) {
      os << "| " << model_label(m) << " |";
      for (const auto& c : columns) {
        auto it = cells.find({m, c});
        if (it == cells.end()) {
          os << " n/a |";
          continue;
        }
        const std::string text = format_cell(it->second->mean, it->second->std);
        os << ' ' << (it->second->best ? "**" + text + "**" : text) << " |";
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

ReportOutput render_report(const fs::path& results_dir, fs::path out_dir) {
  const fs::path results = results_dir / "results.csv";
  require(fs::exists(results), "no results.csv in " + results_dir.string());
  if (out_dir.empty()) out_dir = results_dir / "report";

  ReportOutput out;
  out.directory = out_dir;
  const auto rows = read_results_csv(results, &out.malformed);
  require(!rows.empty(), "results.csv in " + results_dir.string() + " has no valid rows");
  const auto agg = aggregate(rows);

  std::ostringstream md;
  md << "# Benchmark report\n\n"
     << "Cells show the mean over trials with the sample standard deviation; the best mean per column is bold.\n"
     << "Hyperparameters were picked with each model's own training objective on the validation split, "
        "so pilot objectives are not comparable across families.\n\n";
  md << render_tables(agg);
  if (!out.malformed.empty()) {
    md << "## Skipped rows\n\n";
    for (const auto& m : out.malformed) md << "- " << m << '\n';
    md << '\n';
  }
  out.markdown = md.str();

  fs::create_directories(out_dir);
  std::ofstream(out_dir / "report.md", std::ios::binary) << out.markdown;
  std::ofstream summary(out_dir / "summary.csv", std::ios::binary);
  summary << "dataset,model,metric,level,mean,std,count,best\n";
  for (const auto& r : agg) {
    summary << r.dataset << ',' << r.model << ',' << r.metric << ',' << (r.level ? format_number(*r.level) : "")
            << ',' << format_number(r.mean) << ',' << format_number(r.std) << ',' << r.count << ','
            << (r.best ? 1 : 0) << '\n';
  }
  const fs::path curves = results_dir / "curves";
  if (fs::is_directory(curves)) {
    fs::create_directories(out_dir / "curves");
    for (const auto& entry : fs::directory_iterator(curves)) {
      if (entry.path().extension() == ".csv") {
        fs::copy_file(entry.path(), out_dir / "curves" / entry.path().filename(),
                      fs::copy_options::overwrite_existing);
      }
    }
  }
  return out;
}

}  // namespace htbench
