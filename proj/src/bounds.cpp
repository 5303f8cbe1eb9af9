#include "htbench/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "htbench/error.hpp"

namespace htbench {

namespace {

void check_ddpm_domain(double beta, double gamma, double d) {
  require(beta > 0.0 && beta <= 2.0, "ddpm bound: beta must lie in (0, 2]");
  require(gamma > 1.0, "ddpm bound: gamma must exceed 1");
  require(d > 0.0, "ddpm bound: d must be positive");
}

}  // namespace

void DdpmBoundParams::validate() const {
  check_ddpm_domain(beta, gamma, d);
  require(n >= 2.0, "ddpm bound: n must be at least 2");
  require(T > 0.0, "ddpm bound: T must be positive");
  require(t0 > 0.0 && t0 < T, "ddpm bound: t0 must lie in (0, T)");
  require(const_app > 0.0 && const_est > 0.0 && const_init > 0.0, "ddpm bound: multipliers must be positive");
  require(polylog_power >= 0.0, "ddpm bound: polylog power must be nonnegative");
}

void DlpmBoundParams::validate() const {
  require(beta_alpha > 0.0, "dlpm bound: beta(alpha) must be positive");
  require(d > 0.0, "dlpm bound: d must be positive");
  require(n >= 1.0, "dlpm bound: n must be at least 1");
  require(T > 0.0, "dlpm bound: T must be positive");
  require(m >= 1.0, "dlpm bound: m must be at least 1");
  require(comp >= 0.0, "dlpm bound: Comp must be nonnegative");
  require(delta > 0.0 && delta < 1.0, "dlpm bound: delta must lie in (0, 1)");
  require(c > 0.0, "dlpm bound: c must be positive");
  require(const_app > 0.0 && const_est > 0.0 && const_init > 0.0, "dlpm bound: multipliers must be positive");
}

DdpmExponents ddpm_exponents(double beta, double gamma, double d) {
  check_ddpm_domain(beta, gamma, d);
  const double g1 = gamma + 1.0;
  return {beta * g1 / (d + 2.0 * g1 + 2.0 * beta), d * g1 / (4.0 * (d + g1)), g1 / (2.0 * (d + g1))};
}

double ddpm_optimal_t0(double n, const DdpmExponents& e) {
  require(n >= 1.0, "ddpm_optimal_t0: n must be at least 1");
  require(e.a + e.b != 0.0, "ddpm_optimal_t0: a + b must be nonzero");
  return std::pow(n, -e.c / (e.a + e.b));
}

double ddpm_optimized_rate(double beta, double gamma, double d) {
  check_ddpm_domain(beta, gamma, d);
  const double g1 = gamma + 1.0;
  return 2.0 * beta * g1 / (4.0 * beta * g1 + 6.0 * beta * d + 2.0 * d * g1 + d * d);
}

BoundTerms ddpm_bound(const DdpmBoundParams& p) {
  p.validate();
  const auto e = ddpm_exponents(p.beta, p.gamma, p.d);
  BoundTerms t;
  t.approx = p.const_app * std::pow(p.t0, e.a);
  t.est = p.const_est * std::pow(std::log(p.n), p.polylog_power) * std::pow(p.n, -e.c) * std::pow(p.t0, -e.b);
  t.init = p.const_init / std::sqrt(p.T);
  t.total = t.approx + t.est + t.init;
  return t;
}

double ddpm_t0_minimizer(const DdpmBoundParams& p) {
  p.validate();
  const auto e = ddpm_exponents(p.beta, p.gamma, p.d);
  // d/dt0 [A t0^a + B t0^-b] = 0  =>  t0 = (b B / (a A))^(1/(a+b)).
  const double big_b = p.const_est * std::pow(std::log(p.n), p.polylog_power) * std::pow(p.n, -e.c);
  return std::pow(e.b * big_b / (e.a * p.const_app), 1.0 / (e.a + e.b));
}

BoundTerms dlpm_bound(const DlpmBoundParams& p) {
  p.validate();
  BoundTerms t;
  t.approx = p.const_app * p.T * std::pow(p.m, -p.beta_alpha / p.d);
  t.est = p.const_est * p.T * std::sqrt((p.comp + std::log(1.0 / p.delta)) / p.n);
  t.init = p.const_init * std::exp(-p.c * p.T);
  t.total = t.approx + t.est + t.init;
  return t;
}

std::size_t dlpm_optimal_m(double n, double beta_alpha, double d) {
  require(n >= 1.0, "dlpm_optimal_m: n must be at least 1");
  require(beta_alpha > 0.0 && d > 0.0, "dlpm_optimal_m: beta(alpha) and d must be positive");
  const double m = std::pow(n, d / (2.0 * beta_alpha + d));
  // Guard against pow returning 1000.0000000000001 for an exact power.
  return static_cast<std::size_t>(std::ceil(m * (1.0 - 1e-12)));
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  require(lo > 0.0 && hi > lo, "geometric_grid: need 0 < lo < hi");
  require(count >= 2, "geometric_grid: need at least two points");
  std::vector<double> g(count);
  const double ratio = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo * std::exp(ratio * static_cast<double>(i));
  return g;
}

std::size_t argmin(const std::vector<double>& values) {
  require(!values.empty(), "argmin: empty input");
  return static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
}

std::vector<TradeoffRow> tradeoff_table(const DdpmBoundParams& ddpm, const DlpmBoundParams& dlpm,
                                        const std::vector<double>& ns, const std::vector<double>& Ts,
                                        bool tune) {
  require(!ns.empty() && !Ts.empty(), "tradeoff_table: empty grid");
  std::vector<TradeoffRow> rows;
  for (double n : ns) {
    for (double T : Ts) {
      DdpmBoundParams dp = ddpm;
      dp.n = n;
      dp.T = T;
      DlpmBoundParams lp = dlpm;
      lp.n = n;
      lp.T = T;
      if (tune) {
        const auto e = ddpm_exponents(dp.beta, dp.gamma, dp.d);
        dp.t0 = std::min(ddpm_optimal_t0(n, e), 0.5 * T);
        lp.m = static_cast<double>(dlpm_optimal_m(n, lp.beta_alpha, lp.d));
        lp.comp = lp.m;
      }
      TradeoffRow r;
      r.n = n;
      r.T = T;
      r.ddpm_t0 = dp.t0;
      r.dlpm_m = lp.m;
      r.ddpm = ddpm_bound(dp);
      r.dlpm = dlpm_bound(lp);
      r.dlpm_smaller = r.dlpm.total < r.ddpm.total;
      rows.push_back(r);
    }
  }
  return rows;
}

void write_tradeoff_csv(std::ostream& out, const std::vector<TradeoffRow>& rows) {
  out << "# bound values use unit-normalized hidden constants; only orders of magnitude are meaningful\n";
  out << "n,T,ddpm_t0,ddpm_total,ddpm_approx,ddpm_est,ddpm_init,dlpm_m,dlpm_total,dlpm_approx,dlpm_est,"
         "dlpm_init,smaller\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.n << ',' << r.T << ',' << r.ddpm_t0 << ',' << r.ddpm.total << ',' << r.ddpm.approx << ','
        << r.ddpm.est << ',' << r.ddpm.init << ',' << r.dlpm_m << ',' << r.dlpm.total << ','
        << r.dlpm.approx << ',' << r.dlpm.est << ',' << r.dlpm.init << ','
        << (r.dlpm_smaller ? "dlpm" : "ddpm") << '\n';
  }
}

}  // namespace htbench
