#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace htbench {

/// Inputs of the Gaussian-noise sampling-error bound. All hidden constants are
/// exposed as multipliers (default 1); values are order-of-magnitude only.
struct DdpmBoundParams {
  double beta = 1.0;    // Sobolev smoothness, (0, 2]
  double gamma = 2.0;   // tail index, > 1
  double d = 1.0;       // dimension
  double n = 1e4;       // sample count, >= 2
  double T = 100.0;     // horizon
  double t0 = 1e-2;     // early stopping, (0, T)
  double const_app = 1.0;
  double const_est = 1.0;
  double const_init = 1.0;
  double polylog_power = 1.0;  // polylog(n) := log(n)^power

  void validate() const;
};

/// Inputs of the stable-noise sampling-error bound.
struct DlpmBoundParams {
  double beta_alpha = 1.0;  // Hoelder regularity, > 0
  double d = 1.0;
  double n = 1e4;
  double T = 10.0;
  double m = 100.0;         // network size
  double comp = 100.0;      // complexity of the network class
  double delta = 0.05;      // failure probability
  double c = 1.0;           // mixing rate
  double const_app = 1.0;
  double const_est = 1.0;
  double const_init = 1.0;

  void validate() const;
};

struct DdpmExponents {
  double a = 0.0;  // approximation exponent on t0
  double b = 0.0;  // estimation exponent on 1/t0
  double c = 0.0;  // estimation exponent on 1/n
};

struct BoundTerms {
  double total = 0.0;
  double approx = 0.0;
  double est = 0.0;
  double init = 0.0;
};

/// a = beta(g+1)/(d+2(g+1)+2 beta), b = d(g+1)/(4(d+g+1)), c = (g+1)/(2(d+g+1)).
DdpmExponents ddpm_exponents(double beta, double gamma, double d);

/// n^(-c/(a+b)).
double ddpm_optimal_t0(double n, const DdpmExponents& e);

/// 2 beta(g+1) / (4 beta(g+1) + 6 beta d + 2 d(g+1) + d^2), which equals c a/(a+b).
double ddpm_optimized_rate(double beta, double gamma, double d);

/// approx = C_app t0^a, est = C_est log(n)^p n^-c t0^-b, init = C_init T^-1/2.
BoundTerms ddpm_bound(const DdpmBoundParams& p);

/// Exact minimizer in t0 of approx + est (the init term does not depend on t0).
double ddpm_t0_minimizer(const DdpmBoundParams& p);

/// approx = C_app T m^(-beta/d), est = C_est T sqrt((Comp + log(1/delta)) / n),
/// init = C_init exp(-c T).
BoundTerms dlpm_bound(const DlpmBoundParams& p);

/// ceil(n^(d / (2 beta + d))).
std::size_t dlpm_optimal_m(double n, double beta_alpha, double d);

/// `count` points from lo to hi with a constant ratio.
std::vector<double> geometric_grid(double lo, double hi, std::size_t count);

/// Index of the smallest value.
std::size_t argmin(const std::vector<double>& values);

struct TradeoffRow {
  double n = 0.0;
  double T = 0.0;
  double ddpm_t0 = 0.0;
  double dlpm_m = 0.0;
  BoundTerms ddpm;
  BoundTerms dlpm;
  bool dlpm_smaller = false;
};

/// One row per (n, T). With `tune` set, each cell uses t0 = n^(-c/(a+b)) for
/// DDPM (clipped below T) and m = Comp = ceil(n^(d/(2 beta + d))) for DLPM;
/// otherwise the base parameters' t0 and m/comp are kept.
std::vector<TradeoffRow> tradeoff_table(const DdpmBoundParams& ddpm, const DlpmBoundParams& dlpm,
                                        const std::vector<double>& ns, const std::vector<double>& Ts,
                                        bool tune = true);

void write_tradeoff_csv(std::ostream& out, const std::vector<TradeoffRow>& rows);

}  // namespace htbench
