#pragma once

#include "error.hpp"
#include "index.hpp"
#include "parallel.hpp"
#include "solver.hpp"
#include "spectral_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace fracspde {

struct LawOptions
{
  //! sigma is probed on [-probe_radius, probe_radius].
  double probe_radius = 10.0;
  std::size_t probe_points = 2001;
  std::size_t threads = 1;
};

struct LawSample
{
  //! u(t, x) of replicates 0 .. n-1.
  std::vector<double> values;
  double t = 0.0;
  std::size_t cell = 0;
  //! min sigma over the probe range.
  double ellipticity = 0.0;
  double critical_eta = 0.0;
  std::vector<std::string> warnings;
};

//! min of sigma on the probe range; throws EllipticityViolation unless it is
//! positive.
inline double ellipticity_floor(const Coefficient& sigma, const LawOptions& opts = {})
{
  if (opts.probe_points < 2 || !(opts.probe_radius > 0.0))
    throw ConfigurationError("ellipticity probe needs a positive radius and at least 2 points");
  double lo = std::numeric_limits<double>::infinity(), at = 0.0;
  for (std::size_t i = 0; i < opts.probe_points; ++i) {
    const double z = -opts.probe_radius + 2.0 * opts.probe_radius * static_cast<double>(i) /
                                            static_cast<double>(opts.probe_points - 1);
    const double s = sigma(z);
    if (s < lo) {
      lo = s;
      at = z;
    }
  }
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "density: sigma(z) >= a > 0 fails on [-" << opts.probe_radius << ", " << opts.probe_radius
       << "]: sigma(" << at << ") = " << lo;
    throw EllipticityViolation(os.str());
  }
  return lo;
}

//! n independent replicate values of u(t, x) at the grid cell `cell`.
//! t must be a multiple of dt; replicates match those of the full-horizon run.
inline LawSample sample_law(const SolverConfig& config, double t, std::size_t cell, std::size_t n, const LawOptions& opts = {})
{
  LawSample out;
  out.t = t;
  out.cell = cell;
  out.ellipticity = ellipticity_floor(config.diffusion, opts);
  if (cell >= config.grid.size())
    throw ConfigurationError("density: probe cell outside the grid");
  if (!(t > 0.0))
    throw DomainError("density: t must be positive");
  if (n == 0)
    throw ConfigurationError("density: need at least one replicate");
  out.critical_eta = critical_eta(config.measure, config.idx);
  if (!(out.critical_eta < 0.5))
    out.warnings.push_back("no eta in (0, 1/2) satisfies the admissibility condition for " +
                           config.measure.description() + " (critical eta " + std::to_string(out.critical_eta) +
                           "); smoothness of the law is outside the proven range");

  SolverConfig cfg = config;
  cfg.horizon = t;
  cfg.validate();
  cfg.save_every = cfg.steps();
  const Solver solver(cfg);
  out.values.assign(n, 0.0);
  parallel_for(n, opts.threads, [&](std::size_t r) { out.values[r] = solver.run(r).frames.back().values[cell]; });
  return out;
}

enum class BandwidthRule
{
  plug_in,
  silverman,
  fixed
};

inline BandwidthRule bandwidth_rule_from_string(const std::string& s)
{
  if (s == "plug_in")
    return BandwidthRule::plug_in;
  if (s == "silverman")
    return BandwidthRule::silverman;
  if (s == "fixed")
    return BandwidthRule::fixed;
  throw ConfigurationError("unknown bandwidth rule '" + s + "' (plug_in, silverman, fixed)");
}

inline std::string to_string(BandwidthRule r)
{
  switch (r) {
    case BandwidthRule::plug_in:
      return "plug_in";
    case BandwidthRule::silverman:
      return "silverman";
    case BandwidthRule::fixed:
      return "fixed";
  }
  return "unknown";
}

struct BandwidthPolicy
{
  BandwidthRule rule = BandwidthRule::plug_in;
  //! used by BandwidthRule::fixed
  double value = 0.0;
};

struct DerivativeBounds
{
  double first = 0.0;
  double second = 0.0;
};

struct DensityEstimate
{
  std::vector<double> samples;
  double bandwidth = 0.0;
  BandwidthRule rule = BandwidthRule::plug_in;
  std::vector<double> grid_1d;
  std::vector<double> values;
  //! max |f'| and |f''| by finite differences of estimates at the
  //! derivative bandwidths below
  DerivativeBounds derivative_bounds;
  std::pair<double, double> derivative_bandwidths{0.0, 0.0};
  //! trapezoid integral of values over grid_1d
  double integral = 0.0;
  bool degenerate = false;
  //! location of the point mass when degenerate
  double point_mass = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

namespace detail {

struct SampleSummary
{
  double mean = 0.0;
  double sd = 0.0;
  double iqr = 0.0;
};

inline double sorted_quantile(const std::vector<double>& s, double q)
{
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline SampleSummary summarize(const std::vector<double>& x)
{
  SampleSummary s;
  const double n = static_cast<double>(x.size());
  for (double v : x)
    s.mean += v;
  s.mean /= n;
  double ss = 0.0;
  for (double v : x)
    ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  s.iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  return s;
}

//! n^-2 g^-(r+1) sum_i sum_j phi^(r)((X_i - X_j) / g) for r = 4, 6.
inline double density_functional(const std::vector<double>& x, int r, double g)
{
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto deriv = [&](double u) {
    const double u2 = u * u;
    const double he = r == 4 ? (u2 * u2 - 6.0 * u2 + 3.0) : (u2 * u2 * u2 - 15.0 * u2 * u2 + 45.0 * u2 - 15.0);
    return he * c * std::exp(-0.5 * u2);
  };
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      s += deriv((x[i] - x[j]) / g);
  s = 2.0 * s + static_cast<double>(n) * deriv(0.0);
  const double nn = static_cast<double>(n);
  return s / (nn * nn * std::pow(g, r + 1));
}

inline std::vector<double> kernel_sum(const std::vector<double>& samples, double h, const std::vector<double>& at)
{
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    double s = 0.0;
    for (double v : samples) {
      const double u = (at[i] - v) / h;
      if (u * u < 80.0)
        s += std::exp(-0.5 * u * u);
    }
    out[i] = s * norm;
  }
  return out;
}

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

} // namespace detail

//! Two-stage direct plug-in bandwidth for the Gaussian kernel (Wand & Jones),
//! scale = min(sd, IQR / 1.349).
inline double plug_in_bandwidth(const std::vector<double>& x)
{
  const auto s = detail::summarize(x);
  const double scale = s.iqr > 0.0 ? std::min(s.sd, s.iqr / 1.349) : s.sd;
  const double n = static_cast<double>(x.size());
  const double rt2pi = std::sqrt(2.0 * std::numbers::pi);
  const double psi8 = 105.0 / (32.0 * std::sqrt(std::numbers::pi) * std::pow(scale, 9));
  const double k6 = -15.0 / rt2pi, k4 = 3.0 / rt2pi;
  const double g1 = std::pow(-2.0 * k6 / (psi8 * n), 1.0 / 9.0);
  const double psi6 = detail::density_functional(x, 6, g1);
  const double g2 = std::pow(-2.0 * k4 / (psi6 * n), 1.0 / 7.0);
  const double psi4 = detail::density_functional(x, 4, g2);
  return std::pow(1.0 / (2.0 * std::sqrt(std::numbers::pi) * psi4 * n), 0.2);
}

inline double silverman_bandwidth(const std::vector<double>& x)
{
  const auto s = detail::summarize(x);
  const double scale = s.iqr > 0.0 ? std::min(s.sd, s.iqr / 1.34) : s.sd;
  return 0.9 * scale * std::pow(static_cast<double>(x.size()), -0.2);
}

//! Gaussian-kernel density estimate on [min - 6h, max + 6h] with spacing at
//! most h / 10, plus finite-difference maxima of |f'| and |f''|. At the
//! bandwidth that suits f the derivative estimates are dominated by noise
//! (variance ~ 1 / (n h^(2r+1))), so they use the wider h_r.
inline DensityEstimate kde(const std::vector<double>& samples, const BandwidthPolicy& policy = {})
{
  if (samples.size() < 500)
    throw ConfigurationError("kde: need at least 500 samples, got " + std::to_string(samples.size()));
  for (double v : samples)
    if (!std::isfinite(v))
      throw ConfigurationError("kde: samples must be finite");
  DensityEstimate est;
  est.samples = samples;
  est.rule = policy.rule;
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo <= 1e-14 * std::max(1.0, std::abs(lo))) {
    est.degenerate = true;
    est.point_mass = lo;
    std::ostringstream os;
    os << "degenerate law: all " << samples.size() << " samples equal " << lo << " (point mass, no density)";
    est.warnings.push_back(os.str());
    return est;
  }
  switch (policy.rule) {
    case BandwidthRule::plug_in:
      est.bandwidth = plug_in_bandwidth(samples);
      break;
    case BandwidthRule::silverman:
      est.bandwidth = silverman_bandwidth(samples);
      break;
    case BandwidthRule::fixed:
      if (!(policy.value > 0.0) || !std::isfinite(policy.value))
        throw ConfigurationError("kde: fixed bandwidth must be positive");
      est.bandwidth = policy.value;
      break;
  }
  if (!(est.bandwidth > 0.0) || !std::isfinite(est.bandwidth))
    throw ConsistencyError("kde: bandwidth selection produced " + std::to_string(est.bandwidth));

  const double h = est.bandwidth;
  const double a = lo - 6.0 * h, b = hi + 6.0 * h;
  const auto m = std::max<std::size_t>(512, static_cast<std::size_t>(std::ceil((b - a) / (0.1 * h))) + 1);
  const double step = (b - a) / static_cast<double>(m - 1);
  est.grid_1d.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    est.grid_1d[i] = a + step * static_cast<double>(i);
  est.values = detail::kernel_sum(samples, h, est.grid_1d);
  for (std::size_t i = 0; i + 1 < m; ++i)
    est.integral += 0.5 * step * (est.values[i] + est.values[i + 1]);

  // r-th derivatives need wider kernels: h_r = h n^(1/5 - 1/(2r + 5))
  const double n = static_cast<double>(samples.size());
  est.derivative_bandwidths = {h * std::pow(n, 0.2 - 1.0 / 7.0), h * std::pow(n, 0.2 - 1.0 / 9.0)};
  const auto f1 = detail::kernel_sum(samples, est.derivative_bandwidths.first, est.grid_1d);
  const auto f2 = detail::kernel_sum(samples, est.derivative_bandwidths.second, est.grid_1d);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    est.derivative_bounds.first = std::max(est.derivative_bounds.first, std::abs(f1[i + 1] - f1[i - 1]) / (2.0 * step));
    est.derivative_bounds.second =
      std::max(est.derivative_bounds.second, std::abs(f2[i + 1] - 2.0 * f2[i] + f2[i - 1]) / (step * step));
  }
  if (std::abs(est.integral - 1.0) > 1e-3)
    throw ConsistencyError("kde: trapezoid integral " + std::to_string(est.integral) + " is not 1 within 1e-3");
  return est;
}

//! Ratios max / min of each derivative bound over bandwidths h (1 - p), h, h (1 + p).
struct DerivativeStability
{
  double first_ratio = 0.0;
  double second_ratio = 0.0;
  std::vector<DerivativeBounds> bounds;
};

inline DerivativeStability derivative_stability(const std::vector<double>& samples, double bandwidth, double perturbation = 0.2)
{
  DerivativeStability out;
  for (double f : {1.0 - perturbation, 1.0, 1.0 + perturbation})
    out.bounds.push_back(kde(samples, {BandwidthRule::fixed, bandwidth * f}).derivative_bounds);
  auto ratio = [&](auto get) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& b : out.bounds) {
      lo = std::min(lo, get(b));
      hi = std::max(hi, get(b));
    }
    return hi / lo;
  };
  out.first_ratio = ratio([](const DerivativeBounds& b) { return b.first; });
  out.second_ratio = ratio([](const DerivativeBounds& b) { return b.second; });
  return out;
}

//! sup_x |F_n(x) - F(x)| for a continuous reference CDF F.
template<typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf)
{
  if (samples.empty())
    throw ConfigurationError("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

//! Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

inline double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); }

struct VarianceBoundReport
{
  double t = 0.0;
  double theta1 = 1.0;
  double theta2 = 0.0;
  double critical_eta = 0.0;
  std::vector<double> rho;
  //! I(rho) = int_0^rho ds int mu(dxi) |F G(s)(xi)|^2
  std::vector<double> integral;
  //! largest c1 with I >= c1 rho^theta1 on the grid
  double c1 = 0.0;
  //! smallest c2 with I <= c2 rho^theta2 on the grid
  double c2 = 0.0;
  //! d log I / d log rho over the smallest decade of the grid
  double small_rho_slope = 0.0;
  bool theta2_in_range = true;
  //! I / rho^theta2 grows as rho -> 0: no finite c2
  bool upper_degenerate = false;
  //! I / rho^theta1 vanishes as rho -> 0: no positive c1
  bool lower_degenerate = false;
  //! constants with the quadrature step halved
  double c1_refined = 0.0;
  double c2_refined = 0.0;
  double c1_change = 0.0;
  double c2_change = 0.0;

  bool holds() const { return c1 > 0.0 && std::isfinite(c2) && !upper_degenerate && !lower_degenerate; }
  bool stable(double tol = 0.1) const { return c1_change <= tol && c2_change <= tol; }
};

//! Log-spaced grid of `points` values from span * top down to top = min(t, 1).
inline std::vector<double> default_rho_grid(double t, std::size_t points = 25, double span = 1e-6)
{
  const double top = std::min(t, 1.0);
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = top * std::pow(span, 1.0 - static_cast<double>(i) / static_cast<double>(points - 1));
  return g;
}

struct VarianceBoundOptions
{
  AnnulusOptions quadrature{};
  //! slope shortfall below theta2 (or excess above theta1) that counts as degenerate
  double slope_tolerance = 1e-3;
};

inline VarianceBoundReport variance_bound_check(const FractionalIndex& idx,
                                                const SpectralMeasure& mu,
                                                double t,
                                                double theta1,
                                                double theta2,
                                                std::vector<double> rho_grid = {},
                                                const VarianceBoundOptions& opts = {})
{
  if (!(t > 0.0))
    throw DomainError("variance_bound_check: t must be positive");
  if (!(theta1 >= 1.0))
    throw DomainError("variance_bound_check: theta1 must be at least 1");
  if (!(theta2 > 0.0 && theta2 <= 1.0))
    throw DomainError("variance_bound_check: theta2 must lie in (0, 1]");
  if (rho_grid.empty())
    rho_grid = default_rho_grid(t);
  std::sort(rho_grid.begin(), rho_grid.end());
  const double top = std::min(t, 1.0);
  if (rho_grid.size() < 3)
    throw ConfigurationError("variance_bound_check: rho grid needs at least 3 points");
  for (double r : rho_grid)
    if (!(r > 0.0 && r <= top * (1.0 + 1e-12)))
      throw DomainError("variance_bound_check: rho grid must lie in (0, min(t, 1)]");

  VarianceBoundReport rep;
  rep.t = t;
  rep.theta1 = theta1;
  rep.theta2 = theta2;
  rep.rho = rho_grid;
  rep.critical_eta = critical_eta(mu, idx);
  rep.theta2_in_range = theta2 <= 1.0 - rep.critical_eta + 1e-12;

  auto constants = [&](const AnnulusOptions& q, std::vector<double>* keep) {
    double c1 = std::numeric_limits<double>::infinity(), c2 = 0.0;
    for (double r : rho_grid) {
      const double i = cumulative_spectral_integral(idx, mu, r, q);
      if (keep)
        keep->push_back(i);
      c1 = std::min(c1, i / std::pow(r, theta1));
      c2 = std::max(c2, i / std::pow(r, theta2));
    }
    return std::pair{c1, c2};
  };
  std::tie(rep.c1, rep.c2) = constants(opts.quadrature, &rep.integral);
  AnnulusOptions fine = opts.quadrature;
  fine.panels_per_annulus *= 2;
  std::tie(rep.c1_refined, rep.c2_refined) = constants(fine, nullptr);
  rep.c1_change = std::abs(rep.c1_refined / rep.c1 - 1.0);
  rep.c2_change = std::abs(rep.c2_refined / rep.c2 - 1.0);

  // slope over the points within a decade of the smallest rho
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rho_grid.size() && rho_grid[i] <= 10.0 * rho_grid.front(); ++i) {
    lx.push_back(std::log(rho_grid[i]));
    ly.push_back(std::log(rep.integral[i]));
  }
  if (lx.size() < 2) {
    lx = {std::log(rho_grid[0]), std::log(rho_grid[1])};
    ly = {std::log(rep.integral[0]), std::log(rep.integral[1])};
  }
  rep.small_rho_slope = detail::ls_slope(lx, ly);
  rep.upper_degenerate = rep.small_rho_slope < theta2 - opts.slope_tolerance;
  rep.lower_degenerate = rep.small_rho_slope > theta1 + opts.slope_tolerance;

  if (!(rep.c1 > 0.0) || !std::isfinite(rep.c1) || rep.lower_degenerate)
    throw ConsistencyError("variance_bound_check: no positive c1 with I(rho) >= c1 rho^theta1 (small-rho slope " +
                           std::to_string(rep.small_rho_slope) + ")");
  if (rep.theta2_in_range && (rep.upper_degenerate || !std::isfinite(rep.c2)))
    throw ConsistencyError("variance_bound_check: no finite c2 with I(rho) <= c2 rho^theta2 although theta2 <= 1 - eta* (small-rho slope " +
                           std::to_string(rep.small_rho_slope) + ")");
  return rep;
}

} // namespace fracspde
