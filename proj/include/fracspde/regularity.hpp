#pragma once

#include "error.hpp"
#include "index.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace fracspde {

//! Upper ends of the Hoelder windows for u:
//!   gamma1 < min(sum_i rho / alpha_i, (1 - eta) / 2)   (time)
//!   gamma2 < min(rho, alpha_0 (1 - eta) / 2, 1 / 2)    (space)
struct TheoreticalExponents
{
  double gamma1_max = 0.0;
  double gamma2_max = 0.0;
};

//! rho for a smooth initial condition (the open limit rho -> 1).
inline const double smooth_initial_rho = std::nextafter(1.0, 0.0);

inline TheoreticalExponents theoretical_exponents(const FractionalIndex& idx, double rho, double eta)
{
  if (!(rho > 0.0 && rho < 1.0))
    throw DomainError("theoretical_exponents: rho must lie in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0))
    throw DomainError("theoretical_exponents: eta must lie in (0, 1)");
  const double slack = 1.0 - eta;
  return {std::min(rho * idx.inverse_alpha_sum(), 0.5 * slack),
          std::min({rho, 0.5 * idx.alpha_min() * slack, 0.5})};
}

struct HolderOptions
{
  //! Number of dyadic lags in the regression window.
  std::size_t n_lags = 4;
  std::size_t min_replicates = 200;
  std::size_t bootstrap = 200;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  //! Estimates at or above this are reported as lower bounds ("smooth").
  double saturation = 0.95;
  //! Smallest spatial lag in cells.
  std::size_t spatial_base_lag = 1;
  std::size_t threads = 1;
};

//! Half the slope of log E|increment|^2 against log lag.
struct ExponentEstimate
{
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> lags;
  //! E|increment|^2 at each lag.
  std::vector<double> moments;
  std::size_t replicates = 0;
  //! true when the increments scale linearly: only value >= saturation is meaningful.
  bool saturated = false;

  double half_width() const { return 0.5 * (ci_high - ci_low); }
};

struct HolderReport
{
  ExponentEstimate temporal;
  ExponentEstimate spatial;
  double gamma1_max = 0.0;
  double gamma2_max = 0.0;
  double rho = 0.0;
  double eta = 0.0;

  //! Estimate below the supremum plus the CI half-width and a discretization allowance.
  bool temporal_consistent(double allowance = 0.05) const
  {
    return temporal.value <= gamma1_max + temporal.half_width() + allowance;
  }
  bool spatial_consistent(double allowance = 0.05) const
  {
    return spatial.value <= gamma2_max + spatial.half_width() + allowance;
  }
};

namespace detail {

inline double regression_exponent(const std::vector<double>& lags, const std::vector<double>& moments)
{
  const double n = static_cast<double>(lags.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t j = 0; j < lags.size(); ++j) {
    mx += std::log(lags[j]);
    my += std::log(moments[j]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < lags.size(); ++j) {
    const double dx = std::log(lags[j]) - mx;
    sxy += dx * (std::log(moments[j]) - my);
    sxx += dx * dx;
  }
  return 0.5 * sxy / sxx;
}

//! per_rep[r][j] = sum of squared increments of replicate r at lag j, over
//! `counts[j]` base points. Pools, regresses, and bootstraps over replicates.
inline ExponentEstimate finish_estimate(const std::vector<std::vector<double>>& per_rep,
                                        const std::vector<double>& counts,
                                        std::vector<double> lags,
                                        const HolderOptions& opts)
{
  const std::size_t n_rep = per_rep.size();
  const std::size_t n_lag = lags.size();
  auto moments_of = [&](const std::vector<double>& sums, double reps) {
    std::vector<double> m(n_lag);
    for (std::size_t j = 0; j < n_lag; ++j)
      m[j] = sums[j] / (reps * counts[j]);
    return m;
  };
  std::vector<double> total(n_lag, 0.0);
  for (const auto& row : per_rep)
    for (std::size_t j = 0; j < n_lag; ++j)
      total[j] += row[j];
  ExponentEstimate est;
  est.moments = moments_of(total, static_cast<double>(n_rep));
  for (double m : est.moments)
    if (!(m > 0.0) || !std::isfinite(m))
      throw InsufficientResolution("holder: increments vanish or are not finite at some lag; no scaling to fit");
  est.lags = std::move(lags);
  est.value = regression_exponent(est.lags, est.moments);
  est.replicates = n_rep;
  est.saturated = est.value >= opts.saturation;

  est.ci_low = est.ci_high = est.value;
  if (n_rep < 2 || opts.bootstrap == 0)
    return est;
  std::vector<double> boot;
  boot.reserve(opts.bootstrap);
  for (std::size_t b = 0; b < opts.bootstrap; ++b) {
    CounterRng rng(SeedPath{opts.seed, b, 1, stream_purpose::bootstrap});
    std::vector<double> acc(n_lag, 0.0);
    for (std::size_t r = 0; r < n_rep; ++r) {
      const auto pick = std::min(n_rep - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_rep)));
      for (std::size_t j = 0; j < n_lag; ++j)
        acc[j] += per_rep[pick][j];
    }
    const auto m = moments_of(acc, static_cast<double>(n_rep));
    if (std::all_of(m.begin(), m.end(), [](double v) { return v > 0.0; }))
      boot.push_back(regression_exponent(est.lags, m));
  }
  if (boot.empty())
    return est;
  std::sort(boot.begin(), boot.end());
  const double tail = 0.5 * (1.0 - opts.confidence);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(boot.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, boot.size() - 1);
    return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
  };
  est.ci_low = std::min(est.value, quantile(tail));
  est.ci_high = std::max(est.value, quantile(1.0 - tail));
  return est;
}

} // namespace detail

//! Dyadic frame multiples m, 2m, 4m, ... (largest window) with
//! lag >= min_lag and lag <= max_lag.
inline std::vector<std::size_t> dyadic_frame_lags(double frame_dt, double min_lag, double max_lag, std::size_t n_lags)
{
  const double eps = 1e-9;
  const auto top_frames = static_cast<std::size_t>(std::floor(max_lag / frame_dt * (1.0 + eps)));
  if (top_frames == 0)
    throw InsufficientResolution("holder: the largest admissible lag is below one frame spacing");
  std::size_t top = 1;
  while (top * 2 <= top_frames)
    top *= 2;
  std::vector<std::size_t> out;
  for (std::size_t m = top; m >= 1 && out.size() < n_lags; m /= 2) {
    if (static_cast<double>(m) * frame_dt < min_lag * (1.0 - eps))
      break;
    out.push_back(m);
  }
  if (out.size() < n_lags || n_lags < 4)
    throw InsufficientResolution("holder: fewer than 4 dyadic lags fit in the scale window [" + std::to_string(min_lag) +
                                 ", " + std::to_string(max_lag) + "]");
  std::reverse(out.begin(), out.end());
  return out;
}

//! Temporal exponent from time series series[r][k] = u(k frame_dt, x) of each
//! replicate r. Lags lie in [2 solver_dt, horizon / 8]; increments are
//! pooled over every base time.
inline ExponentEstimate temporal_exponent(const std::vector<std::vector<double>>& series,
                                          double frame_dt,
                                          double solver_dt,
                                          const HolderOptions& opts = {})
{
  if (series.empty() || series.front().size() < 2)
    throw InsufficientResolution("holder: empty time series");
  const std::size_t len = series.front().size();
  for (const auto& s : series)
    if (s.size() != len)
      throw ConfigurationError("holder: time series of different lengths");
  const double horizon = frame_dt * static_cast<double>(len - 1);
  const auto m = dyadic_frame_lags(frame_dt, 2.0 * solver_dt, horizon / 8.0, opts.n_lags);

  std::vector<std::vector<double>> per_rep(series.size(), std::vector<double>(m.size(), 0.0));
  parallel_for(series.size(), opts.threads, [&](std::size_t r) {
    const auto& s = series[r];
    for (std::size_t j = 0; j < m.size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k + m[j] < len; ++k) {
        const double d = s[k + m[j]] - s[k];
        acc += d * d;
      }
      per_rep[r][j] = acc;
    }
  });
  std::vector<double> counts(m.size()), lags(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) {
    counts[j] = static_cast<double>(len - m[j]);
    lags[j] = static_cast<double>(m[j]) * frame_dt;
  }
  return detail::finish_estimate(per_rep, counts, std::move(lags), opts);
}

//! Spatial exponent from one field per replicate. Lags are b, 2b, 4b, ...
//! cells (b = spatial_base_lag) up to L / 8, along every axis, pooled over
//! all cells (periodic).
inline ExponentEstimate spatial_exponent(const std::vector<Field>& snapshots, const HolderOptions& opts = {})
{
  if (snapshots.empty())
    throw InsufficientResolution("holder: no snapshots");
  const Grid& grid = snapshots.front().grid;
  for (const auto& f : snapshots)
    if (!(f.grid == grid))
      throw ConfigurationError("holder: snapshots on different grids");
  if (opts.n_lags < 4 || opts.spatial_base_lag == 0)
    throw InsufficientResolution("holder: need at least 4 spatial lags");
  std::vector<std::size_t> cells;
  for (std::size_t j = 0, c = opts.spatial_base_lag; j < opts.n_lags; ++j, c *= 2)
    cells.push_back(c);
  if (static_cast<double>(cells.back()) * grid.spacing() > grid.box_length() / 8.0 * (1.0 + 1e-9))
    throw InsufficientResolution("holder: " + std::to_string(opts.n_lags) +
                                 " dyadic spatial lags exceed L/8; refine the grid");

  const std::size_t d = grid.dim();
  const std::size_t n = grid.size();
  std::vector<std::vector<double>> per_rep(snapshots.size(), std::vector<double>(cells.size(), 0.0));
  std::vector<std::vector<std::size_t>> partner(cells.size() * d, std::vector<std::size_t>(n));
  for (std::size_t j = 0; j < cells.size(); ++j)
    for (std::size_t a = 0; a < d; ++a) {
      std::vector<long> off(d, 0);
      off[a] = static_cast<long>(cells[j]);
      for (std::size_t i = 0; i < n; ++i)
        partner[j * d + a][i] = grid.shifted(i, off);
    }
  parallel_for(snapshots.size(), opts.threads, [&](std::size_t r) {
    const auto& v = snapshots[r].values;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = v[partner[j * d + a][i]] - v[i];
          acc += diff * diff;
        }
      per_rep[r][j] = acc;
    }
  });
  std::vector<double> counts(cells.size(), static_cast<double>(n * d)), lags(cells.size());
  for (std::size_t j = 0; j < cells.size(); ++j)
    lags[j] = static_cast<double>(cells[j]) * grid.spacing();
  return detail::finish_estimate(per_rep, counts, std::move(lags), opts);
}

namespace detail {

inline void require_replicates(std::size_t n, const HolderOptions& opts)
{
  if (n < opts.min_replicates)
    throw ConfigurationError("holder: need at least " + std::to_string(opts.min_replicates) + " replicates, got " +
                             std::to_string(n));
}

inline double uniform_frame_dt(const PathSolution& p)
{
  if (p.times.size() < 2)
    throw InsufficientResolution("holder: a path needs at least two frames");
  const double h = p.times[1] - p.times[0];
  for (std::size_t k = 1; k + 1 < p.times.size(); ++k)
    if (std::abs(p.times[k + 1] - p.times[k] - h) > 1e-9 * h)
      throw ConfigurationError("holder: temporal estimation needs uniformly spaced frames (T a multiple of save_every dt)");
  return h;
}

} // namespace detail

//! Temporal exponent at cell x_probe over an ensemble of paths. `solver_dt`
//! sets the lower end of the scale window (2 dt).
inline ExponentEstimate estimate_temporal(const std::vector<PathSolution>& paths,
                                          std::size_t x_probe,
                                          double solver_dt,
                                          const HolderOptions& opts = {})
{
  detail::require_replicates(paths.size(), opts);
  const double h = detail::uniform_frame_dt(paths.front());
  std::vector<std::vector<double>> series;
  series.reserve(paths.size());
  for (const auto& p : paths) {
    if (x_probe >= p.frames.front().size())
      throw ConfigurationError("holder: x_probe outside the grid");
    std::vector<double> s;
    s.reserve(p.frames.size());
    for (const auto& f : p.frames)
      s.push_back(f.values[x_probe]);
    series.push_back(std::move(s));
  }
  return temporal_exponent(series, h, solver_dt, opts);
}

inline std::size_t frame_at(const PathSolution& p, double t)
{
  for (std::size_t k = 0; k < p.times.size(); ++k)
    if (std::abs(p.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
      return k;
  throw ConfigurationError("holder: no kept frame at t_probe = " + std::to_string(t));
}

inline ExponentEstimate estimate_spatial(const std::vector<PathSolution>& paths, double t_probe, const HolderOptions& opts = {})
{
  detail::require_replicates(paths.size(), opts);
  std::vector<Field> snaps;
  snaps.reserve(paths.size());
  for (const auto& p : paths)
    snaps.push_back(p.frames[frame_at(p, t_probe)]);
  return spatial_exponent(snaps, opts);
}

//! What the estimators need from an ensemble, collected without holding
//! whole paths: the time series at one cell and one snapshot per replicate.
struct HolderSample
{
  double solver_dt = 0.0;
  double frame_dt = 0.0;
  std::size_t x_probe = 0;
  double t_probe = 0.0;
  std::vector<std::vector<double>> series;
  std::vector<Field> snapshots;
};

inline HolderSample collect_holder_sample(const SolverConfig& config,
                                          std::size_t n_replicates,
                                          std::size_t x_probe,
                                          double t_probe,
                                          std::size_t threads = 1)
{
  const Solver solver(config);
  if (x_probe >= config.grid.size())
    throw ConfigurationError("holder: x_probe outside the grid");
  if (config.steps() % config.save_every != 0)
    throw ConfigurationError("holder: the step count must be a multiple of save_every");
  HolderSample out;
  out.solver_dt = config.dt;
  out.frame_dt = config.dt * static_cast<double>(config.save_every);
  out.x_probe = x_probe;
  out.t_probe = t_probe;
  out.series.resize(n_replicates);
  out.snapshots.assign(n_replicates, Field(config.grid));
  std::vector<char> found(n_replicates, 0);
  parallel_for(n_replicates, threads, [&](std::size_t r) {
    auto& s = out.series[r];
    const auto path = solver.run(r, [&](std::size_t, double t, const Field& u) {
      s.push_back(u.values[x_probe]);
      if (!found[r] && std::abs(t - t_probe) <= 1e-9 * std::max(1.0, std::abs(t_probe))) {
        out.snapshots[r] = u;
        found[r] = 1;
      }
    });
    (void)path;
  });
  if (n_replicates > 0 && !found[0])
    throw ConfigurationError("holder: no kept frame at t_probe = " + std::to_string(t_probe));
  return out;
}

inline ExponentEstimate estimate_temporal(const HolderSample& s, const HolderOptions& opts = {})
{
  detail::require_replicates(s.series.size(), opts);
  return temporal_exponent(s.series, s.frame_dt, s.solver_dt, opts);
}

inline ExponentEstimate estimate_spatial(const HolderSample& s, const HolderOptions& opts = {})
{
  detail::require_replicates(s.snapshots.size(), opts);
  return spatial_exponent(s.snapshots, opts);
}

//! Both estimates next to the theoretical suprema for (idx, rho, eta).
inline HolderReport holder_report(const HolderSample& s,
                                  const FractionalIndex& idx,
                                  double rho,
                                  double eta,
                                  const HolderOptions& opts = {})
{
  HolderReport rep;
  rep.temporal = estimate_temporal(s, opts);
  rep.spatial = estimate_spatial(s, opts);
  const auto th = theoretical_exponents(idx, rho, eta);
  rep.gamma1_max = th.gamma1_max;
  rep.gamma2_max = th.gamma2_max;
  rep.rho = rho;
  rep.eta = eta;
  return rep;
}

} // namespace fracspde
