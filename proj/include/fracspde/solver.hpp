#pragma once

#include "coefficients.hpp"
#include "error.hpp"
#include "fft.hpp"
#include "grid.hpp"
#include "index.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "spectral_measure.hpp"
#include "stable_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace fracspde {

enum class Scheme
{
  exp_euler,
  picard
};

inline std::string to_string(Scheme s)
{
  return s == Scheme::exp_euler ? "exp_euler" : "picard";
}

inline Scheme scheme_from_string(const std::string& s)
{
  if (s == "exp_euler")
    return Scheme::exp_euler;
  if (s == "picard")
    return Scheme::picard;
  throw ConfigurationError("unknown scheme '" + s + "' (exp_euler, picard)");
}

struct SolverConfig
{
  SolverConfig(FractionalIndex idx_, SpectralMeasure measure_, Grid grid_)
    : idx(std::move(idx_))
    , measure(std::move(measure_))
    , grid(std::move(grid_))
  {}

  FractionalIndex idx;
  SpectralMeasure measure;
  Grid grid;
  Coefficient drift = Coefficient::constant(0.0);
  Coefficient diffusion = Coefficient::constant(0.0);
  InitialCondition u0 = InitialCondition::zero();
  double dt = 1e-3;
  double horizon = 0.1;
  Scheme scheme = Scheme::exp_euler;
  std::size_t picard_max_iter = 50;
  double picard_tol = 1e-10;
  std::uint64_t master_seed = 0;
  //! Frames are kept at steps 0, save_every, 2 save_every, ... and the last step.
  std::size_t save_every = 1;
  //! Check (H_1^alpha) before solving.
  bool check_admissibility = true;

  //! Number of time steps; the horizon must be an integer multiple of dt.
  std::size_t steps() const
  {
    const double k = horizon / dt;
    return static_cast<std::size_t>(std::llround(k));
  }

  void validate() const
  {
    if (idx.dim() != grid.dim() || measure.dim() != grid.dim())
      throw ConstraintViolation("SolverConfig: index, measure and grid dimensions differ");
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw ConstraintViolation("SolverConfig: dt must be positive");
    if (!(horizon >= dt) || !std::isfinite(horizon))
      throw ConstraintViolation("SolverConfig: horizon T must satisfy T >= dt");
    const double k = horizon / dt;
    if (std::abs(k - std::round(k)) > 1e-9 * k)
      throw ConstraintViolation("SolverConfig: horizon must be an integer multiple of dt");
    if (!std::isfinite(drift.lipschitz()) || !std::isfinite(diffusion.lipschitz()))
      throw ConstraintViolation("SolverConfig: Lipschitz constants must be finite");
    if (save_every == 0)
      throw ConstraintViolation("SolverConfig: save_every must be positive");
    if (picard_max_iter == 0 || !(picard_tol > 0.0))
      throw ConstraintViolation("SolverConfig: Picard iteration limits must be positive");
    if (check_admissibility) {
      const auto rep = admissibility(measure, idx, 1.0);
      if (!rep.admissible)
        throw ConstraintViolation("SolverConfig: " + measure.description() +
                                  " violates (H_1^alpha) for this index; no mild solution");
    }
  }
};

struct PathSolution
{
  std::vector<Field> frames;
  std::vector<double> times;
  std::uint64_t replicate_id = 0;
  //! Picard only: sup-norm residual of each iteration.
  std::vector<double> picard_residuals;
  std::size_t picard_iterations = 0;
};

//! Observer called for every kept frame: (step index, time, field).
using FrameSink = std::function<void(std::size_t, double, const Field&)>;

//! u0 smoothed by the semigroup: G(t) * u0.
inline Field smooth_initial(const Field& u0, const FractionalIndex& idx, double t)
{
  return apply_semigroup(u0, idx, t);
}

//! A validated configuration with its operators precomputed. Running a
//! replicate is a pure function of (config, replicate id).
class Solver
{
public:
  explicit Solver(SolverConfig cfg)
    : cfg_(validated(std::move(cfg)))
    , step_(cfg_.idx, cfg_.grid, cfg_.dt)
    , noise_(cfg_.grid, cfg_.measure, cfg_.dt)
  {
    u0_ = cfg_.u0.sample(cfg_.grid);
    guard_ = 1e6 * std::max(sup_norm(u0_), 1.0);
    // (exp(dt lambda) - 1) / lambda, the exact integral of the semigroup over one step
    phi_ = lattice_generator_symbol(cfg_.idx, cfg_.grid);
    for (auto& l : phi_) {
      const complex z = cfg_.dt * l;
      l = std::abs(z) < 1e-8 ? cfg_.dt * (1.0 + 0.5 * z) : (std::exp(z) - 1.0) / l;
    }
  }

  const SolverConfig& config() const noexcept { return cfg_; }
  const Field& initial() const noexcept { return u0_; }

  //! The noise increments Delta M_0 ... Delta M_{K-1} of a replicate.
  std::vector<Field> draw_noise(std::uint64_t replicate) const
  {
    const std::size_t k = cfg_.steps();
    std::vector<Field> out;
    out.reserve(k);
    for (std::size_t s = 0; s < k; ++s)
      out.push_back(increment(replicate, s));
    return out;
  }

  PathSolution run(std::uint64_t replicate, const FrameSink& sink = {}) const
  {
    return cfg_.scheme == Scheme::exp_euler ? euler(replicate, nullptr, sink) : picard(replicate, nullptr, sink);
  }

  //! Exponential Euler: u_{k+1} = S_dt [u_k + dt b(u_k) + sigma(u_k) Delta M_k].
  PathSolution euler(std::uint64_t replicate, const std::vector<Field>* noise = nullptr, const FrameSink& sink = {}) const
  {
    const std::size_t k_total = cfg_.steps();
    check_noise(noise, k_total);
    PathSolution out;
    out.replicate_id = replicate;
    Field u = u0_;
    keep(out, 0, u, sink);
    const bool has_drift = !cfg_.drift.is_zero();
    const bool has_noise = !cfg_.diffusion.is_zero();
    for (std::size_t k = 0; k < k_total; ++k) {
      Field v = u;
      if (has_noise) {
        const Field dm = noise ? (*noise)[k] : increment(replicate, k);
        for (std::size_t i = 0; i < v.size(); ++i)
          v.values[i] += cfg_.diffusion(u.values[i]) * dm.values[i];
      }
      if (has_drift)
        for (std::size_t i = 0; i < v.size(); ++i)
          v.values[i] += cfg_.dt * cfg_.drift(u.values[i]);
      u = step_.apply(v);
      guard(u, k + 1, replicate);
      if ((k + 1) % cfg_.save_every == 0 || k + 1 == k_total)
        keep(out, k + 1, u, sink);
    }
    return out;
  }

  //! Picard iteration of the discrete mild equation on a fixed noise path:
  //!   w_{k+1} = S_dt w_k + Phi_dt b(u^n_k) + S_dt [sigma(u^n_k) Delta M_k],
  //! with Phi_dt = int_0^dt S_r dr applied exactly, starting from
  //! u^0_k = S_{k dt} u0. Stops when sup_k |u^{n+1}_k - u^n_k| < picard_tol.
  PathSolution picard(std::uint64_t replicate, const std::vector<Field>* noise = nullptr, const FrameSink& sink = {}) const
  {
    const std::size_t k_total = cfg_.steps();
    check_noise(noise, k_total);
    std::vector<Field> drawn;
    if (!noise && !cfg_.diffusion.is_zero()) {
      drawn = draw_noise(replicate);
      noise = &drawn;
    }
    std::vector<Field> path;
    path.reserve(k_total + 1);
    path.push_back(u0_);
    for (std::size_t k = 0; k < k_total; ++k)
      path.push_back(step_.apply(path.back()));

    PathSolution out;
    out.replicate_id = replicate;
    const bool has_drift = !cfg_.drift.is_zero();
    const bool has_noise = !cfg_.diffusion.is_zero();
    bool converged = false;
    for (std::size_t it = 1; it <= cfg_.picard_max_iter; ++it) {
      std::vector<Field> next;
      next.reserve(k_total + 1);
      next.push_back(u0_);
      double residual = 0.0;
      for (std::size_t k = 0; k < k_total; ++k) {
        const Field& uk = path[k];
        Field v = next.back();
        if (has_noise) {
          const Field& dm = (*noise)[k];
          for (std::size_t i = 0; i < v.size(); ++i)
            v.values[i] += cfg_.diffusion(uk.values[i]) * dm.values[i];
        }
        Field w = step_.apply(v);
        if (has_drift) {
          std::vector<double> b(uk.size());
          for (std::size_t i = 0; i < b.size(); ++i)
            b[i] = cfg_.drift(uk.values[i]);
          const auto pb = fft::apply_multiplier(cfg_.grid, b, phi_);
          for (std::size_t i = 0; i < b.size(); ++i)
            w.values[i] += pb[i];
        }
        guard(w, k + 1, replicate);
        residual = std::max(residual, sup_distance(w, path[k + 1]));
        next.push_back(std::move(w));
      }
      out.picard_residuals.push_back(residual);
      path = std::move(next);
      out.picard_iterations = it;
      if (residual < cfg_.picard_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream os;
      os << "solve_picard: no convergence within " << cfg_.picard_max_iter << " iterations (last residual "
         << out.picard_residuals.back() << ")";
      throw ConvergenceFailure(os.str(), out.picard_residuals);
    }
    for (std::size_t k = 0; k <= k_total; ++k)
      if (k % cfg_.save_every == 0 || k == k_total)
        keep(out, k, path[k], sink);
    return out;
  }

private:
  static SolverConfig validated(SolverConfig c)
  {
    c.validate();
    return c;
  }

  Field increment(std::uint64_t replicate, std::size_t step) const
  {
    return noise_.sample(SeedPath{cfg_.master_seed, replicate, step, stream_purpose::noise}).field;
  }

  void check_noise(const std::vector<Field>* noise, std::size_t k_total) const
  {
    if (noise && noise->size() != k_total)
      throw ConfigurationError("solver: noise path length does not match the number of steps");
  }

  void keep(PathSolution& out, std::size_t k, const Field& u, const FrameSink& sink) const
  {
    const double t = static_cast<double>(k) * cfg_.dt;
    if (sink)
      sink(k, t, u);
    out.frames.push_back(u);
    out.times.push_back(t);
  }

  void guard(const Field& u, std::size_t step, std::uint64_t replicate) const
  {
    for (double v : u.values) {
      if (!std::isfinite(v))
        throw BlowUpError("solver: non-finite value at step " + std::to_string(step), step, replicate);
      if (std::abs(v) > guard_) {
        std::ostringstream os;
        os << "solver: sup-norm exceeds " << guard_ << " at step " << step;
        throw BlowUpError(os.str(), step, replicate);
      }
    }
  }

  SolverConfig cfg_;
  SemigroupOperator step_;
  NoiseSynthesizer noise_;
  Field u0_{Grid(1, 2, 1.0)};
  double guard_ = 0.0;
  std::vector<complex> phi_;
};

//! Exponential-Euler path (config.scheme is ignored).
inline PathSolution solve(const SolverConfig& config, std::uint64_t replicate_id)
{
  return Solver(config).euler(replicate_id);
}

//! Picard path on the replicate's own noise (config.scheme is ignored).
inline PathSolution solve_picard(const SolverConfig& config, std::uint64_t replicate_id)
{
  return Solver(config).picard(replicate_id);
}

//! Sums consecutive groups of `factor` increments: the same Brownian path
//! observed on a `factor` times coarser time grid.
inline std::vector<Field> coarsen_noise(const std::vector<Field>& fine, std::size_t factor)
{
  if (factor == 0 || fine.size() % factor != 0)
    throw ConfigurationError("coarsen_noise: path length must be a multiple of the factor");
  std::vector<Field> out;
  for (std::size_t k = 0; k < fine.size(); k += factor) {
    Field s = fine[k];
    for (std::size_t j = 1; j < factor; ++j)
      for (std::size_t i = 0; i < s.size(); ++i)
        s.values[i] += fine[k + j].values[i];
    out.push_back(std::move(s));
  }
  return out;
}

struct MomentEstimate
{
  double p = 2.0;
  //! max over kept frames and cells of the empirical E|u|^p, bootstrap
  //! bias-corrected (the plain maximum of noisy means is biased upward)
  double value = 0.0;
  //! the plain maximum of the empirical means
  double raw_max = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double time = 0.0;
  std::size_t cell = 0;
  std::size_t replicates = 0;
};

struct MomentOptions
{
  std::size_t threads = 1;
  std::size_t bootstrap = 200;
  //! Candidate (frame, cell) pairs carried into the bootstrap of the max.
  std::size_t top_k = 32;
  double confidence = 0.95;
  //! Replicates per deterministic reduction batch.
  std::size_t batch = 16;
};

//! sup_t sup_x E|u(t, x)|^p over the kept frames, with a bootstrap bias
//! correction and basic bootstrap interval over replicates for the maximum. Two passes over the replicates:
//! the first locates the largest means, the second keeps per-replicate values
//! at the top candidates only.
inline MomentEstimate moment_estimate(const SolverConfig& config, double p, std::size_t n_replicates, const MomentOptions& opts = {})
{
  if (!(p >= 2.0))
    throw DomainError("moment_estimate: p must be at least 2");
  if (n_replicates < 100)
    throw ConfigurationError("moment_estimate: need at least 100 replicates");
  const Solver solver(config);
  const std::size_t frames = (config.steps() + config.save_every - 1) / config.save_every + 1;
  const std::size_t cells = config.grid.size();

  auto powers = [&](std::uint64_t rep) {
    const auto path = solver.run(rep);
    std::vector<double> v;
    v.reserve(path.frames.size() * cells);
    for (const auto& f : path.frames)
      for (double x : f.values)
        v.push_back(std::pow(std::abs(x), p));
    return v;
  };

  std::vector<double> sum(frames * cells, 0.0);
  for (std::size_t b0 = 0; b0 < n_replicates; b0 += opts.batch) {
    const std::size_t nb = std::min(opts.batch, n_replicates - b0);
    std::vector<std::vector<double>> slots(nb);
    parallel_for(nb, opts.threads, [&](std::size_t i) { slots[i] = powers(b0 + i); });
    for (const auto& s : slots)
      for (std::size_t j = 0; j < s.size(); ++j)
        sum[j] += s[j];
  }
  std::vector<std::size_t> order(sum.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = std::min(opts.top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return sum[a] > sum[b] || (sum[a] == sum[b] && a < b); });
  order.resize(k);

  std::vector<std::vector<double>> values(n_replicates);
  for (std::size_t b0 = 0; b0 < n_replicates; b0 += opts.batch) {
    const std::size_t nb = std::min(opts.batch, n_replicates - b0);
    parallel_for(nb, opts.threads, [&](std::size_t i) {
      const auto all = powers(b0 + i);
      std::vector<double> sel(k);
      for (std::size_t j = 0; j < k; ++j)
        sel[j] = all[order[j]];
      values[b0 + i] = std::move(sel);
    });
  }

  const double n = static_cast<double>(n_replicates);
  MomentEstimate est;
  est.p = p;
  est.replicates = n_replicates;
  est.raw_max = sum[order[0]] / n;
  est.time = static_cast<double>(std::min(order[0] / cells * config.save_every, config.steps())) * config.dt;
  est.cell = order[0] % cells;

  std::vector<double> boot(opts.bootstrap);
  for (std::size_t b = 0; b < opts.bootstrap; ++b) {
    CounterRng rng(SeedPath{config.master_seed, b, 0, stream_purpose::bootstrap});
    std::vector<double> acc(k, 0.0);
    for (std::size_t r = 0; r < n_replicates; ++r) {
      const auto pick = static_cast<std::size_t>(rng.uniform() * n);
      for (std::size_t j = 0; j < k; ++j)
        acc[j] += values[pick][j];
    }
    boot[b] = *std::max_element(acc.begin(), acc.end()) / n;
  }
  std::sort(boot.begin(), boot.end());
  const double boot_mean = std::accumulate(boot.begin(), boot.end(), 0.0) / static_cast<double>(boot.size());
  est.value = 2.0 * est.raw_max - boot_mean;
  const double tail = 0.5 * (1.0 - opts.confidence);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(boot.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, boot.size() - 1);
    return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
  };
  // basic bootstrap interval, centred like the bias-corrected estimate
  est.ci_low = 2.0 * est.raw_max - quantile(1.0 - tail);
  est.ci_high = 2.0 * est.raw_max - quantile(tail);
  return est;
}

} // namespace fracspde
