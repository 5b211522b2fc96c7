#pragma once

#include "error.hpp"
#include "fft.hpp"
#include "grid.hpp"
#include "rng.hpp"
#include "spectral_measure.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <sstream>
#include <vector>

namespace fracspde {

//! One increment Delta M of the martingale measure on a grid cell lattice:
//! values are cell averages, so Cov(X_j, X_k) = dt * Gamma_disc(x_j - x_k).
struct NoiseIncrement
{
  Field field;
  double dt = 0.0;
  SeedPath seed_path;
  SpectralMeasure measure;
  //! Largest |Im| / sup |Re| left by the inverse transform.
  double imaginary_ratio = 0.0;
};

//! Spectral filter for periodic synthesis. Real white noise w_j ~ N(0, 1) is
//! transformed, multiplied by
//!   s_k = sqrt(N dt (2 pi / L)^d m(|xi_k|)),
//! and transformed back (divided by N). The filter depends on |xi| only, so
//! the frequency draws are Hermitian and the output is real up to round-off.
//! The resulting covariance is dt times the band-limited Riemann sum
//!   Gamma_disc(x) = sum_k (2 pi / L)^d m(|xi_k|) exp(i xi_k x).
class NoiseSynthesizer
{
public:
  NoiseSynthesizer(const Grid& grid, const SpectralMeasure& measure, double dt)
    : grid_(grid)
    , measure_(measure)
    , dt_(dt)
    , filter_(grid.size())
  {
    if (!(dt > 0.0))
      throw DomainError("noise: dt must be positive");
    if (measure.dim() != grid.dim())
      throw ConstraintViolation("noise: measure and grid dimensions differ");
    const double n_total = static_cast<double>(grid.size());
    const double cell = std::pow(grid.frequency_spacing(), static_cast<double>(grid.dim()));
    for (std::size_t flat = 0; flat < grid.size(); ++flat) {
      const auto ix = grid.unflatten(flat);
      double r2 = 0.0;
      for (auto i : ix)
        r2 += grid.frequency(i) * grid.frequency(i);
      if (r2 == 0.0 && measure.kind() == MeasureKind::riesz) {
        filter_[flat] = 0.0; // singular zero mode: mean-zero field on the torus
        continue;
      }
      const double m = measure.density(std::sqrt(r2));
      if (!std::isfinite(m) || m < 0.0) {
        std::ostringstream os;
        os << "noise: spectral density of " << measure.description() << " is " << m << " at |xi| = " << std::sqrt(r2);
        throw SynthesisError(os.str());
      }
      filter_[flat] = std::sqrt(n_total * dt * cell * m);
    }
  }

  const Grid& grid() const noexcept { return grid_; }
  const SpectralMeasure& measure() const noexcept { return measure_; }
  double dt() const noexcept { return dt_; }

  NoiseIncrement sample(const SeedPath& path) const
  {
    CounterRng rng(path);
    return sample(rng, path);
  }

  NoiseIncrement sample(CounterRng& rng, const SeedPath& path) const
  {
    std::vector<std::complex<double>> buf(grid_.size());
    for (auto& v : buf)
      v = rng.normal();
    fft::transform(grid_, buf, fft::Direction::forward);
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] *= filter_[i];
    fft::transform(grid_, buf, fft::Direction::backward);
    const double scale = 1.0 / static_cast<double>(grid_.size());
    Field f(grid_);
    double imag = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      f.values[i] = buf[i].real() * scale;
      imag = std::max(imag, std::abs(buf[i].imag() * scale));
      norm = std::max(norm, std::abs(f.values[i]));
    }
    return {std::move(f), dt_, path, measure_, norm > 0.0 ? imag / norm : 0.0};
  }

  //! dt * Gamma_disc at every lag (lag index = flat grid offset from 0).
  Field lag_covariance() const
  {
    std::vector<std::complex<double>> buf(grid_.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = filter_[i] * filter_[i];
    fft::transform(grid_, buf, fft::Direction::backward);
    Field out(grid_);
    const double n_total = static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      out.values[i] = buf[i].real() / n_total;
    return out;
  }

private:
  Grid grid_;
  SpectralMeasure measure_;
  double dt_;
  std::vector<double> filter_;
};

//! Draws one increment from the stream identified by `path`.
inline NoiseIncrement sample_increment(const Grid& grid, const SpectralMeasure& measure, double dt, const SeedPath& path)
{
  return NoiseSynthesizer(grid, measure, dt).sample(path);
}

struct CovarianceEstimate
{
  double value = 0.0;
  double standard_error = 0.0;
};

//! Sample covariance of increment values at spatial offset `lag`, pooled over
//! all cells x: mean over x of the unbiased ensemble covariance of
//! (X(x), X(x + lag)). Standard errors come from the spread of per-replicate
//! spatial averages.
inline std::map<std::vector<long>, CovarianceEstimate> empirical_covariance(const std::vector<NoiseIncrement>& ensemble,
                                                                           const std::vector<std::vector<long>>& lags)
{
  if (ensemble.size() < 100)
    throw ConfigurationError("empirical_covariance: need at least 100 increments");
  const auto& first = ensemble.front();
  for (const auto& inc : ensemble)
    if (!(inc.field.grid == first.field.grid) || !(inc.measure == first.measure) || inc.dt != first.dt)
      throw ConfigurationError("empirical_covariance: ensemble mixes grids, measures or time steps");
  const Grid& grid = first.field.grid;
  const std::size_t n = grid.size();
  const double r = static_cast<double>(ensemble.size());
  std::vector<double> mean(n, 0.0);
  for (const auto& inc : ensemble)
    for (std::size_t i = 0; i < n; ++i)
      mean[i] += inc.field.values[i];
  for (auto& m : mean)
    m /= r;

  std::map<std::vector<long>, CovarianceEstimate> out;
  for (const auto& lag : lags) {
    if (lag.size() != grid.dim())
      throw ConfigurationError("empirical_covariance: lag dimension differs from grid dimension");
    std::vector<std::size_t> partner(n);
    for (std::size_t i = 0; i < n; ++i)
      partner[i] = grid.shifted(i, lag);
    std::vector<double> per_rep(ensemble.size());
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
      const auto& v = ensemble[k].field.values;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += (v[i] - mean[i]) * (v[partner[i]] - mean[partner[i]]);
      per_rep[k] = s / static_cast<double>(n);
    }
    double sum = 0.0;
    for (double p : per_rep)
      sum += p;
    const double avg = sum / r;
    double var = 0.0;
    for (double p : per_rep)
      var += (p - avg) * (p - avg);
    var /= (r - 1.0);
    out[lag] = {sum / (r - 1.0), std::sqrt(var / r)};
  }
  return out;
}

} // namespace fracspde
