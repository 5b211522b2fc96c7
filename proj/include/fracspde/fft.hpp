#pragma once

#include "grid.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

namespace fracspde::fft {

enum class Direction : int
{
  //! sum_j f_j exp(-2 pi i k j / n)
  forward = FFTW_FORWARD,
  //! sum_k c_k exp(+2 pi i k j / n), unnormalized
  backward = FFTW_BACKWARD
};

namespace detail {

//! In-place complex plans keyed by shape and direction. Planning is guarded
//! by a mutex (FFTW planners are not reentrant); execution through
//! fftw_execute_dft is thread-safe. FFTW_ESTIMATE keeps plan selection
//! deterministic run to run, which bit-exact reproducibility relies on.
class PlanCache
{
public:
  static PlanCache& instance()
  {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t dim, std::size_t n, Direction dir)
  {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(dim, n, static_cast<int>(dir));
    if (auto it = plans_.find(key); it != plans_.end())
      return it->second;
    std::vector<int> dims(dim, static_cast<int>(n));
    std::size_t total = 1;
    for (std::size_t i = 0; i < dim; ++i)
      total *= n;
    std::vector<std::complex<double>> scratch(total);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft(static_cast<int>(dim), dims.data(), buf, buf,
                                   static_cast<int>(dir), FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

  ~PlanCache()
  {
    for (auto& [key, plan] : plans_)
      fftw_destroy_plan(plan);
  }

private:
  PlanCache() = default;

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

} // namespace detail

//! Unnormalized in-place d-dimensional DFT over a grid-shaped buffer.
inline void transform(const Grid& grid, std::span<std::complex<double>> data, Direction dir)
{
  if (data.size() != grid.size())
    throw ConstraintViolation("fft::transform: buffer size does not match grid");
  fftw_plan plan = detail::PlanCache::instance().get(grid.dim(), grid.n_per_dim(), dir);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

inline std::vector<std::complex<double>> to_complex(const std::vector<double>& v)
{
  return std::vector<std::complex<double>>(v.begin(), v.end());
}

//! Forward transform of a real field, then pointwise multiplication by
//! `multiplier` (FFT ordering), then normalized inverse. Returns the real part
//! and stores the largest imaginary residue in `imag_residue` if given.
inline std::vector<double> apply_multiplier(const Grid& grid,
                                            const std::vector<double>& values,
                                            std::span<const std::complex<double>> multiplier,
                                            double* imag_residue = nullptr)
{
  auto buf = to_complex(values);
  transform(grid, buf, Direction::forward);
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] *= multiplier[i];
  transform(grid, buf, Direction::backward);
  const double scale = 1.0 / static_cast<double>(grid.size());
  std::vector<double> out(buf.size());
  double imag = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out[i] = buf[i].real() * scale;
    imag = std::max(imag, std::abs(buf[i].imag() * scale));
  }
  if (imag_residue)
    *imag_residue = imag;
  return out;
}

} // namespace fracspde::fft
