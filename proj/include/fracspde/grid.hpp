#pragma once

#include "error.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace fracspde {

//! Uniform periodic lattice on [-L/2, L/2)^d with n points per axis.
//!
//! Physical point j on an axis sits at x_j = -L/2 + j dx. Frequency arrays
//! use FFT ordering: storage index i holds the signed mode
//! k = i for i < n/2 and k = i - n otherwise, at angular frequency 2 pi k / L.
//! Multi-dimensional arrays are row-major with axis 0 slowest.
class Grid
{
public:
  Grid(std::size_t dim, std::size_t n_per_dim, double box_length)
    : dim_(dim)
    , n_(n_per_dim)
    , length_(box_length)
  {
    if (dim_ == 0)
      throw ConstraintViolation("Grid: dimension must be positive");
    if (n_ < 2 || n_ % 2 != 0)
      throw ConstraintViolation("Grid: n_per_dim must be an even integer >= 2");
    if (!(length_ > 0.0) || !std::isfinite(length_))
      throw ConstraintViolation("Grid: box_length must be positive and finite");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_per_dim() const noexcept { return n_; }
  double box_length() const noexcept { return length_; }
  double spacing() const noexcept { return length_ / static_cast<double>(n_); }
  double cell_volume() const noexcept { return std::pow(spacing(), static_cast<double>(dim_)); }
  double frequency_spacing() const noexcept { return 2.0 * std::numbers::pi / length_; }

  std::size_t size() const noexcept
  {
    std::size_t s = 1;
    for (std::size_t i = 0; i < dim_; ++i)
      s *= n_;
    return s;
  }

  double coordinate(std::size_t j) const noexcept
  {
    return -0.5 * length_ + static_cast<double>(j) * spacing();
  }

  //! Index of the point x = 0 on each axis.
  std::size_t origin_index() const noexcept { return n_ / 2; }

  long signed_mode(std::size_t i) const noexcept
  {
    const long n = static_cast<long>(n_);
    const long k = static_cast<long>(i);
    return k < n / 2 ? k : k - n;
  }

  double frequency(std::size_t i) const noexcept
  {
    return frequency_spacing() * static_cast<double>(signed_mode(i));
  }

  bool is_nyquist(std::size_t i) const noexcept { return i == n_ / 2; }

  //! Decompose a flat index into per-axis indices.
  std::vector<std::size_t> unflatten(std::size_t flat) const
  {
    std::vector<std::size_t> idx(dim_);
    for (std::size_t a = dim_; a-- > 0;) {
      idx[a] = flat % n_;
      flat /= n_;
    }
    return idx;
  }

  std::size_t flatten(const std::vector<std::size_t>& idx) const
  {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dim_; ++a)
      flat = flat * n_ + (idx[a] % n_);
    return flat;
  }

  //! Flat index displaced by the signed lattice offset, wrapping periodically.
  std::size_t shifted(std::size_t flat, const std::vector<long>& offset) const
  {
    auto idx = unflatten(flat);
    const long n = static_cast<long>(n_);
    for (std::size_t a = 0; a < dim_; ++a) {
      long v = (static_cast<long>(idx[a]) + offset.at(a)) % n;
      if (v < 0)
        v += n;
      idx[a] = static_cast<std::size_t>(v);
    }
    return flatten(idx);
  }

  bool operator==(const Grid&) const = default;

private:
  std::size_t dim_;
  std::size_t n_;
  double length_;
};

enum class Space
{
  physical,
  frequency
};

//! Array of values over a Grid, tagged with the space it lives in.
template<typename Scalar>
struct BasicField
{
  Grid grid;
  std::vector<Scalar> values;
  Space space = Space::physical;

  BasicField(Grid g, Space s = Space::physical)
    : grid(std::move(g))
    , values(grid.size(), Scalar{})
    , space(s)
  {}

  BasicField(Grid g, std::vector<Scalar> v, Space s = Space::physical)
    : grid(std::move(g))
    , values(std::move(v))
    , space(s)
  {
    if (values.size() != grid.size())
      throw ConstraintViolation("Field: value count does not match the grid");
  }

  std::size_t size() const noexcept { return values.size(); }
  Scalar operator[](std::size_t i) const { return values[i]; }
};

using Field = BasicField<double>;
using ComplexField = BasicField<std::complex<double>>;

//! Field sampled from a function of the physical coordinates.
template<typename Fn>
Field sample_field(const Grid& grid, Fn&& fn)
{
  Field f(grid);
  std::vector<double> x(grid.dim());
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    const auto idx = grid.unflatten(flat);
    for (std::size_t a = 0; a < grid.dim(); ++a)
      x[a] = grid.coordinate(idx[a]);
    f.values[flat] = fn(x);
  }
  return f;
}

//! sum of values times the cell volume.
inline double integrate(const Field& f)
{
  double s = 0.0;
  for (double v : f.values)
    s += v;
  return s * f.grid.cell_volume();
}

inline double sup_norm(const Field& f)
{
  double m = 0.0;
  for (double v : f.values)
    m = std::max(m, std::abs(v));
  return m;
}

inline double sup_distance(const Field& a, const Field& b)
{
  if (!(a.grid == b.grid))
    throw ConstraintViolation("sup_distance: fields live on different grids");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

} // namespace fracspde
