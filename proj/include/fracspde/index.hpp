#pragma once

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace fracspde {

//! Stability indices alpha and skewness parameters delta of the product
//! operator sum_i D_{delta_i}^{alpha_i}, one pair per spatial axis.
class FractionalIndex
{
public:
  //! Indices closer than this to 1 are rejected.
  static constexpr double alpha_one_exclusion = 1e-3;

  FractionalIndex(std::vector<double> alpha, std::vector<double> delta)
    : alpha_(std::move(alpha))
    , delta_(std::move(delta))
  {
    validate();
  }

  //! Symmetric index (delta = 0) with the same alpha on every axis.
  static FractionalIndex isotropic(std::size_t d, double alpha, double delta = 0.0)
  {
    return FractionalIndex(std::vector<double>(d, alpha), std::vector<double>(d, delta));
  }

  std::size_t dim() const noexcept { return alpha_.size(); }
  const std::vector<double>& alpha() const noexcept { return alpha_; }
  const std::vector<double>& delta() const noexcept { return delta_; }
  double alpha(std::size_t i) const { return alpha_.at(i); }
  double delta(std::size_t i) const { return delta_.at(i); }

  //! alpha_0 = min_i alpha_i.
  double alpha_min() const { return *std::min_element(alpha_.begin(), alpha_.end()); }

  //! kappa = min_i cos(delta_i pi / 2), strictly positive for valid indices.
  double kappa() const
  {
    double k = 1.0;
    for (double d : delta_)
      k = std::min(k, std::cos(d * std::numbers::pi / 2.0));
    return k;
  }

  //! sum_i 1/alpha_i, the white-noise admissibility threshold.
  double inverse_alpha_sum() const
  {
    double s = 0.0;
    for (double a : alpha_)
      s += 1.0 / a;
    return s;
  }

  bool all_alpha_two() const
  {
    return std::all_of(alpha_.begin(), alpha_.end(), [](double a) { return a == 2.0; });
  }

  bool symmetric() const
  {
    return std::all_of(delta_.begin(), delta_.end(), [](double d) { return d == 0.0; });
  }

  bool operator==(const FractionalIndex&) const = default;

private:
  void validate() const
  {
    if (alpha_.empty())
      throw ConstraintViolation("FractionalIndex: dimension must be positive");
    if (alpha_.size() != delta_.size())
      throw ConstraintViolation("FractionalIndex: alpha and delta must have the same length");
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      const double a = alpha_[i];
      const double d = delta_[i];
      std::ostringstream where;
      where << "FractionalIndex: axis " << i << " (alpha=" << a << ", delta=" << d << "): ";
      if (!std::isfinite(a) || !(a > 0.0) || a > 2.0)
        throw ConstraintViolation(where.str() + "alpha must lie in (0, 2]");
      if (std::abs(a - 1.0) < alpha_one_exclusion)
        throw ConstraintViolation(where.str() + "alpha = 1 is excluded");
      if (!std::isfinite(d) || std::abs(d) > std::min(a, 2.0 - a) + 1e-12)
        throw ConstraintViolation(where.str() + "|delta| must not exceed min(alpha, 2 - alpha)");
    }
  }

  std::vector<double> alpha_;
  std::vector<double> delta_;
};

} // namespace fracspde
