#pragma once

#include "error.hpp"
#include "grid.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fracspde {

//! Scalar coefficient b(u) or sigma(u) chosen from named presets:
//!   constant(c)  c
//!   linear(a)    a u
//!   affine(a, c) a u + c
//!   sine(a, k)   a sin(k u)
//! Each carries its Lipschitz constant.
class Coefficient
{
public:
  enum class Kind
  {
    constant,
    linear,
    affine,
    sine
  };

  static Coefficient constant(double c) { return Coefficient(Kind::constant, {c}); }
  static Coefficient linear(double a) { return Coefficient(Kind::linear, {a}); }
  static Coefficient affine(double a, double c) { return Coefficient(Kind::affine, {a, c}); }
  static Coefficient sine(double a, double k) { return Coefficient(Kind::sine, {a, k}); }

  static Coefficient preset(const std::string& name, const std::vector<double>& params)
  {
    auto need = [&](std::size_t n) {
      if (params.size() != n)
        throw ConfigurationError("coefficient preset '" + name + "' takes " + std::to_string(n) + " parameter(s)");
    };
    if (name == "constant") {
      need(1);
      return constant(params[0]);
    }
    if (name == "linear") {
      need(1);
      return linear(params[0]);
    }
    if (name == "affine") {
      need(2);
      return affine(params[0], params[1]);
    }
    if (name == "sine") {
      need(2);
      return sine(params[0], params[1]);
    }
    throw ConfigurationError("unknown coefficient preset '" + name + "' (constant, linear, affine, sine)");
  }

  double operator()(double u) const
  {
    switch (kind_) {
      case Kind::constant:
        return p_[0];
      case Kind::linear:
        return p_[0] * u;
      case Kind::affine:
        return p_[0] * u + p_[1];
      case Kind::sine:
        return p_[0] * std::sin(p_[1] * u);
    }
    return 0.0;
  }

  double lipschitz() const
  {
    switch (kind_) {
      case Kind::constant:
        return 0.0;
      case Kind::linear:
      case Kind::affine:
        return std::abs(p_[0]);
      case Kind::sine:
        return std::abs(p_[0] * p_[1]);
    }
    return 0.0;
  }

  //! Identically zero (lets the solver skip work without changing results).
  bool is_zero() const
  {
    switch (kind_) {
      case Kind::constant:
        return p_[0] == 0.0;
      case Kind::linear:
        return p_[0] == 0.0;
      case Kind::affine:
        return p_[0] == 0.0 && p_[1] == 0.0;
      case Kind::sine:
        return p_[0] == 0.0 || p_[1] == 0.0;
    }
    return false;
  }

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return p_; }

  std::string name() const
  {
    switch (kind_) {
      case Kind::constant:
        return "constant";
      case Kind::linear:
        return "linear";
      case Kind::affine:
        return "affine";
      case Kind::sine:
        return "sine";
    }
    return "unknown";
  }

  bool operator==(const Coefficient&) const = default;

private:
  Coefficient(Kind k, std::vector<double> p)
    : kind_(k)
    , p_(std::move(p))
  {
    for (double v : p_)
      if (!std::isfinite(v))
        throw ConfigurationError("coefficient parameters must be finite");
  }

  Kind kind_;
  std::vector<double> p_;
};

//! Initial condition u0: a named preset or an explicit field.
//!   zero
//!   constant(c)
//!   cosine(a, k)     a cos(2 pi k x_1 / L)
//!   gaussian(a, w)   a exp(-|x|^2 / (2 w^2))
//!   spike(m)         m / dx^d at the origin cell
class InitialCondition
{
public:
  enum class Kind
  {
    zero,
    constant,
    cosine,
    gaussian,
    spike,
    field
  };

  static InitialCondition zero() { return InitialCondition(Kind::zero, {}); }
  static InitialCondition constant(double c) { return InitialCondition(Kind::constant, {c}); }
  static InitialCondition cosine(double amplitude, double mode) { return InitialCondition(Kind::cosine, {amplitude, mode}); }
  static InitialCondition gaussian(double amplitude, double width)
  {
    if (!(width > 0.0))
      throw ConfigurationError("gaussian initial condition needs a positive width");
    return InitialCondition(Kind::gaussian, {amplitude, width});
  }
  static InitialCondition spike(double mass) { return InitialCondition(Kind::spike, {mass}); }
  static InitialCondition from_field(Field f)
  {
    InitialCondition ic(Kind::field, {});
    ic.field_ = std::move(f);
    return ic;
  }

  static InitialCondition preset(const std::string& name, const std::vector<double>& params)
  {
    auto need = [&](std::size_t n) {
      if (params.size() != n)
        throw ConfigurationError("initial condition '" + name + "' takes " + std::to_string(n) + " parameter(s)");
    };
    if (name == "zero") {
      need(0);
      return zero();
    }
    if (name == "constant") {
      need(1);
      return constant(params[0]);
    }
    if (name == "cosine") {
      need(2);
      return cosine(params[0], params[1]);
    }
    if (name == "gaussian") {
      need(2);
      return gaussian(params[0], params[1]);
    }
    if (name == "spike") {
      need(1);
      return spike(params[0]);
    }
    throw ConfigurationError("unknown initial condition '" + name + "' (zero, constant, cosine, gaussian, spike)");
  }

  Field sample(const Grid& grid) const
  {
    switch (kind_) {
      case Kind::zero:
        return Field(grid);
      case Kind::constant:
        return Field(grid, std::vector<double>(grid.size(), p_[0]));
      case Kind::cosine: {
        const double xi = 2.0 * std::numbers::pi * p_[1] / grid.box_length();
        return sample_field(grid, [&](const std::vector<double>& x) { return p_[0] * std::cos(xi * x[0]); });
      }
      case Kind::gaussian:
        return sample_field(grid, [&](const std::vector<double>& x) {
          double r2 = 0.0;
          for (double v : x)
            r2 += v * v;
          return p_[0] * std::exp(-0.5 * r2 / (p_[1] * p_[1]));
        });
      case Kind::spike: {
        Field f(grid);
        f.values[grid.flatten(std::vector<std::size_t>(grid.dim(), grid.origin_index()))] = p_[0] / grid.cell_volume();
        return f;
      }
      case Kind::field:
        if (!(field_->grid == grid))
          throw ConfigurationError("initial condition field lives on a different grid");
        return *field_;
    }
    return Field(grid);
  }

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return p_; }

  std::string name() const
  {
    switch (kind_) {
      case Kind::zero:
        return "zero";
      case Kind::constant:
        return "constant";
      case Kind::cosine:
        return "cosine";
      case Kind::gaussian:
        return "gaussian";
      case Kind::spike:
        return "spike";
      case Kind::field:
        return "field";
    }
    return "unknown";
  }

private:
  InitialCondition(Kind k, std::vector<double> p)
    : kind_(k)
    , p_(std::move(p))
  {
    for (double v : p_)
      if (!std::isfinite(v))
        throw ConfigurationError("initial condition parameters must be finite");
  }

  Kind kind_;
  std::vector<double> p_;
  std::optional<Field> field_;
};

} // namespace fracspde
