#pragma once

#include "error.hpp"
#include "fft.hpp"
#include "grid.hpp"
#include "index.hpp"

#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

namespace fracspde {

using complex = std::complex<double>;

namespace detail {

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

//! Single-axis generator symbol -|xi|^alpha exp(-i delta pi/2 sgn xi).
inline complex axis_symbol(double alpha, double delta, double xi)
{
  if (xi == 0.0)
    return {0.0, 0.0};
  const double mag = std::pow(std::abs(xi), alpha);
  const double phase = -delta * std::numbers::pi / 2.0 * sgn(xi);
  return -mag * complex(std::cos(phase), std::sin(phase));
}

inline void require_dim(const FractionalIndex& idx, std::size_t d, const char* who)
{
  if (idx.dim() != d) {
    std::ostringstream os;
    os << who << ": index dimension " << idx.dim() << " does not match " << d;
    throw ConstraintViolation(os.str());
  }
}

} // namespace detail

//! Fourier symbol of sum_i D_{delta_i}^{alpha_i} at the frequency xi.
//! Convention: (F phi)(xi) = int exp(i xi x) phi(x) dx.
inline complex generator_symbol(const FractionalIndex& idx, std::span<const double> xi)
{
  detail::require_dim(idx, xi.size(), "generator_symbol");
  complex s{0.0, 0.0};
  for (std::size_t i = 0; i < xi.size(); ++i)
    s += detail::axis_symbol(idx.alpha(i), idx.delta(i), xi[i]);
  return s;
}

//! psi_{alpha,xi}(t) = exp(t * generator_symbol), the Fourier transform of the
//! Green kernel at time t.
inline complex semigroup_symbol(const FractionalIndex& idx, std::span<const double> xi, double t)
{
  if (!(t >= 0.0))
    throw DomainError("semigroup_symbol: t must be non-negative");
  if (t == 0.0)
    return {1.0, 0.0};
  return std::exp(t * generator_symbol(idx, xi));
}

//! S_alpha(xi) = sum_i |xi_i|^alpha_i.
inline double s_alpha(std::span<const double> xi, const FractionalIndex& idx)
{
  detail::require_dim(idx, xi.size(), "s_alpha");
  double s = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i)
    s += std::pow(std::abs(xi[i]), idx.alpha(i));
  return s;
}

//! Generator symbol sampled on the grid's frequency lattice, in FFT storage
//! order, ready to multiply a forward FFT (exp(-i k x) convention) of a real
//! field. Because the forward FFT uses the opposite sign from the symbol
//! convention, each mode xi receives the symbol at -xi. On Nyquist axes the
//! symbol is replaced by its real part so that the multiplier is Hermitian:
//! the operator maps real fields to real fields and exp(t * symbol) is still
//! an exact semigroup on the lattice.
inline std::vector<complex> lattice_generator_symbol(const FractionalIndex& idx, const Grid& grid)
{
  detail::require_dim(idx, grid.dim(), "lattice_generator_symbol");
  const std::size_t n = grid.n_per_dim();
  std::vector<std::vector<complex>> axis(grid.dim(), std::vector<complex>(n));
  for (std::size_t a = 0; a < grid.dim(); ++a)
    for (std::size_t i = 0; i < n; ++i) {
      complex s = detail::axis_symbol(idx.alpha(a), idx.delta(a), -grid.frequency(i));
      if (grid.is_nyquist(i))
        s = {s.real(), 0.0};
      axis[a][i] = s;
    }
  std::vector<complex> out(grid.size());
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t rem = flat;
    complex s{0.0, 0.0};
    for (std::size_t a = grid.dim(); a-- > 0;) {
      s += axis[a][rem % n];
      rem /= n;
    }
    out[flat] = s;
  }
  return out;
}

//! The Green-kernel convolution semigroup S_t on a fixed grid, with the
//! Fourier multiplier precomputed. Immutable once built.
class SemigroupOperator
{
public:
  SemigroupOperator(const FractionalIndex& idx, const Grid& grid, double t)
    : grid_(grid)
    , t_(t)
  {
    if (!(t >= 0.0))
      throw DomainError("SemigroupOperator: t must be non-negative");
    multiplier_ = lattice_generator_symbol(idx, grid);
    for (auto& m : multiplier_)
      m = (t == 0.0) ? complex(1.0, 0.0) : std::exp(t * m);
  }

  const Grid& grid() const noexcept { return grid_; }
  double time() const noexcept { return t_; }
  std::span<const complex> multiplier() const noexcept { return multiplier_; }

  Field apply(const Field& f) const
  {
    if (!(f.grid == grid_))
      throw ConstraintViolation("SemigroupOperator: field grid mismatch");
    if (f.space != Space::physical)
      throw ConstraintViolation("SemigroupOperator: expects a physical-space field");
    if (t_ == 0.0)
      return f;
    return Field(grid_, fft::apply_multiplier(grid_, f.values, multiplier_));
  }

private:
  Grid grid_;
  double t_;
  std::vector<complex> multiplier_;
};

//! u -> G(t) * u via the spectral multiplier. t = 0 returns the input.
inline Field apply_semigroup(const Field& field, const FractionalIndex& idx, double t)
{
  if (!(t >= 0.0))
    throw DomainError("apply_semigroup: t must be non-negative");
  if (t == 0.0)
    return field;
  return SemigroupOperator(idx, field.grid, t).apply(field);
}

struct GeneratorResult
{
  Field field;
  //! Fraction of spectral energy in modes with max_a |k_a| >= n/4.
  double top_octave_energy_fraction = 0.0;
  bool accuracy_warning = false;
};

//! Applies the fractional generator as a Fourier multiplier. Flags fields
//! whose top-octave spectral energy exceeds `warn_threshold`.
inline GeneratorResult apply_generator(const Field& field,
                                       const FractionalIndex& idx,
                                       double warn_threshold = 1e-10)
{
  const Grid& grid = field.grid;
  const auto symbol = lattice_generator_symbol(idx, grid);
  auto spec = fft::to_complex(field.values);
  fft::transform(grid, spec, fft::Direction::forward);
  double total = 0.0, top = 0.0;
  const long quarter = static_cast<long>(grid.n_per_dim() / 4);
  for (std::size_t flat = 0; flat < spec.size(); ++flat) {
    const double e = std::norm(spec[flat]);
    total += e;
    const auto ix = grid.unflatten(flat);
    long kmax = 0;
    for (auto i : ix)
      kmax = std::max(kmax, std::abs(grid.signed_mode(i)));
    if (kmax >= quarter)
      top += e;
  }
  GeneratorResult r{Field(grid, fft::apply_multiplier(grid, field.values, symbol))};
  r.top_octave_energy_fraction = total > 0.0 ? top / total : 0.0;
  r.accuracy_warning = r.top_octave_energy_fraction > warn_threshold;
  return r;
}

// ---------------------------------------------------------------------------
// Kernel evaluation

//! Upper estimate of the mass of the (non-periodized) Green kernel outside
//! the box [-L/2, L/2)^d, from the stable tail asymptotics
//! G(t, x) ~ C t |x|^{-1-alpha} plus a Gaussian-like bulk term.
inline double kernel_leakage_estimate(const FractionalIndex& idx, double t, double box_length)
{
  const double r = 0.5 * box_length;
  double inside = 1.0;
  for (std::size_t a = 0; a < idx.dim(); ++a) {
    const double al = idx.alpha(a);
    const double de = idx.delta(a);
    const double bulk_scale = std::pow(t, 1.0 / al);
    double ext = std::erfc(r / (2.0 * bulk_scale));
    if (al < 2.0) {
      const double c = std::tgamma(1.0 + al) / std::numbers::pi *
                       std::max(std::abs(std::sin(std::numbers::pi * (al + de) / 2.0)),
                                std::abs(std::sin(std::numbers::pi * (al - de) / 2.0)));
      ext += 2.0 * c * t * std::pow(r, -al) / al;
    }
    inside *= 1.0 - std::min(1.0, ext);
  }
  return 1.0 - inside;
}

//! Largest |psi| over modes lying on a Nyquist plane, the band-truncation
//! indicator of a kernel evaluation.
inline double nyquist_modulus(const FractionalIndex& idx, double t, const Grid& grid)
{
  double m = 0.0;
  const double xi_n = std::numbers::pi * static_cast<double>(grid.n_per_dim()) / grid.box_length();
  for (std::size_t a = 0; a < idx.dim(); ++a)
    m = std::max(m, std::exp(-t * std::pow(xi_n, idx.alpha(a)) *
                             std::cos(idx.delta(a) * std::numbers::pi / 2.0)));
  return m;
}

//! Box length for an n-point-per-axis kernel grid at time t: the smallest L
//! whose leakage estimate is below `leakage_tol`, widened towards the largest
//! L that still resolves the band (Nyquist modulus <= band_tol). When the two
//! requirements conflict the band limit wins and leakage is reported later.
inline double suggest_box_length(const FractionalIndex& idx,
                                 double t,
                                 std::size_t n,
                                 double leakage_tol = 1e-6,
                                 double band_tol = 1e-13)
{
  if (!(t > 0.0))
    throw DomainError("suggest_box_length: t must be positive");
  double l_band = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.dim(); ++a) {
    const double need = -std::log(band_tol) / (t * std::cos(idx.delta(a) * std::numbers::pi / 2.0));
    l_band = std::min(l_band, std::numbers::pi * static_cast<double>(n) / std::pow(need, 1.0 / idx.alpha(a)));
  }
  double lo = std::log(1e-8), hi = std::log(1e15);
  if (kernel_leakage_estimate(idx, t, std::exp(hi)) > leakage_tol)
    return l_band;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kernel_leakage_estimate(idx, t, std::exp(mid)) > leakage_tol ? lo : hi) = mid;
  }
  const double l_leak = std::exp(hi);
  if (l_leak >= l_band)
    return l_band;
  return std::sqrt(l_leak * l_band);
}

struct KernelOptions
{
  //! Negative values in [-ripple_tolerance, 0) are clipped; below that the
  //! evaluation fails with TruncationError.
  double ripple_tolerance = 1e-8;
  double leakage_tolerance = 1e-6;
};

struct KernelDiagnostics
{
  double mass = 0.0;
  double min_value = 0.0;
  double clipped_mass = 0.0;
  double leakage = 0.0;
  bool leakage_ok = true;
  double nyquist_modulus = 0.0;
  double imag_residue = 0.0;
};

struct KernelResult
{
  Field field;
  KernelDiagnostics diagnostics;
};

//! Discretized Green kernel G_{alpha,delta}(t, .) on the grid: the inverse
//! DFT of psi sampled on the frequency lattice, i.e. the periodized kernel on
//! the torus. Unit mass holds to round-off by construction (psi(0) = 1).
inline KernelResult kernel(const FractionalIndex& idx, double t, const Grid& grid, const KernelOptions& opts = {})
{
  detail::require_dim(idx, grid.dim(), "kernel");
  if (!(t > 0.0))
    throw DomainError("kernel: t must be positive");
  Field spike(grid);
  std::vector<std::size_t> origin(grid.dim(), grid.origin_index());
  spike.values[grid.flatten(origin)] = 1.0 / grid.cell_volume();
  SemigroupOperator op(idx, grid, t);
  KernelDiagnostics diag;
  Field g(grid, fft::apply_multiplier(grid, spike.values, op.multiplier(), &diag.imag_residue));
  diag.min_value = *std::min_element(g.values.begin(), g.values.end());
  if (diag.min_value < -opts.ripple_tolerance) {
    std::ostringstream os;
    os << "kernel: negative ripple " << diag.min_value << " exceeds tolerance " << opts.ripple_tolerance
       << " (Nyquist modulus " << nyquist_modulus(idx, t, grid) << "); refine the grid or shrink the box";
    throw TruncationError(os.str());
  }
  for (auto& v : g.values)
    if (v < 0.0) {
      diag.clipped_mass += -v * grid.cell_volume();
      v = 0.0;
    }
  diag.mass = integrate(g);
  diag.leakage = kernel_leakage_estimate(idx, t, grid.box_length());
  diag.leakage_ok = diag.leakage <= opts.leakage_tolerance;
  diag.nyquist_modulus = nyquist_modulus(idx, t, grid);
  return {std::move(g), diag};
}

// ---------------------------------------------------------------------------
// Kernel identities

//! Direct (non-FFT) periodic convolution (a * b)(x_m) dx^d, evaluated at the
//! requested flat output indices.
inline std::vector<double> direct_convolution(const Field& a, const Field& b, const std::vector<std::size_t>& at)
{
  const Grid& g = a.grid;
  const std::size_t n = g.n_per_dim();
  std::vector<double> out;
  out.reserve(at.size());
  for (std::size_t m : at) {
    const auto im = g.unflatten(m);
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      // x_m - x_j corresponds to index (m - j + n/2) mod n on each axis
      std::size_t rem = j, flat = 0, stride = 1;
      for (std::size_t ax = g.dim(); ax-- > 0;) {
        const std::size_t ij = rem % n;
        rem /= n;
        flat += ((im[ax] + n + n / 2 - ij) % n) * stride;
        stride *= n;
      }
      s += a.values[j] * b.values[flat];
    }
    out.push_back(s * g.cell_volume());
  }
  return out;
}

struct KernelPropertyReport
{
  double t = 0.0;
  KernelDiagnostics diagnostics;
  double mass_error = 0.0;
  //! sup |G(t) * G(t/2) - G(3t/2)| over sampled points.
  double chapman_kolmogorov_gap = 0.0;
  //! max relative |G(t,x) - t^{-1/alpha} G(1, t^{-1/alpha} x)| on the bulk
  //! (values above 1e-6 of the peak); d = 1 only, NaN otherwise.
  double scaling_gap = std::numeric_limits<double>::quiet_NaN();
  //! fitted c_alpha with G(1,x) <= c_alpha / (1 + |x|^{1+alpha}) on
  //! 1 <= |x| <= L'/4 (L' the unit-time box); d = 1 only.
  double tail_constant = std::numeric_limits<double>::quiet_NaN();
  bool tail_fit_ok = true;
  //! max |G(x) - G(-x)| / max G.
  double asymmetry = 0.0;
  bool asymmetric = false;

  bool normalization_pass(double tol = 1e-6) const { return mass_error <= tol; }
  bool chapman_kolmogorov_pass(double tol = 1e-8) const { return chapman_kolmogorov_gap < tol; }
  bool scaling_pass(double tol = 1e-6) const { return std::isnan(scaling_gap) || scaling_gap < tol; }
};

//! Point reflection x -> -x on the centered lattice: index j -> (n - j) mod n.
inline double reflection_asymmetry(const Field& g)
{
  const Grid& grid = g.grid;
  const std::size_t n = grid.n_per_dim();
  double peak = 0.0, diff = 0.0;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    auto ix = grid.unflatten(flat);
    for (auto& i : ix)
      i = (n - i) % n;
    diff = std::max(diff, std::abs(g.values[flat] - g.values[grid.flatten(ix)]));
    peak = std::max(peak, std::abs(g.values[flat]));
  }
  return peak > 0.0 ? diff / peak : 0.0;
}

//! Sampled output points for identity checks: every point for small grids,
//! an evenly strided subset otherwise.
inline std::vector<std::size_t> check_points(const Grid& grid, std::size_t max_points = 512)
{
  std::vector<std::size_t> pts;
  const std::size_t stride = std::max<std::size_t>(1, grid.size() / max_points);
  for (std::size_t i = 0; i < grid.size(); i += stride)
    pts.push_back(i);
  return pts;
}

struct TailFit
{
  double constant = 0.0;
  double inner_sup = 0.0;
  double outer_sup = 0.0;
  bool ok = false;
};

//! Fits c with G(x) <= c / (1 + |x|^{1+alpha}) on 1 <= |x| <= L/4 of a 1-D
//! unit-time kernel. The fit is accepted when the weighted profile over the
//! outer window [L/8, L/4] stays within twice its sup over [1, L/8], i.e. the
//! kernel decays at least as fast as |x|^{-1-alpha}.
inline TailFit fit_tail_bound(const Field& g1, double alpha)
{
  const Grid& grid = g1.grid;
  const double l = grid.box_length();
  TailFit fit;
  for (std::size_t j = 0; j < grid.n_per_dim(); ++j) {
    const double ax = std::abs(grid.coordinate(j));
    if (ax < 1.0 || ax > l / 4.0)
      continue;
    const double w = g1.values[j] * (1.0 + std::pow(ax, 1.0 + alpha));
    double& sup = ax <= l / 8.0 ? fit.inner_sup : fit.outer_sup;
    sup = std::max(sup, w);
  }
  fit.constant = std::max(fit.inner_sup, fit.outer_sup);
  fit.ok = fit.inner_sup > 0.0 && std::isfinite(fit.constant) && fit.outer_sup <= 2.0 * fit.inner_sup;
  return fit;
}

//! Evaluates the kernel identities at time t on the given grid.
inline KernelPropertyReport check_kernel_properties(const FractionalIndex& idx,
                                                    double t,
                                                    const Grid& grid,
                                                    const KernelOptions& opts = {})
{
  KernelPropertyReport rep;
  rep.t = t;
  const auto g = kernel(idx, t, grid, opts);
  rep.diagnostics = g.diagnostics;
  rep.mass_error = std::abs(g.diagnostics.mass - 1.0);

  const auto g_half = kernel(idx, 0.5 * t, grid, opts);
  const auto g_sum = kernel(idx, 1.5 * t, grid, opts);
  const auto pts = check_points(grid);
  const auto conv = direct_convolution(g.field, g_half.field, pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    rep.chapman_kolmogorov_gap = std::max(rep.chapman_kolmogorov_gap, std::abs(conv[i] - g_sum.field.values[pts[i]]));

  rep.asymmetry = reflection_asymmetry(g.field);
  rep.asymmetric = rep.asymmetry > 1e-9;

  if (grid.dim() == 1) {
    const double alpha = idx.alpha(0);
    const double scale = std::pow(t, 1.0 / alpha);
    const Grid unit(1, grid.n_per_dim(), grid.box_length() / scale);
    const auto g1 = kernel(idx, 1.0, unit, opts);
    const double peak = *std::max_element(g.field.values.begin(), g.field.values.end());
    rep.scaling_gap = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double lhs = g.field.values[j];
      if (lhs < 1e-6 * peak)
        continue;
      const double rhs = g1.field.values[j] / scale;
      rep.scaling_gap = std::max(rep.scaling_gap, std::abs(lhs - rhs) / lhs);
    }
    const auto fit = fit_tail_bound(g1.field, alpha);
    rep.tail_constant = fit.constant;
    rep.tail_fit_ok = fit.ok;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Singular-integral representation of the 1-D generator

//! A(xi) = int_0^inf (exp(i xi y) - 1 - i xi y [alpha > 1]) y^{-1-alpha} dy by
//! quadrature: tanh-sinh on (0, 1], Ooura's double-exponential Fourier rule on
//! the oscillatory tail [1, inf).
inline complex half_line_levy_integral(double alpha, double xi)
{
  if (xi == 0.0)
    return {0.0, 0.0};
  const double s = detail::sgn(xi);
  const double w = std::abs(xi);
  const bool compensated = alpha > 1.0;
  boost::math::quadrature::tanh_sinh<double> ts;
  const double re_head = ts.integrate(
    [&](double y) {
      const double z = w * y;
      if (z < 1e-4) // cos z - 1 by its series, avoiding 0 * inf near y = 0
        return -0.5 * w * w * std::pow(y, 1.0 - alpha) * (1.0 - z * z / 12.0);
      const double h = std::sin(0.5 * z);
      return -2.0 * h * h * std::pow(y, -1.0 - alpha);
    },
    0.0, 1.0);
  const double im_head = ts.integrate(
    [&](double y) {
      const double z = w * y;
      if (z < 1e-4) {
        if (compensated)
          return -w * w * w / 6.0 * std::pow(y, 2.0 - alpha) * (1.0 - z * z / 20.0);
        return w * std::pow(y, -alpha) * (1.0 - z * z / 6.0);
      }
      const double v = compensated ? std::sin(z) - z : std::sin(z);
      return v * std::pow(y, -1.0 - alpha);
    },
    0.0, 1.0);
  // int_1^inf cos(w y) f(y) dy with f(y) = y^{-1-alpha}, shifted to [0, inf)
  boost::math::quadrature::ooura_fourier_cos<double> ocos;
  boost::math::quadrature::ooura_fourier_sin<double> osin;
  auto f = [&](double u) { return std::pow(u + 1.0, -1.0 - alpha); };
  const double c = ocos.integrate(f, w).first;
  const double sn = osin.integrate(f, w).first;
  const double cos_tail = std::cos(w) * c - std::sin(w) * sn;
  const double sin_tail = std::sin(w) * c + std::cos(w) * sn;
  const double re = re_head + cos_tail - 1.0 / alpha;
  double im = im_head + sin_tail;
  if (compensated)
    im -= w / (alpha - 1.0);
  return {re, s * im};
}

//! Coefficients kappa_- (left jumps) and kappa_+ (right jumps) of the
//! singular-integral form of D_delta^alpha.
struct IntegralRepresentation
{
  double alpha = 0.0;
  double kappa_minus = 0.0;
  double kappa_plus = 0.0;

  //! Eigenvalue of the integral operator on exp(i a x).
  complex eigenvalue(double a) const
  {
    return kappa_plus * half_line_levy_integral(alpha, a) + kappa_minus * half_line_levy_integral(alpha, -a);
  }
};

//! Solves for kappa_-/kappa_+ so that the integral operator reproduces the
//! Fourier definition on exp(i x) (D exp(i a x) = symbol(-a) exp(i a x)).
//! Both coefficients enter linearly, so matching the complex value at one
//! frequency is a 2x2 real system.
inline IntegralRepresentation calibrate_integral_representation(double alpha, double delta)
{
  const FractionalIndex idx({alpha}, {delta});
  const complex ap = half_line_levy_integral(alpha, 1.0);
  const complex am = half_line_levy_integral(alpha, -1.0);
  const double xi = -1.0;
  const complex target = generator_symbol(idx, std::span<const double>(&xi, 1));
  // [ap.re am.re; ap.im am.im] [k+; k-] = target
  const double det = ap.real() * am.imag() - am.real() * ap.imag();
  if (std::abs(det) < 1e-14)
    throw ConsistencyError("calibrate_integral_representation: singular calibration system");
  const double kp = (target.real() * am.imag() - am.real() * target.imag()) / det;
  const double km = (ap.real() * target.imag() - target.real() * ap.imag()) / det;
  return {alpha, km, kp};
}

} // namespace fracspde
