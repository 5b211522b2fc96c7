#pragma once

#include <cmath>
#include <functional>

namespace fracspde::testing {

//! Plain recursive adaptive Simpson rule, used as an oracle independent of
//! the library's quadrature backends.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50)
{
  struct Rec
  {
    const std::function<double(double)>& f;
    double run(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const
    {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
      return run(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + run(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec{f}.run(a, b, fa, fm, fb, whole, tol, depth);
}

//! int_0^inf f via adaptive Simpson on geometrically growing pieces
//! [0, x0], [x0, 2 x0], [2 x0, 4 x0], ... until the piece contributes below
//! `tail_tol` twice in a row; the substitution x = u^2 near 0 is left to the caller.
inline double simpson_half_line(const std::function<double(double)>& f, double x0, double tol, double tail_tol, int max_pieces = 200)
{
  double sum = adaptive_simpson(f, 0.0, x0, tol);
  double a = x0;
  int quiet = 0;
  for (int i = 0; i < max_pieces && quiet < 2; ++i) {
    const double piece = adaptive_simpson(f, a, 2.0 * a, tol);
    sum += piece;
    quiet = std::abs(piece) < tail_tol ? quiet + 1 : 0;
    a *= 2.0;
  }
  return sum;
}

} // namespace fracspde::testing
