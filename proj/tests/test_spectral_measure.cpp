#include "test_support.hpp"

#include <fracspde/spectral_measure.hpp>
#include <fracspde/stable_kernel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fracspde;
using fracspde::testing::adaptive_simpson;

TEST(SAlpha, Values)
{
  const FractionalIndex idx({2.0, 0.5}, {0.0, 0.0});
  const std::vector<double> a{1.0, 2.0};
  EXPECT_NEAR(s_alpha(a, idx), 1.0 + std::sqrt(2.0), 1e-15);
  const std::vector<double> z{0.0, 0.0};
  EXPECT_EQ(s_alpha(z, idx), 0.0);
  const std::vector<double> m{-3.0};
  EXPECT_NEAR(s_alpha(m, FractionalIndex::isotropic(1, 1.5)), std::pow(3.0, 1.5), 1e-13);
}

TEST(SpectralMeasure, ConstructorInvariants)
{
  EXPECT_THROW(SpectralMeasure::riesz(2, 2.0), ConstraintViolation);
  EXPECT_THROW(SpectralMeasure::riesz(2, 0.0), ConstraintViolation);
  EXPECT_THROW(SpectralMeasure::bessel(1, -1.0), ConstraintViolation);
  EXPECT_THROW(SpectralMeasure::free_field(3, 0.0), ConstraintViolation);
  EXPECT_THROW(SpectralMeasure::tabulated(1, {1.0, 0.5}, {1.0, 1.0}), ConstraintViolation);
  EXPECT_THROW(SpectralMeasure::tabulated(1, {1.0, 2.0}, {1.0, -1.0}), ConstraintViolation);
}

TEST(SpectralMeasure, RieszConstantReproducesPowerCovariance)
{
  // d = 1: int c |xi|^{gamma-1} exp(-xi^2/2) dxi = E over a Gaussian smoothing
  // of |x|^{-gamma}: int |x|^{-gamma} (2 pi)^{-1/2} exp(-x^2/2) dx.
  const double gamma = 0.5;
  const auto mu = SpectralMeasure::riesz(1, gamma);
  auto spectral = [&](double u) {
    // xi = u^2
    const double xi = u * u;
    return 2.0 * u * mu.density(xi) * std::exp(-0.5 * xi * xi);
  };
  auto physical = [&](double u) {
    const double x = u * u;
    return 2.0 * u * std::pow(x, -gamma) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  };
  const double lhs = 2.0 * adaptive_simpson(spectral, 1e-100, 4.0, 1e-13);
  const double rhs = 2.0 * adaptive_simpson(physical, 1e-100, 4.0, 1e-13);
  EXPECT_NEAR(lhs, rhs, 1e-9 * rhs);
}

TEST(Admissibility, ClosedFormExamples)
{
  const auto r1 = admissibility(SpectralMeasure::riesz(2, 1.0), FractionalIndex::isotropic(2, 2.0), 0.75);
  EXPECT_TRUE(r1.admissible);
  EXPECT_EQ(r1.method, AdmissibilityMethod::closed_form);
  EXPECT_TRUE(std::isfinite(r1.integral_value));

  for (double eta : {0.1, 0.5, 0.9, 0.999, 1.0})
    EXPECT_FALSE(admissibility(SpectralMeasure::free_field(4, 1.0), FractionalIndex::isotropic(4, 2.0), eta).admissible);

  EXPECT_TRUE(admissibility(SpectralMeasure::bessel(2, 1.0), FractionalIndex::isotropic(2, 2.0), 0.6).admissible);
  EXPECT_FALSE(admissibility(SpectralMeasure::bessel(2, 1.0), FractionalIndex::isotropic(2, 2.0), 0.5).admissible);

  const auto w = admissibility(SpectralMeasure::white_noise(1), FractionalIndex::isotropic(1, 1.5), 0.6);
  EXPECT_FALSE(w.admissible);
  EXPECT_FALSE(std::isfinite(w.integral_value));

  EXPECT_THROW(admissibility(SpectralMeasure::white_noise(1), FractionalIndex::isotropic(1, 1.5), 0.0), DomainError);
  EXPECT_THROW(admissibility(SpectralMeasure::white_noise(1), FractionalIndex::isotropic(1, 1.5), 1.2), DomainError);
}

TEST(Admissibility, WhiteNoiseIntegralMatchesBetaFunction)
{
  // (1/pi) int_0^inf (1 + xi^a)^{-eta} dxi = B(1/a, eta - 1/a) / (pi a)
  for (auto [alpha, eta] : {std::pair{1.5, 0.9}, std::pair{2.0, 0.75}, std::pair{1.8, 1.0}}) {
    const double exact = std::beta(1.0 / alpha, eta - 1.0 / alpha) / (std::numbers::pi * alpha);
    const auto q = admissibility(SpectralMeasure::white_noise(1), FractionalIndex::isotropic(1, alpha), eta, true);
    ASSERT_TRUE(q.admissible);
    EXPECT_NEAR(q.integral_value, exact, 1e-8 * exact) << alpha << " " << eta;
    const auto c = admissibility(SpectralMeasure::white_noise(1), FractionalIndex::isotropic(1, alpha), eta);
    EXPECT_NEAR(c.integral_value, exact, 1e-8 * exact);
  }
}

TEST(Admissibility, QuadratureAgreesWithClosedFormOutsideCriticalBand)
{
  std::mt19937_64 gen(20240611);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int compared = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const std::size_t d = 1 + draw % 3;
    const double eta = 0.05 + 0.95 * u01(gen);
    const auto idx = FractionalIndex::isotropic(d, 2.0);
    std::vector<std::pair<SpectralMeasure, double>> cases;
    const double gamma = 0.05 + (static_cast<double>(d) - 0.1) * u01(gen);
    cases.emplace_back(SpectralMeasure::riesz(d, gamma), gamma / (2.0 * eta));
    const double beta = 0.1 + 4.0 * u01(gen);
    cases.emplace_back(SpectralMeasure::bessel(d, beta), 0.0);
    cases.emplace_back(SpectralMeasure::free_field(d, 0.5 + u01(gen)), 0.0);
    for (auto& [mu, ratio] : cases) {
      const double crit = *mu.closed_form_critical_eta(idx);
      // 2% band around the critical parameter
      if (std::abs(eta - crit) <= 0.02 * std::max(crit, eta))
        continue;
      const auto c = admissibility(mu, idx, eta);
      const auto q = admissibility(mu, idx, eta, true);
      if (q.inconclusive)
        ADD_FAILURE() << mu.description() << " eta=" << eta << " inconclusive";
      EXPECT_EQ(c.admissible, q.admissible) << mu.description() << " eta=" << eta << " crit=" << crit;
      ++compared;
    }
  }
  EXPECT_GT(compared, 40);
}

TEST(Admissibility, AnisotropicWhiteNoiseQuadrature)
{
  const FractionalIndex idx({1.5}, {0.4});
  EXPECT_TRUE(admissibility(SpectralMeasure::white_noise(1), idx, 0.7, true).admissible);
  EXPECT_FALSE(admissibility(SpectralMeasure::white_noise(1), idx, 0.6, true).admissible);
  // d = 2: sum 1/alpha_i = 1/1.8 + 1/1.9 > 1, never admissible
  const FractionalIndex idx2({1.8, 1.9}, {0.1, 0.0});
  EXPECT_FALSE(admissibility(SpectralMeasure::white_noise(2), idx2, 1.0, true).admissible);
  // Riesz in d = 2 with mixed alpha: mu{S <= R} ~ R^{gamma (1/a1 + 1/a2)/2}-ish; check the quadrature
  // critical exponent against the exact growth rate of the annulus mass.
  const FractionalIndex mixed({1.5, 0.5}, {0.4, 0.3});
  const auto bessel = SpectralMeasure::bessel(2, 2.0);
  EXPECT_TRUE(admissibility(bessel, mixed, 1.0, true).admissible);
}

TEST(Admissibility, RieszSelfSimilarity)
{
  const double gamma = 1.2, eta = 0.8;
  const auto mu = SpectralMeasure::riesz(2, gamma);
  const auto idx = FractionalIndex::isotropic(2, 2.0);
  // xi -> 2 xi: int m(xi) h(2 xi) dxi = 2^{-gamma} int m(xi) h(xi) dxi
  const auto base = integrate_spectral(mu, idx, [&](std::span<const double>, double s) { return std::pow(1.0 + s, -eta); });
  const auto scaled =
    integrate_spectral(mu, idx, [&](std::span<const double>, double s) { return std::pow(1.0 + 4.0 * s, -eta); });
  EXPECT_NEAR(scaled.value / base.value, std::pow(2.0, -gamma), 1e-7);
}

TEST(Admissibility, TabulatedMeasures)
{
  std::vector<double> r, m;
  for (double x = 0.01; x <= 1e6; x *= 1.5) {
    r.push_back(x);
    m.push_back(std::pow(1.0 + x * x, -0.5));
  }
  const auto tab = SpectralMeasure::tabulated(1, r, m);
  // behaves like Bessel(1) in d = 1: critical eta = 0
  const auto rep = admissibility(tab, FractionalIndex::isotropic(1, 2.0), 0.3);
  EXPECT_TRUE(rep.admissible);
  EXPECT_EQ(rep.method, AdmissibilityMethod::quadrature);

  const auto narrow = SpectralMeasure::tabulated(1, {0.1, 1.0, 3.0}, {1.0, 1.0, 1.0});
  EXPECT_THROW(admissibility(narrow, FractionalIndex::isotropic(1, 2.0), 0.5), InconclusiveError);
}

TEST(JFunction, GaussianWhiteNoiseNormalization)
{
  const auto idx = FractionalIndex::isotropic(1, 2.0);
  const auto mu = SpectralMeasure::white_noise(1);
  for (double t : {0.01, 0.1, 1.0, 7.0})
    EXPECT_NEAR(j_function(idx, mu, t), 1.0 / std::sqrt(8.0 * std::numbers::pi * t), 1e-10 / std::sqrt(t));
}

TEST(JFunction, FractionalRieszMatchesIndependentQuadrature)
{
  const FractionalIndex idx({1.5}, {0.3});
  const auto mu = SpectralMeasure::riesz(1, 0.5);
  const double a = 2.0 * std::cos(0.15 * std::numbers::pi);
  // 2 c int_0^inf xi^{-1/2} exp(-a xi^{1.5}) dxi, with xi = u^2
  auto f = [&](double u) { return 2.0 * std::exp(-a * u * u * u); };
  double oracle = 0.0;
  for (int i = 0; i < 40; ++i)
    oracle += adaptive_simpson(f, 0.2 * i, 0.2 * (i + 1), 1e-15);
  oracle *= 2.0 * mu.riesz_constant();
  EXPECT_NEAR(j_function(idx, mu, 1.0), oracle, 1e-5 * oracle);
  // and against the Gamma-function closed form
  const double gamma_form = 2.0 * mu.riesz_constant() * std::tgamma(1.0 / 3.0) / (1.5 * std::pow(a, 1.0 / 3.0));
  EXPECT_NEAR(j_function(idx, mu, 1.0), gamma_form, 1e-8 * gamma_form);
}

TEST(JFunction, PositiveDecreasingAndContinuous)
{
  const FractionalIndex idx({1.5, 1.2}, {0.3, -0.2});
  const auto mu = SpectralMeasure::bessel(2, 3.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double t = 1e-3; t <= 10.0; t *= 1.25) {
    const double j = j_function(idx, mu, t);
    EXPECT_GT(j, 0.0);
    EXPECT_LT(j, prev);
    if (std::isfinite(prev))
      EXPECT_GT(j / prev, 0.5); // no jumps on a 25% time grid
    prev = j;
  }
  EXPECT_THROW(j_function(idx, mu, 0.0), DomainError);
  EXPECT_THROW(j_function(FractionalIndex::isotropic(2, 1.5), SpectralMeasure::white_noise(2), 1.0), DivergenceError);
}

TEST(CumulativeBound, SandwichHolds)
{
  const auto heat = FractionalIndex::isotropic(1, 2.0);
  const auto white = cumulative_bound_check(heat, SpectralMeasure::white_noise(1), 1.0);
  EXPECT_TRUE(white.holds);
  EXPECT_NEAR(white.integral, 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-9);
  EXPECT_DOUBLE_EQ(white.kappa, 1.0);
  // kappa = 1: the upper per-xi bound is exactly twice the lower at 2TS -> infinity
  EXPECT_NEAR(white.c2 / white.c1, 2.0 * std::max(1.0, 2.0) / std::min(1.0, 2.0), 1e-15);

  const FractionalIndex aniso({1.5, 0.5}, {0.4, 0.3});
  const auto b = cumulative_bound_check(aniso, SpectralMeasure::bessel(2, 2.0), 0.5);
  EXPECT_TRUE(b.holds);
  EXPECT_LE(b.lower, b.integral);
  EXPECT_LE(b.integral, b.upper);
}

TEST(WeightedIntegral, FinitenessThresholdAndReduction)
{
  const auto heat = FractionalIndex::isotropic(1, 2.0);
  const auto white = SpectralMeasure::white_noise(1);
  EXPECT_FALSE(weighted_spectral_integral(heat, white, 0.4, 1.0).divergent);
  EXPECT_TRUE(weighted_spectral_integral(heat, white, 0.6, 1.0).divergent);

  const auto w0 = weighted_spectral_integral(heat, white, 0.0, 1.0);
  const auto rep = cumulative_bound_check(heat, white, 1.0);
  EXPECT_NEAR(w0.value, rep.integral, 1e-8 * rep.integral);

  // closed form for beta = 0.2: (1/pi) int_0^inf xi^{0.8} (1 - e^{-2 xi^2}) / (2 xi^2) dxi
  auto f = [](double u) {
    const double xi = u * u;
    const double x = 2.0 * xi * xi;
    return 2.0 * u * std::pow(xi, 0.8) * (x < 1e-12 ? 1.0 : -std::expm1(-x) / x);
  };
  // tail beyond 40: (1/2) xi^{-1.2} integrated = 0.5 * 40^{-0.2} / 0.2 (exp term negligible)
  const double head = adaptive_simpson(f, 1e-100, std::sqrt(40.0), 1e-13);
  const double oracle = (head + 0.5 * std::pow(40.0, -0.2) / 0.2) / std::numbers::pi;
  EXPECT_NEAR(weighted_spectral_integral(heat, white, 0.4, 1.0).value, oracle, 1e-6 * oracle);
}

TEST(CriticalEta, QuadratureEstimate)
{
  const FractionalIndex idx({1.5}, {0.3});
  EXPECT_NEAR(critical_eta(SpectralMeasure::riesz(1, 0.5), idx), 1.0 / 3.0, 2e-3);
  EXPECT_NEAR(critical_eta(SpectralMeasure::white_noise(1), idx), 2.0 / 3.0, 1e-15);
}
