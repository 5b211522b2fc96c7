#include <fracspde/solver.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace fracspde;

namespace {

SolverConfig heat_config(std::size_t n, double length)
{
  return SolverConfig(FractionalIndex::isotropic(1, 2.0), SpectralMeasure::white_noise(1), Grid(1, n, length));
}

//! Var u_K(x) for the additive exponential-Euler scheme with white noise:
//! (dt / L) sum_k sum_{m=1}^{K} exp(-2 m dt xi_k^2), summed directly.
double discrete_heat_variance(std::size_t n, double length, double dt, std::size_t steps)
{
  double s = 0.0;
  for (long k = -static_cast<long>(n) / 2; k < static_cast<long>(n) / 2; ++k) {
    const double xi = 2.0 * std::numbers::pi * static_cast<double>(k) / length;
    for (std::size_t m = 1; m <= steps; ++m)
      s += std::exp(-2.0 * static_cast<double>(m) * dt * xi * xi);
  }
  return dt / length * s;
}

} // namespace

TEST(Solver, NoiseFreeRunIsTheSemigroupFlow)
{
  auto cfg = SolverConfig(FractionalIndex({1.4}, {0.3}), SpectralMeasure::bessel(1, 1.0), Grid(1, 128, 20.0));
  cfg.u0 = InitialCondition::gaussian(1.0, 1.5);
  cfg.dt = 0.01;
  cfg.horizon = 0.5;
  cfg.save_every = 5;
  const auto path = solve(cfg, 0);
  const Field u0 = cfg.u0.sample(cfg.grid);
  ASSERT_EQ(path.frames.size(), 11u);
  for (std::size_t i = 0; i < path.frames.size(); ++i)
    EXPECT_LT(sup_distance(path.frames[i], smooth_initial(u0, cfg.idx, path.times[i])), 1e-10);
}

TEST(Solver, SmoothInitialClosedForms)
{
  const Grid grid(1, 64, 2.0 * std::numbers::pi * 2);
  const auto heat = FractionalIndex::isotropic(1, 2.0);
  const Field c(grid, std::vector<double>(grid.size(), 3.5));
  for (double v : smooth_initial(c, FractionalIndex({0.7}, {0.5}), 2.0).values)
    EXPECT_NEAR(v, 3.5, 1e-13);
  const auto cosine = InitialCondition::cosine(1.0, 3.0).sample(grid); // xi0 = 1.5
  const auto s = smooth_initial(cosine, heat, 0.4);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(s.values[i], std::exp(-0.4 * 2.25) * cosine.values[i], 1e-13);
}

TEST(Solver, ScalarOdeLimit)
{
  auto cfg = heat_config(32, 4.0);
  cfg.drift = Coefficient::linear(-1.0);
  cfg.u0 = InitialCondition::constant(1.0);
  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  const auto path = solve(cfg, 0);
  for (std::size_t k = 0; k < path.frames.size(); k += 10) {
    EXPECT_NEAR(path.frames[k].values[5], std::pow(1.0 - cfg.dt, static_cast<double>(k)), 1e-12);
    EXPECT_NEAR(path.frames[k].values[5], std::exp(-path.times[k]), cfg.dt);
  }
}

TEST(Solver, FirstOrderInTimeWithoutNoise)
{
  auto cfg = SolverConfig(FractionalIndex({1.5}, {0.2}), SpectralMeasure::white_noise(1), Grid(1, 64, 2.0 * std::numbers::pi));
  cfg.drift = Coefficient::sine(2.0, 1.0);
  cfg.u0 = InitialCondition::cosine(1.5, 1.0);
  cfg.horizon = 0.5;
  std::vector<double> err;
  auto run = [&](double dt) {
    cfg.dt = dt;
    return solve(cfg, 0).frames.back();
  };
  const Field ref = run(0.5 / 2560);
  for (double dt : {0.5 / 40, 0.5 / 80, 0.5 / 160})
    err.push_back(sup_distance(run(dt), ref));
  for (std::size_t i = 0; i + 1 < err.size(); ++i)
    EXPECT_NEAR(std::log2(err[i] / err[i + 1]), 1.0, 0.15);
}

TEST(Solver, AdditiveHeatVariance)
{
  auto cfg = heat_config(256, 8.0);
  cfg.diffusion = Coefficient::constant(1.0);
  cfg.dt = 1e-3;
  cfg.horizon = 0.25;
  cfg.master_seed = 2024;
  cfg.save_every = 250;
  const Solver solver(cfg);
  const std::size_t reps = 1000;
  std::vector<double> probe(reps);
  double pooled = 0.0;
  std::vector<double> per_rep(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto path = solver.run(r);
    const auto& u = path.frames.back().values;
    probe[r] = u[128];
    double s = 0.0;
    for (double v : u)
      s += v * v;
    per_rep[r] = s / static_cast<double>(u.size());
    pooled += per_rep[r];
  }
  pooled /= static_cast<double>(reps);
  double m = 0, v = 0;
  for (double x : probe)
    m += x;
  m /= static_cast<double>(reps);
  for (double x : probe)
    v += (x - m) * (x - m);
  v /= static_cast<double>(reps - 1);
  const double continuum = std::sqrt(cfg.horizon / (2.0 * std::numbers::pi));
  const double se_point = v * std::sqrt(2.0 / static_cast<double>(reps - 1));
  EXPECT_NEAR(v, continuum, 5.0 * se_point);

  double sv = 0;
  for (double x : per_rep)
    sv += (x - pooled) * (x - pooled);
  const double se_pooled = std::sqrt(sv / static_cast<double>(reps - 1) / static_cast<double>(reps));
  const double discrete = discrete_heat_variance(256, 8.0, cfg.dt, 250);
  EXPECT_NEAR(pooled, discrete, 5.0 * se_pooled);
  // left-point time discretization bias: zeta(1/2) sqrt(dt / 8 pi)
  EXPECT_NEAR(discrete - continuum, -1.4603545088 * std::sqrt(cfg.dt / (8.0 * std::numbers::pi)), 1e-3);
}

TEST(Picard, NoiseFreeConvergesInOneIteration)
{
  auto cfg = heat_config(64, 10.0);
  cfg.u0 = InitialCondition::gaussian(2.0, 1.0);
  cfg.dt = 0.01;
  cfg.horizon = 0.2;
  const auto pic = solve_picard(cfg, 0);
  EXPECT_EQ(pic.picard_iterations, 1u);
  const auto eul = solve(cfg, 0);
  for (std::size_t k = 0; k < eul.frames.size(); ++k)
    EXPECT_LT(sup_distance(pic.frames[k], eul.frames[k]), 1e-12);
}

TEST(Picard, ResidualsDecayGeometrically)
{
  auto cfg = SolverConfig(FractionalIndex({1.6}, {0.3}), SpectralMeasure::bessel(1, 1.0), Grid(1, 64, 2.0 * std::numbers::pi));
  cfg.drift = Coefficient::sine(1.5, 1.0);
  cfg.diffusion = Coefficient::affine(0.5, 1.0);
  cfg.u0 = InitialCondition::cosine(1.0, 1.0);
  cfg.dt = 0.005;
  cfg.horizon = 0.25;
  cfg.picard_tol = 1e-12;
  const auto pic = solve_picard(cfg, 3);
  const auto& r = pic.picard_residuals;
  ASSERT_GE(r.size(), 4u);
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i - 1] > 1e-13)
      EXPECT_LT(r[i], 0.7 * r[i - 1]) << "iteration " << i;

  cfg.picard_max_iter = 2;
  EXPECT_THROW(solve_picard(cfg, 3), ConvergenceFailure);
}

TEST(Picard, AgreesWithEulerOnSharedNoiseAtFirstOrder)
{
  auto cfg = SolverConfig(FractionalIndex({1.6}, {0.3}), SpectralMeasure::bessel(1, 1.0), Grid(1, 64, 2.0 * std::numbers::pi));
  cfg.drift = Coefficient::sine(2.0, 1.0);
  cfg.diffusion = Coefficient::affine(0.5, 1.0);
  cfg.u0 = InitialCondition::cosine(1.0, 1.0);
  cfg.horizon = 0.25;
  cfg.picard_tol = 1e-13;
  cfg.master_seed = 77;
  const double dt0 = 0.0125;
  cfg.dt = dt0 / 4;
  const auto fine = Solver(cfg).draw_noise(0);
  std::vector<double> gaps;
  for (std::size_t factor : {4u, 2u, 1u}) {
    cfg.dt = dt0 / 4 * static_cast<double>(factor);
    const Solver s(cfg);
    const auto noise = coarsen_noise(fine, factor);
    const auto e = s.euler(0, &noise);
    const auto p = s.picard(0, &noise);
    double gap = 0;
    for (std::size_t k = 0; k < e.frames.size(); ++k)
      gap = std::max(gap, sup_distance(e.frames[k], p.frames[k]));
    gaps.push_back(gap);
  }
  EXPECT_GE(std::log2(gaps[0] / gaps[1]), 0.8);
  EXPECT_GE(std::log2(gaps[1] / gaps[2]), 0.8);
}

TEST(Solver, LipschitzStability)
{
  auto cfg = SolverConfig(FractionalIndex({1.2}, {0.1}), SpectralMeasure::white_noise(1), Grid(1, 64, 16.0));
  cfg.drift = Coefficient::sine(1.0, 1.0);
  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  cfg.u0 = InitialCondition::gaussian(1.0, 2.0);
  const auto a = solve(cfg, 0).frames.back();
  cfg.u0 = InitialCondition::gaussian(1.3, 1.5);
  const auto b = solve(cfg, 0).frames.back();
  const double gap0 = sup_distance(InitialCondition::gaussian(1.0, 2.0).sample(cfg.grid), InitialCondition::gaussian(1.3, 1.5).sample(cfg.grid));
  EXPECT_LE(sup_distance(a, b), std::exp(cfg.drift.lipschitz() * cfg.horizon) * gap0);
}

TEST(Solver, DeterminismAndReplicateIndependence)
{
  auto cfg = SolverConfig(FractionalIndex({1.5}, {0.3}), SpectralMeasure::riesz(1, 0.5), Grid(1, 64, 8.0));
  cfg.diffusion = Coefficient::sine(1.0, 2.0);
  cfg.drift = Coefficient::affine(-0.5, 0.1);
  cfg.dt = 0.01;
  cfg.horizon = 0.3;
  cfg.master_seed = 9;
  const auto a = solve(cfg, 4), b = solve(cfg, 4), c = solve(cfg, 5);
  for (std::size_t k = 0; k < a.frames.size(); ++k)
    EXPECT_EQ(a.frames[k].values, b.frames[k].values);
  EXPECT_NE(a.frames.back().values, c.frames.back().values);
}

TEST(Solver, ErrorsAndGuards)
{
  auto bad = SolverConfig(FractionalIndex::isotropic(2, 2.0), SpectralMeasure::white_noise(2), Grid(2, 16, 4.0));
  EXPECT_THROW(Solver{bad}, ConstraintViolation);

  auto cfg = heat_config(32, 4.0);
  cfg.dt = 0.03;
  cfg.horizon = 0.1;
  EXPECT_THROW(Solver{cfg}, ConstraintViolation);

  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  cfg.drift = Coefficient::linear(500.0);
  cfg.u0 = InitialCondition::constant(1.0);
  try {
    solve(cfg, 7);
    ADD_FAILURE() << "expected blow-up";
  } catch (const BlowUpError& e) {
    EXPECT_EQ(e.replicate(), 7u);
    EXPECT_GT(e.step(), 0u);
    EXPECT_LT(e.step(), 100u);
  }
}

TEST(Moments, DeterministicFlowAndThreadIndependence)
{
  auto cfg = heat_config(32, 2.0 * std::numbers::pi);
  cfg.u0 = InitialCondition::cosine(2.0, 1.0);
  cfg.dt = 0.01;
  cfg.horizon = 0.2;
  const auto m = moment_estimate(cfg, 2.0, 100);
  EXPECT_NEAR(m.value, 4.0, 1e-12);
  EXPECT_NEAR(m.raw_max, 4.0, 1e-12);
  EXPECT_EQ(m.time, 0.0);

  cfg.diffusion = Coefficient::constant(1.0);
  cfg.master_seed = 3;
  MomentOptions one, three;
  three.threads = 3;
  const auto a = moment_estimate(cfg, 2.0, 120, one);
  const auto b = moment_estimate(cfg, 2.0, 120, three);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
}

TEST(Moments, AdditiveHeatCeilingAndStability)
{
  // few cells and frames keep the selection bias of the max small
  auto cfg = heat_config(16, 8.0);
  cfg.diffusion = Coefficient::constant(1.0);
  cfg.dt = 1e-3;
  cfg.horizon = 0.1;
  cfg.save_every = 100;
  cfg.master_seed = 12;
  const auto m500 = moment_estimate(cfg, 2.0, 500);
  const auto m1000 = moment_estimate(cfg, 2.0, 1000);
  EXPECT_TRUE(std::isfinite(m1000.value));
  EXPECT_NEAR(m500.value / m1000.value, 1.0, 0.1);
  EXPECT_LE(m1000.ci_low, m1000.value);
  EXPECT_GE(m1000.ci_high, m1000.value);
  // the max over cells of a mean sits above the variance ceiling by a few standard errors only
  const double ceiling = discrete_heat_variance(16, 8.0, cfg.dt, 100);
  EXPECT_NEAR(m1000.value, ceiling, 0.25 * ceiling);
  EXPECT_NEAR(m1000.time, cfg.horizon, 1e-12);
}
