#pragma once

#include "coefficients.hpp"
#include "density.hpp"
#include "error.hpp"
#include "index.hpp"
#include "io.hpp"
#include "regularity.hpp"
#include "solver.hpp"
#include "spectral_measure.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fracspde {

//! Experiment configuration: a JSON object with the blocks
//!   index {alpha, delta}, grid {n, L}, measure {kind, params | radii+density, d},
//!   seed, and per-command blocks kernel, admissibility, solver, holder, density.
//! Unknown keys are rejected so that typos fail before any computation.
namespace config {

using io::json;

namespace detail {

inline void allow_keys(const json& j, const std::string& block, std::initializer_list<const char*> keys)
{
  if (!j.is_object())
    throw ConfigurationError("config: block '" + block + "' must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k))
      throw ConfigurationError("config: unknown key '" + k + "' in block '" + block + "'");
}

inline const json& require(const json& j, const std::string& block, const char* key)
{
  if (!j.contains(key))
    throw ConfigurationError("config: block '" + block + "' needs '" + key + "'");
  return j.at(key);
}

template<typename T>
T get(const json& j, const std::string& block, const char* key)
{
  try {
    return require(j, block, key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigurationError("config: " + block + "." + key + ": " + e.what());
  }
}

template<typename T>
T get_or(const json& j, const std::string& block, const char* key, T fallback)
{
  if (!j.contains(key) || j.at(key).is_null())
    return fallback;
  return get<T>(j, block, key);
}

template<typename T>
std::optional<T> get_opt(const json& j, const std::string& block, const char* key)
{
  if (!j.contains(key) || j.at(key).is_null())
    return std::nullopt;
  return get<T>(j, block, key);
}

} // namespace detail

inline FractionalIndex parse_index(const json& j)
{
  detail::allow_keys(j, "index", {"alpha", "delta"});
  auto alpha = detail::get<std::vector<double>>(j, "index", "alpha");
  auto delta = detail::get_or<std::vector<double>>(j, "index", "delta", std::vector<double>(alpha.size(), 0.0));
  return FractionalIndex(std::move(alpha), std::move(delta));
}

inline Grid parse_grid(const json& j, std::size_t d)
{
  detail::allow_keys(j, "grid", {"n", "L", "d"});
  if (auto gd = detail::get_opt<std::size_t>(j, "grid", "d"); gd && *gd != d)
    throw ConstraintViolation("config: grid.d differs from the index dimension");
  return Grid(d, detail::get<std::size_t>(j, "grid", "n"), detail::get<double>(j, "grid", "L"));
}

inline SpectralMeasure parse_measure(const json& j, std::size_t d)
{
  detail::allow_keys(j, "measure", {"kind", "params", "d", "radii", "density"});
  if (auto md = detail::get_opt<std::size_t>(j, "measure", "d"); md && *md != d)
    throw ConstraintViolation("config: measure.d differs from the index dimension");
  const auto kind = detail::get<std::string>(j, "measure", "kind");
  const auto params = detail::get_or<std::vector<double>>(j, "measure", "params", {});
  auto one = [&](const char* name) {
    if (params.size() != 1)
      throw ConfigurationError("config: measure '" + kind + "' takes one parameter (" + name + ")");
    return params[0];
  };
  if (kind == "white_noise") {
    if (!params.empty())
      throw ConfigurationError("config: measure 'white_noise' takes no parameters");
    return SpectralMeasure::white_noise(d);
  }
  if (kind == "riesz")
    return SpectralMeasure::riesz(d, one("gamma"));
  if (kind == "bessel")
    return SpectralMeasure::bessel(d, one("beta"));
  if (kind == "free_field")
    return SpectralMeasure::free_field(d, one("m"));
  if (kind == "tabulated")
    return SpectralMeasure::tabulated(d, detail::get<std::vector<double>>(j, "measure", "radii"),
                                      detail::get<std::vector<double>>(j, "measure", "density"));
  throw ConfigurationError("config: unknown measure kind '" + kind +
                           "' (white_noise, riesz, bessel, free_field, tabulated)");
}

inline Coefficient parse_coefficient(const json& j, const std::string& block)
{
  detail::allow_keys(j, block, {"preset", "params"});
  return Coefficient::preset(detail::get<std::string>(j, block, "preset"),
                             detail::get_or<std::vector<double>>(j, block, "params", {}));
}

inline InitialCondition parse_initial(const json& j)
{
  detail::allow_keys(j, "solver.u0", {"preset", "params"});
  return InitialCondition::preset(detail::get<std::string>(j, "solver.u0", "preset"),
                                  detail::get_or<std::vector<double>>(j, "solver.u0", "params", {}));
}

struct KernelBlock
{
  std::vector<double> times{1.0};
  //! choose L per time from the tail bound instead of grid.L
  bool auto_box = false;
};

struct AdmissibilityBlock
{
  std::vector<double> etas{0.25, 0.5, 0.75, 1.0};
  bool force_quadrature = false;
  //! horizons T of the two-sided bound check
  std::vector<double> horizons{1.0};
};

struct SolverBlock
{
  double dt = 1e-3;
  double horizon = 0.1;
  Scheme scheme = Scheme::exp_euler;
  Coefficient drift = Coefficient::constant(0.0);
  Coefficient diffusion = Coefficient::constant(0.0);
  InitialCondition u0 = InitialCondition::zero();
  std::size_t replicates = 1;
  std::size_t save_every = 1;
  std::size_t picard_max_iter = 50;
  double picard_tol = 1e-10;
  //! estimate sup E|u|^p when set (needs >= 100 replicates)
  std::optional<double> moment_p;
};

struct HolderBlock
{
  std::size_t replicates = 200;
  std::optional<std::size_t> x_probe;
  std::optional<double> t_probe;
  std::optional<double> rho;
  std::optional<double> eta;
  std::size_t n_lags = 4;
  std::size_t bootstrap = 200;
  std::size_t spatial_base_lag = 1;
};

struct DensityBlock
{
  std::size_t replicates = 2000;
  std::optional<double> t;
  std::optional<std::size_t> x_probe;
  BandwidthPolicy bandwidth{};
  double theta1 = 1.0;
  std::optional<double> theta2;
  std::size_t rho_points = 25;
  double probe_radius = 10.0;
};

struct ExperimentConfig
{
  json raw;
  FractionalIndex idx;
  Grid grid;
  SpectralMeasure measure;
  std::uint64_t seed = 0;
  std::optional<KernelBlock> kernel;
  std::optional<AdmissibilityBlock> admissibility;
  std::optional<SolverBlock> solver;
  std::optional<HolderBlock> holder;
  std::optional<DensityBlock> density;

  //! SolverConfig for the solver block (validated).
  SolverConfig solver_config() const
  {
    if (!solver)
      throw ConfigurationError("config: this command needs a 'solver' block");
    SolverConfig c(idx, measure, grid);
    c.dt = solver->dt;
    c.horizon = solver->horizon;
    c.scheme = solver->scheme;
    c.drift = solver->drift;
    c.diffusion = solver->diffusion;
    c.u0 = solver->u0;
    c.save_every = solver->save_every;
    c.picard_max_iter = solver->picard_max_iter;
    c.picard_tol = solver->picard_tol;
    c.master_seed = seed;
    c.validate();
    return c;
  }
};

inline KernelBlock parse_kernel(const json& j)
{
  detail::allow_keys(j, "kernel", {"times", "auto_box"});
  KernelBlock k;
  k.times = detail::get_or(j, "kernel", "times", k.times);
  k.auto_box = detail::get_or(j, "kernel", "auto_box", k.auto_box);
  if (k.times.empty())
    throw ConfigurationError("config: kernel.times is empty");
  for (double t : k.times)
    if (!(t > 0.0))
      throw DomainError("config: kernel times must be positive");
  return k;
}

inline AdmissibilityBlock parse_admissibility(const json& j)
{
  detail::allow_keys(j, "admissibility", {"etas", "force_quadrature", "horizons"});
  AdmissibilityBlock a;
  a.etas = detail::get_or(j, "admissibility", "etas", a.etas);
  a.force_quadrature = detail::get_or(j, "admissibility", "force_quadrature", a.force_quadrature);
  a.horizons = detail::get_or(j, "admissibility", "horizons", a.horizons);
  for (double e : a.etas)
    if (!(e > 0.0 && e <= 1.0))
      throw DomainError("config: admissibility etas must lie in (0, 1]");
  for (double t : a.horizons)
    if (!(t > 0.0))
      throw DomainError("config: admissibility horizons must be positive");
  return a;
}

inline SolverBlock parse_solver(const json& j)
{
  detail::allow_keys(j, "solver", {"dt", "T", "scheme", "drift", "diffusion", "u0", "replicates", "save_every",
                                   "picard_max_iter", "picard_tol", "moment_p"});
  SolverBlock s;
  s.dt = detail::get<double>(j, "solver", "dt");
  s.horizon = detail::get<double>(j, "solver", "T");
  s.scheme = scheme_from_string(detail::get_or<std::string>(j, "solver", "scheme", "exp_euler"));
  if (j.contains("drift"))
    s.drift = parse_coefficient(j.at("drift"), "solver.drift");
  if (j.contains("diffusion"))
    s.diffusion = parse_coefficient(j.at("diffusion"), "solver.diffusion");
  if (j.contains("u0"))
    s.u0 = parse_initial(j.at("u0"));
  s.replicates = detail::get_or(j, "solver", "replicates", s.replicates);
  s.save_every = detail::get_or(j, "solver", "save_every", s.save_every);
  s.picard_max_iter = detail::get_or(j, "solver", "picard_max_iter", s.picard_max_iter);
  s.picard_tol = detail::get_or(j, "solver", "picard_tol", s.picard_tol);
  s.moment_p = detail::get_opt<double>(j, "solver", "moment_p");
  if (s.replicates == 0)
    throw ConstraintViolation("config: solver.replicates must be positive");
  if (s.moment_p && s.replicates < 100)
    throw ConstraintViolation("config: solver.moment_p needs at least 100 replicates");
  return s;
}

inline HolderBlock parse_holder(const json& j)
{
  detail::allow_keys(j, "holder", {"replicates", "x_probe", "t_probe", "rho", "eta", "n_lags", "bootstrap",
                                   "spatial_base_lag"});
  HolderBlock h;
  h.replicates = detail::get_or(j, "holder", "replicates", h.replicates);
  h.x_probe = detail::get_opt<std::size_t>(j, "holder", "x_probe");
  h.t_probe = detail::get_opt<double>(j, "holder", "t_probe");
  h.rho = detail::get_opt<double>(j, "holder", "rho");
  h.eta = detail::get_opt<double>(j, "holder", "eta");
  h.n_lags = detail::get_or(j, "holder", "n_lags", h.n_lags);
  h.bootstrap = detail::get_or(j, "holder", "bootstrap", h.bootstrap);
  h.spatial_base_lag = detail::get_or(j, "holder", "spatial_base_lag", h.spatial_base_lag);
  if (h.replicates < 200)
    throw ConstraintViolation("config: holder.replicates must be at least 200");
  if (h.n_lags < 4)
    throw ConstraintViolation("config: holder.n_lags must be at least 4");
  if (h.rho && !(*h.rho > 0.0 && *h.rho < 1.0))
    throw DomainError("config: holder.rho must lie in (0, 1)");
  if (h.eta && !(*h.eta > 0.0 && *h.eta < 1.0))
    throw DomainError("config: holder.eta must lie in (0, 1)");
  return h;
}

inline DensityBlock parse_density(const json& j)
{
  detail::allow_keys(j, "density", {"replicates", "t", "x_probe", "bandwidth", "theta1", "theta2", "rho_points",
                                    "probe_radius"});
  DensityBlock d;
  d.replicates = detail::get_or(j, "density", "replicates", d.replicates);
  d.t = detail::get_opt<double>(j, "density", "t");
  d.x_probe = detail::get_opt<std::size_t>(j, "density", "x_probe");
  if (j.contains("bandwidth")) {
    const auto& b = j.at("bandwidth");
    if (b.is_number()) {
      d.bandwidth = {BandwidthRule::fixed, b.get<double>()};
      if (!(d.bandwidth.value > 0.0))
        throw ConstraintViolation("config: density.bandwidth must be positive");
    } else if (b.is_string()) {
      d.bandwidth.rule = bandwidth_rule_from_string(b.get<std::string>());
      if (d.bandwidth.rule == BandwidthRule::fixed)
        throw ConfigurationError("config: a fixed density.bandwidth is given as a number");
    } else {
      throw ConfigurationError("config: density.bandwidth is 'plug_in', 'silverman' or a positive number");
    }
  }
  d.theta1 = detail::get_or(j, "density", "theta1", d.theta1);
  d.theta2 = detail::get_opt<double>(j, "density", "theta2");
  d.rho_points = detail::get_or(j, "density", "rho_points", d.rho_points);
  d.probe_radius = detail::get_or(j, "density", "probe_radius", d.probe_radius);
  if (d.replicates < 500)
    throw ConstraintViolation("config: density.replicates must be at least 500");
  if (!(d.theta1 >= 1.0))
    throw DomainError("config: density.theta1 must be at least 1");
  if (d.theta2 && !(*d.theta2 > 0.0 && *d.theta2 <= 1.0))
    throw DomainError("config: density.theta2 must lie in (0, 1]");
  if (d.rho_points < 3)
    throw ConstraintViolation("config: density.rho_points must be at least 3");
  return d;
}

//! Parses and validates every block present. `seed_override` replaces the
//! config seed (and is written back into `raw` so manifests reproduce it).
inline ExperimentConfig parse(json j, std::optional<std::uint64_t> seed_override = std::nullopt)
{
  detail::allow_keys(j, "top level", {"index", "grid", "measure", "seed", "kernel", "admissibility", "solver",
                                      "holder", "density"});
  if (seed_override)
    j["seed"] = *seed_override;
  auto idx = parse_index(detail::require(j, "top level", "index"));
  auto grid = parse_grid(detail::require(j, "top level", "grid"), idx.dim());
  auto measure = parse_measure(detail::require(j, "top level", "measure"), idx.dim());
  ExperimentConfig c{j, std::move(idx), std::move(grid), std::move(measure), 0, {}, {}, {}, {}, {}};
  c.seed = detail::get_or<std::uint64_t>(j, "top level", "seed", 0);
  if (j.contains("kernel"))
    c.kernel = parse_kernel(j.at("kernel"));
  if (j.contains("admissibility"))
    c.admissibility = parse_admissibility(j.at("admissibility"));
  if (j.contains("solver"))
    c.solver = parse_solver(j.at("solver"));
  if (j.contains("holder"))
    c.holder = parse_holder(j.at("holder"));
  if (j.contains("density"))
    c.density = parse_density(j.at("density"));
  if (c.solver)
    (void)c.solver_config();
  return c;
}

inline ExperimentConfig load(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt)
{
  return parse(io::read_json(path), seed_override);
}

} // namespace config
} // namespace fracspde
