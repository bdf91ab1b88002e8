#include "jumpepr/examples.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "jumpepr/csv_io.hpp"
#include "jumpepr/fokker_planck.hpp"
#include "jumpepr/simulate.hpp"

namespace jumpepr {

ProcessSpec example1_spec() {
  ProcessSpec spec;
  spec.dim = 1;
  spec.beta = 1.0;
  spec.name = "example1";
  spec.drift = [](const State& x) { return State(-x); };
  spec.diffusion_factor = [](const State&) { return Eigen::MatrixXd::Identity(1, 1); };
  spec.constant_diffusion = true;
  spec.jump_rate = 1.0;
  spec.levy_density = [](const State& z) { return std::exp(-0.5 * z.squaredNorm()); };
  spec.levy_mass = std::sqrt(2.0 * std::numbers::pi);
  spec.levy_sampler = [](std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    State z(1);
    z[0] = gauss(rng);
    return z;
  };
  JumpMap map;  // jump from x lands at z
  map.forward = [](const State& x, const State& z) { return State(z - x); };
  map.inverse = [](const State& x, const State& w) { return State(w + x); };
  map.inverse_jacobian_det = [](const State&, const State&) { return 1.0; };
  spec.jump_map = map;
  return spec;
}

Grid example1_grid() { return Grid::line(-8.0, 8.0, 641); }

DensityField example1_gibbs_density(const Grid& g) {
  return density_from_function(g, [](const State& x) { return std::exp(-0.5 * x.squaredNorm()); });
}

ProcessSpec example2_spec(double alpha) {
  ProcessSpec spec;
  spec.dim = 1;
  spec.beta = 1.0;
  char name[48];
  std::snprintf(name, sizeof(name), "example2_alpha%.3f", alpha);
  spec.name = name;
  spec.drift = [](const State& x) { return State(-x); };
  spec.zero_diffusion = true;
  spec.stable = StableDriver{alpha};
  spec.kernel_override = stable_jump_kernel(alpha);
  return spec;
}

Example2Reference example2_reference(double alpha) {
  Example2Reference ref;
  if (alpha >= 1.25) {
    ref.grid = Grid::line(-80.0, 80.0, 1281);
    ref.xi_max = 14.0;
    ref.xi_nodes = 8001;
  } else {
    // heavier tails need a much wider box for the same truncation error
    ref.grid = Grid::line(-320.0, 320.0, 5121);
    ref.xi_max = 40.0;
    ref.xi_nodes = 40001;
  }
  ref.band.band_cells = 2;
  return ref;
}

ProcessSpec reversible_ou_spec() {
  ProcessSpec spec;
  spec.dim = 1;
  spec.beta = 1.0;
  spec.name = "reversible_ou";
  spec.drift = [](const State& x) { return State(-x); };
  spec.diffusion_factor = [](const State&) { return Eigen::MatrixXd::Identity(1, 1); };
  return spec;
}

ProcessSpec rotational_ou_2d_spec() {
  ProcessSpec spec;
  spec.dim = 2;
  spec.beta = 1.0;
  spec.name = "rotational_ou_2d";
  Eigen::Matrix2d B;
  B << -1.0, 1.0, -1.0, -1.0;
  spec.drift = [B](const State& x) { return State(B * x); };
  spec.diffusion_factor = [](const State&) { return Eigen::MatrixXd::Identity(2, 2); };
  return spec;
}

Grid grid_2d_reference() { return Grid::rectangle(-6.0, 6.0, 97, -6.0, 6.0, 97); }

double example2_epr_tail_estimate(double alpha, const DensityField& rho_ss) {
  // pairs with one leg beyond the box: integrand ~ rho(x) k(x,y) log(rho(x)/rho(y)),
  // with rho(y) ~ (C/alpha) |y|^{-1-alpha} in the far tail
  const double R = rho_ss.grid.upper[0];
  const double c = stable_levy_constant(alpha);
  const Eigen::ArrayXd w = rho_ss.grid.trapezoid_weights();
  double mean_log_rho = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (rho_ss.values[i] > 0.0)
      mean_log_rho += w[i] * rho_ss.values[i] * std::log(rho_ss.values[i]);
  // int_R^inf c y^{-1-alpha} [log rho_bulk - log rho_tail(y)] dy, both tails
  const double tail_level = c / alpha * std::pow(R, -(1.0 + alpha));
  const double log_gap = mean_log_rho - std::log(tail_level);
  return 2.0 * c / (alpha * std::pow(R, alpha)) * std::abs(log_gap);
}

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

}  // namespace

Example1Result run_example1(const PipelineOptions& options) {
  const ProcessSpec spec = example1_spec();
  const JumpKernel kernel = build_jump_kernel(spec);
  const Grid g = example1_grid();
  const double t_final = 10.0;

  // initial law N(3, 1)
  const DensityField rho0 = density_from_function(
      g, [](const State& x) { return std::exp(-0.5 * (x[0] - 3.0) * (x[0] - 3.0)); });

  const double bound = fpe_stability_bound(spec, &kernel, g);
  // dt divides the 0.0125 snapshot stride exactly and sits safely below the bound;
  // the stride resolves the fastest relaxation mode (rate ~ 1 + sqrt(2 pi))
  const double target = 0.999 * std::min(1.25e-4, bound);
  const long n_sub = std::lround(std::ceil(0.0125 / target));
  const double dt = 0.0125 / static_cast<double>(n_sub);
  FpeOptions fopt;
  fopt.snapshot_stride = static_cast<int>(n_sub);

  FpeSolution sol;
  try {
    sol = solve_fpe(spec, &kernel, rho0, t_final, dt, fopt);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example1: fpe stage failed: ") + e.what());
  }

  Example1Result res;
  res.snapshots = sol.snapshots;
  res.max_step_mass_drift = sol.max_step_mass_drift;
  res.fpe_steps = sol.steps;

  const ForceDecomposition decomp =
      gradient_decomposition([](const State& x) { return 0.5 * x.squaredNorm(); });
  try {
    res.series = build_thermo_series(spec, &kernel, sol.snapshots, decomp, 1.0 / spec.beta, {},
                                     options.threads);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example1: thermo stage failed: ") + e.what());
  }

  const EprResult ep0 = entropy_production_rate(spec, &kernel, sol.snapshots.front(), {}, options.threads);
  res.epr0_local = ep0.local;
  res.epr0_nonlocal = ep0.nonlocal;
  res.epr_final = res.series.epr_total[res.series.epr_total.size() - 1];

  // L1 distance of the final snapshot to the standard normal
  {
    const DensityField target = example1_gibbs_density(g);
    const Eigen::ArrayXd w = g.trapezoid_weights();
    res.l1_final_error = (w * (sol.snapshots.back().values - target.values).abs()).sum();
  }
  for (Eigen::Index i = 0; i + 1 < res.series.times.size(); ++i) {
    if (res.series.times[i] < 1.0) continue;
    res.max_uptick_after_t1 =
        std::max(res.max_uptick_after_t1, res.series.epr_total[i + 1] - res.series.epr_total[i]);
  }

  const DensityField gibbs = example1_gibbs_density(g);
  try {
    res.report = full_report(spec, &kernel, gibbs, {}, {},
                             ScalarFn([](const State& x) { return 0.5 * x.squaredNorm(); }),
                             options.threads);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example1: reversibility stage failed: ") + e.what());
  }

  try {
    const PathEnsemble ens =
        simulate_stationary_ensemble(spec, gibbs, options.girsanov_paths, 10.0, 0.01, options.seed,
                                     {options.threads, -1.0});
    res.girsanov = estimate_epr_kl(ens, spec, kernel, gibbs, {}, options.threads);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example1: girsanov stage failed: ") + e.what());
  }

  if (options.write_files) {
    fs::create_directories(options.out_dir);
    RunManifest manifest;
    manifest.meta["command"] = "example1";
    manifest.meta["seed"] = options.seed;
    manifest.meta["dt"] = dt;
    manifest.meta["stability_bound"] = bound;
    manifest.meta["mass_drift"] = sol.max_step_mass_drift;
    // density evolution at a coarse stride
    const size_t nsnap = sol.snapshots.size();
    for (size_t k = 0; k < nsnap; k += std::max<size_t>(1, nsnap / 20)) {
      char name[64];
      std::snprintf(name, sizeof(name), "rho_t%04zu.csv", k);
      const std::string p = join(options.out_dir, name);
      write_density_csv(p, sol.snapshots[k]);
      manifest.add(p);
    }
    const std::string tpath = join(options.out_dir, "thermo_series.csv");
    write_thermo_csv(tpath, res.series);
    manifest.add(tpath);
    const std::string gpath = join(options.out_dir, "girsanov_paths.csv");
    write_girsanov_csv(gpath, res.girsanov.per_path);
    manifest.add(gpath);
    const std::string rpath = join(options.out_dir, "reversibility_report.json");
    write_text_file(rpath, report_to_json(res.report).dump(2) + "\n");
    manifest.add(rpath);
    manifest.write(join(options.out_dir, "manifest.json"));
  }

  if (!(res.epr_final < 1e-3))
    throw NumericError("example1: summary stage failed: EPR(T) not below 1e-3");
  if (!(res.l1_final_error < 0.02))
    throw NumericError("example1: summary stage failed: final density L1 error not below 0.02");
  return res;
}

Example2Result run_example2(double alpha, const PipelineOptions& options) {
  Example2Result res;
  res.alpha = alpha;
  const ProcessSpec spec = example2_spec(alpha);
  const JumpKernel kernel = build_jump_kernel(spec);
  const Example2Reference ref = example2_reference(alpha);

  try {
    res.rho_ss = stable_stationary_density(alpha, ref.grid, ref.xi_max, ref.xi_nodes);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example2: density stage failed: ") + e.what());
  }
  res.stationary_res = stationary_residual(spec, &kernel, res.rho_ss, ref.band);
  res.tail_estimate = example2_epr_tail_estimate(alpha, res.rho_ss);

  const EprResult ep = entropy_production_rate(spec, &kernel, res.rho_ss, ref.band, options.threads);
  res.epr_value = ep.total();

  // quadrature error bar: grid refinement at fixed delta_diag + band halving
  {
    const Grid fine = Grid::line(ref.grid.lower[0], ref.grid.upper[0], 2 * ref.grid.npts[0] - 1);
    const DensityField rho_fine = stable_stationary_density(alpha, fine, ref.xi_max, ref.xi_nodes);
    BandScheme band_fine{2 * ref.band.band_cells};
    res.epr_refined =
        entropy_production_rate(spec, &kernel, rho_fine, band_fine, options.threads).total();
    BandScheme band_half{std::max(1, ref.band.band_cells / 2)};
    res.epr_band_halved =
        entropy_production_rate(spec, &kernel, res.rho_ss, band_half, options.threads).total();
    res.error_bar = std::abs(res.epr_refined - res.epr_value) +
                    std::abs(res.epr_band_halved - res.epr_value);
  }

  try {
    const PathEnsemble ens = simulate_stationary_ensemble(
        spec, res.rho_ss, options.girsanov_paths, 10.0, 0.0025, options.seed,
        {options.threads, ref.grid.spacing(0)});
    res.girsanov = estimate_epr_kl(ens, spec, kernel, res.rho_ss, ref.band, options.threads);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example2: girsanov stage failed: ") + e.what());
  }

  try {
    res.report = full_report(spec, &kernel, res.rho_ss, {}, ref.band, std::nullopt, options.threads);
  } catch (const std::exception& e) {
    throw NumericError(std::string("example2: reversibility stage failed: ") + e.what());
  }

  if (options.write_files) {
    fs::create_directories(options.out_dir);
    RunManifest manifest;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", alpha);
    manifest.meta["command"] = "example2";
    manifest.meta["alpha"] = alpha;
    manifest.meta["seed"] = options.seed;
    manifest.meta["epr"] = res.epr_value;
    manifest.meta["epr_error_bar"] = res.error_bar;
    manifest.meta["epr_girsanov"] = res.girsanov.epr_estimate;
    manifest.meta["epr_girsanov_se"] = res.girsanov.standard_error;
    manifest.meta["stationary_residual"] = res.stationary_res;
    manifest.meta["tail_estimate"] = res.tail_estimate;
    const std::string dpath = join(options.out_dir, std::string("rho_ss_alpha") + buf + ".csv");
    write_density_csv(dpath, res.rho_ss);
    manifest.add(dpath);
    const std::string gpath = join(options.out_dir, std::string("girsanov_alpha") + buf + ".csv");
    write_girsanov_csv(gpath, res.girsanov.per_path);
    manifest.add(gpath);
    const std::string rpath = join(options.out_dir, std::string("reversibility_alpha") + buf + ".json");
    write_text_file(rpath, report_to_json(res.report).dump(2) + "\n");
    manifest.add(rpath);
    manifest.write(join(options.out_dir, std::string("manifest_alpha") + buf + ".json"));
  }
  return res;
}

}  // namespace jumpepr
