#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "jumpepr/examples.hpp"
#include "jumpepr/fokker_planck.hpp"

using namespace jumpepr;

namespace {

double normal_pdf(double x, double m = 0.0, double s = 1.0) {
  return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

ProcessSpec pure_diffusion_1d() {
  ProcessSpec spec;
  spec.dim = 1;
  spec.beta = 1.0;
  spec.name = "heat";
  spec.diffusion_factor = [](const State&) { return Eigen::MatrixXd::Identity(1, 1); };
  return spec;
}

}  // namespace

TEST_CASE("local current vanishes at detailed balance up to O(h^2)") {
  const Grid g = example1_grid();
  const DensityField gibbs = example1_gibbs_density(g);
  ProcessSpec spec = reversible_ou_spec();  // b = -x = -grad V, A = I, beta = 1
  const Eigen::MatrixXd j = local_current(spec, gibbs);
  const double h = g.spacing(0);
  double sup = 0.0;
  for (Eigen::Index i = 1; i + 1 < g.num_nodes(); ++i) sup = std::max(sup, std::abs(j(i, 0)));
  CHECK(sup < h * h);
}

TEST_CASE("local current of the standard normal under zero drift is x rho") {
  ProcessSpec spec = pure_diffusion_1d();
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const DensityField f = density_from_function(g, [](const State& x) { return normal_pdf(x[0]); });
  const Eigen::MatrixXd j = local_current(spec, f);
  const double h = g.spacing(0);
  for (Eigen::Index i = 1; i + 1 < g.num_nodes(); ++i) {
    const double x = g.coord(0, static_cast<int>(i));
    if (std::abs(x) > 5.0) continue;
    CHECK(std::abs(j(i, 0) - x * f.values[i]) < h * h);
  }
}

TEST_CASE("local current of a pure-jump process is exactly b rho") {
  ProcessSpec spec = example2_spec(1.5);
  const Grid g = Grid::line(-10.0, 10.0, 201);
  const DensityField f = density_from_function(g, [](const State& x) { return normal_pdf(x[0]); });
  const Eigen::MatrixXd j = local_current(spec, f);
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
    const double x = g.coord(0, static_cast<int>(i));
    CHECK(j(i, 0) == -x * f.values[i]);
  }
}

TEST_CASE("nonlocal current vanishes identically at the Gibbs state") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  const Grid g = Grid::line(-8.0, 8.0, 321);
  const DensityField gibbs = example1_gibbs_density(g);
  const NonlocalCurrent cur = nonlocal_current(k, gibbs);
  CHECK(cur.values.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("nonlocal current with a symmetric kernel follows the density ordering") {
  JumpKernel k;
  k.rate = [](const State& x, const State& y) { return std::exp(-0.5 * (x - y).squaredNorm()); };
  const Grid g = Grid::line(-4.0, 4.0, 101);
  const DensityField f =
      density_from_function(g, [](const State& x) { return normal_pdf(x[0], 1.0, 1.0); });
  const NonlocalCurrent cur = nonlocal_current(k, f);
  for (Eigen::Index i = 0; i < g.num_nodes(); i += 7)
    for (Eigen::Index j = i + 1; j < g.num_nodes(); j += 11) {
      const State xi = g.node(i), xj = g.node(j);
      const double expected = k.rate(xi, xj) * (f.values[i] - f.values[j]);
      CHECK(cur.values(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("nonlocal current matrix is exactly antisymmetric") {
  const ProcessSpec spec = example2_spec(1.5);
  const JumpKernel k = build_jump_kernel(spec);
  const Grid g = Grid::line(-20.0, 20.0, 161);
  const DensityField f = stable_stationary_density(1.5, g, 14.0, 4001);
  const NonlocalCurrent cur = nonlocal_current(k, f, BandScheme{2});
  CHECK((cur.values + cur.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cur.values.cwiseAbs().maxCoeff() > 0.0);  // strictly out of balance
}

TEST_CASE("kernel singularities off the excluded band are reported") {
  JumpKernel k;
  k.rate = [](const State& x, const State& y) {
    const double r = (x - y).norm();
    return r < 0.3 ? std::numeric_limits<double>::infinity() : 1.0;
  };
  const Grid g = Grid::line(0.0, 1.0, 11);  // h = 0.1, band = h, singular pairs at 0.2
  DensityField f;
  f.grid = g;
  f.values = Eigen::ArrayXd::Constant(11, 1.0);
  f.renormalize();
  CHECK_THROWS_AS(nonlocal_current(k, f), NumericError);
}

TEST_CASE("heat kernel spreading matches the closed form") {
  ProcessSpec spec = pure_diffusion_1d();
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const DensityField rho0 =
      density_from_function(g, [](const State& x) { return normal_pdf(x[0], 0.0, 0.5); });
  const double bound = fpe_stability_bound(spec, nullptr, g);
  const double dt = 1.25e-4;
  REQUIRE(dt <= bound);
  const FpeSolution sol = solve_fpe(spec, nullptr, rho0, 0.375, dt, {3000, {}});
  const DensityField& last = sol.snapshots.back();
  CHECK(last.time == doctest::Approx(0.375));
  const Eigen::ArrayXd w = g.trapezoid_weights();
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i)
    l1 += w[i] * std::abs(last.values[i] - normal_pdf(g.coord(0, static_cast<int>(i))));
  CHECK(l1 < 5e-3);
}

TEST_CASE("one explicit step conserves trapezoid mass to round-off") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  const Grid g = Grid::line(-8.0, 8.0, 321);
  // compactly supported bump well inside the domain
  const DensityField rho0 = density_from_function(g, [](const State& x) {
    const double r = std::abs(x[0]);
    return r < 3.0 ? std::pow(std::cos(std::numbers::pi * r / 6.0), 2) : 0.0;
  });
  const double dt = 0.5 * fpe_stability_bound(spec, &k, g);
  const FpeSolution sol = solve_fpe(spec, &k, rho0, dt, dt, {1, {}});
  CHECK(sol.max_step_mass_drift < 1e-12);
}

TEST_CASE("mass drift stays below 1e-6 over a thousand steps") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  const Grid g = Grid::line(-8.0, 8.0, 321);
  const DensityField rho0 =
      density_from_function(g, [](const State& x) { return normal_pdf(x[0], 1.0, 1.0); });
  const double dt = 0.9 * fpe_stability_bound(spec, &k, g);
  const FpeSolution sol = solve_fpe(spec, &k, rho0, 1000 * dt, dt, {100, {}});
  CHECK(sol.max_step_mass_drift * 1000 < 1e-6);
}

TEST_CASE("dt above the stability bound is rejected with the bound") {
  ProcessSpec spec = pure_diffusion_1d();
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const DensityField rho0 = density_from_function(g, [](const State& x) { return normal_pdf(x[0]); });
  const double bound = fpe_stability_bound(spec, nullptr, g);
  try {
    solve_fpe(spec, nullptr, rho0, 1.0, 2.0 * bound, {});
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("stability bound") != std::string::npos);
  }
}

TEST_CASE("the Gibbs density is numerically stationary under the full dynamics") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  const Grid g = example1_grid();
  const DensityField gibbs = example1_gibbs_density(g);
  const double dt = 1.25e-4;
  const FpeSolution sol = solve_fpe(spec, &k, gibbs, 1.0, dt, {2000, {}});
  double sup = 0.0;
  for (const auto& snap : sol.snapshots)
    sup = std::max(sup, (snap.values - gibbs.values).abs().maxCoeff());
  CHECK(sup < 1e-3);
}

TEST_CASE("stationary residual oracles") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  const Grid g = example1_grid();
  const DensityField gibbs = example1_gibbs_density(g);
  const double res_gibbs = stationary_residual(spec, &k, gibbs);
  CHECK(res_gibbs < 1e-3);

  // discriminative: an off-stationary Gaussian has a much larger residual
  const DensityField off =
      density_from_function(g, [](const State& x) { return normal_pdf(x[0], 1.0, 1.5); });
  CHECK(stationary_residual(spec, &k, off) > 10.0 * res_gibbs);
}

TEST_CASE("stationary residual drops by >= 3x under grid refinement") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  const Grid coarse = Grid::line(-8.0, 8.0, 321);
  const Grid fine = Grid::line(-8.0, 8.0, 641);
  const double r_coarse = stationary_residual(spec, &k, example1_gibbs_density(coarse));
  const double r_fine = stationary_residual(spec, &k, example1_gibbs_density(fine));
  CHECK(r_coarse / r_fine >= 3.0);
}

TEST_CASE("stable stationary density solves the nonlocal equation on the grid") {
  const double alpha = 1.5;
  const ProcessSpec spec = example2_spec(alpha);
  const JumpKernel k = build_jump_kernel(spec);
  const Example2Reference ref = example2_reference(alpha);
  const DensityField rho = stable_stationary_density(alpha, ref.grid, ref.xi_max, ref.xi_nodes);
  const double res = stationary_residual(spec, &k, rho, ref.band);
  CHECK(res < 1e-2);
}

TEST_CASE("2D heat kernel spreading") {
  ProcessSpec spec;
  spec.dim = 2;
  spec.beta = 1.0;
  spec.diffusion_factor = [](const State&) { return Eigen::MatrixXd::Identity(2, 2); };
  const Grid g = Grid::rectangle(-6.0, 6.0, 97, -6.0, 6.0, 97);
  const DensityField rho0 = density_from_function(g, [](const State& x) {
    return normal_pdf(x[0], 0.0, 0.5) * normal_pdf(x[1], 0.0, 0.5);
  });
  const double dt = 0.8 * fpe_stability_bound(spec, nullptr, g);
  const long steps = std::lround(std::ceil(0.375 / dt));
  const double dt_exact = 0.375 / static_cast<double>(steps);
  const FpeSolution sol = solve_fpe(spec, nullptr, rho0, 0.375, dt_exact, {static_cast<int>(steps), {}});
  const Eigen::ArrayXd w = g.trapezoid_weights();
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
    const State x = g.node(i);
    l1 += w[i] * std::abs(sol.snapshots.back().values[i] - normal_pdf(x[0]) * normal_pdf(x[1]));
  }
  CHECK(l1 < 5e-3);
}

TEST_CASE("2D rotational drift keeps the standard Gaussian stationary") {
  const ProcessSpec spec = rotational_ou_2d_spec();
  const Grid g = grid_2d_reference();
  const DensityField rho = density_from_function(
      g, [](const State& x) { return std::exp(-0.5 * x.squaredNorm()); });
  CHECK(stationary_residual(spec, nullptr, rho) < 2e-2);
}
