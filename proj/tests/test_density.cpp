#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jumpepr/csv_io.hpp"
#include "jumpepr/density.hpp"

using namespace jumpepr;

namespace {

double normal_pdf(double x, double m = 0.0, double s = 1.0) {
  return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

State pt(double x) {
  State s(1);
  s[0] = x;
  return s;
}

}  // namespace

TEST_CASE("KDE of a large normal sample is L1-close to the true density") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<State> samples(1000000);
  for (auto& s : samples) s = pt(gauss(rng));
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const DensityEstimate est = estimate_density(samples, g);
  const Eigen::ArrayXd w = g.trapezoid_weights();
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i)
    l1 += w[i] * std::abs(est.field.values[i] - normal_pdf(g.coord(0, static_cast<int>(i))));
  CHECK(l1 < 0.01);
  CHECK(std::abs(est.field.mass() - 1.0) < 1e-12);
}

TEST_CASE("KDE rejects degenerate and unusable samples") {
  const Grid g = Grid::line(-1.0, 1.0, 65);
  std::vector<State> equal(200, pt(0.0));
  CHECK_THROWS_AS(estimate_density(equal, g), NumericError);

  std::vector<State> outside(200, pt(5.0));
  for (size_t i = 0; i < outside.size(); ++i) outside[i] = pt(5.0 + 0.01 * static_cast<double>(i));
  CHECK_THROWS_AS(estimate_density(outside, g), NumericError);

  std::vector<State> few(50, pt(0.0));
  CHECK_THROWS_AS(estimate_density(few, g), ConfigError);
}

TEST_CASE("KDE output is bit-identical under sample permutations") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.5, 1.3);
  std::vector<State> samples(10000);
  for (auto& s : samples) s = pt(gauss(rng));
  const Grid g = Grid::line(-6.0, 7.0, 257);
  const DensityEstimate a = estimate_density(samples, g);
  std::shuffle(samples.begin(), samples.end(), rng);
  const DensityEstimate b = estimate_density(samples, g);
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) CHECK(a.field.values[i] == b.field.values[i]);
}

TEST_CASE("KDE clips and counts outliers") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<State> samples(5000);
  for (auto& s : samples) s = pt(gauss(rng));
  samples[17] = pt(50.0);
  samples[1833] = pt(-50.0);
  const Grid g = Grid::line(-8.0, 8.0, 129);
  const DensityEstimate est = estimate_density(samples, g);
  CHECK(est.clipped_samples == 2);
  CHECK(std::abs(est.field.mass() - 1.0) < 1e-12);
}

TEST_CASE("stable stationary density: Gaussian limit at alpha = 2") {
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const DensityField f = stable_stationary_density(2.0, g, 9.0, 4001);
  // compare to the unit-mass-renormalized N(0,1) on the same grid
  DensityField target = density_from_function(g, [](const State& x) { return normal_pdf(x[0]); });
  double sup = 0.0;
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i)
    sup = std::max(sup, std::abs(f.values[i] - target.values[i]));
  CHECK(sup < 1e-8);
}

TEST_CASE("stable stationary density: Cauchy at alpha = 1") {
  const Grid g = Grid::line(-40.0, 40.0, 1281);
  const DensityField f = stable_stationary_density(1.0, g, 40.0, 40001);
  DensityField target = density_from_function(
      g, [](const State& x) { return 1.0 / (std::numbers::pi * (1.0 + x[0] * x[0])); });
  double sup = 0.0;
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i)
    sup = std::max(sup, std::abs(f.values[i] - target.values[i]));
  CHECK(sup < 1e-6);
}

TEST_CASE("stable stationary density is exactly symmetric") {
  const Grid g = Grid::line(-20.0, 20.0, 401);
  const DensityField f = stable_stationary_density(1.5, g, 14.0, 4001);
  const Eigen::Index n = g.num_nodes();
  for (Eigen::Index i = 0; i < n; ++i) CHECK(f.values[i] == f.values[n - 1 - i]);
}

TEST_CASE("stable stationary density is stable under xi refinement") {
  const Grid g = Grid::line(-30.0, 30.0, 481);
  const DensityField a = stable_stationary_density(1.5, g, 14.0, 16001);
  const DensityField b = stable_stationary_density(1.5, g, 14.0, 32001);
  CHECK((a.values - b.values).abs().maxCoeff() < 1e-8);
}

TEST_CASE("stable stationary density validates its quadrature settings") {
  const Grid g = Grid::line(-10.0, 10.0, 101);
  CHECK_THROWS_AS(stable_stationary_density(1.0, g, 5.0, 2001), ConfigError);  // tail too fat
  CHECK_THROWS_AS(stable_stationary_density(2.5, g, 9.0, 2001), ConfigError);
  CHECK_THROWS_AS(stable_stationary_density(1.5, g, 14.0, 8), ConfigError);
}

TEST_CASE("log density gradient oracles") {
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const double h = g.spacing(0);

  SUBCASE("standard normal gives -x") {
    const DensityField f = density_from_function(g, [](const State& x) { return normal_pdf(x[0]); });
    const GradientField grad = log_density_gradient(f);
    for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
      const double x = g.coord(0, static_cast<int>(i));
      if (std::abs(x) > 4.0) continue;
      CHECK(std::abs(grad.values(i, 0) + x) < h * h);
    }
  }
  SUBCASE("uniform density has zero interior gradient") {
    DensityField f;
    f.grid = g;
    f.values = Eigen::ArrayXd::Constant(g.num_nodes(), 1.0);
    f.renormalize();
    const GradientField grad = log_density_gradient(f);
    for (Eigen::Index i = 1; i + 1 < g.num_nodes(); ++i) CHECK(grad.values(i, 0) == 0.0);
  }
  SUBCASE("shifted scaled normal gives -(x - m)/s^2") {
    const DensityField f =
        density_from_function(g, [](const State& x) { return normal_pdf(x[0], 1.0, 1.5); });
    const GradientField grad = log_density_gradient(f);
    for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
      const double x = g.coord(0, static_cast<int>(i));
      if (std::abs(x - 1.0) > 4.0) continue;
      CHECK(std::abs(grad.values(i, 0) + (x - 1.0) / 2.25) < h * h);
    }
  }
}

TEST_CASE("2D log gradient of a product density separates") {
  const Grid g = Grid::rectangle(-5.0, 5.0, 81, -4.0, 4.0, 65);
  const DensityField f = density_from_function(
      g, [](const State& x) { return normal_pdf(x[0], 0.0, 1.0) * normal_pdf(x[1], 0.5, 0.8); });
  const GradientField grad = log_density_gradient(f);
  const Grid gx = Grid::line(-5.0, 5.0, 81), gy = Grid::line(-4.0, 4.0, 65);
  const DensityField fx = density_from_function(gx, [](const State& x) { return normal_pdf(x[0]); });
  const DensityField fy =
      density_from_function(gy, [](const State& x) { return normal_pdf(x[0], 0.5, 0.8); });
  const GradientField gradx = log_density_gradient(fx);
  const GradientField grady = log_density_gradient(fy);
  double worst = 0.0;
  for (int ix = 0; ix < 81; ++ix)
    for (int iy = 0; iy < 65; ++iy) {
      const Eigen::Index f2 = g.flat(ix, iy);
      if (f.values[f2] < 1e-6 * f.values.maxCoeff()) continue;
      worst = std::max(worst, std::abs(grad.values(f2, 0) - gradx.values(ix, 0)));
      worst = std::max(worst, std::abs(grad.values(f2, 1) - grady.values(iy, 0)));
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("inverse-CDF sampling reproduces the density moments") {
  const Grid g = Grid::line(-8.0, 8.0, 641);
  const DensityField f =
      density_from_function(g, [](const State& x) { return normal_pdf(x[0], 0.5, 1.2); });
  std::mt19937_64 rng(123);
  double m = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_from_density_1d(f, rng);
    m += x;
    sq += x * x;
  }
  m /= n;
  sq = sq / n - m * m;
  CHECK(std::abs(m - 0.5) < 0.01);
  CHECK(std::abs(sq - 1.44) < 0.03);
  CHECK(density_cdf_1d(f, 0.5) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("density CSV round-trips exactly") {
  const Grid g = Grid::line(-3.0, 3.0, 97);
  const DensityField f = density_from_function(g, [](const State& x) { return normal_pdf(x[0]); });
  const std::string path = "density_roundtrip_test.csv";
  write_density_csv(path, f);
  const DensityField back = read_density_csv(path);
  REQUIRE(back.grid.num_nodes() == f.grid.num_nodes());
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) CHECK(back.values[i] == f.values[i]);
  const std::string path2 = "density_roundtrip_test2.csv";
  write_density_csv(path2, back);
  std::ifstream a(path), b(path2);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("2D density CSV round-trips") {
  const Grid g = Grid::rectangle(-2.0, 2.0, 17, -1.0, 3.0, 9);
  const DensityField f = density_from_function(
      g, [](const State& x) { return std::exp(-x.squaredNorm()); });
  write_density_csv("density2d_roundtrip.csv", f);
  const DensityField back = read_density_csv("density2d_roundtrip.csv");
  REQUIRE(back.grid.dim == 2);
  REQUIRE(back.grid.npts[0] == 17);
  REQUIRE(back.grid.npts[1] == 9);
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) CHECK(back.values[i] == f.values[i]);
}
