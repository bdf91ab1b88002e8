#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "jumpepr/density.hpp"
#include "jumpepr/examples.hpp"
#include "jumpepr/model.hpp"
#include "jumpepr/spec_io.hpp"

using namespace jumpepr;

namespace {

State pt(double x) {
  State s(1);
  s[0] = x;
  return s;
}

// independent oracle for int (1 - cos(xi z)) c |z|^{-1-a} dz: dyadic Gauss
// cells subdivided against the oscillation, plus the exact tail of the
// kernel mass (the cosine tail beyond B is O(c B^{-1-a}/xi), negligible)
double characteristic_exponent_oracle(double xi, double c, double alpha) {
  static const double nodes[8] = {-0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
                                  -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                  0.7966664774136267,  0.9602898564975362};
  static const double weights[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                    0.2223810344533745, 0.1012285362903763};
  auto f = [&](double z) {
    const double s = std::sin(0.5 * xi * z);  // 1 - cos(xi z) without cancellation
    return 2.0 * s * s * c * std::pow(std::abs(z), -1.0 - alpha);
  };
  double acc = 0.0;
  for (int k = -40; k < 12; ++k) {
    const double a = std::pow(2.0, k), b = 2.0 * a;
    const int sub = std::max(1, static_cast<int>(std::ceil(xi * (b - a))));
    const double h = (b - a) / sub;
    for (int s = 0; s < sub; ++s) {
      const double lo = a + s * h, hi2 = lo + h;
      const double cc = 0.5 * (hi2 - lo), m = 0.5 * (lo + hi2);
      for (int i = 0; i < 8; ++i) {
        const double z = m + cc * nodes[i];
        acc += cc * weights[i] * (f(z) + f(-z));
      }
    }
  }
  const double B = std::pow(2.0, 12);
  acc += 2.0 * c * std::pow(B, -alpha) / alpha;
  return acc;
}

}  // namespace

TEST_CASE("jump kernel from identity map is lambda m(y - x)") {
  ProcessSpec spec;
  spec.dim = 1;
  spec.jump_rate = 2.0;
  spec.levy_density = [](const State& z) { return std::exp(-std::abs(z[0])); };
  JumpMap map;
  map.forward = [](const State&, const State& z) { return z; };
  map.inverse = [](const State&, const State& w) { return w; };
  map.inverse_jacobian_det = [](const State&, const State&) { return 1.0; };
  spec.jump_map = map;
  const JumpKernel k = build_jump_kernel(spec);
  for (double x : {-1.0, 0.0, 2.5})
    for (double y : {-2.0, 0.7, 3.0}) {
      if (x == y) continue;
      CHECK(k.rate(pt(x), pt(y)) == doctest::Approx(2.0 * std::exp(-std::abs(y - x))).epsilon(1e-14));
    }
}

TEST_CASE("resampling map yields the Gibbs-target kernel e^{-V(y)}") {
  const ProcessSpec spec = example1_spec();
  const JumpKernel k = build_jump_kernel(spec);
  for (double x : {-3.0, 0.0, 1.5})
    for (double y : {-1.0, 0.5, 2.0}) {
      if (x == y) continue;
      CHECK(k.rate(pt(x), pt(y)) == doctest::Approx(std::exp(-0.5 * y * y)).epsilon(1e-14));
    }
}

TEST_CASE("stable kernel override matches the closed form") {
  const double alpha = 1.5;
  const JumpKernel k = stable_jump_kernel(alpha);
  const double c = stable_levy_constant(alpha);
  CHECK(k.rate(pt(0.0), pt(1.0)) == doctest::Approx(c).epsilon(1e-14));
  CHECK(k.rate(pt(1.0), pt(3.0)) == doctest::Approx(c * std::pow(2.0, -2.5)).epsilon(1e-14));
  CHECK(k.rate(pt(3.0), pt(1.0)) == k.rate(pt(1.0), pt(3.0)));
  CHECK(*k.singularity_order == doctest::Approx(2.5));
}

TEST_CASE("kernel configuration errors") {
  ProcessSpec spec;
  spec.dim = 1;
  spec.jump_rate = 1.0;
  spec.levy_density = [](const State&) { return 1.0; };
  CHECK_THROWS_AS(build_jump_kernel(spec), ConfigError);

  JumpMap bad;
  bad.forward = [](const State&, const State& z) { return z; };
  bad.inverse = [](const State&, const State& w) { return w; };
  bad.inverse_jacobian_det = [](const State&, const State&) { return -1.0; };
  spec.jump_map = bad;
  const JumpKernel k = build_jump_kernel(spec);
  CHECK_THROWS_AS(k.rate(pt(0.0), pt(1.0)), AssumptionError);
}

TEST_CASE("kernel round-trip reproduces lambda m(z) through the jump map") {
  // sigma(x, z) = 0.7 z, closed-form inverse and Jacobians
  const double c = 0.7;
  ProcessSpec spec;
  spec.dim = 1;
  spec.jump_rate = 1.3;
  spec.levy_density = [](const State& z) { return std::exp(-0.5 * z.squaredNorm()); };
  JumpMap map;
  map.forward = [c](const State&, const State& z) { return State(c * z); };
  map.inverse = [c](const State&, const State& w) { return State(w / c); };
  map.inverse_jacobian_det = [c](const State&, const State&) { return 1.0 / c; };
  spec.jump_map = map;
  const JumpKernel k = build_jump_kernel(spec);
  const double forward_jacobian = c;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const State x = pt(2.0 * gauss(rng));
    const State z = pt(gauss(rng));
    const State y = x + map.forward(x, z);
    const double lhs = k.rate(x, y) * forward_jacobian;
    const double rhs = spec.jump_rate * spec.levy_density(z);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(rhs));
  }
}

TEST_CASE("A = a a^T is exactly symmetric at evaluation points") {
  ProcessSpec spec;
  spec.dim = 2;
  spec.diffusion_factor = [](const State& x) {
    Eigen::MatrixXd a(2, 2);
    a << 1.0 + 0.3 * std::sin(x[0]), 0.2, -0.4 * x[1], 2.0;
    return a;
  };
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    State x(2);
    x << gauss(rng), gauss(rng);
    const Eigen::MatrixXd A = spec.diffusion_matrix(x);
    CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("integrability check agrees with the stable closed form") {
  for (double alpha : {0.5, 1.0, 1.5}) {
    const double c = stable_levy_constant(alpha);
    ProcessSpec spec;
    spec.dim = 1;
    spec.levy_density = [c, alpha](const State& z) {
      return c * std::pow(std::abs(z[0]), -(1.0 + alpha));
    };
    const IntegrabilityReport rep = check_integrability(spec, 512);
    const double exact = 2.0 * c * (1.0 / (2.0 - alpha) + 1.0 / alpha);
    CHECK(rep.converged);
    CHECK(std::abs(rep.value - exact) < 1e-4 * exact);
  }
}

TEST_CASE("integrability of a bounded density is below its mass") {
  ProcessSpec spec;
  spec.dim = 1;
  spec.levy_density = [](const State& z) {
    return std::exp(-0.5 * z.squaredNorm()) / std::sqrt(2.0 * std::numbers::pi);
  };
  const IntegrabilityReport rep = check_integrability(spec, 256);
  CHECK(rep.converged);
  CHECK(rep.value < 1.0);
  CHECK(rep.value > 0.0);
}

TEST_CASE("integrability flags the alpha = 2 boundary divergence") {
  ProcessSpec spec;
  spec.dim = 1;
  spec.levy_density = [](const State& z) { return std::pow(std::abs(z[0]), -3.0); };
  const IntegrabilityReport rep = check_integrability(spec, 256);
  CHECK_FALSE(rep.converged);
}

TEST_CASE("stable constant gives unit characteristic exponent") {
  // int (1 - cos(xi z)) C |z|^{-1-alpha} dz = |xi|^alpha
  for (double alpha : {1.0, 1.5}) {
    const double c = stable_levy_constant(alpha);
    for (double xi : {1.0, 2.0}) {
      const double val = characteristic_exponent_oracle(xi, c, alpha);
      CHECK(val == doctest::Approx(std::pow(xi, alpha)).epsilon(2e-6));
    }
  }
}

TEST_CASE("regularity diagnostic") {
  const Grid g = Grid::line(-8.0, 8.0, 321);
  const DensityField rho =
      density_from_function(g, [](const State& x) { return std::exp(-0.5 * x.squaredNorm()); });

  SUBCASE("symmetric kernel has zero kbar") {
    JumpKernel k;
    k.rate = [](const State& x, const State& y) { return std::exp(-0.1 * (x - y).squaredNorm()); };
    const RegularityReport rep = check_regularity_E(k, rho, 2000);
    CHECK(rep.max_kbar == 0.0);
    CHECK(rep.violations == 0);
  }
  SUBCASE("Gibbs-target kernel is bounded by the grid oracle") {
    JumpKernel k;
    k.rate = [](const State&, const State& y) { return std::exp(-0.5 * y.squaredNorm()); };
    const RegularityReport rep = check_regularity_E(k, rho, 5000);
    // kbar(x,y) = e^{-V(y)} (V(x) - V(y)); direct maximization over the box
    double oracle = 0.0;
    for (double x = -8.0; x <= 8.0; x += 0.05)
      for (double y = -8.0; y <= 8.0; y += 0.05)
        oracle = std::max(oracle, std::exp(-0.5 * y * y) * std::abs(0.5 * x * x - 0.5 * y * y));
    CHECK(rep.max_kbar > 0.0);
    CHECK(rep.max_kbar <= oracle * (1.0 + 1e-9));
  }
  SUBCASE("one-sided zero kernels are counted as violations") {
    JumpKernel k;
    k.rate = [](const State& x, const State& y) { return y[0] > x[0] ? 1.0 : 0.0; };
    const RegularityReport rep = check_regularity_E(k, rho, 500);
    CHECK(rep.violations > 0);
  }
}

TEST_CASE("ito drift correction by finite differences matches the closed form") {
  ProcessSpec spec;
  spec.dim = 1;
  spec.beta = 2.0;
  spec.constant_diffusion = false;
  spec.drift = [](const State& x) { return State(-x); };
  spec.diffusion_factor = [](const State& x) {
    return Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.1 * std::sin(x[0]));
  };
  // A = (1 + 0.1 sin x)^2, dA/dx = 2 (1 + 0.1 sin x)(0.1 cos x)
  for (double x : {-1.0, 0.0, 0.7, 2.0}) {
    const double a = 1.0 + 0.1 * std::sin(x);
    const double exact = -x + 2.0 * a * 0.1 * std::cos(x) / spec.beta;
    CHECK(ito_drift(spec, pt(x))[0] == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("assumption spot checks on the built-in specs") {
  const ProcessSpec spec = example1_spec();
  std::vector<State> probes, zs;
  for (double x = -4.0; x <= 4.0; x += 0.5) probes.push_back(pt(x));
  for (double z = -2.0; z <= 2.0; z += 0.5) zs.push_back(pt(z));
  const AssumptionReport rep = check_assumptions(spec, probes, zs);
  CHECK(rep.max_A_asymmetry < 1e-12);
  CHECK(rep.min_A_eigenvalue > 0.0);
  CHECK(rep.max_jumpmap_roundtrip < 1e-12);
  CHECK(rep.min_inverse_jacobian > 0.0);
}

TEST_CASE("process specs load from JSON") {
  const nlohmann::json doc = {{"dim", 1},
                              {"beta", 1.0},
                              {"lambda", 1.0},
                              {"name", "json_example1"},
                              {"drift", {{"family", "linear"}, {"matrix", {{-1.0}}}}},
                              {"diffusion", {{"family", "scalar"}, {"value", 1.0}}},
                              {"levy", {{"family", "gaussian"}, {"sigma", 1.0}, {"amplitude", 1.0}}},
                              {"jump_map", {{"family", "replace"}}}};
  const ProcessSpec spec = load_process_spec(doc);
  CHECK(spec.dim == 1);
  CHECK(spec.jump_rate == 1.0);
  CHECK(spec.levy_mass == doctest::Approx(std::sqrt(2.0 * std::numbers::pi)));
  const JumpKernel k = build_jump_kernel(spec);
  CHECK(k.rate(pt(0.0), pt(1.2)) == doctest::Approx(std::exp(-0.72)).epsilon(1e-12));
  CHECK(spec.drift(pt(2.0))[0] == doctest::Approx(-2.0));
}

TEST_CASE("unknown families are rejected with the offending key path") {
  nlohmann::json doc = {{"dim", 1}, {"drift", {{"family", "warp"}}}};
  try {
    load_process_spec(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("drift.family") != std::string::npos);
    CHECK(std::string(e.what()).find("warp") != std::string::npos);
  }

  doc = {{"dim", 1},
         {"lambda", 1.0},
         {"levy", {{"family", "gaussian"}}},
         {"jump_map", {{"family", "identity"}}},
         {"diffusion", {{"family", "zero"}}}};
  CHECK_NOTHROW(load_process_spec(doc));
  doc["levy"]["family"] = "cauchyish";
  CHECK_THROWS_AS(load_process_spec(doc), ConfigError);
  doc["levy"]["family"] = "gaussian";
  doc.erase("jump_map");
  CHECK_THROWS_AS(load_process_spec(doc), ConfigError);  // lambda > 0 with no map
}

TEST_CASE("stable JSON family declares the stable driver") {
  const nlohmann::json doc = {{"dim", 1},
                              {"drift", {{"family", "gradient_quadratic"}, {"stiffness", 1.0}}},
                              {"diffusion", {{"family", "zero"}}},
                              {"levy", {{"family", "stable"}, {"alpha", 1.5}}}};
  const ProcessSpec spec = load_process_spec(doc);
  REQUIRE(spec.stable.has_value());
  CHECK(spec.stable->alpha == doctest::Approx(1.5));
  REQUIRE(spec.kernel_override.has_value());
  CHECK(spec.kernel_override->rate(pt(0.0), pt(2.0)) ==
        doctest::Approx(stable_levy_constant(1.5) * std::pow(2.0, -2.5)));
}

TEST_CASE("fingerprints separate specs and are stable") {
  const uint64_t a = spec_fingerprint(example1_spec());
  const uint64_t b = spec_fingerprint(example2_spec(1.5));
  const uint64_t c = spec_fingerprint(example2_spec(1.0));
  CHECK(a != b);
  CHECK(b != c);
  CHECK(a == spec_fingerprint(example1_spec()));
}
