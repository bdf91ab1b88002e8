#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jumpepr/errors.hpp"
#include "jumpepr/grid.hpp"

namespace jumpepr {

using State = Eigen::VectorXd;
using VectorFn = std::function<State(const State&)>;
using MatrixFn = std::function<Eigen::MatrixXd(const State&)>;
using ScalarFn = std::function<double(const State&)>;
using PairFn = std::function<double(const State&, const State&)>;

// State-dependent jump map sigma(x, z) with user-supplied inverse and inverse
// Jacobian determinant. Both built-in maps have closed-form inverses; numerical
// inversion would pollute every downstream quadrature.
struct JumpMap {
  std::function<State(const State& x, const State& z)> forward;
  std::function<State(const State& x, const State& w)> inverse;
  std::function<double(const State& x, const State& w)> inverse_jacobian_det;
};

// Pure-jump alpha-stable driver (infinite activity): does not fit the
// compound-Poisson fields and is simulated by exact stable increments.
struct StableDriver {
  double alpha = 1.5;
};

// Rate density k(x, y) of jumps from x to y, possibly singular on the diagonal.
// For k ~ c |x-y|^-gamma near the diagonal, singularity_order = gamma and
// singular_coefficient = c; quadratures then add an analytic band term.
struct JumpKernel {
  PairFn rate;
  std::optional<double> singularity_order;
  double singular_coefficient = 0.0;
};

// Full coefficient bundle (b, a, beta, lambda, m, sigma) of the SDE.
struct ProcessSpec {
  int dim = 1;
  double beta = 1.0;  // inverse temperature
  VectorFn drift;
  MatrixFn diffusion_factor;  // a(x); A = a a^T
  bool zero_diffusion = false;
  bool constant_diffusion = true;
  VectorFn div_A;  // closed-form (div A)_i = sum_j dA_ij/dx_j, optional

  double jump_rate = 0.0;  // lambda
  ScalarFn levy_density;   // m(z), not necessarily normalized
  double levy_mass = 0.0;  // ||m||_1; total jump intensity is lambda * levy_mass
  std::function<State(std::mt19937_64&)> levy_sampler;  // z ~ m / ||m||_1
  std::optional<JumpMap> jump_map;
  std::optional<JumpKernel> kernel_override;
  std::optional<StableDriver> stable;

  std::string name = "custom";

  Eigen::MatrixXd diffusion_matrix(const State& x) const;  // A(x) = a a^T
  bool has_jumps() const { return stable.has_value() || jump_rate > 0.0; }
};

uint64_t spec_fingerprint(const ProcessSpec& spec);

// Fractional-Laplacian normalization constant C_{1,alpha}: with Levy density
// C_{1,alpha} |z|^{-(1+alpha)} the driver has characteristic exponent |xi|^alpha.
double stable_levy_constant(double alpha);

// Stable jump kernel k(x,y) = C_{1,alpha} |x-y|^{-(1+alpha)} in one dimension.
JumpKernel stable_jump_kernel(double alpha);

// k(x,y) = lambda m(sigma^{-1}(x, y-x)) det(grad sigma^{-1}(x, y-x)), or the
// registered closed form when kernel_override is present.
JumpKernel build_jump_kernel(const ProcessSpec& spec);

// Ito drift b + beta^{-1} div A. div A by central differences unless a closed
// form is registered or the diffusion is constant/zero.
State ito_drift(const ProcessSpec& spec, const State& x);

struct IntegrabilityReport {
  double value = 0.0;  // integral of (1 ^ |z|^2) m(z) dz
  double inner = 0.0;  // |z| <= 1 part
  double outer = 0.0;  // |z| > 1 part
  bool converged = false;
  double relative_change = 0.0;
};

// Checks the Levy integrability condition by dyadic Gauss quadrature at two
// refinement levels; divergence shows up as level-count sensitivity.
IntegrabilityReport check_integrability(const ProcessSpec& spec, int quadrature_budget);

struct RegularityReport {
  double max_kbar = 0.0;  // max over sampled pairs of |k log(k/k~)|
  long violations = 0;    // pairs with one-sided zero kernel (log ratio undefined)
  long pairs = 0;
};

// Samples pairs (x, y) with x density-weighted and y uniform on the grid box,
// and reports the magnitude of kbar(x,y) = k(x,y) log(k(x,y)/k(y,x)).
RegularityReport check_regularity_E(const JumpKernel& kernel, const DensityField& density,
                                    long pair_samples, uint64_t seed = 20240817ull);

struct AssumptionReport {
  double max_A_asymmetry = 0.0;       // max |A - A^T| entrywise over probes
  double min_A_eigenvalue = 0.0;      // min eigenvalue of A over probes
  double max_jumpmap_roundtrip = 0.0; // max |forward(x, inverse(x,w)) - w|
  double min_inverse_jacobian = 0.0;  // min inverse Jacobian determinant
  double max_growth_ratio = 0.0;      // (|b|^2 + ||A||) / (1 + |x|^2)
};

// Numerical spot checks of the standing assumptions on a probe set.
// Diagnostics only, never a hard gate.
AssumptionReport check_assumptions(const ProcessSpec& spec, const std::vector<State>& probes,
                                   const std::vector<State>& jump_probes = {});

}  // namespace jumpepr
