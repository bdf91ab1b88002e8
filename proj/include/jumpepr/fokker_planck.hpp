#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "jumpepr/grid.hpp"
#include "jumpepr/model.hpp"

namespace jumpepr {

// Diagonal-band policy for the singular pair quadratures. delta_diag equals
// band_cells grid spacings; pairs with |x - y| < delta_diag are excluded and,
// for kernels with a declared power singularity, replaced by the analytic
// Taylor term of the excluded band.
struct BandScheme {
  int band_cells = 1;
};

// Pair weight for the 1D off-diagonal quadrature around node i: trapezoid
// weight of node j for the region |y - x_i| >= delta_diag (half weight on the
// band edge and at the global edges), zero inside the band.
double pair_weight_1d(const Grid& g, Eigen::Index i, Eigen::Index j, int band_cells);

// Analytic coefficient c_T with  int_{|z|<delta} k(x,x+z) g(z) dz ~ c_T g''(0)/2 * ...
// Specifically, for k ~ c |z|^{-(1+alpha)}:  int_{|z|<delta} z^2/2 * k dz = c_T,
// c_T = c * delta^{2-alpha} / (2 - alpha). Zero for bounded kernels.
double band_taylor_coefficient(const JumpKernel& kernel, const Grid& g, int band_cells);

// Local probability current j_loc = b rho - beta^{-1} A grad(rho), nodewise
// with central-difference gradients.
Eigen::MatrixXd local_current(const ProcessSpec& spec, const DensityField& field);

// Dense pair matrix j_nl(x_i, x_j) = rho_i k(x_i,x_j) - rho_j k(x_j,x_i);
// band entries set to zero. Guarded against huge grids.
struct NonlocalCurrent {
  Eigen::MatrixXd values;
  Eigen::Index excluded_pairs = 0;
};
NonlocalCurrent nonlocal_current(const JumpKernel& kernel, const DensityField& field,
                                 BandScheme band = {},
                                 const Eigen::MatrixXd* kernel_table = nullptr);

// Dense table K(i,j) = k(x_i, x_j) so repeated pair reductions avoid
// re-evaluating the kernel closure; guarded against huge grids.
Eigen::MatrixXd kernel_value_table(const JumpKernel& kernel, const Grid& g);

// Both probability currents on one grid. nonlocal.values is empty when the
// process has no jump part.
struct CurrentField {
  Eigen::MatrixXd local;
  NonlocalCurrent nonlocal;
};
CurrentField compute_currents(const ProcessSpec& spec, const JumpKernel* kernel,
                              const DensityField& field, BandScheme band = {},
                              const Eigen::MatrixXd* kernel_table = nullptr);

// Nonlocal gain/loss integral of the adjoint generator at every node:
// int k(y,x) rho(y) - k(x,y) rho(x) dy, band-excluded with Taylor correction.
Eigen::ArrayXd nonlocal_gain_loss(const JumpKernel& kernel, const Grid& g,
                                  const Eigen::ArrayXd& rho, BandScheme band = {});

// Divergence part of the adjoint generator, conservative flux form:
// div[-b rho + beta^{-1} A grad rho].
Eigen::ArrayXd local_adjoint(const ProcessSpec& spec, const Grid& g, const Eigen::ArrayXd& rho);

// Generator applied to nodal values: L f = b . grad f + beta^{-1} div(A grad f)
// + int (f(y) - f(x)) k(x,y) dy.
Eigen::ArrayXd apply_generator(const ProcessSpec& spec, const JumpKernel* kernel, const Grid& g,
                               const Eigen::ArrayXd& f, BandScheme band = {});

// Total jump rate R(x) = int k(x,y) dy by band-excluded grid quadrature.
Eigen::ArrayXd total_jump_rate(const JumpKernel& kernel, const Grid& g, BandScheme band = {});

struct FpeOptions {
  int snapshot_stride = 1;
  BandScheme band{};
};

struct FpeSolution {
  std::vector<DensityField> snapshots;
  double stability_bound = 0.0;
  double max_step_mass_drift = 0.0;  // max |pre-renormalization mass - 1| per step
  long steps = 0;
};

// Explicit Euler time stepping of the nonlocal Fokker-Planck equation.
// dt above the stability bound is rejected with the computed bound.
FpeSolution solve_fpe(const ProcessSpec& spec, const JumpKernel* kernel, const DensityField& rho0,
                      double t_final, double dt, FpeOptions options = {});

double fpe_stability_bound(const ProcessSpec& spec, const JumpKernel* kernel, const Grid& g,
                           BandScheme band = {});

// Mass-weighted L1 norm of L* rho, same discretization as solve_fpe.
double stationary_residual(const ProcessSpec& spec, const JumpKernel* kernel,
                           const DensityField& field, BandScheme band = {});

// Off-diagonal pair reduction sum_{i<j} W_ij f(i,j) with the band-aware
// trapezoid pair weights (1D) or plain product weights skipping i == j (2D).
template <class F>
double pair_reduce(const Grid& g, int band_cells, F&& f) {
  const Eigen::Index n = g.num_nodes();
  double acc = 0.0;
  if (g.dim == 1) {
    const double h = g.spacing(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double gi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      for (Eigen::Index j = i + band_cells; j < n; ++j) {
        double bf = (j - i == band_cells) ? 0.5 : 1.0;
        const double gj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
        acc += h * h * gi * gj * bf * f(i, j);
      }
    }
    return acc;
  }
  const Eigen::ArrayXd w = g.trapezoid_weights();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) acc += w[i] * w[j] * f(i, j);
  return acc;
}

}  // namespace jumpepr
