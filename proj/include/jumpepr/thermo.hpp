#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "jumpepr/fokker_planck.hpp"
#include "jumpepr/grid.hpp"
#include "jumpepr/model.hpp"

namespace jumpepr {

// Helmholtz-Hodge data: A^{-1} b = -grad V + f_loc, plus the antisymmetric
// driving f_nl(x,y) acting on the nonlocal transitions.
struct ForceDecomposition {
  ScalarFn potential;
  VectorFn local_external;
  PairFn nonlocal_driving;
};

ForceDecomposition gradient_decomposition(ScalarFn potential);

// S(t) = -int rho log rho, with 0 log 0 := 0.
double gibbs_entropy(const DensityField& field);

// U(t) = int V rho.
double internal_energy(const DensityField& field, const ForceDecomposition& decomposition);

// dW/dt = int f_loc . j_loc + 1/2 double-int j_nl f_nl.
double work_rate(const DensityField& field, const CurrentField& currents,
                 const ForceDecomposition& decomposition, BandScheme band = {});

// h_d = -beta int b^T A^{-1} j_loc - 1/2 double-int j_nl log(k(x,y)/k(y,x)).
// Needs only (b, A, k, rho); the local term is zero by definition when A == 0.
double heat_dissipation(const ProcessSpec& spec, const JumpKernel* kernel,
                        const DensityField& field, const CurrentField& currents,
                        BandScheme band = {}, const Eigen::MatrixXd* kernel_table = nullptr);

struct EprResult {
  double local = 0.0;
  double nonlocal = 0.0;  // includes the analytic band correction
  double band_correction = 0.0;
  double skipped_mass_fraction = 0.0;
  long skipped_pairs = 0;
  long undefined_pairs = 0;  // one-sided zero of rho k (kernel positivity failure)
  double min_nonlocal_integrand = 0.0;  // before clamping; analytic value is >= 0
  bool coverage_warning = false;        // skipped mass fraction above 1%

  double total() const { return local + nonlocal; }
};

// Entropy production rate split into the local quadratic form and the
// nonlocal pair integral, both by trapezoid quadrature.
EprResult entropy_production_rate(const ProcessSpec& spec, const JumpKernel* kernel,
                                  const DensityField& field, BandScheme band = {},
                                  int threads = 1, const Eigen::MatrixXd* kernel_table = nullptr);

// dS/dt by central differences of gibbs_entropy over uniformly spaced snapshots.
Eigen::ArrayXd entropy_rate(const std::vector<DensityField>& snapshots);

struct FreeEnergyReport {
  double value = 0.0;                // U - theta S
  double kl_form = 0.0;              // theta * KL(rho || rho_ss), if reference given
  double offset = 0.0;               // value - kl_form (= theta log Z, a constant)
  bool has_reference = false;
};

FreeEnergyReport free_energy(const DensityField& field, const ForceDecomposition& decomposition,
                             double theta, const DensityField* gibbs_reference = nullptr);

// 1D Helmholtz-Hodge split with f_loc a declared constant (default zero):
// V(x) = -int_ref^x (A^{-1} b - f_loc) ds by cumulative trapezoid.
ForceDecomposition decompose_forces_1d(const ProcessSpec& spec, double reference_point,
                                       double lo, double hi, int nodes,
                                       double f_loc_constant = 0.0);

// f_nl(x,y) = beta^{-1} log(k(x,y)/k(y,x)) - (V(x) - V(y)).
PairFn decompose_jump_driving(const JumpKernel& kernel, const ForceDecomposition& decomposition,
                              double beta);

// Time series of every thermodynamic functional plus the balance residual
// |dS/dt - (e_p + h_d)|.
struct ThermoSeries {
  Eigen::ArrayXd times;
  Eigen::ArrayXd entropy;
  Eigen::ArrayXd internal_energy;
  Eigen::ArrayXd work_rate;
  Eigen::ArrayXd heat_dissipation;
  Eigen::ArrayXd epr_local;
  Eigen::ArrayXd epr_nonlocal;
  Eigen::ArrayXd epr_total;
  Eigen::ArrayXd free_energy;
  Eigen::ArrayXd balance_residual;
};

ThermoSeries build_thermo_series(const ProcessSpec& spec, const JumpKernel* kernel,
                                 const std::vector<DensityField>& snapshots,
                                 const ForceDecomposition& decomposition, double theta,
                                 BandScheme band = {}, int threads = 1);

}  // namespace jumpepr
