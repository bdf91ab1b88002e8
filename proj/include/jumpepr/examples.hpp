#pragma once

#include <string>

#include "jumpepr/density.hpp"
#include "jumpepr/girsanov.hpp"
#include "jumpepr/model.hpp"
#include "jumpepr/reversibility.hpp"
#include "jumpepr/thermo.hpp"

namespace jumpepr {

// Gradient diffusion with resampling jumps: dX = -grad V dt + sqrt(2) dB +
// jumps landing at z ~ e^{-V(z)} dz, V = |x|^2/2. Reversible at the Gibbs law.
ProcessSpec example1_spec();
Grid example1_grid();  // [-8, 8], 641 nodes
DensityField example1_gibbs_density(const Grid& g);

// Linear drift with an alpha-stable driver: dX = -X dt + dL^alpha. Stationary
// but irreversible for alpha < 2.
ProcessSpec example2_spec(double alpha);

struct Example2Reference {
  Grid grid;
  BandScheme band{2};
  double xi_max = 14.0;
  int xi_nodes = 8001;
};
Example2Reference example2_reference(double alpha);

// Reversible pure-diffusion benchmark: dX = -X dt + sqrt(2) dB.
ProcessSpec reversible_ou_spec();

// 2D OU with rotational non-gradient drift b = (-x + y, -y - x), A = I;
// stationary at N(0, I) with entropy production rate 2.
ProcessSpec rotational_ou_2d_spec();
Grid grid_2d_reference();  // [-6, 6]^2, 97 x 97

// Analytic tail estimate of the nonlocal EPR integral beyond the grid box for
// the stable kernel (reported, not added).
double example2_epr_tail_estimate(double alpha, const DensityField& rho_ss);

struct PipelineOptions {
  std::string out_dir;
  uint64_t seed = 1;
  int threads = 1;
  long girsanov_paths = 10000;
  bool write_files = true;
};

struct Example1Result {
  ThermoSeries series;
  ReversibilityReport report;
  double epr0_local = 0.0;
  double epr0_nonlocal = 0.0;
  double epr_final = 0.0;
  double l1_final_error = 0.0;
  double max_uptick_after_t1 = 0.0;  // largest EPR increase between snapshots past t = 1
  double max_step_mass_drift = 0.0;
  long fpe_steps = 0;
  EprKlEstimate girsanov;
  std::vector<DensityField> snapshots;
};

// Full reproduction of the relaxation experiment: FPE evolution from N(3,1),
// thermodynamic series, reversibility report, pathwise EPR cross-check.
// Throws NumericError naming the failing stage if a summary assertion fails.
Example1Result run_example1(const PipelineOptions& options);

struct Example2Result {
  double alpha = 0.0;
  DensityField rho_ss;
  double stationary_res = 0.0;
  double epr_value = 0.0;        // reference settings
  double epr_refined = 0.0;      // grid spacing halved, delta_diag fixed
  double epr_band_halved = 0.0;  // delta_diag halved, spacing fixed
  double error_bar = 0.0;
  double tail_estimate = 0.0;
  EprKlEstimate girsanov;
  ReversibilityReport report;
};

Example2Result run_example2(double alpha, const PipelineOptions& options);

}  // namespace jumpepr
