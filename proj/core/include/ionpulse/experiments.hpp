#pragma once

// The four measurement protocols as procedures over quantum.hpp:
// many-pulse dark-state pumping, single-pulse bursts, the pi-pulse power scan
// and the Ramsey contrast/phase experiment.

#include "ionpulse/quantum.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace ionpulse::experiments {

using quantum::AtomModel;
using quantum::DensityMatrix3;
using quantum::TrainParams;

struct DarkStateScanSpec {
  double rep_rate_ghz = 1.25;
  std::vector<int> pulse_counts;
  std::vector<double> detunings;  // rad/ns
  int shots = 100;

  void validate() const;
};

struct BurstSpec {
  int n = 1;                 // pulses per burst
  int m = 20;                // burst repetitions
  double t_wait_ns = 20000;  // wait between bursts

  // t_wait must cover at least ten excited-state lifetimes.
  void validate(const AtomModel& atom) const;
};

struct RamseySpec {
  int n_pulses = 0;
  std::vector<double> analysis_phases;
  int shots = 100;

  // 41 phases evenly spaced over [0, 4pi].
  static std::vector<double> default_phases(int count = 41);
  void validate() const;
};

// P3 of simulate_train(|1><1|, params, atom, n).
double dark_state_probability(const TrainParams& params, const AtomModel& atom, int n);

// P_D for every (detuning, pulse count) pair. Rows follow `detunings`
// (replacing params.delta), columns follow `pulse_counts`.
Eigen::MatrixXd dark_state_scan(const TrainParams& params, const AtomModel& atom,
                                std::span<const double> detunings,
                                std::span<const int> pulse_counts);

// m bursts of n pulses, each followed by complete decay; population reaching
// |3> is kept across bursts. Every burst starts with the first-pulse anomaly.
double burst_accumulation(const TrainParams& params, const AtomModel& atom,
                          const BurstSpec& burst);

// burst_accumulation on a (detuning, n = 1..n_max) grid.
Eigen::MatrixXd burst_map(const TrainParams& params, const AtomModel& atom,
                          std::span<const double> detunings, int n_max, int m);

// P_P = (1/p52)(1 - (1 - P_D)^(1/m)); values above 1 are returned unclamped.
double invert_pp(double p_d, int m, double p52 = quantum::kBranchingD52);

// Forward model of invert_pp: P_D = 1 - (1 - p52 P_P)^m.
double accumulate_pp(double p_p, int m, double p52 = quantum::kBranchingD52);

// P_P = p_max sin^2(sqrt(p_light) / omega), p_light in mW, omega in sqrt(mW).
double pi_scan_model(double p_light, double p_max, double omega);

// State after the first Ramsey pulse, n pulses and complete decay.
DensityMatrix3 ramsey_state(const TrainParams& params, const AtomModel& atom, int n);

// Ideal pi/2 analysis pulse on 1<->3. The phase reference is chosen so that
// P3(phi) = (rho11 + rho33)/2 + (C/2) cos(phi - Phi) with C, Phi from
// contrast_and_phase; for the undisturbed superposition P3 = (1 + cos phi)/2.
double analysis_dark_probability(const DensityMatrix3& rho, double phi_analysis);

double ramsey_point(const TrainParams& params, const AtomModel& atom, int n,
                    double phi_analysis);

struct ContrastPhase {
  double contrast = 0.0;
  double phase = 0.0;  // (-pi, pi]
  bool degenerate = false;
};

// C = sqrt(Tr^2(sx rho) + Tr^2(sy rho)), Phi = arg[Tr(sx rho) + i Tr(sy rho)]
// with the Pauli matrices acting on the 1-3 subsystem. Phi is reported as 0
// and flagged degenerate when C < 1e-12.
ContrastPhase contrast_and_phase(const DensityMatrix3& rho);

// contrast_and_phase of ramsey_state for n = 0..n_max, built incrementally.
std::vector<ContrastPhase> ramsey_curve(const TrainParams& params, const AtomModel& atom,
                                        int n_max);

struct FringeFit {
  double offset = 0.0;
  double contrast = 0.0;  // twice the cosine amplitude
  double phase = 0.0;
  double rms = 0.0;
  double contrast_error = 0.0;
  double phase_error = 0.0;
  bool degenerate = false;
};

// Weighted linear least-squares fit of offset + (C/2) cos(phi - Phi). Empty
// `variances` means unit weights with errors scaled by the residual rms.
FringeFit fit_fringe(std::span<const double> phases, std::span<const double> probabilities,
                     std::span<const double> variances = {});

// Variance of an observed fraction: max(p(1 - p), 1/(4 shots)) / shots.
double binomial_variance(double p_hat, int shots);

// Binomial number of successes out of `shots`, deterministic per seed.
int synth_shots(double true_prob, int shots, std::uint64_t seed);

}  // namespace ionpulse::experiments
