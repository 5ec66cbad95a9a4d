#pragma once

// Fits of the measurement protocols: many-pulse scans, single-pulse burst
// maps, the pi-pulse power scan and Ramsey contrast/phase series.

#include "ionpulse/experiments.hpp"
#include "ionpulse/least_squares.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ionpulse::estimation {

using quantum::AtomModel;

// One measured dark-state probability: `n` pulses at nominal detuning
// `detuning` (rad/ns), estimated from `shots` repetitions.
struct ScanPoint {
  double detuning = 0.0;
  int n = 1;
  double p_d = 0.0;
  int shots = 100;
};

struct ManyPulseFitOptions {
  AtomModel atom;
  double offset_bound = 1.0;  // |detuning_offset| limit, rad/ns
  int theta_starts = 8;
  int reweight_iterations = 2;  // refits with weights from the model prediction
  LmOptions lm;
};

// Shared theta and detuning offset over all points. Parameters: "theta",
// "detuning_offset". Model detuning is detuning + detuning_offset.
FitResult fit_many_pulse_scan(std::span<const ScanPoint> data, double rep_rate_ghz,
                              const ManyPulseFitOptions& options = {});

// Forward model for fit_many_pulse_scan.
Eigen::VectorXd many_pulse_model(std::span<const ScanPoint> data, double rep_rate_ghz,
                                 double theta, double detuning_offset, const AtomModel& atom);

struct SinglePulseFitOptions {
  AtomModel atom;
  int m = 20;                 // bursts per point
  double offset_bound = 1.0;  // rad/ns
  int theta_starts = 8;
  int phase_starts = 8;
  int first_area_starts = 8;  // used only when fitting theta_first
  int refine = 8;             // LM runs from the best screened starts
  int reweight_iterations = 2;
  LmOptions lm;
};

// Burst-accumulation fit over (detuning, n) points. Parameters: "theta",
// "dphi_first", "detuning_offset" and, when fit_first_area is set,
// "theta_first". Otherwise the first pulse has the same area as the rest.
FitResult fit_single_pulse_map(std::span<const ScanPoint> data, double rep_rate_ghz,
                               bool fit_first_area, const SinglePulseFitOptions& options = {});

// Forward model for fit_single_pulse_map; theta_first < 0 means "same as theta".
Eigen::VectorXd single_pulse_model(std::span<const ScanPoint> data, double rep_rate_ghz,
                                   double theta, double dphi_first, double detuning_offset,
                                   double theta_first, const AtomModel& atom, int m);

struct PiScanPoint {
  double p_light = 0.0;  // mW
  double p_p = 0.0;
  double sigma = 0.0;  // standard error of p_p; <= 0 means unit weight
  int shots = 0;       // > 0 enables reweighting from the model prediction
  int m = 0;
  double p52 = quantum::kBranchingD52;
};

// P_P and its delta-method standard error from a burst measurement with
// `successes` dark outcomes out of `shots`, each after m single-pulse bursts.
PiScanPoint pi_scan_point(double p_light, int successes, int shots, int m,
                          double p52 = quantum::kBranchingD52);

// Parameters: "p_max" in [0, 1.2], "omega" > 0 (sqrt(mW)). Points carrying
// shots and m are refitted `reweight_iterations` times with errors taken from
// the predicted P_D instead of the observed one.
FitResult fit_pi_scan(std::span<const PiScanPoint> data, const LmOptions& lm = {},
                      int reweight_iterations = 2);

// One Ramsey fringe: dark-state fractions at the analysis phases after n pulses.
struct RamseyFringe {
  int n = 0;
  std::vector<double> phases;
  std::vector<double> p3;
  int shots = 100;
};

struct RamseyFitOptions {
  AtomModel atom;
  double delta_initial = 0.0;
  double delta_prime_initial = 0.0;
  int theta_starts = 8;
  int detuning_starts = 8;  // per detuning axis in the screening grid
  int refine = 8;
  double noise_floor_sigmas = 3.0;  // phases with C < floor * sigma_C are excluded
  std::optional<quantum::FirstPulseAnomaly> first_pulse;
  LmOptions lm;
};

struct RamseyFitResult {
  FitResult fit;  // "theta", "delta", "delta_prime", "contrast_scale"
  std::vector<experiments::FringeFit> fringes;
  std::vector<int> excluded_phase_n;  // n whose phase fell below the noise floor
};

// Stage one fits a sinusoid per n; stage two fits scale * C(n) and Phi(n).
// Needs at least three distinct n.
RamseyFitResult fit_ramsey(std::span<const RamseyFringe> fringes, double rep_rate_ghz,
                           const RamseyFitOptions& options = {});

}  // namespace ionpulse::estimation
