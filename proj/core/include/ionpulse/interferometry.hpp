#pragma once

// Delayed-arm Michelson interferometry of successive pulses. Peak i is the
// overlap of pulses i and i+1; its area follows c sin(dphi_i + k dx) + offset
// where dx is the (random) arm-length change of the measurement.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace ionpulse::interferometry {

struct InterferogramSet {
  Eigen::MatrixXd areas;  // measurement x peak

  int measurements() const { return static_cast<int>(areas.rows()); }
  int peaks() const { return static_cast<int>(areas.cols()); }
  void validate() const;  // finite, >= 2 peaks, >= 8 measurements
};

struct SynthOptions {
  double amplitude = 1.0;
  double offset = 2.0;
};

// One peak per neighbouring pulse pair, dphi_i = phi_{i+1} - phi_i.
// Deterministic for a fixed seed.
InterferogramSet synth_interferogram(std::span<const double> pulse_phases,
                                     std::span<const double> delta_x_nm, double wavelength_nm,
                                     double noise_sigma, std::uint64_t seed,
                                     const SynthOptions& options = {});

// Uniform arm-length samples over one wavelength.
std::vector<double> random_delta_x(int count, double wavelength_nm, std::uint64_t seed);

struct EllipseFitResult {
  double dphi_abs = 0.0;  // [0, pi]
  double dphi_error = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double amplitude_x = 0.0;
  double amplitude_y = 0.0;
  double residual_rms = 0.0;  // orthogonal distance in standardised units
  bool degenerate = false;    // collinear within noise; dphi_abs is 0 or pi
  int peak = -1;              // set by pairwise_phases
};

// Fits x = cx sin(a) + x0, y = cy sin(a + dphi) + y0 with a unknown per sample,
// by orthogonal distance after standardising each axis. Needs >= 8 samples
// with spread on both axes (std::invalid_argument otherwise).
EllipseFitResult fit_ellipse(std::span<const double> x, std::span<const double> y);

// Every peak other than `reference_peak` (0-based) against the reference.
std::vector<EllipseFitResult> pairwise_phases(const InterferogramSet& set, int reference_peak = 3);

}  // namespace ionpulse::interferometry
