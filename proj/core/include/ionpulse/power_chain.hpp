#pragma once

// Two cascaded SHG stages (1572 -> 786 -> 393 nm) in the low-depletion limit:
// each stage converts with an efficiency proportional to its input peak power,
// i.e. to average power / repetition rate.

#include <vector>

namespace ionpulse::scheduler {

// Measured efficiencies of both stages at one fundamental power and rate.
struct CalibrationPoint {
  double rep_rate_ghz = 5.0;
  double p_fundamental_w = 2.8;
  double eff1 = 0.28;
  double eff2 = 0.032;
};

struct PowerChain {
  double p_fundamental_w = 2.8;
  double rep_rate_ghz = 5.0;
  // The entry nearest in log(rate) is used as the reference.
  std::vector<CalibrationPoint> calibration = default_calibration();
  double extinction_in_db = 30.0;
  double extinction_measured_db = 56.0;

  static std::vector<CalibrationPoint> default_calibration();
  void validate() const;
};

struct PowerChainOutput {
  double p_786_w = 0.0;
  double p_393_w = 0.0;
  double eff1 = 0.0;
  double eff2 = 0.0;
  double extinction_out_db = 0.0;       // model: doubled once per squaring stage
  double extinction_measured_db = 0.0;  // reported alongside, not imposed
};

// Throws NonPhysical for negative powers or efficiencies outside (0, 1).
PowerChainOutput power_chain_output(const PowerChain& chain);

}  // namespace ionpulse::scheduler
