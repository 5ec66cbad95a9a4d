#pragma once

// Run configuration. A config is one JSON object: `command`, optional `seed`,
// `output_dir` and `atom`, plus the keys of the chosen command at top level.
// Physical quantities carry their unit in the key name (rep_rate_ghz,
// t_wait_us, ...); angles are given in units of pi (theta_pi).

#include "ionpulse/power_chain.hpp"
#include "ionpulse/quantum.hpp"
#include "ionpulse/scheduler.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ionpulse::io {

enum class Command { Simulate, Scan, Burst, Ramsey, Fit, Ellipse, Schedule, Power };

std::string to_string(Command command);
Command parse_command(const std::string& name);  // SchemaError for unknown names

struct TrainConfig {
  double theta_pi = 0.345;
  double rep_rate_ghz = 1.25;
  double delta_rad_per_ns = 0.0;
  double delta_prime_rad_per_ns = 0.0;
  std::optional<double> first_theta_pi;  // first_pulse.theta_pi
  std::optional<double> first_phase_pi;  // first_pulse.phase_pi

  quantum::TrainParams params() const;
};

struct DetuningGrid {
  double min_rad_per_ns = 0.0;
  double max_rad_per_ns = 0.0;
  int points = 41;

  std::vector<double> values() const;
};

struct SimulateParams {
  TrainConfig train;
  int n = 500;
};

struct ScanParams {
  TrainConfig train;
  std::vector<int> pulse_counts{500, 2000, 1000, 5000};
  DetuningGrid detuning;
  int shots = 0;  // 0 writes the model probabilities without sampling
};

struct BurstParams {
  TrainConfig train;
  int n_max = 12;
  int m = 20;
  double t_wait_us = 20.0;
  DetuningGrid detuning;
  int shots = 0;
};

struct RamseyParams {
  TrainConfig train;
  int n_max = 40;
  int phase_points = 41;
  int shots = 0;
};

enum class FitProtocol { ManyPulse, SinglePulse, PiScan, Ramsey };

struct FitParams {
  FitProtocol protocol = FitProtocol::ManyPulse;
  std::string data_file;
  double rep_rate_ghz = 1.25;
  bool fit_first_area = false;  // single_pulse only
  int m = 20;                   // single_pulse and pi_scan
  double offset_bound_rad_per_ns = 1.0;
  std::optional<double> first_theta_pi;  // ramsey only
  std::optional<double> first_phase_pi;
};

struct EllipseParams {
  std::string data_file;  // columns area_1 .. area_k; synthetic data when empty
  std::vector<double> phases_pi{0.0, 0.74, 0.86, 0.86, 0.86};
  int samples = 100;
  double noise_sigma = 0.02;
  double wavelength_nm = 786.0;
  int reference_peak = 4;  // 1-based
};

struct ScheduleParams {
  std::vector<std::int64_t> payload_slots;
  double total_duration_ns = 0.0;
  std::string waveform_file;  // validate an exported waveform instead of compiling
  std::optional<double> transient_rate_ghz;
  scheduler::HardwareConstraints hardware;
};

struct PowerParams {
  std::vector<double> p_fundamental_w{2.8};
  scheduler::PowerChain chain;  // p_fundamental_w of the chain is overwritten per point
};

using CommandParams = std::variant<SimulateParams, ScanParams, BurstParams, RamseyParams,
                                   FitParams, EllipseParams, ScheduleParams, PowerParams>;

struct RunConfig {
  Command command = Command::Simulate;
  quantum::AtomModel atom;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  CommandParams params;
  std::string canonical;     // normalised JSON of the input document
  std::string config_hash;   // 16 hex digits, FNV-1a 64 of `canonical`
};

// Throws SchemaError (with the offending key path), UnitError for
// quantities without a recognised unit suffix and RangeError for values
// outside their domain. `command`, when given, must agree with the document
// or stands in for a missing `command` key.
RunConfig parse_config(const std::string& text, std::optional<Command> command = std::nullopt);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace ionpulse::io
