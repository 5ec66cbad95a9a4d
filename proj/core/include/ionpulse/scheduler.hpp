#pragma once

// Dual-gate pulse selection: a fast pulse picker on the base-rate train in
// front of the fibre amplifier and a slow Pockels cell behind it. Gates are
// boolean waveforms sampled on the AWG grid.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ionpulse::scheduler {

struct HardwareConstraints {
  double base_rep_rate_ghz = 5.0;
  double awg_sample_rate_gs = 25.0;
  double pockels_rise_fall_ns = 7.0;
  double pockels_min_on_ns = 35.0;
  double pockels_max_rate_mhz = 10.0;
  double max_edfa_dark_ns = 20.0;
  double idle_rep_rate_ghz = 1.25;

  void validate() const;  // positive values; GridMismatch for non-integer ratios

  int samples_per_slot() const;
  int idle_stride() const;  // base slots per idle pulse
  std::int64_t ns_to_samples_ceil(double ns) const;
  std::int64_t ns_to_samples_floor(double ns) const;
  double sample_ns() const { return 1.0 / awg_sample_rate_gs; }
};

struct SequenceRequest {
  std::vector<std::int64_t> payload;  // strictly increasing base-rate slot indices
  double total_duration_ns = 0.0;
};

struct EmittedPulse {
  double time_ns = 0.0;
  std::int64_t slot = 0;
  bool payload = false;  // transmitted through an open Pockels window
  double relative_area = 1.0;
  double relative_phase = 0.0;
};

// Pockels gate high on [on, off); the cell is fully open on [on + rise, off)
// and closes over [off, off + rise).
struct PockelsWindow {
  std::int64_t on = 0;
  std::int64_t off = 0;
};

struct PulseSchedule {
  double sample_rate_gs = 25.0;
  double base_rep_rate_ghz = 5.0;
  std::vector<std::uint8_t> picker_gate;
  std::vector<std::uint8_t> pockels_gate;
  std::vector<EmittedPulse> emitted;

  std::int64_t samples() const { return static_cast<std::int64_t>(picker_gate.size()); }
  std::vector<PockelsWindow> pockels_windows() const;
};

PulseSchedule compile(const SequenceRequest& request, const HardwareConstraints& hw = {});

enum class ViolationKind {
  MaxDarkExceeded,
  MinOnViolated,
  PulseDuringTransition,
  RateExceeded,
  GridMismatch,
  IdleOffGrid,
  EmittedMismatch,
  ShortOffTime,
};

std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  double start_ns = 0.0;
  double end_ns = 0.0;
  std::string detail;
};

std::vector<Violation> validate(const PulseSchedule& schedule, const HardwareConstraints& hw = {});

// Relative area/phase of the pulses following a dark gap.
struct AnomalyEntry {
  double rep_rate_ghz = 0.0;
  double first_area = 1.0;   // area of the first pulse relative to the regular pulses
  double first_phase = 0.0;  // phase offset of the first pulse, rad
  double second_area = 1.0;  // area of the second pulse relative to the first
};

struct TransientModel {
  std::vector<AnomalyEntry> table;
  double memory_ns = 0.5;     // gaps at least this much longer than the period count as dark
  double ramp_fraction = 0.1;
  double ramp_ns = 2.0;

  static TransientModel defaults();
};

// Annotates the emitted pulses. Throws UnknownRate when rep_rate_ghz has no
// table entry.
PulseSchedule switch_on_transient(const PulseSchedule& schedule, double rep_rate_ghz,
                                  const TransientModel& model = TransientModel::defaults());

// Run-length encoded gates as JSON with a stable field order.
std::string export_waveform(const PulseSchedule& schedule);

// Rebuilds gates and emitted pulses from export_waveform output; `hw`
// supplies the Pockels rise time used to mark payload pulses.
PulseSchedule import_waveform(const std::string& text, const HardwareConstraints& hw = {});

}  // namespace ionpulse::scheduler
