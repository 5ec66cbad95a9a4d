#include "ionpulse/errors.hpp"
#include "ionpulse/scheduler.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace {

using namespace ionpulse::scheduler;

constexpr double kPi = 3.14159265358979323846;

SequenceRequest consecutive(std::int64_t first, int count, double total_ns) {
  SequenceRequest r;
  for (int i = 0; i < count; ++i) r.payload.push_back(first + i);
  r.total_duration_ns = total_ns;
  return r;
}

bool has(const std::vector<Violation>& report, ViolationKind kind) {
  return std::any_of(report.begin(), report.end(), [&](const Violation& v) { return v.kind == kind; });
}

// Longest time between the starts of consecutive picked slots, in ns.
double longest_dark(const PulseSchedule& s) {
  const std::int64_t sps = 5;
  std::int64_t prev = 0, worst = 0;
  for (std::int64_t i = 0; i < s.samples(); i += sps)
    if (s.picker_gate[i]) {
      worst = std::max(worst, i - prev);
      prev = i;
    }
  worst = std::max(worst, s.samples() - prev);
  return worst / s.sample_rate_gs;
}

TEST(Hardware, DerivedGrid) {
  const HardwareConstraints hw;
  EXPECT_EQ(hw.samples_per_slot(), 5);
  EXPECT_EQ(hw.idle_stride(), 4);
  EXPECT_EQ(hw.ns_to_samples_ceil(7.0), 175);
  EXPECT_EQ(hw.ns_to_samples_ceil(35.0), 875);
  EXPECT_EQ(hw.ns_to_samples_floor(20.0), 500);
}

TEST(Hardware, GridMismatch) {
  HardwareConstraints hw;
  hw.awg_sample_rate_gs = 24.0;
  EXPECT_THROW(hw.validate(), ionpulse::GridMismatch);
  hw = {};
  hw.idle_rep_rate_ghz = 1.5;
  EXPECT_THROW(hw.validate(), ionpulse::GridMismatch);
  EXPECT_THROW(compile(consecutive(100, 20, 100.0), hw), ionpulse::GridMismatch);
  EXPECT_THROW(compile(consecutive(100, 20, 100.01)), ionpulse::GridMismatch);
}

TEST(Compile, EmptyPayloadGivesIdleTrainOnly) {
  SequenceRequest r;
  r.total_duration_ns = 100.0;
  const auto s = compile(r);
  EXPECT_TRUE(std::none_of(s.pockels_gate.begin(), s.pockels_gate.end(), [](auto v) { return v != 0; }));
  ASSERT_EQ(s.emitted.size(), 125u);
  for (std::size_t i = 0; i < s.emitted.size(); ++i) {
    EXPECT_EQ(s.emitted[i].slot, static_cast<std::int64_t>(4 * i));
    EXPECT_FALSE(s.emitted[i].payload);
  }
  EXPECT_TRUE(validate(s).empty());
}

TEST(Compile, ShortPayloadIsInfeasibleBecauseOfDarkTime) {
  // 4 slots need a 35 ns window; with idle pulses blocked over the whole
  // window the dark time on either side exceeds 20 ns.
  EXPECT_THROW(compile(consecutive(200, 4, 100.0)), ionpulse::InfeasibleWindow);
}

TEST(Compile, ShortPayloadWithRelaxedDarkLimit) {
  HardwareConstraints hw;
  hw.max_edfa_dark_ns = 25.0;
  const auto s = compile(consecutive(200, 4, 100.0), hw);
  const auto windows = s.pockels_windows();
  ASSERT_EQ(windows.size(), 1u);
  EXPECT_EQ(windows[0].off - windows[0].on, 875);
  const std::int64_t payload_start = 200 * 5, payload_end = 204 * 5;
  const std::int64_t before = payload_start - windows[0].on;
  const std::int64_t after = windows[0].off + 175 - payload_end;
  EXPECT_LE(std::abs(before - after), 5);
  EXPECT_TRUE(validate(s, hw).empty());
  EXPECT_LE(longest_dark(s), 25.0);
}

TEST(Compile, PayloadInsideFullyOpenWindow) {
  const auto s = compile(consecutive(200, 20, 100.0));
  const auto windows = s.pockels_windows();
  ASSERT_EQ(windows.size(), 1u);
  EXPECT_GE(windows[0].off - windows[0].on, 875);
  int payload = 0;
  for (const auto& p : s.emitted) {
    if (!p.payload) continue;
    ++payload;
    EXPECT_GE(p.slot * 5, windows[0].on + 175);
    EXPECT_LE((p.slot + 1) * 5, windows[0].off);
  }
  EXPECT_EQ(payload, 20);
  EXPECT_LE(longest_dark(s), 20.0);
  EXPECT_TRUE(validate(s).empty());
}

TEST(Compile, TwoPayloadsFiftyNanosecondsApart) {
  SequenceRequest r = consecutive(100, 20, 400.0);
  for (int i = 0; i < 20; ++i) r.payload.push_back(100 + 250 + i);
  const auto s = compile(r);
  const auto windows = s.pockels_windows();
  ASSERT_EQ(windows.size(), 2u);
  EXPECT_LE(1e3 * windows.size() / r.total_duration_ns, 10.0);
  EXPECT_TRUE(validate(s).empty());
}

TEST(Compile, RateExceeded) {
  SequenceRequest r = consecutive(100, 20, 150.0);
  for (int i = 0; i < 20; ++i) r.payload.push_back(100 + 250 + i);
  EXPECT_THROW(compile(r), ionpulse::RateExceeded);
}

TEST(Compile, RejectsMalformedRequests) {
  SequenceRequest r;
  r.payload = {5, 5};
  r.total_duration_ns = 100.0;
  EXPECT_THROW(compile(r), std::invalid_argument);
  r.payload = {1000};
  EXPECT_THROW(compile(r), std::invalid_argument);
  r.payload = {2};
  EXPECT_THROW(compile(r), ionpulse::InfeasibleWindow);
}

TEST(Compile, RandomFeasibleRequestsValidate) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    SequenceRequest r;
    std::int64_t slot = 250 + static_cast<std::int64_t>(rng() % 50);
    const int bursts = 1 + static_cast<int>(rng() % 3);
    for (int b = 0; b < bursts; ++b) {
      const int len = 20 + static_cast<int>(rng() % 40);
      for (int i = 0; i < len; ++i) r.payload.push_back(slot + i);
      slot += len + 500 + static_cast<std::int64_t>(rng() % 200);
    }
    r.total_duration_ns = (slot + 250) * 0.2;
    const auto s = compile(r);
    EXPECT_TRUE(validate(s).empty());
    EXPECT_LE(longest_dark(s), 20.0);
  }
}

class Perturbed : public ::testing::Test {
 protected:
  PulseSchedule base = compile(consecutive(250, 20, 200.0));
};

TEST_F(Perturbed, CompiledScheduleIsClean) { EXPECT_TRUE(validate(base).empty()); }

TEST_F(Perturbed, LongDarkGap) {
  auto s = base;
  std::fill(s.picker_gate.begin(), s.picker_gate.begin() + 25 * 25, 0);
  s = import_waveform(export_waveform(s));
  const auto report = validate(s);
  ASSERT_TRUE(has(report, ViolationKind::MaxDarkExceeded));
  EXPECT_TRUE(has(report, ViolationKind::IdleOffGrid));
}

TEST_F(Perturbed, ShortPockelsWindow) {
  auto s = base;
  const auto w = s.pockels_windows().front();
  std::fill(s.pockels_gate.begin() + w.on, s.pockels_gate.begin() + w.on + 125, 0);
  const auto report = validate(import_waveform(export_waveform(s)));
  EXPECT_TRUE(has(report, ViolationKind::MinOnViolated));
}

TEST_F(Perturbed, PulseDuringRise) {
  auto s = base;
  const auto w = s.pockels_windows().front();
  const std::int64_t slot = w.on / 5 + 3;
  std::fill(s.picker_gate.begin() + slot * 5, s.picker_gate.begin() + slot * 5 + 5, 1);
  EXPECT_TRUE(has(validate(import_waveform(export_waveform(s))), ViolationKind::PulseDuringTransition));
}

TEST_F(Perturbed, EdgeOffSlotBoundary) {
  auto s = base;
  s.picker_gate[2 * 5 + 1] = 1;
  EXPECT_TRUE(has(validate(s), ViolationKind::GridMismatch));
}

TEST_F(Perturbed, IdlePulseOffGrid) {
  auto s = base;
  std::fill(s.picker_gate.begin() + 5, s.picker_gate.begin() + 10, 1);
  EXPECT_TRUE(has(validate(import_waveform(export_waveform(s))), ViolationKind::IdleOffGrid));
}

TEST_F(Perturbed, EmittedListOutOfSync) {
  auto s = base;
  s.emitted.pop_back();
  EXPECT_TRUE(has(validate(s), ViolationKind::EmittedMismatch));
}

TEST_F(Perturbed, TooManyWindows) {
  HardwareConstraints hw;
  hw.pockels_max_rate_mhz = 4.0;
  EXPECT_TRUE(has(validate(base, hw), ViolationKind::RateExceeded));
}

TEST_F(Perturbed, WindowTouchingSequenceEnd) {
  auto s = base;
  std::fill(s.pockels_gate.end() - 900, s.pockels_gate.end(), 1);
  EXPECT_TRUE(has(validate(s), ViolationKind::ShortOffTime));
}

TEST_F(Perturbed, ViolationsNameTheirWindow) {
  auto s = base;
  std::fill(s.picker_gate.begin(), s.picker_gate.begin() + 25 * 25, 0);
  for (const auto& v : validate(import_waveform(export_waveform(s))))
    if (v.kind == ViolationKind::MaxDarkExceeded) {
      EXPECT_EQ(v.start_ns, 0.0);
      EXPECT_GT(v.end_ns - v.start_ns, 20.0);
      EXPECT_FALSE(v.detail.empty());
    }
}

TEST(Waveform, ExportImportRoundTrip) {
  const auto s = compile(consecutive(250, 20, 200.0));
  const std::string text = export_waveform(s);
  const auto back = import_waveform(text);
  EXPECT_EQ(back.picker_gate, s.picker_gate);
  EXPECT_EQ(back.pockels_gate, s.pockels_gate);
  ASSERT_EQ(back.emitted.size(), s.emitted.size());
  for (std::size_t i = 0; i < s.emitted.size(); ++i) {
    EXPECT_EQ(back.emitted[i].slot, s.emitted[i].slot);
    EXPECT_EQ(back.emitted[i].payload, s.emitted[i].payload);
    EXPECT_EQ(back.emitted[i].time_ns, s.emitted[i].time_ns);
  }
  EXPECT_EQ(export_waveform(back), text);
  EXPECT_TRUE(validate(back).empty());
}

TEST(Waveform, FieldOrderIsStable) {
  const std::string text = export_waveform(compile(consecutive(250, 20, 200.0)));
  EXPECT_LT(text.find("\"header\""), text.find("\"channels\""));
  EXPECT_LT(text.find("\"sample_rate_gs\""), text.find("\"base_rep_rate_ghz\""));
  EXPECT_LT(text.find("\"start_sample\""), text.find("\"length\""));
  EXPECT_LT(text.find("\"length\""), text.find("\"level\""));
}

TEST(Waveform, GoldenFile) {
  std::ifstream in(std::string(IONPULSE_GOLDEN_DIR) + "/waveform_payload20.json", std::ios::binary);
  ASSERT_TRUE(in) << "missing golden file";
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(export_waveform(compile(consecutive(250, 20, 200.0))), golden.str());
}

TEST(Waveform, RejectsGappedSegments) {
  const std::string text =
      R"({"header":{"sample_rate_gs":25,"base_rep_rate_ghz":5},"channels":{"picker":[{"start_sample":0,"length":5,"level":1},{"start_sample":6,"length":4,"level":0}],"pockels":[]}})";
  EXPECT_THROW(import_waveform(text), std::invalid_argument);
}

// Emitted list of a hand-built schedule: a settled train, a dark gap, then
// `count` pulses at the given rate.
PulseSchedule after_gap(double rate_ghz, int count, double gap_ns = 12.0) {
  PulseSchedule s;
  const double period = 1.0 / rate_ghz;
  double t = 0.0;
  for (int i = 0; i < 5; ++i, t += period) s.emitted.push_back({t, 0, false});
  t += gap_ns;
  for (int i = 0; i < count; ++i, t += period) s.emitted.push_back({t, 0, true});
  return s;
}

TEST(Transient, FiveGigahertzFirstPulseIsThreeTimesStronger) {
  const auto s = switch_on_transient(after_gap(5.0, 5), 5.0);
  EXPECT_DOUBLE_EQ(s.emitted[5].relative_area, 3.0);
  EXPECT_DOUBLE_EQ(s.emitted[6].relative_area, 1.0);
  EXPECT_NEAR(s.emitted[5].relative_area / s.emitted[6].relative_area, 3.0, 1e-12);
  EXPECT_NEAR(s.emitted[5].relative_phase, 1.282 * kPi, 1e-12);
  for (int i = 6; i < 10; ++i) EXPECT_EQ(s.emitted[i].relative_phase, 0.0);
}

TEST(Transient, SecondPulseDropAtTwoPointFiveGigahertz) {
  const auto s = switch_on_transient(after_gap(2.5, 4), 2.5);
  EXPECT_DOUBLE_EQ(s.emitted[5].relative_area, 1.0);
  EXPECT_NEAR(s.emitted[6].relative_area, 0.9, 1e-12);
  EXPECT_NEAR(s.emitted[5].relative_phase, 0.361 * kPi, 1e-12);
}

TEST(Transient, LowRatePhaseOffsetAndRamp) {
  const auto s = switch_on_transient(after_gap(1.25, 6), 1.25);
  EXPECT_LE(s.emitted[5].relative_phase, 0.051 * kPi + 1e-12);
  for (int k = 0; k < 6; ++k) {
    const double dt = 0.8 * k;
    EXPECT_NEAR(s.emitted[5 + k].relative_area, 1.0 + 0.1 * std::min(dt / 2.0, 1.0), 1e-12);
  }
}

TEST(Transient, ContinuousTrainHasNoAnomaly) {
  const auto s = switch_on_transient(after_gap(5.0, 10, 0.0), 5.0);
  for (const auto& p : s.emitted) {
    EXPECT_EQ(p.relative_area, 1.0);
    EXPECT_EQ(p.relative_phase, 0.0);
  }
}

TEST(Transient, ShortGapBelowMemoryIsIgnored) {
  const auto s = switch_on_transient(after_gap(5.0, 4, 0.4), 5.0);
  for (const auto& p : s.emitted) EXPECT_EQ(p.relative_area, 1.0);
  const auto t = switch_on_transient(after_gap(5.0, 4, 0.5), 5.0);
  EXPECT_EQ(t.emitted[5].relative_area, 3.0);
}

TEST(Transient, UnknownRate) {
  EXPECT_THROW(switch_on_transient(after_gap(3.0, 4), 3.0), ionpulse::UnknownRate);
  TransientModel custom;
  custom.table = {{3.0, 2.0, 0.5, 1.0}};
  EXPECT_EQ(switch_on_transient(after_gap(3.0, 4), 3.0, custom).emitted[5].relative_area, 2.0);
}

TEST(Transient, DefaultTableCoversIndependentRates) {
  const auto table = TransientModel::defaults().table;
  ASSERT_EQ(table.size(), 4u);
  for (double rate : {5.0, 2.5, 5.0 / 3.0, 1.25})
    EXPECT_NO_THROW(switch_on_transient(after_gap(rate, 3), rate));
}

}  // namespace
