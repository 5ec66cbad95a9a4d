#include "ionpulse/scheduler.hpp"

#include "ionpulse/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ionpulse::scheduler {

namespace {

constexpr double kGridTol = 1e-9;

// Integer n with |x - n| <= tol * max(1, |x|), or nullopt.
std::optional<std::int64_t> as_integer(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) > kGridTol * std::max(1.0, std::abs(x))) return std::nullopt;
  return static_cast<std::int64_t>(r);
}

std::string fmt_ns(double ns) {
  std::ostringstream os;
  os << ns << " ns";
  return os.str();
}

struct Derived {
  int sps = 5;
  int stride = 4;
  std::int64_t rise = 175;
  std::int64_t min_on = 875;
  std::int64_t max_dark = 500;
  double sample_ns = 0.04;
};

Derived derive(const HardwareConstraints& hw) {
  hw.validate();
  Derived d;
  d.sps = hw.samples_per_slot();
  d.stride = hw.idle_stride();
  d.rise = hw.ns_to_samples_ceil(hw.pockels_rise_fall_ns);
  d.min_on = hw.ns_to_samples_ceil(hw.pockels_min_on_ns);
  d.max_dark = hw.ns_to_samples_floor(hw.max_edfa_dark_ns);
  d.sample_ns = hw.sample_ns();
  return d;
}

struct Cluster {
  std::int64_t first_slot = 0;
  std::int64_t last_slot = 0;
  PockelsWindow window;
};

bool intersects(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
  return a0 < b1 && b0 < a1;
}

// Symmetric window around the payload, shifted inside [0, total) if needed.
PockelsWindow place_window(const Cluster& c, const Derived& d, std::int64_t total) {
  const std::int64_t ps = c.first_slot * d.sps;
  const std::int64_t pe = (c.last_slot + 1) * d.sps;
  const std::int64_t needed = std::max(d.min_on, (pe - ps) + d.rise);
  const std::int64_t extra = needed - (pe - ps) - d.rise;
  std::int64_t pre = (extra + 1) / 2;
  std::int64_t post = extra - pre;
  if (ps - d.rise - pre < 0) {
    const std::int64_t shift = std::min(pre, -(ps - d.rise - pre));
    pre -= shift;
    post += shift;
  }
  if (pe + post + d.rise > total) {
    const std::int64_t shift = std::min(post, pe + post + d.rise - total);
    post -= shift;
    pre += shift;
  }
  PockelsWindow w{ps - d.rise - pre, pe + post};
  if (w.on < 0 || w.off + d.rise > total)
    throw InfeasibleWindow("Pockels window for payload slots " + std::to_string(c.first_slot) + ".." +
                           std::to_string(c.last_slot) + " does not fit inside the sequence");
  return w;
}

std::vector<PockelsWindow> runs_of(const std::vector<std::uint8_t>& gate) {
  std::vector<PockelsWindow> out;
  const std::int64_t n = static_cast<std::int64_t>(gate.size());
  std::int64_t i = 0;
  while (i < n) {
    if (!gate[i]) {
      ++i;
      continue;
    }
    std::int64_t j = i;
    while (j < n && gate[j]) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

bool inside_open(std::int64_t a, std::int64_t b, const std::vector<PockelsWindow>& windows,
                 std::int64_t rise) {
  for (const auto& w : windows)
    if (a >= w.on + rise && b <= w.off) return true;
  return false;
}

std::vector<EmittedPulse> emitted_from_gates(const std::vector<std::uint8_t>& picker,
                                             const std::vector<PockelsWindow>& windows, int sps,
                                             std::int64_t rise, double base_rate) {
  std::vector<EmittedPulse> out;
  const std::int64_t slots = static_cast<std::int64_t>(picker.size()) / sps;
  for (std::int64_t s = 0; s < slots; ++s) {
    if (!picker[s * sps]) continue;
    EmittedPulse p;
    p.slot = s;
    p.time_ns = static_cast<double>(s) / base_rate;
    p.payload = inside_open(s * sps, (s + 1) * sps, windows, rise);
    out.push_back(p);
  }
  return out;
}

}  // namespace

void HardwareConstraints::validate() const {
  for (double v : {base_rep_rate_ghz, awg_sample_rate_gs, pockels_rise_fall_ns, pockels_min_on_ns,
                   pockels_max_rate_mhz, max_edfa_dark_ns, idle_rep_rate_ghz})
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("hardware constraints must be positive and finite");
  const auto sps = as_integer(awg_sample_rate_gs / base_rep_rate_ghz);
  if (!sps || *sps < 1)
    throw GridMismatch("AWG sample period does not divide the base pulse period");
  const auto stride = as_integer(base_rep_rate_ghz / idle_rep_rate_ghz);
  if (!stride || *stride < 1) throw GridMismatch("idle rate is not a divisor of the base rate");
}

int HardwareConstraints::samples_per_slot() const {
  return static_cast<int>(std::llround(awg_sample_rate_gs / base_rep_rate_ghz));
}

int HardwareConstraints::idle_stride() const {
  return static_cast<int>(std::llround(base_rep_rate_ghz / idle_rep_rate_ghz));
}

std::int64_t HardwareConstraints::ns_to_samples_ceil(double ns) const {
  const double x = ns * awg_sample_rate_gs;
  if (const auto n = as_integer(x)) return *n;
  return static_cast<std::int64_t>(std::ceil(x));
}

std::int64_t HardwareConstraints::ns_to_samples_floor(double ns) const {
  const double x = ns * awg_sample_rate_gs;
  if (const auto n = as_integer(x)) return *n;
  return static_cast<std::int64_t>(std::floor(x));
}

std::vector<PockelsWindow> PulseSchedule::pockels_windows() const { return runs_of(pockels_gate); }

PulseSchedule compile(const SequenceRequest& request, const HardwareConstraints& hw) {
  const Derived d = derive(hw);
  if (!(request.total_duration_ns > 0.0)) throw std::invalid_argument("total_duration must be positive");
  const auto total_opt = as_integer(request.total_duration_ns * hw.awg_sample_rate_gs);
  if (!total_opt) throw GridMismatch("total_duration is not a whole number of AWG samples");
  const std::int64_t total = *total_opt;
  const std::int64_t slots = total / d.sps;

  for (std::size_t i = 0; i < request.payload.size(); ++i) {
    const auto s = request.payload[i];
    if (s < 0) throw std::invalid_argument("payload slots must be >= 0");
    if (i > 0 && s <= request.payload[i - 1])
      throw std::invalid_argument("payload slots must be strictly increasing");
    if (s >= slots) throw std::invalid_argument("payload does not fit in total_duration");
  }

  // Group payload pulses whose gaps the picker alone can bridge.
  std::vector<Cluster> clusters;
  for (auto s : request.payload) {
    if (!clusters.empty() && (s - clusters.back().last_slot) * d.sps <= d.max_dark) {
      clusters.back().last_slot = s;
    } else {
      clusters.push_back({s, s, {}});
    }
  }
  for (auto& c : clusters) c.window = place_window(c, d, total);

  // Blocked regions [on, off + rise) may not overlap; merge until they don't.
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i + 1 < clusters.size(); ++i) {
      if (clusters[i + 1].window.on < clusters[i].window.off + d.rise) {
        clusters[i].last_slot = clusters[i + 1].last_slot;
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        clusters[i].window = place_window(clusters[i], d, total);
        merged = true;
        break;
      }
    }
  }

  PulseSchedule out;
  out.sample_rate_gs = hw.awg_sample_rate_gs;
  out.base_rep_rate_ghz = hw.base_rep_rate_ghz;
  out.picker_gate.assign(static_cast<std::size_t>(total), 0);
  out.pockels_gate.assign(static_cast<std::size_t>(total), 0);

  std::vector<PockelsWindow> windows;
  for (const auto& c : clusters) {
    windows.push_back(c.window);
    std::fill(out.pockels_gate.begin() + c.window.on, out.pockels_gate.begin() + c.window.off, 1);
  }

  std::size_t next_payload = 0;
  std::int64_t prev_start = 0;
  for (std::int64_t s = 0; s < slots; ++s) {
    const std::int64_t a = s * d.sps, b = a + d.sps;
    bool open = false;
    if (next_payload < request.payload.size() && request.payload[next_payload] == s) {
      open = true;
      ++next_payload;
    } else if (s % d.stride == 0) {
      open = std::none_of(windows.begin(), windows.end(), [&](const PockelsWindow& w) {
        return intersects(a, b, w.on, w.off + d.rise);
      });
    }
    if (!open) continue;
    if (a - prev_start > d.max_dark)
      throw InfeasibleWindow("EDFA dark time of " + fmt_ns((a - prev_start) * d.sample_ns) +
                             " before " + fmt_ns(a * d.sample_ns) + " exceeds the limit");
    prev_start = a;
    std::fill(out.picker_gate.begin() + a, out.picker_gate.begin() + b, 1);
  }
  if (total - prev_start > d.max_dark)
    throw InfeasibleWindow("EDFA dark time of " + fmt_ns((total - prev_start) * d.sample_ns) +
                           " at the end of the sequence exceeds the limit");

  const double rate_mhz = 1e3 * static_cast<double>(windows.size()) / request.total_duration_ns;
  if (rate_mhz > hw.pockels_max_rate_mhz)
    throw RateExceeded("Pockels windows at " + std::to_string(rate_mhz) + " MHz exceed the limit");

  out.emitted = emitted_from_gates(out.picker_gate, windows, d.sps, d.rise, hw.base_rep_rate_ghz);

  const auto report = validate(out, hw);
  if (!report.empty())
    throw std::logic_error("compiled schedule fails validation: " + to_string(report.front().kind));
  return out;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::MaxDarkExceeded: return "MaxDarkExceeded";
    case ViolationKind::MinOnViolated: return "MinOnViolated";
    case ViolationKind::PulseDuringTransition: return "PulseDuringTransition";
    case ViolationKind::RateExceeded: return "RateExceeded";
    case ViolationKind::GridMismatch: return "GridMismatch";
    case ViolationKind::IdleOffGrid: return "IdleOffGrid";
    case ViolationKind::EmittedMismatch: return "EmittedMismatch";
    case ViolationKind::ShortOffTime: return "ShortOffTime";
  }
  return "Unknown";
}

std::vector<Violation> validate(const PulseSchedule& schedule, const HardwareConstraints& hw) {
  std::vector<Violation> report;
  auto add = [&](ViolationKind kind, double t0, double t1, std::string detail) {
    report.push_back({kind, t0, t1, std::move(detail)});
  };

  Derived d;
  try {
    d = derive(hw);
  } catch (const GridMismatch& e) {
    add(ViolationKind::GridMismatch, 0.0, 0.0, e.what());
    return report;
  }
  const std::int64_t total = schedule.samples();
  const double duration = total * d.sample_ns;
  if (std::abs(schedule.sample_rate_gs - hw.awg_sample_rate_gs) > kGridTol ||
      std::abs(schedule.base_rep_rate_ghz - hw.base_rep_rate_ghz) > kGridTol) {
    add(ViolationKind::GridMismatch, 0.0, duration, "schedule rates differ from the hardware grid");
    return report;
  }
  if (schedule.pockels_gate.size() != schedule.picker_gate.size()) {
    add(ViolationKind::GridMismatch, 0.0, duration, "gate lengths differ");
    return report;
  }
  for (std::int64_t i = 0; i < total; ++i) {
    if (schedule.picker_gate[i] > 1 || schedule.pockels_gate[i] > 1) {
      add(ViolationKind::GridMismatch, i * d.sample_ns, (i + 1) * d.sample_ns, "gate level is not 0 or 1");
      return report;
    }
  }

  const std::int64_t slots = total / d.sps;
  for (std::int64_t s = 0; s * d.sps < total; ++s) {
    const std::int64_t a = s * d.sps, b = std::min(a + d.sps, total);
    const bool partial = b - a < d.sps;
    bool mixed = false;
    for (std::int64_t i = a; i < b; ++i) mixed |= schedule.picker_gate[i] != schedule.picker_gate[a];
    if (mixed || (partial && schedule.picker_gate[a]))
      add(ViolationKind::GridMismatch, a * d.sample_ns, b * d.sample_ns,
          "picker edge is not on a pulse-slot boundary");
  }

  const auto windows = runs_of(schedule.pockels_gate);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (w.off - w.on < d.min_on)
      add(ViolationKind::MinOnViolated, w.on * d.sample_ns, w.off * d.sample_ns,
          "Pockels on-time " + fmt_ns((w.off - w.on) * d.sample_ns) + " below minimum");
    const std::int64_t next_on = i + 1 < windows.size() ? windows[i + 1].on : total;
    if (next_on - w.off < d.rise)
      add(ViolationKind::ShortOffTime, w.off * d.sample_ns, next_on * d.sample_ns,
          "Pockels cell cannot finish closing before the next edge or the sequence end");
  }

  const double rate_mhz = duration > 0.0 ? 1e3 * static_cast<double>(windows.size()) / duration : 0.0;
  if (rate_mhz > hw.pockels_max_rate_mhz)
    add(ViolationKind::RateExceeded, 0.0, duration,
        "Pockels window rate " + std::to_string(rate_mhz) + " MHz");

  std::int64_t prev_start = 0;
  for (std::int64_t s = 0; s < slots; ++s) {
    const std::int64_t a = s * d.sps, b = a + d.sps;
    const bool open = schedule.picker_gate[a] != 0;
    bool in_transition = false, in_blocked = false;
    for (const auto& w : windows) {
      in_transition |= intersects(a, b, w.on, w.on + d.rise) || intersects(a, b, w.off, w.off + d.rise);
      in_blocked |= intersects(a, b, w.on, w.off + d.rise);
    }
    if (open) {
      if (in_transition) {
        add(ViolationKind::PulseDuringTransition, a * d.sample_ns, b * d.sample_ns,
            "picked pulse while the Pockels cell is switching");
      } else if (!in_blocked && s % d.stride != 0) {
        add(ViolationKind::IdleOffGrid, a * d.sample_ns, b * d.sample_ns,
            "picked pulse outside a window is not on the idle grid");
      }
      if (a - prev_start > d.max_dark)
        add(ViolationKind::MaxDarkExceeded, prev_start * d.sample_ns, a * d.sample_ns,
            "EDFA dark time " + fmt_ns((a - prev_start) * d.sample_ns));
      prev_start = a;
    } else if (!in_blocked && s % d.stride == 0) {
      add(ViolationKind::IdleOffGrid, a * d.sample_ns, b * d.sample_ns, "idle pulse not picked");
    }
  }
  if (total - prev_start > d.max_dark)
    add(ViolationKind::MaxDarkExceeded, prev_start * d.sample_ns, duration,
        "EDFA dark time " + fmt_ns((total - prev_start) * d.sample_ns));

  const auto expected =
      emitted_from_gates(schedule.picker_gate, windows, d.sps, d.rise, hw.base_rep_rate_ghz);
  const std::size_t common = std::min(expected.size(), schedule.emitted.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& e = expected[i];
    const auto& g = schedule.emitted[i];
    if (e.slot != g.slot || e.payload != g.payload || std::abs(e.time_ns - g.time_ns) > 1e-9) {
      add(ViolationKind::EmittedMismatch, g.time_ns, g.time_ns,
          "emitted pulse list disagrees with the gates at slot " + std::to_string(e.slot));
      break;
    }
  }
  if (expected.size() != schedule.emitted.size())
    add(ViolationKind::EmittedMismatch, 0.0, duration,
        "emitted pulse count " + std::to_string(schedule.emitted.size()) + " but gates pick " +
            std::to_string(expected.size()));
  return report;
}

TransientModel TransientModel::defaults() {
  constexpr double pi = std::numbers::pi;
  TransientModel m;
  m.table = {{5.0, 3.0, 1.282 * pi, 1.0},
             {2.5, 1.0, 0.361 * pi, 0.9},
             {5.0 / 3.0, 1.0, 0.088 * pi, 1.0},
             {1.25, 1.0, 0.051 * pi, 1.0}};
  return m;
}

PulseSchedule switch_on_transient(const PulseSchedule& schedule, double rep_rate_ghz,
                                  const TransientModel& model) {
  if (!(rep_rate_ghz > 0.0)) throw std::invalid_argument("rep_rate_ghz must be positive");
  const AnomalyEntry* entry = nullptr;
  for (const auto& e : model.table)
    if (std::abs(e.rep_rate_ghz - rep_rate_ghz) <= 1e-6 * e.rep_rate_ghz) entry = &e;
  if (!entry) throw UnknownRate("no switch-on anomaly known for " + std::to_string(rep_rate_ghz) + " GHz");

  const double period = 1.0 / rep_rate_ghz;
  const bool area_anomaly = entry->first_area != 1.0 || entry->second_area != 1.0;
  auto ramp = [&](double dt) {
    return 1.0 + model.ramp_fraction * std::clamp(dt / model.ramp_ns, 0.0, 1.0);
  };

  PulseSchedule out = schedule;
  std::vector<std::size_t> order(out.emitted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.emitted[a].time_ns < out.emitted[b].time_ns;
  });

  // A train running at the start of the sequence is already settled.
  bool have_prev = false, settled = true;
  double prev_t = 0.0, ramp_start = 0.0;
  int index_in_run = 0;
  for (std::size_t idx : order) {
    auto& p = out.emitted[idx];
    const bool after_gap = have_prev && (p.time_ns - prev_t) - period >= model.memory_ns - 1e-12;
    if (after_gap) {
      settled = false;
      index_in_run = 0;
    } else {
      ++index_in_run;
    }
    have_prev = true;
    prev_t = p.time_ns;

    p.relative_area = 1.0;
    p.relative_phase = 0.0;
    if (settled) continue;
    if (index_in_run == 0) {
      p.relative_area = entry->first_area;
      p.relative_phase = entry->first_phase;
      ramp_start = p.time_ns;
      continue;
    }
    // With an initial area change the ramp starts from the second pulse.
    if (area_anomaly && index_in_run == 1) ramp_start = p.time_ns;
    p.relative_area = entry->second_area * ramp(p.time_ns - ramp_start);
  }
  return out;
}

std::string export_waveform(const PulseSchedule& schedule) {
  using ordered = nlohmann::ordered_json;
  auto encode = [](const std::vector<std::uint8_t>& gate) {
    ordered segments = ordered::array();
    const std::int64_t n = static_cast<std::int64_t>(gate.size());
    std::int64_t i = 0;
    while (i < n) {
      std::int64_t j = i;
      while (j < n && gate[j] == gate[i]) ++j;
      ordered seg;
      seg["start_sample"] = i;
      seg["length"] = j - i;
      seg["level"] = static_cast<int>(gate[i]);
      segments.push_back(seg);
      i = j;
    }
    return segments;
  };
  ordered doc;
  doc["header"]["sample_rate_gs"] = schedule.sample_rate_gs;
  doc["header"]["base_rep_rate_ghz"] = schedule.base_rep_rate_ghz;
  doc["channels"]["picker"] = encode(schedule.picker_gate);
  doc["channels"]["pockels"] = encode(schedule.pockels_gate);
  return doc.dump(1) + "\n";
}

PulseSchedule import_waveform(const std::string& text, const HardwareConstraints& hw) {
  const auto doc = nlohmann::json::parse(text);
  PulseSchedule out;
  out.sample_rate_gs = doc.at("header").at("sample_rate_gs").get<double>();
  out.base_rep_rate_ghz = doc.at("header").at("base_rep_rate_ghz").get<double>();
  auto decode = [](const nlohmann::json& segments) {
    std::vector<std::uint8_t> gate;
    for (const auto& seg : segments) {
      const auto start = seg.at("start_sample").get<std::int64_t>();
      const auto length = seg.at("length").get<std::int64_t>();
      const int level = seg.at("level").get<int>();
      if (start != static_cast<std::int64_t>(gate.size()) || length < 0 || (level != 0 && level != 1))
        throw std::invalid_argument("waveform segments must be contiguous with level 0 or 1");
      gate.insert(gate.end(), static_cast<std::size_t>(length), static_cast<std::uint8_t>(level));
    }
    return gate;
  };
  out.picker_gate = decode(doc.at("channels").at("picker"));
  out.pockels_gate = decode(doc.at("channels").at("pockels"));

  HardwareConstraints grid = hw;
  grid.awg_sample_rate_gs = out.sample_rate_gs;
  grid.base_rep_rate_ghz = out.base_rep_rate_ghz;
  grid.idle_rep_rate_ghz = out.base_rep_rate_ghz;
  grid.validate();
  const std::int64_t rise = grid.ns_to_samples_ceil(hw.pockels_rise_fall_ns);
  out.emitted = emitted_from_gates(out.picker_gate, runs_of(out.pockels_gate), grid.samples_per_slot(),
                                   rise, out.base_rep_rate_ghz);
  return out;
}

}  // namespace ionpulse::scheduler
