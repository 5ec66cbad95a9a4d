#include "ionpulse/io/config.hpp"

#include "ionpulse/errors.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string_view>

namespace ionpulse::io {

using nlohmann::json;
using quantum::kPi;

namespace {

constexpr std::array<std::string_view, 12> kUnitSuffixes = {
    "_rad_per_ns", "_per_ns", "_ghz", "_mhz", "_gs", "_ns", "_us", "_nm", "_mw", "_w", "_db", "_pi"};

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view unit_stem(std::string_view key) {
  for (auto suffix : kUnitSuffixes)
    if (key.size() > suffix.size() && key.ends_with(suffix))
      return key.substr(0, key.size() - suffix.size());
  return {};
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed access to one JSON object. Every key read is recorded; finish()
// rejects whatever is left.
class Reader {
 public:
  Reader(const json& object, std::string path) : obj_(object), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    allowed_.insert(key);
    return obj_.contains(key);
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  const json& raw(const std::string& key) {
    allowed_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key, double fallback, double lo = -kInf, double hi = kInf,
                bool open_hi = false) {
    if (!has(key)) return fallback;
    return check_number(obj_.at(key), path(key), lo, hi, open_hi);
  }

  std::optional<double> optional_number(const std::string& key, double lo, double hi,
                                        bool open_hi = false) {
    if (!has(key)) return std::nullopt;
    return check_number(obj_.at(key), path(key), lo, hi, open_hi);
  }

  long long integer(const std::string& key, long long fallback, long long lo, long long hi) {
    if (!has(key)) return fallback;
    return check_integer(obj_.at(key), path(key), lo, hi);
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw SchemaError(path(key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) throw SchemaError(path(key), "expected true or false");
    return v.get<bool>();
  }

  const json& array(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw SchemaError(path(key), "expected a list");
    return v;
  }

  // Missing required key; a misspelt unit suffix is reported first.
  [[noreturn]] void missing(const std::string& key) const {
    const auto stem = unit_stem(key);
    if (!stem.empty())
      for (const auto& [other, value] : obj_.items())
        if (other == stem || other.starts_with(std::string(stem) + "_"))
          throw UnitError(path(other), "missing or unsupported unit; expected '" + key + "'");
    throw SchemaError(path(key), "required");
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (allowed_.count(key)) continue;
      for (const auto& allowed : allowed_) {
        const auto stem = unit_stem(allowed);
        if (stem.empty()) continue;
        const bool bare = key == stem || std::string_view(stem).ends_with("_" + key);
        const bool wrong_unit = key.starts_with(std::string(stem) + "_");
        if (bare || wrong_unit)
          throw UnitError(path(key), "missing or unsupported unit; expected '" + allowed + "'");
      }
      throw SchemaError(path(key), "unknown key");
    }
  }

  static double check_number(const json& v, const std::string& where, double lo, double hi,
                             bool open_hi) {
    if (!v.is_number()) throw SchemaError(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_hi && x >= hi))
      throw RangeError(where, "value " + v.dump() + " outside " + range_text(lo, hi, open_hi));
    return x;
  }

  static long long check_integer(const json& v, const std::string& where, long long lo,
                                 long long hi) {
    if (!v.is_number_integer()) throw SchemaError(where, "expected an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > hi)
      throw RangeError(where, "value " + std::to_string(x) + " outside [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "]");
    return x;
  }

 private:
  static std::string range_text(double lo, double hi, bool open_hi) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%g, %g%s", lo, hi, open_hi ? ")" : "]");
    return buf;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> allowed_;
};

constexpr long long kMaxPulses = 10'000'000;

TrainConfig read_train(Reader& r) {
  TrainConfig t;
  t.theta_pi = r.number("theta_pi", t.theta_pi, 0.0, 2.0, true);
  t.rep_rate_ghz = r.number("rep_rate_ghz", t.rep_rate_ghz, 1e-6, 1e3);
  t.delta_rad_per_ns = r.number("delta_rad_per_ns", 0.0, -1e4, 1e4);
  t.delta_prime_rad_per_ns = r.number("delta_prime_rad_per_ns", 0.0, -1e4, 1e4);
  if (r.has("first_pulse")) {
    Reader fp(r.raw("first_pulse"), r.path("first_pulse"));
    t.first_theta_pi = fp.number("theta_pi", t.theta_pi, 0.0, 2.0, true);
    t.first_phase_pi = fp.number("phase_pi", 0.0, 0.0, 2.0, true);
    fp.finish();
  }
  return t;
}

DetuningGrid read_grid(Reader& r, double rep_rate_ghz) {
  DetuningGrid g;
  g.min_rad_per_ns = r.number("detuning_min_rad_per_ns", -kPi * rep_rate_ghz, -1e4, 1e4);
  g.max_rad_per_ns = r.number("detuning_max_rad_per_ns", kPi * rep_rate_ghz, -1e4, 1e4);
  g.points = static_cast<int>(r.integer("detuning_points", 41, 1, 100000));
  if (g.max_rad_per_ns < g.min_rad_per_ns)
    throw RangeError(r.path("detuning_max_rad_per_ns"), "must not be below detuning_min_rad_per_ns");
  return g;
}

int read_shots(Reader& r) { return static_cast<int>(r.integer("shots", 0, 0, 100'000'000)); }

std::vector<int> int_list(Reader& r, const std::string& key, long long lo, long long hi) {
  std::vector<int> out;
  const json& a = r.array(key);
  if (a.empty()) throw SchemaError(r.path(key), "list must not be empty");
  for (std::size_t i = 0; i < a.size(); ++i)
    out.push_back(static_cast<int>(
        Reader::check_integer(a[i], r.path(key) + "[" + std::to_string(i) + "]", lo, hi)));
  return out;
}

std::vector<double> number_list(Reader& r, const std::string& key, double lo, double hi,
                                bool open_hi = false) {
  std::vector<double> out;
  const json& a = r.array(key);
  if (a.empty()) throw SchemaError(r.path(key), "list must not be empty");
  for (std::size_t i = 0; i < a.size(); ++i)
    out.push_back(
        Reader::check_number(a[i], r.path(key) + "[" + std::to_string(i) + "]", lo, hi, open_hi));
  return out;
}

quantum::AtomModel read_atom(Reader& root) {
  quantum::AtomModel atom;
  if (!root.has("atom")) return atom;
  Reader r(root.raw("atom"), "atom");
  atom.gamma_total = r.number("gamma_per_ns", atom.gamma_total, 0.0, 1e3);
  atom.p52 = r.number("branching_d52", atom.p52, 0.0, 1.0);
  const std::string conv = r.string("decay_convention", "exact_branching");
  if (conv == "exact_branching")
    atom.convention = quantum::DecayConvention::ExactBranching;
  else if (conv == "independent_rates")
    atom.convention = quantum::DecayConvention::IndependentRates;
  else
    throw SchemaError(r.path("decay_convention"), "expected 'exact_branching' or 'independent_rates'");
  r.finish();
  return atom;
}

scheduler::HardwareConstraints read_hardware(Reader& root) {
  scheduler::HardwareConstraints hw;
  if (!root.has("hardware")) return hw;
  Reader r(root.raw("hardware"), "hardware");
  hw.base_rep_rate_ghz = r.number("base_rep_rate_ghz", hw.base_rep_rate_ghz, 1e-6, 1e3);
  hw.awg_sample_rate_gs = r.number("awg_sample_rate_gs", hw.awg_sample_rate_gs, 1e-6, 1e4);
  hw.pockels_rise_fall_ns = r.number("pockels_rise_fall_ns", hw.pockels_rise_fall_ns, 1e-6, 1e6);
  hw.pockels_min_on_ns = r.number("pockels_min_on_ns", hw.pockels_min_on_ns, 1e-6, 1e6);
  hw.pockels_max_rate_mhz = r.number("pockels_max_rate_mhz", hw.pockels_max_rate_mhz, 1e-6, 1e6);
  hw.max_edfa_dark_ns = r.number("max_edfa_dark_ns", hw.max_edfa_dark_ns, 1e-6, 1e6);
  hw.idle_rep_rate_ghz = r.number("idle_rep_rate_ghz", hw.idle_rep_rate_ghz, 1e-6, 1e3);
  r.finish();
  return hw;
}

CommandParams read_params(Command command, Reader& r) {
  switch (command) {
    case Command::Simulate: {
      SimulateParams p;
      p.train = read_train(r);
      p.n = static_cast<int>(r.integer("n", p.n, 0, kMaxPulses));
      return p;
    }
    case Command::Scan: {
      ScanParams p;
      p.train = read_train(r);
      if (r.has("pulse_counts")) p.pulse_counts = int_list(r, "pulse_counts", 1, kMaxPulses);
      p.detuning = read_grid(r, p.train.rep_rate_ghz);
      p.shots = read_shots(r);
      return p;
    }
    case Command::Burst: {
      BurstParams p;
      p.train = read_train(r);
      p.n_max = static_cast<int>(r.integer("n_max", p.n_max, 1, 100000));
      p.m = static_cast<int>(r.integer("m", p.m, 1, 100000));
      p.t_wait_us = r.number("t_wait_us", p.t_wait_us, 0.0, 1e9);
      p.detuning = read_grid(r, p.train.rep_rate_ghz);
      p.shots = read_shots(r);
      return p;
    }
    case Command::Ramsey: {
      RamseyParams p;
      p.train = read_train(r);
      p.n_max = static_cast<int>(r.integer("n_max", p.n_max, 0, kMaxPulses));
      p.phase_points = static_cast<int>(r.integer("phase_points", p.phase_points, 3, 100000));
      p.shots = read_shots(r);
      return p;
    }
    case Command::Fit: {
      FitParams p;
      const std::string protocol = r.string("protocol", "");
      if (protocol == "many_pulse")
        p.protocol = FitProtocol::ManyPulse;
      else if (protocol == "single_pulse")
        p.protocol = FitProtocol::SinglePulse;
      else if (protocol == "pi_scan")
        p.protocol = FitProtocol::PiScan;
      else if (protocol == "ramsey")
        p.protocol = FitProtocol::Ramsey;
      else
        throw SchemaError(r.path("protocol"),
                          "expected one of many_pulse, single_pulse, pi_scan, ramsey");
      p.data_file = r.string("data_file", "");
      if (p.data_file.empty()) throw SchemaError(r.path("data_file"), "required");
      p.rep_rate_ghz = r.number("rep_rate_ghz", p.rep_rate_ghz, 1e-6, 1e3);
      p.fit_first_area = r.boolean("fit_first_area", false);
      p.m = static_cast<int>(r.integer("m", p.m, 1, 100000));
      p.offset_bound_rad_per_ns = r.number("offset_bound_rad_per_ns", 1.0, 0.0, 1e4);
      if (r.has("first_pulse")) {
        Reader fp(r.raw("first_pulse"), r.path("first_pulse"));
        p.first_theta_pi = fp.number("theta_pi", 0.0, 0.0, 2.0, true);
        p.first_phase_pi = fp.number("phase_pi", 0.0, 0.0, 2.0, true);
        fp.finish();
      }
      return p;
    }
    case Command::Ellipse: {
      EllipseParams p;
      p.data_file = r.string("data_file", "");
      if (r.has("phases_pi")) p.phases_pi = number_list(r, "phases_pi", -2.0, 2.0);
      if (p.phases_pi.size() < 3)
        throw SchemaError(r.path("phases_pi"), "needs at least three pulse phases");
      p.samples = static_cast<int>(r.integer("samples", p.samples, 8, 10'000'000));
      p.noise_sigma = r.number("noise_sigma", p.noise_sigma, 0.0, 1e3);
      p.wavelength_nm = r.number("wavelength_nm", p.wavelength_nm, 1e-3, 1e7);
      p.reference_peak = static_cast<int>(r.integer("reference_peak", p.reference_peak, 1, 100000));
      if (p.data_file.empty() && p.reference_peak > static_cast<int>(p.phases_pi.size()) - 1)
        throw RangeError(r.path("reference_peak"), "exceeds the number of peaks");
      return p;
    }
    case Command::Schedule: {
      ScheduleParams p;
      p.hardware = read_hardware(r);
      p.waveform_file = r.string("waveform_file", "");
      p.transient_rate_ghz = r.optional_number("transient_rate_ghz", 1e-6, 1e3);
      if (p.waveform_file.empty()) {
        if (!r.has("payload_slots")) r.missing("payload_slots");
        const json& a = r.array("payload_slots");
        for (std::size_t i = 0; i < a.size(); ++i)
          p.payload_slots.push_back(Reader::check_integer(
              a[i], r.path("payload_slots") + "[" + std::to_string(i) + "]", 0,
              std::numeric_limits<std::int32_t>::max()));
        if (!r.has("total_duration_ns")) r.missing("total_duration_ns");
        p.total_duration_ns = r.number("total_duration_ns", 0.0, 0.0, 1e9);
      }
      return p;
    }
    case Command::Power: {
      PowerParams p;
      if (r.has("p_fundamental_w")) {
        const json& v = r.raw("p_fundamental_w");
        p.p_fundamental_w = v.is_array() ? number_list(r, "p_fundamental_w", 0.0, 1e6)
                                         : std::vector<double>{Reader::check_number(
                                               v, r.path("p_fundamental_w"), 0.0, 1e6, false)};
      }
      p.chain.rep_rate_ghz = r.number("rep_rate_ghz", p.chain.rep_rate_ghz, 1e-6, 1e3);
      p.chain.extinction_in_db = r.number("extinction_in_db", p.chain.extinction_in_db, 0.0, 1e3);
      p.chain.extinction_measured_db =
          r.number("extinction_measured_db", p.chain.extinction_measured_db, 0.0, 1e3);
      if (r.has("calibration")) {
        p.chain.calibration.clear();
        const json& a = r.array("calibration");
        for (std::size_t i = 0; i < a.size(); ++i) {
          Reader c(a[i], r.path("calibration") + "[" + std::to_string(i) + "]");
          scheduler::CalibrationPoint point;
          point.rep_rate_ghz = c.number("rep_rate_ghz", point.rep_rate_ghz, 1e-6, 1e3);
          point.p_fundamental_w = c.number("p_fundamental_w", point.p_fundamental_w, 1e-9, 1e6);
          point.eff1 = c.number("eff1", point.eff1, 0.0, 1.0, true);
          point.eff2 = c.number("eff2", point.eff2, 0.0, 1.0, true);
          c.finish();
          p.chain.calibration.push_back(point);
        }
        if (p.chain.calibration.empty())
          throw SchemaError(r.path("calibration"), "list must not be empty");
      }
      return p;
    }
  }
  throw SchemaError("command", "unhandled command");
}

}  // namespace

std::string to_string(Command command) {
  switch (command) {
    case Command::Simulate: return "simulate";
    case Command::Scan: return "scan";
    case Command::Burst: return "burst";
    case Command::Ramsey: return "ramsey";
    case Command::Fit: return "fit";
    case Command::Ellipse: return "ellipse";
    case Command::Schedule: return "schedule";
    case Command::Power: return "power";
  }
  return "unknown";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::Simulate, Command::Scan, Command::Burst, Command::Ramsey,
                    Command::Fit, Command::Ellipse, Command::Schedule, Command::Power})
    if (to_string(c) == name) return c;
  throw SchemaError("command", "unknown command '" + name + "'");
}

quantum::TrainParams TrainConfig::params() const {
  auto p = quantum::TrainParams::at_rate(theta_pi * kPi, rep_rate_ghz, delta_rad_per_ns,
                                         delta_prime_rad_per_ns);
  if (first_theta_pi || first_phase_pi)
    p.first_pulse = quantum::FirstPulseAnomaly{first_theta_pi.value_or(theta_pi) * kPi,
                                               first_phase_pi.value_or(0.0) * kPi};
  return p;
}

std::vector<double> DetuningGrid::values() const {
  if (points == 1) return {0.5 * (min_rad_per_ns + max_rad_per_ns)};
  std::vector<double> out;
  for (int i = 0; i < points; ++i)
    out.push_back(min_rad_per_ns + (max_rad_per_ns - min_rad_per_ns) * i / (points - 1));
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, std::optional<Command> command) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("<root>", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.empty()) throw SchemaError("<root>", "expected a non-empty object");

  Reader root(doc, "");
  RunConfig config;
  if (root.has("command")) {
    config.command = parse_command(root.string("command", ""));
    if (command && *command != config.command)
      throw SchemaError("command", "config is for '" + to_string(config.command) +
                                       "', invoked as '" + to_string(*command) + "'");
  } else if (command) {
    config.command = *command;
  } else {
    throw SchemaError("command", "required");
  }
  if (root.has("seed")) {
    const json& s = root.raw("seed");
    if (!s.is_number_integer()) throw SchemaError("seed", "expected a non-negative integer");
    if (!s.is_number_unsigned() && s.get<long long>() < 0)
      throw RangeError("seed", "value " + s.dump() + " is negative");
    config.seed = s.get<std::uint64_t>();
  }
  config.output_dir = root.string("output_dir", config.output_dir);
  if (config.output_dir.empty()) throw SchemaError("output_dir", "must not be empty");
  config.atom = read_atom(root);
  config.params = read_params(config.command, root);
  root.finish();

  json canonical = doc;
  canonical.erase("output_dir");
  config.canonical = canonical.dump();
  config.config_hash = fnv1a_hex(config.canonical);
  return config;
}

}  // namespace ionpulse::io
