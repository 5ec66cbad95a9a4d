#include "ionpulse/io/runner.hpp"

#include "ionpulse/errors.hpp"
#include "ionpulse/experiments.hpp"
#include "ionpulse/interferometry.hpp"
#include "ionpulse/io/tabular.hpp"
#include "ionpulse/protocol_fits.hpp"
#include "ionpulse/rng.hpp"
#include "ionpulse/scheduler.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <new>
#include <system_error>

namespace ionpulse::io {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using quantum::kPi;

namespace {

// Raised when a schedule is rejected by validate(); carries the report.
class ScheduleRejected : public Error {
 public:
  explicit ScheduleRejected(std::vector<scheduler::Violation> v)
      : Error(std::to_string(v.size()) + " schedule violation(s)"), violations(std::move(v)) {}
  std::vector<scheduler::Violation> violations;
};

struct Output {
  std::string name;
  std::string text;
};

struct Artifacts {
  std::vector<Output> files;
  ordered_json results = ordered_json::object();
};

constexpr const char* kSummary = "summary.json";

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix_seed(mix_seed(seed ^ (stream << 48)) + index);
}

TabularDataset table(const RunConfig& config, std::vector<std::string> header) {
  TabularDataset t;
  t.metadata = {{"command", to_string(config.command)},
                {"seed", std::to_string(config.seed)},
                {"config_hash", config.config_hash}};
  t.header = std::move(header);
  return t;
}

void add_table(Artifacts& a, const std::string& name, const TabularDataset& t) {
  a.files.push_back({name, to_tsv(t)});
}

ordered_json violation_json(const scheduler::Violation& v) {
  return {{"kind", scheduler::to_string(v.kind)},
          {"start_ns", v.start_ns},
          {"end_ns", v.end_ns},
          {"detail", v.detail}};
}

ordered_json fit_json(const estimation::FitResult& fit,
                      const std::vector<std::string>& angle_names = {}) {
  ordered_json values = ordered_json::object();
  ordered_json errors = ordered_json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const bool angle = std::find(angle_names.begin(), angle_names.end(), fit.names[i]) !=
                       angle_names.end();
    const std::string key = angle ? fit.names[i] + "_pi" : fit.names[i];
    values[key] = angle ? fit.values(k) / kPi : fit.values(k);
    errors[key] = angle ? fit.std_errors(k) / kPi : fit.std_errors(k);
  }
  return {{"values", values},
          {"std_errors", errors},
          {"chi2", fit.chi2},
          {"reduced_chi2", fit.reduced_chi2},
          {"dof", fit.dof},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"singular", fit.singular}};
}

// Reads a data table; format problems are reported against `data_file`.
TabularDataset load_data(const std::string& file, const std::vector<std::string>& required) {
  TabularDataset t;
  try {
    t = read_tsv(file);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("data_file", file + ": " + e.what());
  }
  for (const auto& c : required)
    if (!t.has_column(c)) throw SchemaError("data_file", file + ": missing column '" + c + "'");
  if (t.rows.empty()) throw SchemaError("data_file", file + ": no data rows");
  return t;
}

int as_count(double v, const std::string& column) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 2e9)
    throw SchemaError("data_file", "column '" + column + "' needs non-negative integers");
  return static_cast<int>(v);
}

double sample(double p, int shots, std::uint64_t seed) {
  if (shots <= 0) return p;
  return static_cast<double>(experiments::synth_shots(std::clamp(p, 0.0, 1.0), shots, seed)) /
         shots;
}

// Shared by scan and burst: one row per (detuning, n).
void probability_grid(const RunConfig& config, Artifacts& a, const std::vector<double>& detunings,
                      const std::vector<int>& counts, const Eigen::MatrixXd& model, int shots,
                      const std::string& plot_name) {
  auto results = table(config, {"detuning_rad_per_ns", "n", "p_d", "shots", "p_d_model"});
  std::vector<std::string> plot_header{"detuning_rad_per_ns"};
  for (int n : counts) plot_header.push_back("p_d_n" + std::to_string(n));
  auto plot = table(config, plot_header);
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < detunings.size(); ++i) {
    std::vector<double> plot_row{detunings[i]};
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const double p = model(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double observed = sample(p, shots, stream_seed(config.seed, 1, index++));
      results.rows.push_back({detunings[i], static_cast<double>(counts[j]), observed,
                              static_cast<double>(shots), p});
      plot_row.push_back(observed);
    }
    plot.rows.push_back(std::move(plot_row));
  }
  add_table(a, "results.tsv", results);
  add_table(a, plot_name, plot);

  ordered_json peak = ordered_json::object();
  for (std::size_t j = 0; j < counts.size(); ++j)
    peak[std::to_string(counts[j])] = model.col(static_cast<Eigen::Index>(j)).maxCoeff();
  a.results["detuning_points"] = detunings.size();
  a.results["max_p_d_model"] = peak;
}

void run_simulate(const RunConfig& config, const SimulateParams& p, Artifacts& a) {
  const auto params = p.train.params();
  params.validate();
  config.atom.validate();
  const int stride = std::max(1, (p.n + 9999) / 10000);
  auto results = table(config, {"n", "p1", "p2", "p3", "p_d"});
  quantum::DensityMatrix3 rho;
  auto record = [&](int k) {
    const auto o = quantum::observables(rho);
    const double p_d = quantum::observables(quantum::complete_decay(rho, config.atom)).p3;
    results.rows.push_back({static_cast<double>(k), o.p1, o.p2, o.p3, p_d});
  };
  record(0);
  for (int k = 1; k <= p.n; ++k) {
    rho = quantum::step(rho, params, config.atom, k == 1);
    if (k % stride == 0 || k == p.n) record(k);
  }
  add_table(a, "results.tsv", results);
  const auto& last = results.rows.back();
  a.results = {{"n", p.n}, {"p1", last[1]}, {"p2", last[2]}, {"p3", last[3]}, {"p_d", last[4]}};
}

void run_scan(const RunConfig& config, const ScanParams& p, Artifacts& a) {
  const auto params = p.train.params();
  params.validate();
  const auto detunings = p.detuning.values();
  const auto model = experiments::dark_state_scan(params, config.atom, detunings, p.pulse_counts);
  probability_grid(config, a, detunings, p.pulse_counts, model, p.shots, "plot_scan.tsv");
}

void run_burst(const RunConfig& config, const BurstParams& p, Artifacts& a) {
  const auto params = p.train.params();
  params.validate();
  experiments::BurstSpec{p.n_max, p.m, p.t_wait_us * 1000.0}.validate(config.atom);
  const auto detunings = p.detuning.values();
  const auto model = experiments::burst_map(params, config.atom, detunings, p.n_max, p.m);
  std::vector<int> counts;
  for (int n = 1; n <= p.n_max; ++n) counts.push_back(n);
  probability_grid(config, a, detunings, counts, model, p.shots, "plot_burst_map.tsv");
  a.results["m"] = p.m;
}

void run_ramsey(const RunConfig& config, const RamseyParams& p, Artifacts& a) {
  auto params = p.train.params();
  params.validate();
  config.atom.validate();
  const auto phases = experiments::RamseySpec::default_phases(p.phase_points);
  auto results = table(config, {"n", "phase_rad", "p3", "shots", "p3_model"});
  auto plot = table(config, {"n", "contrast", "phase_rad", "contrast_model", "phase_model_rad"});
  ordered_json contrast = ordered_json::array();
  ordered_json phase = ordered_json::array();

  quantum::DensityMatrix3 rho = quantum::DensityMatrix3::ground_dark_superposition();
  std::uint64_t index = 0;
  for (int n = 0; n <= p.n_max; ++n) {
    if (n > 0) rho = quantum::step(rho, params, config.atom, n == 1);
    const auto decayed = quantum::complete_decay(rho, config.atom);
    const auto cp = experiments::contrast_and_phase(decayed);
    std::vector<double> p3;
    std::vector<double> variances;
    for (double phi : phases) {
      const double model = experiments::analysis_dark_probability(decayed, phi);
      const double observed = sample(model, p.shots, stream_seed(config.seed, 2, index++));
      results.rows.push_back({static_cast<double>(n), phi, observed,
                              static_cast<double>(p.shots), model});
      p3.push_back(observed);
      if (p.shots > 0) variances.push_back(experiments::binomial_variance(observed, p.shots));
    }
    const auto fringe = experiments::fit_fringe(phases, p3, variances);
    plot.rows.push_back(
        {static_cast<double>(n), fringe.contrast, fringe.phase, cp.contrast, cp.phase});
    contrast.push_back(cp.contrast);
    phase.push_back(cp.phase);
  }
  add_table(a, "results.tsv", results);
  add_table(a, "plot_contrast_phase.tsv", plot);
  a.results = {{"n_max", p.n_max}, {"contrast_model", contrast}, {"phase_model_rad", phase}};
}

std::vector<estimation::ScanPoint> scan_points(const TabularDataset& t) {
  std::vector<estimation::ScanPoint> out;
  const auto d = t.column("detuning_rad_per_ns");
  const auto n = t.column("n");
  const auto pd = t.column("p_d");
  const auto s = t.column("shots");
  // Rows with zero shots hold exact model values; one shot puts every such
  // row on the variance floor, i.e. equal weights.
  for (const auto& row : t.rows)
    out.push_back({row[d], as_count(row[n], "n"), row[pd], std::max(as_count(row[s], "shots"), 1)});
  return out;
}

void run_fit(const RunConfig& config, const FitParams& p, Artifacts& a) {
  using namespace estimation;
  config.atom.validate();
  switch (p.protocol) {
    case FitProtocol::ManyPulse:
    case FitProtocol::SinglePulse: {
      const auto data = load_data(p.data_file, {"detuning_rad_per_ns", "n", "p_d", "shots"});
      const auto points = scan_points(data);
      FitResult fit;
      Eigen::VectorXd model;
      if (p.protocol == FitProtocol::ManyPulse) {
        ManyPulseFitOptions opts;
        opts.atom = config.atom;
        opts.offset_bound = p.offset_bound_rad_per_ns;
        fit = fit_many_pulse_scan(points, p.rep_rate_ghz, opts);
        model = many_pulse_model(points, p.rep_rate_ghz, fit.values(0), fit.values(1), config.atom);
        a.results["protocol"] = "many_pulse";
      } else {
        SinglePulseFitOptions opts;
        opts.atom = config.atom;
        opts.m = p.m;
        opts.offset_bound = p.offset_bound_rad_per_ns;
        fit = fit_single_pulse_map(points, p.rep_rate_ghz, p.fit_first_area, opts);
        model = single_pulse_model(points, p.rep_rate_ghz, fit.values(0), fit.values(1),
                                   fit.values(2), p.fit_first_area ? fit.values(3) : -1.0,
                                   config.atom, p.m);
        a.results["protocol"] = "single_pulse";
      }
      auto results = table(config, {"detuning_rad_per_ns", "n", "p_d", "p_d_fit", "residual"});
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double m = model(static_cast<Eigen::Index>(i));
        results.rows.push_back({points[i].detuning, static_cast<double>(points[i].n),
                                points[i].p_d, m, points[i].p_d - m});
      }
      add_table(a, "results.tsv", results);
      a.results["fit"] = fit_json(fit, {"theta", "dphi_first", "theta_first"});
      return;
    }
    case FitProtocol::PiScan: {
      const auto data = load_data(p.data_file, {"p_light_mw", "successes", "shots"});
      std::vector<PiScanPoint> points;
      const auto pl = data.column("p_light_mw");
      const auto k = data.column("successes");
      const auto s = data.column("shots");
      for (const auto& row : data.rows) {
        const int shots = as_count(row[s], "shots");
        const int successes = as_count(row[k], "successes");
        if (successes > shots) throw SchemaError("data_file", "successes exceed shots");
        points.push_back(pi_scan_point(row[pl], successes, shots, p.m, config.atom.p52));
      }
      const auto fit = fit_pi_scan(points);
      auto results = table(config, {"p_light_mw", "p_p", "sigma", "p_p_fit"});
      for (const auto& pt : points)
        results.rows.push_back({pt.p_light, pt.p_p, pt.sigma,
                                experiments::pi_scan_model(pt.p_light, fit.values(0), fit.values(1))});
      add_table(a, "results.tsv", results);
      a.results["protocol"] = "pi_scan";
      a.results["fit"] = fit_json(fit);
      return;
    }
    case FitProtocol::Ramsey: {
      const auto data = load_data(p.data_file, {"n", "phase_rad", "p3", "shots"});
      std::map<int, RamseyFringe> by_n;
      const auto n = data.column("n");
      const auto ph = data.column("phase_rad");
      const auto p3 = data.column("p3");
      const auto s = data.column("shots");
      for (const auto& row : data.rows) {
        auto& f = by_n[as_count(row[n], "n")];
        f.n = static_cast<int>(row[n]);
        f.phases.push_back(row[ph]);
        f.p3.push_back(row[p3]);
        f.shots = std::max(1, as_count(row[s], "shots"));
      }
      std::vector<RamseyFringe> fringes;
      for (auto& [key, f] : by_n) fringes.push_back(std::move(f));
      RamseyFitOptions opts;
      opts.atom = config.atom;
      if (p.first_theta_pi || p.first_phase_pi)
        opts.first_pulse = quantum::FirstPulseAnomaly{p.first_theta_pi.value_or(0.0) * kPi,
                                                      p.first_phase_pi.value_or(0.0) * kPi};
      const auto out = fit_ramsey(fringes, p.rep_rate_ghz, opts);

      auto params = quantum::TrainParams::at_rate(out.fit.value("theta"), p.rep_rate_ghz,
                                                  out.fit.value("delta"),
                                                  out.fit.value("delta_prime"));
      params.first_pulse = opts.first_pulse;
      const auto curve = experiments::ramsey_curve(params, config.atom, fringes.back().n);
      const double scale = out.fit.value("contrast_scale");
      auto results = table(config, {"n", "contrast", "contrast_error", "phase_rad",
                                    "phase_error_rad", "contrast_fit", "phase_fit_rad"});
      for (std::size_t i = 0; i < fringes.size(); ++i) {
        const auto& cp = curve[static_cast<std::size_t>(fringes[i].n)];
        const auto& f = out.fringes[i];
        results.rows.push_back({static_cast<double>(fringes[i].n), f.contrast, f.contrast_error,
                                f.phase, f.phase_error, scale * cp.contrast, cp.phase});
      }
      add_table(a, "results.tsv", results);
      a.results["protocol"] = "ramsey";
      a.results["fit"] = fit_json(out.fit, {"theta"});
      a.results["excluded_phase_n"] = out.excluded_phase_n;
      return;
    }
  }
}

void run_ellipse(const RunConfig& config, const EllipseParams& p, Artifacts& a) {
  interferometry::InterferogramSet set;
  if (!p.data_file.empty()) {
    const auto data = load_data(p.data_file, {"area_1", "area_2"});
    int peaks = 0;
    while (data.has_column("area_" + std::to_string(peaks + 1))) ++peaks;
    set.areas.resize(static_cast<Eigen::Index>(data.rows.size()), peaks);
    for (int k = 0; k < peaks; ++k) {
      const auto c = data.column("area_" + std::to_string(k + 1));
      for (std::size_t i = 0; i < data.rows.size(); ++i)
        set.areas(static_cast<Eigen::Index>(i), k) = data.rows[i][c];
    }
    if (p.reference_peak > peaks)
      throw RangeError("reference_peak", "data has only " + std::to_string(peaks) + " peaks");
  } else {
    std::vector<double> phases;
    for (double v : p.phases_pi) phases.push_back(v * kPi);
    const auto dx = interferometry::random_delta_x(p.samples, p.wavelength_nm,
                                                   stream_seed(config.seed, 3, 0));
    set = interferometry::synth_interferogram(phases, dx, p.wavelength_nm, p.noise_sigma,
                                              stream_seed(config.seed, 3, 1));
  }
  set.validate();
  const auto fits = interferometry::pairwise_phases(set, p.reference_peak - 1);

  auto results = table(config, {"peak", "reference_peak", "dphi_abs_pi", "dphi_error_pi",
                                "degenerate", "residual_rms"});
  ordered_json peaks = ordered_json::array();
  for (const auto& f : fits) {
    results.rows.push_back({static_cast<double>(f.peak + 1), static_cast<double>(p.reference_peak),
                            f.dphi_abs / kPi, f.dphi_error / kPi, f.degenerate ? 1.0 : 0.0,
                            f.residual_rms});
    peaks.push_back({{"peak", f.peak + 1},
                     {"dphi_abs_pi", f.dphi_abs / kPi},
                     {"dphi_error_pi", f.dphi_error / kPi},
                     {"degenerate", f.degenerate}});
  }
  std::vector<std::string> header;
  for (int k = 0; k < set.peaks(); ++k) header.push_back("area_" + std::to_string(k + 1));
  auto plot = table(config, header);
  for (Eigen::Index i = 0; i < set.areas.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < set.areas.cols(); ++k) row.push_back(set.areas(i, k));
    plot.rows.push_back(std::move(row));
  }
  add_table(a, "results.tsv", results);
  add_table(a, "plot_areas.tsv", plot);
  a.results = {{"reference_peak", p.reference_peak},
               {"measurements", set.measurements()},
               {"peaks", peaks}};
}

void run_schedule(const RunConfig& config, const ScheduleParams& p, Artifacts& a) {
  scheduler::PulseSchedule schedule;
  if (!p.waveform_file.empty()) {
    try {
      schedule = scheduler::import_waveform(read_text(p.waveform_file), p.hardware);
    } catch (const std::invalid_argument& e) {
      throw SchemaError("waveform_file", p.waveform_file + ": " + e.what());
    }
    auto report = scheduler::validate(schedule, p.hardware);
    if (!report.empty()) throw ScheduleRejected(std::move(report));
  } else {
    schedule = scheduler::compile({p.payload_slots, p.total_duration_ns}, p.hardware);
  }
  if (p.transient_rate_ghz) schedule = scheduler::switch_on_transient(schedule, *p.transient_rate_ghz);

  auto results = table(config, {"time_ns", "slot", "payload", "relative_area", "relative_phase_rad"});
  for (const auto& e : schedule.emitted)
    results.rows.push_back({e.time_ns, static_cast<double>(e.slot), e.payload ? 1.0 : 0.0,
                            e.relative_area, e.relative_phase});
  auto plot = table(config, {"sample", "time_ns", "picker", "pockels"});
  for (std::int64_t s = 0; s < schedule.samples(); ++s) {
    const auto i = static_cast<std::size_t>(s);
    if (s == 0 || schedule.picker_gate[i] != schedule.picker_gate[i - 1] ||
        schedule.pockels_gate[i] != schedule.pockels_gate[i - 1])
      plot.rows.push_back({static_cast<double>(s), s / schedule.sample_rate_gs,
                           static_cast<double>(schedule.picker_gate[i]),
                           static_cast<double>(schedule.pockels_gate[i])});
  }
  add_table(a, "results.tsv", results);
  add_table(a, "plot_gates.tsv", plot);
  a.files.push_back({"waveform.json", scheduler::export_waveform(schedule)});

  std::size_t payload = 0;
  for (const auto& e : schedule.emitted) payload += e.payload ? 1 : 0;
  a.results = {{"samples", schedule.samples()},
               {"pockels_windows", schedule.pockels_windows().size()},
               {"emitted_pulses", schedule.emitted.size()},
               {"payload_pulses", payload}};
  a.results["violations"] = ordered_json::array();
}

void run_power(const RunConfig& config, const PowerParams& p, Artifacts& a) {
  auto results = table(config, {"p_fundamental_w", "p_786_w", "p_393_w", "eff1", "eff2"});
  auto plot = table(config, {"p_fundamental_w", "p_393_w"});
  scheduler::PowerChain chain = p.chain;
  scheduler::PowerChainOutput last;
  for (double pf : p.p_fundamental_w) {
    chain.p_fundamental_w = pf;
    last = scheduler::power_chain_output(chain);
    results.rows.push_back({pf, last.p_786_w, last.p_393_w, last.eff1, last.eff2});
    plot.rows.push_back({pf, last.p_393_w});
  }
  add_table(a, "results.tsv", results);
  add_table(a, "plot_power.tsv", plot);
  a.results = {{"rep_rate_ghz", chain.rep_rate_ghz},
               {"extinction_out_db", last.extinction_out_db},
               {"extinction_measured_db", last.extinction_measured_db}};
}

std::vector<std::string> output_names(Command c) {
  switch (c) {
    case Command::Simulate: return {"results.tsv"};
    case Command::Scan: return {"results.tsv", "plot_scan.tsv"};
    case Command::Burst: return {"results.tsv", "plot_burst_map.tsv"};
    case Command::Ramsey: return {"results.tsv", "plot_contrast_phase.tsv"};
    case Command::Fit: return {"results.tsv"};
    case Command::Ellipse: return {"results.tsv", "plot_areas.tsv"};
    case Command::Schedule: return {"results.tsv", "plot_gates.tsv", "waveform.json"};
    case Command::Power: return {"results.tsv", "plot_power.tsv"};
  }
  return {};
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const RangeError*>(&e)) return "RangeError";
  if (dynamic_cast<const UnitError*>(&e)) return "UnitError";
  if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
  if (dynamic_cast<const InvalidDecay*>(&e)) return "InvalidDecay";
  if (dynamic_cast<const NonPhysical*>(&e)) return "NonPhysical";
  if (dynamic_cast<const NotConverged*>(&e)) return "NotConverged";
  if (dynamic_cast<const DegeneratePhase*>(&e)) return "DegeneratePhase";
  if (dynamic_cast<const InfeasibleWindow*>(&e)) return "InfeasibleWindow";
  if (dynamic_cast<const GridMismatch*>(&e)) return "GridMismatch";
  if (dynamic_cast<const RateExceeded*>(&e)) return "RateExceeded";
  if (dynamic_cast<const UnknownRate*>(&e)) return "UnknownRate";
  if (dynamic_cast<const ScheduleRejected*>(&e)) return "ScheduleRejected";
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
    return "IoError";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "InvalidArgument";
  return "Error";
}

ordered_json error_violations(const std::exception& e) {
  ordered_json out = ordered_json::array();
  if (const auto* r = dynamic_cast<const ScheduleRejected*>(&e)) {
    for (const auto& v : r->violations) out.push_back(violation_json(v));
  } else if (dynamic_cast<const InfeasibleWindow*>(&e) || dynamic_cast<const GridMismatch*>(&e) ||
             dynamic_cast<const RateExceeded*>(&e)) {
    out.push_back({{"kind", error_type(e)}, {"detail", e.what()}});
  }
  return out;
}

void remove_quietly(const fs::path& path) {
  std::error_code ec;
  fs::remove(path, ec);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const SchemaError*>(&e)) return kExitSchema;
  if (dynamic_cast<const InvalidDecay*>(&e) || dynamic_cast<const NonPhysical*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e))
    return kExitPhysics;
  if (dynamic_cast<const NotConverged*>(&e) || dynamic_cast<const DegeneratePhase*>(&e))
    return kExitFit;
  if (dynamic_cast<const InfeasibleWindow*>(&e) || dynamic_cast<const GridMismatch*>(&e) ||
      dynamic_cast<const RateExceeded*>(&e) || dynamic_cast<const UnknownRate*>(&e) ||
      dynamic_cast<const ScheduleRejected*>(&e))
    return kExitScheduler;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
    return kExitIo;
  return kExitOther;
}

void write_error_summary(const fs::path& output_dir, const std::string& command, int exit_code,
                         const std::string& type, const std::string& message) {
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  ordered_json summary = {{"status", "error"},
                          {"command", command},
                          {"exit_code", exit_code},
                          {"error", {{"type", type}, {"message", message}}},
                          {"violations", ordered_json::array()}};
  write_text_atomic(output_dir / kSummary, summary.dump(2) + "\n");
}

RunOutcome run(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  RunOutcome outcome;
  Artifacts artifacts;
  std::vector<fs::path> written;

  ordered_json summary = {{"status", "ok"},
                          {"command", to_string(config.command)},
                          {"exit_code", 0},
                          {"seed", config.seed},
                          {"config_hash", config.config_hash}};
  try {
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, SimulateParams>) run_simulate(config, p, artifacts);
          else if constexpr (std::is_same_v<T, ScanParams>) run_scan(config, p, artifacts);
          else if constexpr (std::is_same_v<T, BurstParams>) run_burst(config, p, artifacts);
          else if constexpr (std::is_same_v<T, RamseyParams>) run_ramsey(config, p, artifacts);
          else if constexpr (std::is_same_v<T, FitParams>) run_fit(config, p, artifacts);
          else if constexpr (std::is_same_v<T, EllipseParams>) run_ellipse(config, p, artifacts);
          else if constexpr (std::is_same_v<T, ScheduleParams>) run_schedule(config, p, artifacts);
          else run_power(config, p, artifacts);
        },
        config.params);

    fs::create_directories(dir);
    for (const auto& f : artifacts.files) {
      write_text_atomic(dir / f.name, f.text);
      written.push_back(dir / f.name);
    }
    summary["results"] = artifacts.results;
    ordered_json files = ordered_json::array();
    for (const auto& f : artifacts.files) files.push_back(f.name);
    summary["files"] = files;
    write_text_atomic(dir / kSummary, summary.dump(2) + "\n");
    written.push_back(dir / kSummary);
    outcome.files = written;
    return outcome;
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.message = e.what();
    for (const auto& name : output_names(config.command)) remove_quietly(dir / name);
    for (const auto& path : written) remove_quietly(path);

    summary["status"] = "error";
    summary["exit_code"] = outcome.exit_code;
    summary["error"] = {{"type", error_type(e)}, {"message", e.what()}};
    summary["violations"] = error_violations(e);
    try {
      std::error_code ec;
      fs::create_directories(dir, ec);
      write_text_atomic(dir / kSummary, summary.dump(2) + "\n");
      outcome.files = {dir / kSummary};
    } catch (const std::exception&) {
      if (outcome.exit_code == kExitOk) outcome.exit_code = kExitIo;
    }
    return outcome;
  }
}

}  // namespace ionpulse::io
