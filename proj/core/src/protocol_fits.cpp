#include "ionpulse/protocol_fits.hpp"

#include "ionpulse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ionpulse::estimation {

using experiments::binomial_variance;
using quantum::kPi;
using quantum::ReducedMap;
using quantum::ReducedState;
using quantum::TrainParams;

namespace {

constexpr double kTwoPi = 2.0 * kPi;

double wrap_2pi(double phi) {
  double r = std::fmod(phi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r >= kTwoPi ? 0.0 : r;
}

// (-pi, pi]
double wrap_pi(double phi) {
  double r = std::remainder(phi, kTwoPi);
  return r <= -kPi ? r + kTwoPi : r;
}

ReducedState ground_reduced() {
  ReducedState v = ReducedState::Zero();
  v(0) = 1.0;
  return v;
}

double tau_of(double rep_rate_ghz) {
  if (!(rep_rate_ghz > 0.0)) throw std::invalid_argument("rep_rate_ghz must be positive");
  return 1.0 / rep_rate_ghz;
}

std::map<double, std::vector<std::size_t>> group_by_detuning(std::span<const ScanPoint> data) {
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[data[i].detuning].push_back(i);
  return groups;
}

void check_points(std::span<const ScanPoint> data) {
  if (data.empty()) throw std::invalid_argument("no data points");
  for (const auto& p : data) {
    if (p.n < 1) throw std::invalid_argument("pulse counts must be >= 1");
    if (p.shots < 1) throw std::invalid_argument("shots must be >= 1");
    if (!(p.p_d >= 0.0 && p.p_d <= 1.0)) throw std::invalid_argument("P_D must lie in [0, 1]");
    if (!std::isfinite(p.detuning)) throw std::invalid_argument("detuning must be finite");
  }
}

void fill_observations(std::span<const ScanPoint> data, FitProblem& problem) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  problem.observed.resize(n);
  problem.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    problem.observed(i) = data[i].p_d;
    problem.weights(i) = 1.0 / binomial_variance(data[i].p_d, data[i].shots);
  }
}

// Ranks starts by chi2 and runs the optimiser from the best `refine` of them.
FitResult screen_and_refine(const FitProblem& problem, std::vector<Eigen::VectorXd> starts,
                            int refine, const LmOptions& lm, int tie_index = 0) {
  if (refine > 0 && static_cast<int>(starts.size()) > refine) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const Eigen::VectorXd r = problem.model(starts[i]) - problem.observed;
      ranked.emplace_back((r.array().square() * problem.weights.array()).sum(), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Eigen::VectorXd> kept;
    for (int i = 0; i < refine; ++i) kept.push_back(starts[ranked[i].second]);
    starts = std::move(kept);
  }
  return multi_start(problem, starts, lm, tie_index);
}

// Replaces the observed-fraction weights by weights from the fitted model and
// refits from the previous optimum. Observed-fraction weights favour points
// that fluctuated towards 0 or 1 and bias the estimate.
FitResult reweight(FitProblem& problem, FitResult fit, std::span<const ScanPoint> data,
                   int iterations, const LmOptions& lm) {
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd predicted = problem.model(fit.values);
    for (Eigen::Index i = 0; i < predicted.size(); ++i)
      problem.weights(i) = 1.0 / binomial_variance(predicted(i), data[i].shots);
    for (std::size_t i = 0; i < problem.params.size(); ++i)
      problem.params[i].initial = fit.values(static_cast<Eigen::Index>(i));
    fit = least_squares(problem, lm);
  }
  return fit;
}

std::vector<double> uniform_starts(double lo, double hi, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(lo + (hi - lo) * (k + 0.5) / count);
  return out;
}

}  // namespace

Eigen::VectorXd many_pulse_model(std::span<const ScanPoint> data, double rep_rate_ghz,
                                 double theta, double detuning_offset, const AtomModel& atom) {
  const double tau = tau_of(rep_rate_ghz);
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.size()));
  TrainParams params;
  params.theta = theta;
  params.tau_pulse = tau;
  for (const auto& [detuning, indices] : group_by_detuning(data)) {
    params.delta = detuning + detuning_offset;
    const ReducedMap map = quantum::reduced_period_map(params, atom, false);
    std::map<int, double> cache;
    for (std::size_t i : indices) {
      const int n = data[i].n;
      auto it = cache.find(n);
      if (it == cache.end()) {
        const ReducedState v = quantum::matrix_power(map, n) * ground_reduced();
        it = cache.emplace(n, quantum::dark_after_decay(v, atom)).first;
      }
      out(static_cast<Eigen::Index>(i)) = it->second;
    }
  }
  return out;
}

FitResult fit_many_pulse_scan(std::span<const ScanPoint> data, double rep_rate_ghz,
                              const ManyPulseFitOptions& options) {
  check_points(data);
  tau_of(rep_rate_ghz);
  const std::vector<ScanPoint> points(data.begin(), data.end());

  FitProblem problem;
  problem.params = {{"theta", kPi / 2, 0.0, kPi},
                    {"detuning_offset", 0.0, -options.offset_bound, options.offset_bound}};
  const AtomModel atom = options.atom;
  problem.model = [points, rep_rate_ghz, atom](const Eigen::VectorXd& x) {
    return many_pulse_model(points, rep_rate_ghz, x(0), x(1), atom);
  };
  fill_observations(points, problem);

  std::vector<Eigen::VectorXd> starts;
  for (double theta : uniform_starts(0.0, kPi, options.theta_starts))
    starts.push_back(Eigen::Vector2d(theta, 0.0));
  const FitResult first = multi_start(problem, starts, options.lm, 0);
  return reweight(problem, first, points, options.reweight_iterations, options.lm);
}

Eigen::VectorXd single_pulse_model(std::span<const ScanPoint> data, double rep_rate_ghz,
                                   double theta, double dphi_first, double detuning_offset,
                                   double theta_first, const AtomModel& atom, int m) {
  const double tau = tau_of(rep_rate_ghz);
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.size()));
  TrainParams params;
  params.theta = theta;
  params.tau_pulse = tau;
  params.first_pulse = quantum::FirstPulseAnomaly{theta_first < 0.0 ? theta : theta_first,
                                                  wrap_2pi(dphi_first)};
  for (const auto& [detuning, indices] : group_by_detuning(data)) {
    params.delta = detuning + detuning_offset;
    int n_max = 0;
    for (std::size_t i : indices) n_max = std::max(n_max, data[i].n);

    const ReducedMap first = quantum::reduced_period_map(params, atom, true);
    const ReducedMap regular = quantum::reduced_period_map(params, atom, false);
    std::vector<double> accumulated(static_cast<std::size_t>(n_max) + 1, 0.0);
    ReducedState v = first * ground_reduced();
    for (int n = 1; n <= n_max; ++n) {
      if (n > 1) v = (regular * v).eval();
      const double f = std::min(quantum::dark_after_decay(v, atom), 1.0);
      accumulated[n] = -std::expm1(m * std::log1p(-f));
    }
    for (std::size_t i : indices) out(static_cast<Eigen::Index>(i)) = accumulated[data[i].n];
  }
  return out;
}

FitResult fit_single_pulse_map(std::span<const ScanPoint> data, double rep_rate_ghz,
                               bool fit_first_area, const SinglePulseFitOptions& options) {
  check_points(data);
  tau_of(rep_rate_ghz);
  if (options.m < 1) throw std::invalid_argument("m must be >= 1");
  {
    std::vector<double> detunings;
    std::vector<int> counts;
    for (const auto& p : data) {
      detunings.push_back(p.detuning);
      counts.push_back(p.n);
    }
    std::sort(detunings.begin(), detunings.end());
    std::sort(counts.begin(), counts.end());
    if (std::unique(detunings.begin(), detunings.end()) - detunings.begin() < 2 ||
        std::unique(counts.begin(), counts.end()) - counts.begin() < 2)
      throw std::invalid_argument("single-pulse map needs at least two detunings and two pulse counts");
  }
  const std::vector<ScanPoint> points(data.begin(), data.end());

  FitProblem problem;
  problem.params = {{"theta", kPi / 2, 0.0, kPi},
                    {"dphi_first", kPi, 0.0, kTwoPi},
                    {"detuning_offset", 0.0, -options.offset_bound, options.offset_bound}};
  if (fit_first_area) problem.params.push_back({"theta_first", kPi / 2, 0.0, kPi});
  const AtomModel atom = options.atom;
  const int m = options.m;
  problem.model = [points, rep_rate_ghz, atom, m, fit_first_area](const Eigen::VectorXd& x) {
    return single_pulse_model(points, rep_rate_ghz, x(0), x(1), x(2),
                              fit_first_area ? x(3) : -1.0, atom, m);
  };
  fill_observations(points, problem);

  std::vector<Eigen::VectorXd> starts;
  const auto thetas = uniform_starts(0.0, kPi, options.theta_starts);
  std::vector<double> phases;
  for (int k = 0; k < options.phase_starts; ++k) phases.push_back(kTwoPi * k / options.phase_starts);
  const auto firsts = fit_first_area ? uniform_starts(0.0, kPi, options.first_area_starts)
                                     : std::vector<double>{-1.0};
  for (double theta : thetas)
    for (double phi : phases)
      for (double first : firsts) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(fit_first_area ? 4 : 3);
        s(0) = theta;
        s(1) = phi;
        if (fit_first_area) s(3) = first;
        starts.push_back(s);
      }
  FitResult result = screen_and_refine(problem, starts, options.refine, options.lm, 0);
  result = reweight(problem, result, points, options.reweight_iterations, options.lm);
  result.values(1) = wrap_2pi(result.values(1));
  return result;
}

PiScanPoint pi_scan_point(double p_light, int successes, int shots, int m, double p52) {
  if (shots < 1 || successes < 0 || successes > shots)
    throw std::invalid_argument("successes must lie in [0, shots]");
  const double p_d = static_cast<double>(successes) / shots;
  PiScanPoint out;
  out.p_light = p_light;
  out.p_p = experiments::invert_pp(p_d, m, p52);
  const double p_eff = std::min(p_d, 1.0 - 0.5 / shots);
  const double slope = std::pow(1.0 - p_eff, 1.0 / m - 1.0) / (m * p52);
  out.sigma = slope * std::sqrt(binomial_variance(p_d, shots));
  out.shots = shots;
  out.m = m;
  out.p52 = p52;
  return out;
}

FitResult fit_pi_scan(std::span<const PiScanPoint> data, const LmOptions& lm, int reweight_iterations) {
  if (data.size() < 5) throw std::invalid_argument("pi scan needs at least five points");
  const std::vector<PiScanPoint> points(data.begin(), data.end());
  for (const auto& p : points)
    if (!(p.p_light >= 0.0) || !std::isfinite(p.p_p))
      throw std::invalid_argument("pi scan points need p_light >= 0 and finite P_P");

  FitProblem problem;
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  problem.observed.resize(n);
  problem.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    problem.observed(i) = points[i].p_p;
    problem.weights(i) = points[i].sigma > 0.0 ? 1.0 / (points[i].sigma * points[i].sigma) : 1.0;
  }
  problem.model = [points](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = experiments::pi_scan_model(points[i].p_light, x(0), x(1));
    return out;
  };

  const auto peak = std::max_element(points.begin(), points.end(),
                                     [](const auto& a, const auto& b) { return a.p_p < b.p_p; });
  const double root_max =
      std::sqrt(std::max_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
                  return a.p_light < b.p_light;
                })->p_light);
  const double omega0 = std::max(2.0 * std::sqrt(peak->p_light) / kPi, 1e-3 * std::max(root_max, 1.0));
  const double pmax0 = std::clamp(peak->p_p, 0.05, 1.2);
  problem.params = {{"p_max", pmax0, 0.0, 1.2},
                    {"omega", omega0, omega0 * 1e-3, omega0 * 1e3}};

  std::vector<Eigen::VectorXd> starts;
  for (double scale : {0.6, 0.8, 1.0, 1.25, 1.6})
    starts.push_back(Eigen::Vector2d(pmax0, omega0 * scale));
  auto fit = multi_start(problem, starts, lm, 0);

  const bool counted = std::all_of(points.begin(), points.end(), [](const auto& p) { return p.shots > 0 && p.m > 0; });
  if (!counted) return fit;
  for (int it = 0; it < reweight_iterations; ++it) {
    const Eigen::VectorXd pred = problem.model(fit.values);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = points[i];
      const double p_d = experiments::accumulate_pp(std::clamp(pred(i), 0.0, 1.0), p.m, p.p52);
      const double p_eff = std::min(p_d, 1.0 - 0.5 / p.shots);
      const double slope = std::pow(1.0 - p_eff, 1.0 / p.m - 1.0) / (p.m * p.p52);
      const double sigma = slope * std::sqrt(binomial_variance(p_d, p.shots));
      problem.weights(i) = 1.0 / (sigma * sigma);
    }
    fit = multi_start(problem, {fit.values}, lm, 0);
  }
  return fit;
}

RamseyFitResult fit_ramsey(std::span<const RamseyFringe> fringes, double rep_rate_ghz,
                           const RamseyFitOptions& options) {
  const double tau = tau_of(rep_rate_ghz);
  {
    std::vector<int> ns;
    for (const auto& f : fringes) ns.push_back(f.n);
    std::sort(ns.begin(), ns.end());
    if (std::unique(ns.begin(), ns.end()) - ns.begin() < 3)
      throw std::invalid_argument("Ramsey fit needs at least three distinct pulse counts");
  }

  RamseyFitResult out;
  std::vector<int> ns;
  std::vector<double> c_obs, c_sigma, phi_obs, phi_sigma;
  std::vector<bool> use_phase;
  int n_max = 0;
  for (const auto& fringe : fringes) {
    if (fringe.n < 0) throw std::invalid_argument("pulse counts must be >= 0");
    std::vector<double> variances;
    for (double p : fringe.p3) variances.push_back(binomial_variance(p, fringe.shots));
    const auto fit = experiments::fit_fringe(fringe.phases, fringe.p3, variances);
    out.fringes.push_back(fit);
    ns.push_back(fringe.n);
    n_max = std::max(n_max, fringe.n);
    c_obs.push_back(fit.contrast);
    c_sigma.push_back(std::max(fit.contrast_error, 1e-12));
    const bool ok = !fit.degenerate && fit.contrast > options.noise_floor_sigmas * fit.contrast_error;
    use_phase.push_back(ok);
    phi_obs.push_back(fit.phase);
    phi_sigma.push_back(std::max(fit.phase_error, 1e-12));
    if (!ok) out.excluded_phase_n.push_back(fringe.n);
  }

  const std::size_t k = ns.size();
  std::vector<std::size_t> phase_rows;
  for (std::size_t i = 0; i < k; ++i)
    if (use_phase[i]) phase_rows.push_back(i);

  FitProblem problem;
  const Eigen::Index rows = static_cast<Eigen::Index>(k + phase_rows.size());
  problem.observed = Eigen::VectorXd::Zero(rows);
  problem.weights.resize(rows);
  for (std::size_t i = 0; i < k; ++i) {
    problem.observed(static_cast<Eigen::Index>(i)) = c_obs[i];
    problem.weights(static_cast<Eigen::Index>(i)) = 1.0 / (c_sigma[i] * c_sigma[i]);
  }
  for (std::size_t j = 0; j < phase_rows.size(); ++j) {
    const double s = phi_sigma[phase_rows[j]];
    problem.weights(static_cast<Eigen::Index>(k + j)) = 1.0 / (s * s);
  }

  const AtomModel atom = options.atom;
  const auto first_pulse = options.first_pulse;
  auto curve_at = [=](double theta, double delta, double delta_prime) {
    TrainParams params;
    params.theta = theta;
    params.delta = delta;
    params.delta_prime = delta_prime;
    params.tau_pulse = tau;
    params.first_pulse = first_pulse;
    return experiments::ramsey_curve(params, atom, n_max);
  };
  // Phase rows carry the wrapped model-minus-data difference against zero.
  problem.model = [=](const Eigen::VectorXd& x) {
    const auto curve = curve_at(x(0), x(1), x(2));
    Eigen::VectorXd pred(rows);
    for (std::size_t i = 0; i < k; ++i)
      pred(static_cast<Eigen::Index>(i)) = x(3) * curve[ns[i]].contrast;
    for (std::size_t j = 0; j < phase_rows.size(); ++j) {
      const std::size_t i = phase_rows[j];
      pred(static_cast<Eigen::Index>(k + j)) = wrap_pi(curve[ns[i]].phase - phi_obs[i]);
    }
    return pred;
  };

  const double bound = kPi / tau;
  problem.params = {{"theta", kPi / 2, 0.0, kPi},
                    {"delta", std::clamp(options.delta_initial, -bound, bound), -bound, bound},
                    {"delta_prime", std::clamp(options.delta_prime_initial, -bound, bound), -bound, bound},
                    {"contrast_scale", 1.0, 0.0, 2.0}};

  auto detuning_grid = [&](double init) {
    std::vector<double> grid;
    for (int j = 0; j < options.detuning_starts; ++j) {
      const double d = init + kTwoPi / tau * j / options.detuning_starts;
      grid.push_back(wrap_pi(d * tau) / tau);
    }
    return grid;
  };
  std::vector<Eigen::VectorXd> starts;
  for (double theta : uniform_starts(0.0, kPi, options.theta_starts))
    for (double d : detuning_grid(problem.params[1].initial))
      for (double dp : detuning_grid(problem.params[2].initial)) {
        const auto curve = curve_at(theta, d, dp);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const double w = 1.0 / (c_sigma[i] * c_sigma[i]);
          num += w * c_obs[i] * curve[ns[i]].contrast;
          den += w * curve[ns[i]].contrast * curve[ns[i]].contrast;
        }
        const double scale = den > 0.0 ? std::clamp(num / den, 0.0, 2.0) : 1.0;
        Eigen::Vector4d s(theta, d, dp, scale);
        starts.push_back(s);
      }
  out.fit = screen_and_refine(problem, starts, options.refine, options.lm, 0);
  return out;
}

}  // namespace ionpulse::estimation
