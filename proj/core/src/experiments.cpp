#include "ionpulse/experiments.hpp"

#include "ionpulse/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ionpulse::experiments {

using quantum::kDark;
using quantum::kExcited;
using quantum::kGround;
using quantum::kPi;
using quantum::ReducedMap;
using quantum::ReducedState;

namespace {

ReducedState ground_reduced() {
  ReducedState v = ReducedState::Zero();
  v(0) = 1.0;
  return v;
}

}  // namespace

void DarkStateScanSpec::validate() const {
  if (!(rep_rate_ghz > 0.0)) throw std::invalid_argument("rep_rate_ghz must be positive");
  if (pulse_counts.empty()) throw std::invalid_argument("pulse_counts must not be empty");
  for (int n : pulse_counts)
    if (n < 1) throw std::invalid_argument("pulse counts must be >= 1");
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
}

void BurstSpec::validate(const AtomModel& atom) const {
  if (n < 1) throw std::invalid_argument("burst length n must be >= 1");
  if (m < 1) throw std::invalid_argument("burst repetitions m must be >= 1");
  if (atom.gamma_total > 0.0 && t_wait_ns < 10.0 / atom.gamma_total)
    throw std::invalid_argument("t_wait must be at least 10 excited-state lifetimes");
}

std::vector<double> RamseySpec::default_phases(int count) {
  if (count < 2) throw std::invalid_argument("need at least two analysis phases");
  std::vector<double> phases(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) phases[k] = 4.0 * kPi * k / (count - 1);
  return phases;
}

void RamseySpec::validate() const {
  if (n_pulses < 0) throw std::invalid_argument("n_pulses must be >= 0");
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  if (analysis_phases.size() < 3) throw std::invalid_argument("need at least three analysis phases");
  const auto [lo, hi] = std::minmax_element(analysis_phases.begin(), analysis_phases.end());
  if (*hi - *lo < 2.0 * kPi - 1e-9)
    throw std::invalid_argument("analysis phases must span a full 2pi period");
}

double dark_state_probability(const TrainParams& params, const AtomModel& atom, int n) {
  const auto rho = quantum::simulate_train(DensityMatrix3(), params, atom, n);
  return rho.population(kDark);
}

Eigen::MatrixXd dark_state_scan(const TrainParams& params, const AtomModel& atom,
                                std::span<const double> detunings,
                                std::span<const int> pulse_counts) {
  params.validate();
  for (int n : pulse_counts)
    if (n < 0) throw std::invalid_argument("pulse counts must be >= 0");

  Eigen::MatrixXd out(detunings.size(), pulse_counts.size());
  TrainParams p = params;
  for (std::size_t row = 0; row < detunings.size(); ++row) {
    p.delta = detunings[row];
    const ReducedMap first = quantum::reduced_period_map(p, atom, true);
    const ReducedMap regular = quantum::reduced_period_map(p, atom, false);
    const ReducedState after_first = first * ground_reduced();
    for (std::size_t col = 0; col < pulse_counts.size(); ++col) {
      const int n = pulse_counts[col];
      const ReducedState v =
          n == 0 ? ground_reduced() : ReducedState(quantum::matrix_power(regular, n - 1) * after_first);
      out(row, col) = quantum::dark_after_decay(v, atom);
    }
  }
  return out;
}

double burst_accumulation(const TrainParams& params, const AtomModel& atom,
                          const BurstSpec& burst) {
  burst.validate(atom);
  DensityMatrix3 rho;
  for (int k = 0; k < burst.m; ++k) rho = quantum::simulate_train(rho, params, atom, burst.n);
  return rho.population(kDark);
}

Eigen::MatrixXd burst_map(const TrainParams& params, const AtomModel& atom,
                          std::span<const double> detunings, int n_max, int m) {
  params.validate();
  if (n_max < 1 || m < 1) throw std::invalid_argument("n_max and m must be >= 1");

  // Each burst from |1> pumps a fraction f into |3>; starting from
  // diag(1 - P, 0, P) the 1-2 dynamics scale with 1 - P, so m bursts give
  // 1 - (1 - f)^m.
  Eigen::MatrixXd out(detunings.size(), n_max);
  TrainParams p = params;
  for (std::size_t row = 0; row < detunings.size(); ++row) {
    p.delta = detunings[row];
    const ReducedMap first = quantum::reduced_period_map(p, atom, true);
    const ReducedMap regular = quantum::reduced_period_map(p, atom, false);
    ReducedState v = first * ground_reduced();
    for (int n = 1; n <= n_max; ++n) {
      if (n > 1) v = (regular * v).eval();
      const double f = quantum::dark_after_decay(v, atom);
      out(row, n - 1) = -std::expm1(m * std::log1p(-std::min(f, 1.0)));
    }
  }
  return out;
}

double invert_pp(double p_d, int m, double p52) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (!(p_d >= 0.0 && p_d <= 1.0)) throw std::invalid_argument("P_D must lie in [0, 1]");
  return (1.0 - std::pow(1.0 - p_d, 1.0 / m)) / p52;
}

double accumulate_pp(double p_p, int m, double p52) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  return 1.0 - std::pow(1.0 - p52 * p_p, m);
}

double pi_scan_model(double p_light, double p_max, double omega) {
  if (!(p_light >= 0.0)) throw std::invalid_argument("light power must be >= 0");
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
  const double s = std::sin(std::sqrt(p_light) / omega);
  return p_max * s * s;
}

DensityMatrix3 ramsey_state(const TrainParams& params, const AtomModel& atom, int n) {
  return quantum::simulate_train(DensityMatrix3::ground_dark_superposition(), params, atom, n);
}

double analysis_dark_probability(const DensityMatrix3& rho, double phi_analysis) {
  // pi/2 rotation on 1<->3 about the axis at angle phi - pi/2.
  const double axis = phi_analysis - 0.5 * kPi;
  const double a = std::sqrt(0.5);
  const quantum::Complex i(0.0, 1.0);
  quantum::Matrix3c u = quantum::Matrix3c::Zero();
  u(kGround, kGround) = a;
  u(kDark, kDark) = a;
  u(kGround, kDark) = i * a * std::polar(1.0, -axis);
  u(kDark, kGround) = i * a * std::polar(1.0, axis);
  u(kExcited, kExcited) = 1.0;
  const quantum::Matrix3c out = u * rho.matrix() * u.adjoint();
  return out(kDark, kDark).real();
}

double ramsey_point(const TrainParams& params, const AtomModel& atom, int n,
                    double phi_analysis) {
  return analysis_dark_probability(ramsey_state(params, atom, n), phi_analysis);
}

ContrastPhase contrast_and_phase(const DensityMatrix3& rho) {
  const quantum::Complex r13 = rho(kGround, kDark);
  const quantum::Complex r31 = rho(kDark, kGround);
  const quantum::Complex i(0.0, 1.0);
  const double tx = (r31 + r13).real();
  const double ty = (-i * r31 + i * r13).real();

  ContrastPhase out;
  out.contrast = std::hypot(tx, ty);
  if (out.contrast < 1e-12) {
    out.degenerate = true;
    out.phase = 0.0;
  } else {
    out.phase = std::atan2(ty, tx);
  }
  return out;
}

std::vector<ContrastPhase> ramsey_curve(const TrainParams& params, const AtomModel& atom,
                                        int n_max) {
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
  params.validate();
  // complete_decay leaves rho13 untouched, so the contrast and phase can be
  // read off the undecayed state after every period.
  std::vector<ContrastPhase> out;
  out.reserve(static_cast<std::size_t>(n_max) + 1);
  const quantum::PeriodMap first(params, atom, true);
  const quantum::PeriodMap regular(params, atom, false);
  quantum::Matrix3c rho = DensityMatrix3::ground_dark_superposition().matrix();
  out.push_back(contrast_and_phase(DensityMatrix3(rho)));
  for (int k = 1; k <= n_max; ++k) {
    (k == 1 ? first : regular).apply(rho);
    out.push_back(contrast_and_phase(DensityMatrix3(rho)));
  }
  return out;
}

FringeFit fit_fringe(std::span<const double> phases, std::span<const double> probabilities,
                     std::span<const double> variances) {
  if (phases.size() != probabilities.size())
    throw std::invalid_argument("phase and probability series differ in length");
  if (!variances.empty() && variances.size() != phases.size())
    throw std::invalid_argument("variance series differs in length");
  if (phases.size() < 3) throw std::invalid_argument("need at least three fringe points");

  const Eigen::Index n = static_cast<Eigen::Index>(phases.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    design(k, 0) = 1.0;
    design(k, 1) = std::cos(phases[k]);
    design(k, 2) = std::sin(phases[k]);
    y(k) = probabilities[k];
    if (!variances.empty()) {
      if (!(variances[k] > 0.0)) throw std::invalid_argument("variances must be positive");
      w(k) = 1.0 / variances[k];
    }
  }
  const Eigen::Matrix3d normal = design.transpose() * w.asDiagonal() * design;
  const Eigen::Vector3d rhs = design.transpose() * w.asDiagonal() * y;
  const Eigen::Vector3d coef = normal.ldlt().solve(rhs);
  const Eigen::VectorXd resid = design * coef - y;

  Eigen::Matrix3d cov = normal.inverse();
  if (variances.empty() && n > 3) cov *= resid.squaredNorm() / static_cast<double>(n - 3);

  FringeFit fit;
  fit.offset = coef(0);
  const double amplitude = std::hypot(coef(1), coef(2));
  fit.contrast = 2.0 * amplitude;
  fit.rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  if (amplitude < 1e-12) {
    fit.degenerate = true;
    fit.contrast_error = 2.0 * std::sqrt(std::max(0.0, 0.5 * (cov(1, 1) + cov(2, 2))));
    return fit;
  }
  fit.phase = std::atan2(coef(2), coef(1));
  // Radial and tangential projections of the (cos, sin) coefficient covariance.
  const Eigen::Vector2d radial(coef(1) / amplitude, coef(2) / amplitude);
  const Eigen::Vector2d tangential(-radial(1), radial(0));
  const Eigen::Matrix2d c2 = cov.block<2, 2>(1, 1);
  fit.contrast_error = 2.0 * std::sqrt(std::max(0.0, radial.dot(c2 * radial)));
  fit.phase_error = std::sqrt(std::max(0.0, tangential.dot(c2 * tangential))) / amplitude;
  return fit;
}

double binomial_variance(double p_hat, int shots) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  const double p = std::clamp(p_hat, 0.0, 1.0);
  return std::max(p * (1.0 - p), 0.25 / shots) / shots;
}

int synth_shots(double true_prob, int shots, std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  const double p = std::clamp(true_prob, 0.0, 1.0);
  auto rng = make_rng(seed);
  std::binomial_distribution<int> dist(shots, p);
  return dist(rng);
}

}  // namespace ionpulse::experiments
