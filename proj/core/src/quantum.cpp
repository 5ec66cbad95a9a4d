#include "ionpulse/quantum.hpp"

#include "ionpulse/errors.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ionpulse::quantum {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

void require_angle(double value, const char* name) {
  if (!(value >= 0.0 && value < kTwoPi))
    throw std::invalid_argument(std::string(name) + " must lie in [0, 2pi)");
}

}  // namespace

void AtomModel::validate() const {
  if (!(gamma_total >= 0.0) || !std::isfinite(gamma_total))
    throw std::invalid_argument("gamma_total must be finite and >= 0");
  if (!(p52 > 0.0 && p52 < 1.0))
    throw std::invalid_argument("p52 must lie in (0, 1)");
}

TrainParams TrainParams::at_rate(double theta, double rep_rate_ghz, double delta,
                                 double delta_prime) {
  if (!(rep_rate_ghz > 0.0))
    throw std::invalid_argument("repetition rate must be positive");
  TrainParams params;
  params.theta = theta;
  params.delta = delta;
  params.delta_prime = delta_prime;
  params.tau_pulse = 1.0 / rep_rate_ghz;
  return params;
}

void TrainParams::validate() const {
  if (!(tau_pulse > 0.0) || !std::isfinite(tau_pulse))
    throw std::invalid_argument("tau_pulse must be positive");
  if (!std::isfinite(delta) || !std::isfinite(delta_prime))
    throw std::invalid_argument("detunings must be finite");
  require_angle(theta, "theta");
  if (first_pulse) {
    require_angle(first_pulse->theta, "theta_first");
    require_angle(first_pulse->phase, "dphi_first");
  }
}

DensityMatrix3::DensityMatrix3() : rho_(Matrix3c::Zero()) { rho_(kGround, kGround) = 1.0; }

DensityMatrix3 DensityMatrix3::basis(int level) {
  if (level < 0 || level > 2) throw std::out_of_range("level index must be 0, 1 or 2");
  Matrix3c m = Matrix3c::Zero();
  m(level, level) = 1.0;
  return DensityMatrix3(m);
}

DensityMatrix3 DensityMatrix3::pure(const Vector3c& psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("state vector must be non-zero");
  const Vector3c unit = psi / norm;
  return DensityMatrix3(unit * unit.adjoint());
}

DensityMatrix3 DensityMatrix3::maximally_mixed() {
  return DensityMatrix3(Matrix3c::Identity() / 3.0);
}

DensityMatrix3 DensityMatrix3::ground_dark_superposition(double phase) {
  Vector3c psi = Vector3c::Zero();
  psi(kGround) = 1.0;
  psi(kDark) = std::polar(1.0, phase);
  return pure(psi);
}

double DensityMatrix3::min_eigenvalue() const {
  const Matrix3c h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix3c> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool DensityMatrix3::is_valid(double tol) const {
  if (!rho_.allFinite()) return false;
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rho_.trace() - Complex(1.0)) > tol) return false;
  return min_eigenvalue() >= -tol;
}

void DensityMatrix3::hermitize_and_normalize() {
  Matrix3c h = 0.5 * (rho_ + rho_.adjoint());
  const double tr = h.trace().real();
  if (tr > 0.0) h /= tr;
  rho_ = h;
}

Matrix3c rotation_unitary(double theta, double phi) {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  const Complex i(0.0, 1.0);
  Matrix3c u = Matrix3c::Zero();
  u(kGround, kGround) = c;
  u(kExcited, kExcited) = c;
  u(kGround, kExcited) = i * s * std::polar(1.0, -phi);
  u(kExcited, kGround) = i * s * std::polar(1.0, phi);
  u(kDark, kDark) = 1.0;
  return u;
}

Matrix3c z_rotation_unitary(double delta, double delta_prime, double tau_pulse) {
  if (!(tau_pulse > 0.0)) throw std::invalid_argument("tau_pulse must be positive");
  Matrix3c u = Matrix3c::Zero();
  u(kGround, kGround) = std::polar(1.0, 0.5 * (delta + delta_prime) * tau_pulse);
  u(kExcited, kExcited) = std::polar(1.0, -0.5 * delta * tau_pulse);
  u(kDark, kDark) = std::polar(1.0, -0.5 * delta_prime * tau_pulse);
  return u;
}

KrausPair decay_kraus(const AtomModel& atom, double tau_pulse) {
  atom.validate();
  if (!(tau_pulse >= 0.0)) throw std::invalid_argument("tau_pulse must be >= 0");

  KrausPair k;
  double survival = 1.0;
  if (atom.convention == DecayConvention::IndependentRates) {
    k.p = -std::expm1(-atom.gamma_ps() * tau_pulse);
    k.q = -std::expm1(-atom.gamma_pd() * tau_pulse);
    survival = 1.0 - k.p - k.q;
  } else {
    const double decayed = -std::expm1(-atom.gamma_total * tau_pulse);
    k.p = (1.0 - atom.p52) * decayed;
    k.q = atom.p52 * decayed;
    survival = std::exp(-atom.gamma_total * tau_pulse);
  }
  if (survival < 0.0)
    throw InvalidDecay("1 - p - q = " + std::to_string(survival) +
                       " < 0: period too long for the two-operator decay map");

  k.no_jump = Matrix3c::Zero();
  k.no_jump(kGround, kGround) = 1.0;
  k.no_jump(kExcited, kExcited) = std::sqrt(survival);
  k.no_jump(kDark, kDark) = 1.0;
  k.jump = Matrix3c::Zero();
  k.jump(kGround, kExcited) = std::sqrt(k.p);
  k.jump(kDark, kExcited) = std::sqrt(k.q);
  return k;
}

PeriodMap::PeriodMap(const TrainParams& params, const AtomModel& atom, bool is_first)
    : kraus_(decay_kraus(atom, params.tau_pulse)) {
  const Matrix3c ur = is_first ? rotation_unitary(params.first_theta(), params.first_phase())
                               : rotation_unitary(params.theta, 0.0);
  unitary_ = z_rotation_unitary(params.delta, params.delta_prime, params.tau_pulse) * ur;
  survival_amp_ = kraus_.no_jump(kExcited, kExcited).real();
  cross_amp_ = std::sqrt(kraus_.p * kraus_.q);
}

void PeriodMap::apply(Matrix3c& rho) const {
  Matrix3c r;
  r.noalias() = unitary_ * rho * unitary_.adjoint();

  // N r N^+ + D r D^+ written out for the sparse N and D.
  const Complex excited = r(kExcited, kExcited);
  r(kGround, kGround) += kraus_.p * excited;
  r(kDark, kDark) += kraus_.q * excited;
  r(kGround, kDark) += cross_amp_ * excited;
  r(kDark, kGround) += cross_amp_ * excited;
  r(kExcited, kExcited) = survival_amp_ * survival_amp_ * excited;
  r(kGround, kExcited) *= survival_amp_;
  r(kExcited, kGround) *= survival_amp_;
  r(kDark, kExcited) *= survival_amp_;
  r(kExcited, kDark) *= survival_amp_;
  rho = r;
}

DensityMatrix3 step(const DensityMatrix3& rho, const TrainParams& params,
                    const AtomModel& atom, bool is_first) {
  params.validate();
  Matrix3c m = rho.matrix();
  PeriodMap(params, atom, is_first).apply(m);
  DensityMatrix3 out(m);
  out.hermitize_and_normalize();
  return out;
}

DensityMatrix3 apply_train(const DensityMatrix3& rho0, const TrainParams& params,
                           const AtomModel& atom, int n) {
  if (n < 0) throw std::invalid_argument("pulse count must be >= 0");
  params.validate();
  if (n == 0) return rho0;

  const PeriodMap first(params, atom, true);
  const PeriodMap regular(params, atom, false);
  Matrix3c m = rho0.matrix();
  DensityMatrix3 state(m);
  for (int k = 0; k < n; ++k) {
    (k == 0 ? first : regular).apply(m);
    state = DensityMatrix3(m);
    state.hermitize_and_normalize();
    m = state.matrix();
  }
  return state;
}

DensityMatrix3 simulate_train(const DensityMatrix3& rho0, const TrainParams& params,
                              const AtomModel& atom, int n) {
  return complete_decay(apply_train(rho0, params, atom, n), atom);
}

DensityMatrix3 complete_decay(const DensityMatrix3& rho, const AtomModel& atom) {
  Matrix3c m = rho.matrix();
  const double excited = m(kExcited, kExcited).real();
  m(kGround, kGround) += (1.0 - atom.p52) * excited;
  m(kDark, kDark) += atom.p52 * excited;
  m(kExcited, kExcited) = 0.0;
  m(kGround, kExcited) = m(kExcited, kGround) = 0.0;
  m(kDark, kExcited) = m(kExcited, kDark) = 0.0;
  return DensityMatrix3(m);
}

Observables observables(const DensityMatrix3& rho) {
  Observables o;
  o.p1 = rho.population(kGround);
  o.p2 = rho.population(kExcited);
  o.p3 = rho.population(kDark);
  o.c13 = rho(kDark, kGround);
  return o;
}

ReducedState reduce(const DensityMatrix3& rho) {
  ReducedState v;
  v << rho(kGround, kGround).real(), rho(kExcited, kExcited).real(),
      rho(kGround, kExcited).real(), rho(kGround, kExcited).imag(),
      rho(kDark, kDark).real();
  return v;
}

ReducedMap reduced_period_map(const TrainParams& params, const AtomModel& atom,
                              bool is_first) {
  const PeriodMap map(params, atom, is_first);
  const Complex i(0.0, 1.0);

  // Images of the Hermitian basis E11, E22, E12 + E21, i(E12 - E21), E33.
  std::array<Matrix3c, 5> inputs;
  for (auto& m : inputs) m = Matrix3c::Zero();
  inputs[0](kGround, kGround) = 1.0;
  inputs[1](kExcited, kExcited) = 1.0;
  inputs[2](kGround, kExcited) = 1.0;
  inputs[2](kExcited, kGround) = 1.0;
  inputs[3](kGround, kExcited) = i;
  inputs[3](kExcited, kGround) = -i;
  inputs[4](kDark, kDark) = 1.0;

  ReducedMap out;
  for (int col = 0; col < 5; ++col) {
    Matrix3c m = inputs[col];
    map.apply(m);
    out.col(col) = reduce(DensityMatrix3(m));
  }
  return out;
}

ReducedMap matrix_power(const ReducedMap& m, long long exponent) {
  if (exponent < 0) throw std::invalid_argument("exponent must be >= 0");
  ReducedMap result = ReducedMap::Identity();
  ReducedMap base = m;
  while (exponent > 0) {
    if (exponent & 1) result = (result * base).eval();
    exponent >>= 1;
    if (exponent > 0) base = (base * base).eval();
  }
  return result;
}

}  // namespace ionpulse::quantum
