#pragma once

// Three-level ion driven by a train of instantaneous pulses.
//
// Levels are indexed 0, 1, 2 internally and correspond to |1> = 4S1/2,
// |2> = 4P3/2 and |3> = 3D5/2. One pulse period is modelled as
//
//   rho -> N Uz Ur rho Ur^+ Uz^+ N^+  +  D Uz Ur rho Ur^+ Uz^+ D^+
//
// with Ur a rotation on the 1-2 subsystem, Uz a diagonal detuning phase and
// (N, D) the Kraus pair for spontaneous decay of |2> during the period.
// Angular quantities are in rad and rad/ns, times in ns.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>

namespace ionpulse::quantum {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

inline constexpr int kGround = 0;   // |1>, 4S1/2
inline constexpr int kExcited = 1;  // |2>, 4P3/2
inline constexpr int kDark = 2;     // |3>, 3D5/2

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLifetimeNs = 6.924;
inline constexpr double kBranchingD52 = 0.0587;

// How the per-period decay probabilities (p, q) are derived from the rates.
//
// IndependentRates evaluates p = 1 - exp(-G21 t) and q = 1 - exp(-G23 t)
// independently. Its survival 1 - p - q differs from exp(-G t) at second
// order and the branching q / (p + q) drifts from p52 by the same amount.
//
// ExactBranching uses p = (G21/G)(1 - exp(-G t)), q = (G23/G)(1 - exp(-G t)),
// which agrees with IndependentRates to first order in G t and keeps the survival
// and the branching ratio exact.
enum class DecayConvention { ExactBranching, IndependentRates };

struct AtomModel {
  double gamma_total = 1.0 / kLifetimeNs;  // 1/ns
  double p52 = kBranchingD52;
  DecayConvention convention = DecayConvention::ExactBranching;

  double gamma_ps() const { return (1.0 - p52) * gamma_total; }
  double gamma_pd() const { return p52 * gamma_total; }

  // gamma_total == 0 is accepted and disables decay during the train.
  void validate() const;

  static AtomModel defaults() { return {}; }
  static AtomModel without_decay() {
    AtomModel atom;
    atom.gamma_total = 0.0;
    return atom;
  }
};

// Amplitude and phase deviation of the first pulse after a dark time.
struct FirstPulseAnomaly {
  double theta = 0.0;  // rotation angle of the first pulse
  double phase = 0.0;  // rotation axis angle from x in the equatorial plane
};

struct TrainParams {
  double theta = 0.0;        // rotation angle per pulse
  double delta = 0.0;        // detuning on 1<->2, rad/ns
  double delta_prime = 0.0;  // shift on 1<->3, rad/ns
  double tau_pulse = 0.8;    // ns
  std::optional<FirstPulseAnomaly> first_pulse;

  static TrainParams at_rate(double theta, double rep_rate_ghz,
                             double delta = 0.0, double delta_prime = 0.0);

  double rep_rate_ghz() const { return 1.0 / tau_pulse; }
  double first_theta() const { return first_pulse ? first_pulse->theta : theta; }
  double first_phase() const { return first_pulse ? first_pulse->phase : 0.0; }

  // Angles must lie in [0, 2pi) and tau_pulse must be positive.
  void validate() const;
};

class DensityMatrix3 {
 public:
  DensityMatrix3();  // ground state |1><1|
  explicit DensityMatrix3(const Matrix3c& entries) : rho_(entries) {}

  static DensityMatrix3 basis(int level);
  static DensityMatrix3 pure(const Vector3c& psi);
  static DensityMatrix3 maximally_mixed();
  // (|1> + e^{i phase}|3>)/sqrt(2), the state after an ideal pi/2 pulse on 1<->3.
  static DensityMatrix3 ground_dark_superposition(double phase = 0.0);

  const Matrix3c& matrix() const { return rho_; }
  Complex operator()(int row, int col) const { return rho_(row, col); }
  double population(int level) const { return rho_(level, level).real(); }
  double trace() const { return rho_.trace().real(); }

  // Hermitian, unit trace and eigenvalues >= -tol.
  bool is_valid(double tol = 1e-10) const;
  double min_eigenvalue() const;

  // rho <- (rho + rho^+)/2 followed by trace renormalisation.
  void hermitize_and_normalize();

 private:
  Matrix3c rho_;
};

struct KrausPair {
  Matrix3c no_jump;  // N
  Matrix3c jump;     // D
  double p = 0.0;    // |2> -> |1> probability per period
  double q = 0.0;    // |2> -> |3> probability per period
};

struct Observables {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
  Complex c13;  // Tr(|1><3| rho) = rho_31
};

// exp((i/2) theta (cos(phi) sx + sin(phi) sy)) on the 1-2 subsystem.
Matrix3c rotation_unitary(double theta, double phi);

// exp((i/2)[delta (|1><1| - |2><2|) + delta_prime (|1><1| - |3><3|)] tau).
Matrix3c z_rotation_unitary(double delta, double delta_prime, double tau_pulse);

// Throws InvalidDecay when 1 - p - q < 0.
KrausPair decay_kraus(const AtomModel& atom, double tau_pulse);

// One pulse period. The first pulse of a train uses the configured anomaly.
DensityMatrix3 step(const DensityMatrix3& rho, const TrainParams& params,
                    const AtomModel& atom, bool is_first);

// n periods without the terminal decay.
DensityMatrix3 apply_train(const DensityMatrix3& rho0, const TrainParams& params,
                           const AtomModel& atom, int n);

// n periods followed by complete_decay.
DensityMatrix3 simulate_train(const DensityMatrix3& rho0,
                              const TrainParams& params, const AtomModel& atom,
                              int n);

// Moves all |2> population to |1> and |3> with branching p52 and drops every
// coherence that involves |2>.
DensityMatrix3 complete_decay(const DensityMatrix3& rho,
                              const AtomModel& atom = AtomModel::defaults());

Observables observables(const DensityMatrix3& rho);

// Precomputed single-period map, reused across a train.
class PeriodMap {
 public:
  PeriodMap(const TrainParams& params, const AtomModel& atom, bool is_first);

  void apply(Matrix3c& rho) const;
  const Matrix3c& unitary() const { return unitary_; }
  const KrausPair& kraus() const { return kraus_; }

 private:
  Matrix3c unitary_;
  KrausPair kraus_;
  double survival_amp_ = 1.0;
  double cross_amp_ = 0.0;  // sqrt(p q), the 1-3 term of D rho D^+
};

// The populations and the 1-2 coherence form a closed linear system under the
// period map. The reduced state is (rho11, rho22, Re rho12, Im rho12, rho33).
using ReducedState = Eigen::Matrix<double, 5, 1>;
using ReducedMap = Eigen::Matrix<double, 5, 5>;

ReducedState reduce(const DensityMatrix3& rho);
ReducedMap reduced_period_map(const TrainParams& params, const AtomModel& atom,
                              bool is_first);
ReducedMap matrix_power(const ReducedMap& m, long long exponent);

// P3 after complete decay of a reduced state.
inline double dark_after_decay(const ReducedState& v, const AtomModel& atom) {
  return v(4) + atom.p52 * v(1);
}

enum class Level : int { Ground = 1, Excited = 2, Dark = 3 };

// One quantum-jump trajectory: per period the unitaries act on the state
// vector, then a jump |2> -> |1> or |2> -> |3> happens with probability
// p |c2|^2 or q |c2|^2, otherwise |2> is damped by sqrt(1 - p - q). With
// final_decay the |2> amplitude finally branches with p52 before the
// projective readout. Deterministic for a fixed seed.
Level mc_trajectory_final_state(const Vector3c& psi0, const TrainParams& params,
                                const AtomModel& atom, int n, std::uint64_t seed,
                                bool final_decay = true);

struct LevelFrequencies {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
  long long samples = 0;
};

// Runs `samples` trajectories with seeds derived from `seed`.
LevelFrequencies mc_level_frequencies(const Vector3c& psi0,
                                      const TrainParams& params,
                                      const AtomModel& atom, int n,
                                      long long samples, std::uint64_t seed,
                                      bool final_decay = true);

}  // namespace ionpulse::quantum
