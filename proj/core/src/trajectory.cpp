#include "ionpulse/quantum.hpp"

#include "ionpulse/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ionpulse::quantum {

namespace {

class Trajectory {
 public:
  Trajectory(const TrainParams& params, const AtomModel& atom)
      : kraus_(decay_kraus(atom, params.tau_pulse)), p52_(atom.p52) {
    const Matrix3c uz = z_rotation_unitary(params.delta, params.delta_prime, params.tau_pulse);
    first_ = uz * rotation_unitary(params.first_theta(), params.first_phase());
    regular_ = uz * rotation_unitary(params.theta, 0.0);
    survival_amp_ = kraus_.no_jump(kExcited, kExcited).real();
  }

  Level run(const Vector3c& psi0, int n, std::mt19937_64& rng, bool final_decay) const {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Vector3c psi = psi0;
    for (int k = 0; k < n; ++k) {
      psi = (k == 0 ? first_ : regular_) * psi;
      const double excited = std::norm(psi(kExcited));
      const double u = uniform(rng);
      if (u < kraus_.p * excited) {
        psi = Vector3c::Zero();
        psi(kGround) = 1.0;
      } else if (u < (kraus_.p + kraus_.q) * excited) {
        // |3> is untouched by the remaining pulses up to a phase.
        return Level::Dark;
      } else {
        psi(kExcited) *= survival_amp_;
        psi.normalize();
      }
    }

    const double p1 = std::norm(psi(kGround));
    const double p2 = std::norm(psi(kExcited));
    const double u = uniform(rng);
    if (!final_decay) {
      if (u < p1) return Level::Ground;
      if (u < p1 + p2) return Level::Excited;
      return Level::Dark;
    }
    if (u < p1 + (1.0 - p52_) * p2) return Level::Ground;
    return Level::Dark;
  }

 private:
  KrausPair kraus_;
  double p52_;
  Matrix3c first_;
  Matrix3c regular_;
  double survival_amp_ = 1.0;
};

Vector3c normalized(const Vector3c& psi0) {
  const double norm = psi0.norm();
  if (std::abs(norm - 1.0) > 1e-9) throw std::invalid_argument("psi0 must be normalized");
  return psi0 / norm;
}

}  // namespace

Level mc_trajectory_final_state(const Vector3c& psi0, const TrainParams& params,
                                const AtomModel& atom, int n, std::uint64_t seed,
                                bool final_decay) {
  if (n < 0) throw std::invalid_argument("pulse count must be >= 0");
  params.validate();
  auto rng = make_rng(seed);
  return Trajectory(params, atom).run(normalized(psi0), n, rng, final_decay);
}

LevelFrequencies mc_level_frequencies(const Vector3c& psi0, const TrainParams& params,
                                      const AtomModel& atom, int n, long long samples,
                                      std::uint64_t seed, bool final_decay) {
  if (n < 0) throw std::invalid_argument("pulse count must be >= 0");
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  params.validate();
  const Vector3c psi = normalized(psi0);
  const Trajectory trajectory(params, atom);

  long long counts[3] = {0, 0, 0};
  for (long long s = 0; s < samples; ++s) {
    auto rng = make_rng(seed + static_cast<std::uint64_t>(s));
    const Level level = trajectory.run(psi, n, rng, final_decay);
    ++counts[static_cast<int>(level) - 1];
  }
  LevelFrequencies f;
  f.samples = samples;
  f.p1 = static_cast<double>(counts[0]) / static_cast<double>(samples);
  f.p2 = static_cast<double>(counts[1]) / static_cast<double>(samples);
  f.p3 = static_cast<double>(counts[2]) / static_cast<double>(samples);
  return f;
}

}  // namespace ionpulse::quantum
