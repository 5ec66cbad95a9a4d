#include "ionpulse/power_chain.hpp"

#include "ionpulse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ionpulse::scheduler {

std::vector<CalibrationPoint> PowerChain::default_calibration() {
  return {{5.0, 2.8, 0.28, 0.032}, {1.25, 2.8, 0.42, 0.093}};
}

void PowerChain::validate() const {
  if (!(p_fundamental_w >= 0.0)) throw NonPhysical("fundamental power must be >= 0");
  if (!(rep_rate_ghz > 0.0)) throw std::invalid_argument("rep_rate_ghz must be positive");
  if (calibration.empty()) throw std::invalid_argument("power chain needs a calibration point");
  for (const auto& c : calibration) {
    if (!(c.rep_rate_ghz > 0.0) || !(c.p_fundamental_w > 0.0))
      throw std::invalid_argument("calibration rate and power must be positive");
    if (!(c.eff1 > 0.0 && c.eff1 < 1.0) || !(c.eff2 > 0.0 && c.eff2 < 1.0))
      throw NonPhysical("calibration efficiencies must lie in (0, 1)");
  }
}

PowerChainOutput power_chain_output(const PowerChain& chain) {
  chain.validate();
  const CalibrationPoint* ref = &chain.calibration.front();
  for (const auto& c : chain.calibration)
    if (std::abs(std::log(c.rep_rate_ghz / chain.rep_rate_ghz)) <
        std::abs(std::log(ref->rep_rate_ghz / chain.rep_rate_ghz)))
      ref = &c;

  const double rate_factor = ref->rep_rate_ghz / chain.rep_rate_ghz;
  const double p786_ref = ref->eff1 * ref->p_fundamental_w;

  PowerChainOutput out;
  out.eff1 = ref->eff1 * (chain.p_fundamental_w / ref->p_fundamental_w) * rate_factor;
  out.p_786_w = out.eff1 * chain.p_fundamental_w;
  out.eff2 = ref->eff2 * (out.p_786_w / p786_ref) * rate_factor;
  out.p_393_w = out.eff2 * out.p_786_w;
  if (out.eff1 >= 1.0 || out.eff2 >= 1.0)
    throw NonPhysical("low-depletion conversion efficiency reaches " +
                      std::to_string(std::max(out.eff1, out.eff2)) + "; the model does not apply");
  if (out.p_786_w < 0.0 || out.p_393_w < 0.0) throw NonPhysical("negative output power");

  out.extinction_out_db = 2.0 * chain.extinction_in_db;
  out.extinction_measured_db = chain.extinction_measured_db;
  return out;
}

}  // namespace ionpulse::scheduler
