#include "ionpulse/errors.hpp"
#include "ionpulse/power_chain.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace ionpulse::scheduler;

PowerChainOutput at(double p_w, double rate_ghz) {
  PowerChain chain;
  chain.p_fundamental_w = p_w;
  chain.rep_rate_ghz = rate_ghz;
  return power_chain_output(chain);
}

TEST(PowerChain, AnchorsAtFiveGigahertz) {
  const auto out = at(2.8, 5.0);
  EXPECT_NEAR(out.p_786_w, 0.77, 0.05 * 0.77);
  EXPECT_NEAR(out.p_393_w, 0.025, 0.05 * 0.025);
  EXPECT_NEAR(out.eff1, 0.28, 1e-12);
  EXPECT_NEAR(out.eff2, 0.032, 1e-12);
}

TEST(PowerChain, AnchorsAtLowRate) {
  const auto out = at(2.8, 1.25);
  EXPECT_NEAR(out.p_786_w, 1.18, 0.05 * 1.18);
  EXPECT_NEAR(out.p_393_w, 0.110, 0.05 * 0.110);
}

TEST(PowerChain, FourthPowerSlope) {
  const double lo = 0.028, hi = 2.8;
  const double slope = std::log(at(hi, 5.0).p_393_w / at(lo, 5.0).p_393_w) / std::log(hi / lo);
  EXPECT_NEAR(slope, 4.0, 1e-3);
  const double slope786 = std::log(at(hi, 5.0).p_786_w / at(lo, 5.0).p_786_w) / std::log(hi / lo);
  EXPECT_NEAR(slope786, 2.0, 1e-12);
}

TEST(PowerChain, PeakPowerScalingBetweenRates) {
  // Between the calibration rates the nearest reference is scaled by the
  // ratio of peak powers: x2 per stage for a halved rate.
  PowerChain chain;
  chain.calibration = {{5.0, 2.8, 0.28, 0.032}};
  chain.rep_rate_ghz = 2.5;
  const auto out = power_chain_output(chain);
  EXPECT_NEAR(out.eff1, 0.56, 1e-12);
  EXPECT_NEAR(out.p_786_w, 0.56 * 2.8, 1e-12);
  EXPECT_NEAR(out.eff2, 0.032 * 2.0 * 2.0, 1e-12);
}

TEST(PowerChain, ZeroInputGivesZeroOutput) {
  const auto out = at(0.0, 5.0);
  EXPECT_EQ(out.p_786_w, 0.0);
  EXPECT_EQ(out.p_393_w, 0.0);
}

TEST(PowerChain, ExtinctionDoublesAndMeasuredValueIsReported) {
  const auto out = at(2.8, 5.0);
  EXPECT_DOUBLE_EQ(out.extinction_out_db, 60.0);
  EXPECT_DOUBLE_EQ(out.extinction_measured_db, 56.0);
}

TEST(PowerChain, NonPhysicalInputs) {
  EXPECT_THROW(at(-1.0, 5.0), ionpulse::NonPhysical);
  EXPECT_THROW(at(20.0, 1.25), ionpulse::NonPhysical);
  PowerChain chain;
  chain.calibration = {{5.0, 2.8, 1.2, 0.03}};
  EXPECT_THROW(power_chain_output(chain), ionpulse::NonPhysical);
}

}  // namespace
