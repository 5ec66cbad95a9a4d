#include "ionpulse/protocol_fits.hpp"
#include "ionpulse/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace {

using namespace ionpulse::estimation;
using ionpulse::experiments::RamseySpec;
using ionpulse::quantum::AtomModel;
using ionpulse::quantum::FirstPulseAnomaly;
using ionpulse::quantum::kPi;
using ionpulse::quantum::TrainParams;

std::vector<double> symmetric_grid(double rate, int points) {
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(kPi * rate * (2.0 * i / (points - 1) - 1.0));
  return out;
}

std::vector<ScanPoint> many_pulse_data(double theta, double rate, double offset, int points,
                                       const std::vector<int>& counts, int shots, std::uint64_t seed) {
  std::vector<ScanPoint> data;
  for (double d : symmetric_grid(rate, points))
    for (int n : counts) data.push_back({d, n, 0.0, shots});
  const auto model = many_pulse_model(data, rate, theta, offset, AtomModel());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i].p_d = seed == 0 ? model(i)
                            : ionpulse::experiments::synth_shots(model(i), shots, ionpulse::mix_seed(seed * 7919 + i)) /
                                  static_cast<double>(shots);
  return data;
}

std::vector<ScanPoint> single_pulse_data(double theta, double dphi, double theta_first, double rate,
                                         double offset, int points) {
  std::vector<ScanPoint> data;
  for (double d : symmetric_grid(rate, points))
    for (int n = 1; n <= 12; ++n) data.push_back({d, n, 0.0, 100});
  const auto model = single_pulse_model(data, rate, theta, dphi, offset, theta_first, AtomModel(), 20);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].p_d = model(i);
  return data;
}

TEST(ManyPulseFit, NoiselessRecovery) {
  const double theta = 0.345 * kPi;
  const auto data = many_pulse_data(theta, 1.25, 0.1, 21, {500, 2000}, 100, 0);
  const auto fit = fit_many_pulse_scan(data, 1.25);
  EXPECT_NEAR(fit.value("theta"), theta, 1e-5 * theta);
  EXPECT_NEAR(fit.value("detuning_offset"), 0.1, 1e-5);
}

TEST(ManyPulseFit, PermutationInvariance) {
  auto data = many_pulse_data(0.323 * kPi, 2.5, -0.2, 21, {500, 1000}, 100, 3);
  const auto a = fit_many_pulse_scan(data, 2.5);
  std::shuffle(data.begin(), data.end(), std::mt19937_64(8));
  const auto b = fit_many_pulse_scan(data, 2.5);
  EXPECT_NEAR(a.value("theta"), b.value("theta"), 1e-6);
  EXPECT_NEAR(a.value("detuning_offset"), b.value("detuning_offset"), 1e-6);
}

TEST(ManyPulseFit, NoisyRecoveryWithinQuotedErrors) {
  const struct {
    double theta_pi, rate, tol_pi;
  } cases[] = {{0.227, 5.0, 0.012}, {0.345, 1.25, 0.005}};
  for (const auto& c : cases) {
    const auto data = many_pulse_data(c.theta_pi * kPi, c.rate, 0.1, 41, {500, 2000, 1000, 5000}, 100, 11);
    const auto fit = fit_many_pulse_scan(data, c.rate);
    EXPECT_NEAR(fit.value("theta") / kPi, c.theta_pi, c.tol_pi) << "rate " << c.rate;
    EXPECT_GT(fit.error("theta"), 0.0);
  }
}

TEST(SinglePulseFit, NoiselessRecoveryWithFirstArea) {
  const double theta = 0.195 * kPi, dphi = 1.282 * kPi, first = 0.353 * kPi;
  const auto data = single_pulse_data(theta, dphi, first, 5.0, 0.1, 21);
  const auto fit = fit_single_pulse_map(data, 5.0, true);
  EXPECT_NEAR(fit.value("theta"), theta, 1e-5 * theta);
  EXPECT_NEAR(fit.value("dphi_first"), dphi, 1e-5 * dphi);
  EXPECT_NEAR(fit.value("theta_first"), first, 1e-5 * first);
  EXPECT_NEAR(fit.value("detuning_offset"), 0.1, 1e-5);
}

TEST(SinglePulseFit, DistinguishesPhaseSign) {
  for (double dphi_pi : {0.361, 2.0 - 0.361}) {
    const auto data = single_pulse_data(0.312 * kPi, dphi_pi * kPi, -1.0, 2.5, 0.0, 21);
    const auto fit = fit_single_pulse_map(data, 2.5, false);
    EXPECT_NEAR(fit.value("dphi_first") / kPi, dphi_pi, 1e-5);
    EXPECT_NEAR(fit.value("theta") / kPi, 0.312, 1e-5);
  }
}

std::vector<PiScanPoint> pi_scan_data(double p_max, double omega, int shots, std::uint64_t seed) {
  std::vector<PiScanPoint> out;
  for (int i = 1; i <= 15; ++i) {
    const double p_light = std::pow(0.1 * i * omega * kPi / 2 * 1.5, 2);
    const double pp = ionpulse::experiments::pi_scan_model(p_light, p_max, omega);
    if (shots == 0) {
      out.push_back({p_light, pp, 0.0});
      continue;
    }
    const double pd = ionpulse::experiments::accumulate_pp(pp, 15);
    const int k = ionpulse::experiments::synth_shots(pd, shots, ionpulse::mix_seed(seed * 1000 + i));
    out.push_back(pi_scan_point(p_light, k, shots, 15));
  }
  return out;
}

TEST(PiScanFit, NoiselessRecovery) {
  const auto fit = fit_pi_scan(pi_scan_data(0.964, 4.0, 0, 0));
  EXPECT_NEAR(fit.value("p_max"), 0.964, 1e-5 * 0.964);
  EXPECT_NEAR(fit.value("omega"), 4.0, 1e-5 * 4.0);
}

TEST(PiScanFit, NoisyRecoveryWithinQuotedError) {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto fit = fit_pi_scan(pi_scan_data(0.964, 4.0, 100, seed));
    within += std::abs(fit.value("p_max") - 0.964) <= 3.0 * fit.error("p_max");
  }
  EXPECT_GE(within, 45);
}

TEST(PiScanFit, TwoPercentNeedsThousandsOfShots) {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed)
    within += std::abs(fit_pi_scan(pi_scan_data(0.964, 4.0, 3000, seed)).value("p_max") - 0.964) <= 0.02;
  EXPECT_GE(within, 45);
}

TEST(PiScanFit, ReweightingRemovesLowCountBias) {
  double total = 0.0;
  const int seeds = 200;
  for (int seed = 1; seed <= seeds; ++seed) total += fit_pi_scan(pi_scan_data(0.964, 4.0, 100, seed)).value("p_max");
  EXPECT_LE(std::abs(total / seeds - 0.964), 0.015);
}

TEST(PiScanFit, CoverageOfOneSigmaInterval) {
  int covered = 0;
  const int seeds = 200;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto fit = fit_pi_scan(pi_scan_data(0.964, 4.0, 100, seed));
    covered += std::abs(fit.value("p_max") - 0.964) <= fit.error("p_max");
  }
  const double fraction = static_cast<double>(covered) / seeds;
  EXPECT_GE(fraction, 0.60);
  EXPECT_LE(fraction, 0.75);
}

TEST(PiScanFit, HalvingShotsScalesErrorsBySqrtTwo) {
  double full = 0.0, half = 0.0;
  for (int seed = 1; seed <= 50; ++seed) {
    full += fit_pi_scan(pi_scan_data(0.964, 4.0, 200, seed)).error("p_max");
    half += fit_pi_scan(pi_scan_data(0.964, 4.0, 100, seed + 500)).error("p_max");
  }
  EXPECT_NEAR(half / full, std::sqrt(2.0), 0.1 * std::sqrt(2.0));
}

TEST(PiScanFit, ClippedScanIsFlagged) {
  std::vector<PiScanPoint> data;
  for (int i = 1; i <= 6; ++i) {
    const double p_light = std::pow(0.02 * i, 2);
    data.push_back({p_light, ionpulse::experiments::pi_scan_model(p_light, 0.964, 4.0), 0.0});
  }
  const auto fit = fit_pi_scan(data);
  EXPECT_TRUE(fit.singular || fit.error("p_max") > 0.1 || !std::isfinite(fit.error("p_max")));
}

TEST(PiScanFit, NeedsFivePoints) {
  std::vector<PiScanPoint> data(4, PiScanPoint{1.0, 0.5, 0.0});
  EXPECT_THROW(fit_pi_scan(data), std::invalid_argument);
}

TEST(PiScanPoint, DeltaMethodError) {
  const auto p = pi_scan_point(2.0, 40, 100, 15);
  EXPECT_NEAR(p.p_p, ionpulse::experiments::invert_pp(0.4, 15), 1e-15);
  const double h = 1e-6;
  const double slope = (ionpulse::experiments::invert_pp(0.4 + h, 15) - ionpulse::experiments::invert_pp(0.4 - h, 15)) / (2 * h);
  EXPECT_NEAR(p.sigma, slope * std::sqrt(0.4 * 0.6 / 100), 1e-6);
}

std::vector<RamseyFringe> ramsey_data(const TrainParams& params, const AtomModel& atom, double scale,
                                      int n_max, int shots, std::uint64_t seed) {
  std::vector<RamseyFringe> out;
  const auto phases = RamseySpec::default_phases();
  for (int n = 0; n <= n_max; ++n) {
    const auto rho = ionpulse::experiments::ramsey_state(params, atom, n);
    const double mean = 0.5 * (rho.population(0) + rho.population(2));
    RamseyFringe f{n, phases, {}, shots};
    for (std::size_t j = 0; j < phases.size(); ++j) {
      const double p = mean + scale * (ionpulse::experiments::analysis_dark_probability(rho, phases[j]) - mean);
      f.p3.push_back(seed == 0 ? p
                               : ionpulse::experiments::synth_shots(p, shots, ionpulse::mix_seed(seed * 100000 + n * 100 + j)) /
                                     static_cast<double>(shots));
    }
    out.push_back(f);
  }
  return out;
}

TEST(RamseyFit, NoiselessRecovery) {
  const auto params = TrainParams::at_rate(0.377 * kPi, 1.25, 0.1310, -0.1866);
  const auto data = ramsey_data(params, AtomModel(), 0.8761, 20, 100, 0);
  RamseyFitOptions options;
  options.refine = 4;
  const auto fit = fit_ramsey(data, 1.25, options).fit;
  EXPECT_NEAR(fit.value("theta"), params.theta, 1e-5 * params.theta);
  EXPECT_NEAR(fit.value("delta"), 0.1310, 1e-5 * 0.1310);
  EXPECT_NEAR(fit.value("delta_prime"), -0.1866, 1e-5 * 0.1866);
  EXPECT_NEAR(fit.value("contrast_scale"), 0.8761, 1e-5);
}

TEST(RamseyFit, NoisyRecoveryOfTheta) {
  const auto params = TrainParams::at_rate(0.377 * kPi, 1.25, 0.1310, -0.1866);
  const auto data = ramsey_data(params, AtomModel(), 0.8761, 20, 100, 5);
  const auto fit = fit_ramsey(data, 1.25).fit;
  EXPECT_NEAR(fit.value("theta") / kPi, 0.377, 0.01);
}

TEST(RamseyFit, DoublingAmplitudesDoublesScale) {
  const auto params = TrainParams::at_rate(0.377 * kPi, 1.25, 0.1310, -0.1866);
  RamseyFitOptions options;
  options.refine = 4;
  const auto a = fit_ramsey(ramsey_data(params, AtomModel(), 0.4, 20, 100, 0), 1.25, options).fit;
  const auto b = fit_ramsey(ramsey_data(params, AtomModel(), 0.8, 20, 100, 0), 1.25, options).fit;
  EXPECT_NEAR(b.value("contrast_scale"), 2.0 * a.value("contrast_scale"), 1e-6);
  EXPECT_NEAR(a.value("theta"), b.value("theta"), 1e-6);
}

TEST(RamseyFit, ContrastMinimaWhereAreaIsOddMultipleOfPi) {
  const auto params = TrainParams::at_rate(kPi / 4, 1.25);
  const auto curve = ionpulse::experiments::ramsey_curve(params, AtomModel::without_decay(), 24);
  for (int n = 0; n <= 24; ++n) {
    const double expected = std::abs(std::cos(n * kPi / 8));
    EXPECT_NEAR(curve[n].contrast, expected, 1e-12);
  }
  for (int n : {4, 12, 20}) EXPECT_LT(curve[n].contrast, 1e-12);

  RamseyFitOptions options;
  options.atom = AtomModel::without_decay();
  options.refine = 4;
  const auto fit = fit_ramsey(ramsey_data(params, options.atom, 1.0, 16, 100, 0), 1.25, options);
  EXPECT_EQ(fit.excluded_phase_n, (std::vector<int>{4, 12}));
  EXPECT_NEAR(fit.fit.value("theta"), kPi / 4, 1e-5);
}

TEST(RamseyFit, NeedsThreeDistinctCounts) {
  const auto data = ramsey_data(TrainParams::at_rate(0.377 * kPi, 1.25), AtomModel(), 1.0, 1, 100, 0);
  EXPECT_THROW(fit_ramsey(data, 1.25), std::invalid_argument);
}

}  // namespace
