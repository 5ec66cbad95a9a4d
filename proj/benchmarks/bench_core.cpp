#include "ionpulse/experiments.hpp"
#include "ionpulse/interferometry.hpp"
#include "ionpulse/protocol_fits.hpp"
#include "ionpulse/quantum.hpp"
#include "ionpulse/scheduler.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace ionpulse;
using quantum::kPi;

void BM_Step(benchmark::State& state) {
  const auto params = quantum::TrainParams::at_rate(0.345 * kPi, 1.25, 0.3);
  const quantum::AtomModel atom;
  quantum::DensityMatrix3 rho;
  for (auto _ : state) {
    rho = quantum::step(rho, params, atom, false);
    benchmark::DoNotOptimize(rho);
  }
}
BENCHMARK(BM_Step);

void BM_ApplyTrain(benchmark::State& state) {
  const auto params = quantum::TrainParams::at_rate(0.345 * kPi, 1.25, 0.3);
  const quantum::AtomModel atom;
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(quantum::apply_train(quantum::DensityMatrix3(), params, atom, n));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ApplyTrain)->Arg(500)->Arg(5000);

void BM_DarkStateProbability(benchmark::State& state) {
  const auto params = quantum::TrainParams::at_rate(0.345 * kPi, 1.25, 0.3);
  const quantum::AtomModel atom;
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(experiments::dark_state_probability(params, atom, n));
}
BENCHMARK(BM_DarkStateProbability)->Arg(500)->Arg(5000);

void BM_ReducedMatrixPower(benchmark::State& state) {
  const auto params = quantum::TrainParams::at_rate(0.345 * kPi, 1.25, 0.3);
  const auto map = quantum::reduced_period_map(params, quantum::AtomModel(), false);
  for (auto _ : state) benchmark::DoNotOptimize(quantum::matrix_power(map, state.range(0)));
}
BENCHMARK(BM_ReducedMatrixPower)->Arg(500)->Arg(5000);

std::vector<double> detuning_grid(double rate, int points) {
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(kPi * rate * (2.0 * i / (points - 1) - 1.0));
  return out;
}

void BM_ManyPulseModel(benchmark::State& state) {
  std::vector<estimation::ScanPoint> points;
  for (double d : detuning_grid(1.25, 41))
    for (int n : {500, 2000, 1000, 5000}) points.push_back({d, n, 0.5, 100});
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimation::many_pulse_model(points, 1.25, 0.345 * kPi, 0.1, quantum::AtomModel()));
}
BENCHMARK(BM_ManyPulseModel);

void BM_BurstMap(benchmark::State& state) {
  auto params = quantum::TrainParams::at_rate(0.195 * kPi, 5.0);
  params.first_pulse = quantum::FirstPulseAnomaly{0.353 * kPi, 1.282 * kPi};
  const auto detunings = detuning_grid(5.0, 41);
  for (auto _ : state)
    benchmark::DoNotOptimize(experiments::burst_map(params, quantum::AtomModel(), detunings, 12, 20));
}
BENCHMARK(BM_BurstMap);

void BM_RamseyCurve(benchmark::State& state) {
  const auto params = quantum::TrainParams::at_rate(0.377 * kPi, 1.25);
  for (auto _ : state)
    benchmark::DoNotOptimize(experiments::ramsey_curve(params, quantum::AtomModel(), 40));
}
BENCHMARK(BM_RamseyCurve);

void BM_McTrajectory(benchmark::State& state) {
  const auto params = quantum::TrainParams::at_rate(0.345 * kPi, 1.25, 0.3);
  const quantum::Vector3c psi0(1.0, 0.0, 0.0);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        quantum::mc_trajectory_final_state(psi0, params, quantum::AtomModel(), 100, seed++));
}
BENCHMARK(BM_McTrajectory);

void BM_EllipseFit(benchmark::State& state) {
  const std::vector<double> phases{0.0, 0.37 * kPi, 0.37 * kPi};
  const auto dx = interferometry::random_delta_x(100, 786.0, 1);
  const auto set = interferometry::synth_interferogram(phases, dx, 786.0, 0.02, 2);
  const Eigen::VectorXd x = set.areas.col(0);
  const Eigen::VectorXd y = set.areas.col(1);
  const std::vector<double> xs(x.data(), x.data() + x.size());
  const std::vector<double> ys(y.data(), y.data() + y.size());
  for (auto _ : state) benchmark::DoNotOptimize(interferometry::fit_ellipse(xs, ys));
}
BENCHMARK(BM_EllipseFit);

void BM_CompileSchedule(benchmark::State& state) {
  scheduler::SequenceRequest request;
  for (std::int64_t s = 100; s < 100 + 4 * state.range(0); s += 4) request.payload.push_back(s);
  request.total_duration_ns = 2000.0;
  for (auto _ : state) benchmark::DoNotOptimize(scheduler::compile(request));
}
BENCHMARK(BM_CompileSchedule)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
