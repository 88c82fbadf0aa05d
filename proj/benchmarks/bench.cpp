// Microbenchmarks for the hot paths: power-flow sweeps, surrogate forward
// and gradient evaluation, and a full box-constrained regulation solve.

#include <benchmark/benchmark.h>

#include "vreg/dataset.hpp"
#include "vreg/grid.hpp"
#include "vreg/icnn.hpp"
#include "vreg/regulate.hpp"

#include <random>

namespace {

vreg::Injection random_loads(const vreg::Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> load(-0.03, 0.0);
  vreg::Injection inj{Eigen::VectorXd::Zero(net.n_buses),
                      Eigen::VectorXd::Zero(net.n_buses)};
  for (int i = 1; i < net.n_buses; ++i) {
    inj.p[i] = load(rng);
    inj.q[i] = load(rng);
  }
  return inj;
}

void BM_PowerFlow(benchmark::State& state) {
  const vreg::Network net =
      vreg::make_random_tree(static_cast<int>(state.range(0)), 5);
  const vreg::Injection inj = random_loads(net, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(vreg::solve_power_flow(net, inj));
}
BENCHMARK(BM_PowerFlow)->Arg(13)->Arg(30)->Arg(100);

void BM_IcnnForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const vreg::IcnnModel m = vreg::random_model(
      2 * n, n, 2, 6 * n, {vreg::ActivationKind::softplus, 50.0}, 5);
  const Eigen::VectorXd u = Eigen::VectorXd::Random(2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(vreg::forward(m, u));
}
BENCHMARK(BM_IcnnForward)->Arg(13)->Arg(30);

void BM_IcnnGradInput(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const vreg::IcnnModel m = vreg::random_model(
      2 * n, n, 2, 6 * n, {vreg::ActivationKind::softplus, 50.0}, 5);
  const Eigen::VectorXd u = Eigen::VectorXd::Random(2 * n);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (auto _ : state)
    benchmark::DoNotOptimize(vreg::grad_input_weighted(m, u, w));
}
BENCHMARK(BM_IcnnGradInput)->Arg(13)->Arg(30);

void BM_Regulate(benchmark::State& state) {
  const vreg::Network net = vreg::make_path_13();
  const int n = net.n_buses;
  const vreg::Dataset data = vreg::generate_dataset(net, {}, 1, 5);
  const vreg::IcnnModel m = vreg::project_weights(vreg::random_model(
      2 * n, n, 2, 6 * n, {vreg::ActivationKind::relu, 50.0}, 5));
  const Eigen::VectorXd p = data.p().row(0).transpose();
  const Eigen::VectorXd q_nom = data.q().row(0).transpose();
  vreg::RegulateConfig rc;
  rc.q_lower = q_nom.array() - 0.1;
  rc.q_upper = q_nom.array() + 0.1;
  rc.q_lower[0] = rc.q_upper[0] = q_nom[0];
  for (auto _ : state)
    benchmark::DoNotOptimize(vreg::regulate(m, p, q_nom, rc));
}
BENCHMARK(BM_Regulate);

}  // namespace

BENCHMARK_MAIN();
