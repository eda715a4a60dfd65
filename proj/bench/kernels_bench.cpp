#include "coxmix/kernels.hpp"
#include "coxmix/rng.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace coxmix;

namespace {

std::vector<double> draw_times(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t(n);
  for (auto& v : t) v = rng.exponential();
  return t;
}

std::vector<int> draw_status(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> s(n);
  for (auto& v : s) v = rng.uniform() < 0.8 ? 1 : 0;
  return s;
}

template <bool Parallel>
void BM_KernelMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = draw_times(n, 1);
  Eigen::MatrixXd out;
  for (auto _ : state) {
    if constexpr (Parallel) kernels::parallel::kernel_matrix(t, t, 0.3, KernelKind::Gaussian, out);
    else kernels::serial::kernel_matrix(t, t, 0.3, KernelKind::Gaussian, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <bool Parallel>
void BM_Responsibilities(benchmark::State& state) {
  const auto n = state.range(0);
  const Eigen::Index K = 10;
  Rng rng(2);
  Eigen::MatrixXd log_f(n, K);
  for (Eigen::Index i = 0; i < log_f.size(); ++i) log_f.data()[i] = -5.0 * rng.uniform();
  const Eigen::VectorXd log_pi = Eigen::VectorXd::Constant(K, -std::log(static_cast<double>(K)));
  Eigen::MatrixXd s;
  Eigen::VectorXd marginal;
  for (auto _ : state) {
    if constexpr (Parallel) kernels::parallel::responsibilities(log_f, log_pi, s, marginal);
    else kernels::serial::responsibilities(log_f, log_pi, s, marginal);
    benchmark::DoNotOptimize(s.data());
  }
}

template <bool Parallel>
void BM_ComponentLogDensities(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Eigen::Index K = 10;
  const auto status = draw_status(n, 3);
  Rng rng(4);
  Eigen::MatrixXd lp(static_cast<Eigen::Index>(n), K), hz(lp.rows(), K), cum(lp.rows(), K), out;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    lp.data()[i] = rng.normal();
    hz.data()[i] = rng.exponential();
    cum.data()[i] = rng.exponential();
  }
  for (auto _ : state) {
    if constexpr (Parallel) kernels::parallel::component_log_densities(status, lp, hz, cum, out);
    else kernels::serial::component_log_densities(status, lp, hz, cum, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_ConditionalSurvival(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = draw_times(n, 5);
  const auto status = draw_status(n, 6);
  const auto marker = draw_times(n, 7);
  const SurvivalSweep sweep = SurvivalSweep::build(t, status);
  Eigen::MatrixXd queries(static_cast<Eigen::Index>(n), 2), out;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    queries(i, 0) = 1.0;
    queries(i, 1) = t[static_cast<std::size_t>(i)];
  }
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::conditional_survival(sweep, status, marker, 0.2, KernelKind::Gaussian, queries, out);
    else
      kernels::serial::conditional_survival(sweep, status, marker, 0.2, KernelKind::Gaussian, queries, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_KernelMatrix<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_KernelMatrix<true>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Responsibilities<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_Responsibilities<true>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ComponentLogDensities<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ComponentLogDensities<true>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ConditionalSurvival<false>)->Arg(500)->Arg(2000);
BENCHMARK(BM_ConditionalSurvival<true>)->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
