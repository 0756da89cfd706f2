#include <benchmark/benchmark.h>

#include "mrsl/learners.hpp"
#include "mrsl/random.hpp"
#include "mrsl/simgen.hpp"
#include "mrsl/smoothing.hpp"

namespace {

std::vector<mrsl::Coord> lattice(int side) {
  std::vector<mrsl::Coord> c;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) c.push_back({-1.0 + 2.0 * i / side, -1.0 + 2.0 * j / side});
  return c;
}

void BM_NwSmooth(benchmark::State& state) {
  const auto coords = lattice(static_cast<int>(state.range(0)));
  mrsl::CounterRng rng(1);
  std::vector<double> v(coords.size());
  for (double& x : v) x = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(mrsl::nw_smooth(v, coords, 0.1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(coords.size()));
}
BENCHMARK(BM_NwSmooth)->Arg(20)->Arg(40);

void BM_FitProbit(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  mrsl::CounterRng rng(2);
  Eigen::MatrixXd x(n, 4);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int f = 0; f < 4; ++f) x(i, f) = rng.normal();
    y[static_cast<std::size_t>(i)] = x(i, 0) - 0.5 * x(i, 2) + rng.normal() > 0 ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(mrsl::fit_probit(x, y));
}
BENCHMARK(BM_FitProbit)->Arg(1000)->Arg(50000);

void BM_FitOrderedProbit(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  mrsl::CounterRng rng(3);
  Eigen::MatrixXd x(n, 4);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int f = 0; f < 4; ++f) x(i, f) = rng.normal();
    const double latent = x(i, 0) + 0.5 * x(i, 1) + rng.normal();
    y[static_cast<std::size_t>(i)] = latent < -0.3 ? 0 : latent < 0.6 ? 1 : 2;
  }
  for (auto _ : state) benchmark::DoNotOptimize(mrsl::fit_ordered_probit(x, y, 3));
}
BENCHMARK(BM_FitOrderedProbit)->Arg(1000)->Arg(20000);

void BM_SampleGp(benchmark::State& state) {
  const auto coords = lattice(static_cast<int>(state.range(0)));
  const mrsl::MaternParams theta{4.0, 0.2, 0.8};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mrsl::sample_gp(coords, theta, ++seed));
}
BENCHMARK(BM_SampleGp)->Arg(15)->Arg(30);

}  // namespace

BENCHMARK_MAIN();
