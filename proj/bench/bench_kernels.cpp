// Serial reference vs OpenMP kernels. Thread-count arguments go through
// kernels::set_threads, so "threads:1" is the serial path of the same code.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gcf/data/synthetic.hpp"
#include "gcf/eval/field.hpp"
#include "gcf/model/model.hpp"
#include "gcf/modes/modes.hpp"
#include "gcf/numerics/kernels.hpp"

using namespace gcf;
namespace k = gcf::num::kernels;

namespace {

std::vector<double> uniform(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_matmul_serial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = uniform(n * n, 1), b = uniform(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : st) {
    k::matmul_serial(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_matmul_omp(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  k::set_threads(static_cast<int>(st.range(1)));
  const auto a = uniform(n * n, 1), b = uniform(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : st) {
    k::matmul(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  k::set_threads(1);
}

// Mode assignment shape: many 24-dimensional futures against K = 100 centers.
void BM_sqdist_serial(benchmark::State& st) {
  const auto m = static_cast<std::size_t>(st.range(0));
  const std::size_t kk = 100, d = 24;
  const auto p = uniform(m * d, 3), c = uniform(kk * d, 4);
  std::vector<double> out(m * kk);
  for (auto _ : st) {
    k::pairwise_sq_dist_serial(p.data(), c.data(), out.data(), m, kk, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_sqdist_omp(benchmark::State& st) {
  const auto m = static_cast<std::size_t>(st.range(0));
  k::set_threads(static_cast<int>(st.range(1)));
  const std::size_t kk = 100, d = 24;
  const auto p = uniform(m * d, 3), c = uniform(kk * d, 4);
  std::vector<double> out(m * kk);
  for (auto _ : st) {
    k::pairwise_sq_dist(p.data(), c.data(), out.data(), m, kk, d);
    benchmark::DoNotOptimize(out.data());
  }
  k::set_threads(1);
}

struct FieldInput {
  std::vector<double> values;
  std::vector<data::Point> anchors;
  eval::GridSpec grid;
};

FieldInput field_input(std::size_t n) {
  const auto v = uniform(3 * n, 5);
  FieldInput f;
  for (std::size_t i = 0; i < n; ++i) {
    f.values.push_back(1.0 + v[3 * i]);
    f.anchors.push_back({100.0 * v[3 * i + 1], 100.0 * v[3 * i + 2]});
  }
  f.grid = eval::grid_around(f.anchors, 2.0, 10.0);
  return f;
}

void BM_field_serial(benchmark::State& st) {
  const auto f = field_input(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(eval::spatial_error_field_serial(f.values, f.anchors, f.grid, 3.0));
}

void BM_field_omp(benchmark::State& st) {
  k::set_threads(static_cast<int>(st.range(1)));
  const auto f = field_input(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(eval::spatial_error_field(f.values, f.anchors, f.grid, 3.0));
  k::set_threads(1);
}

struct ModelInput {
  model::RunConfig cfg;
  std::vector<data::Scene> scenes;
  modes::MotionModeBank bank;
  num::ParamSet params;
};

const ModelInput& model_input() {
  static const ModelInput in = [] {
    ModelInput r;
    r.cfg.model.k = 20;
    r.cfg.model.k_top = 6;
    data::GeneratorConfig g;
    g.n_scenes = 64;
    const auto d = data::generate_synthetic(g, 7);
    r.scenes = data::scenes_from_records(d.records, r.cfg.horizons, r.cfg.delta);
    r.bank = modes::modes_from_training(r.scenes, r.cfg.model.k, 7);
    r.params = model::init_params(r.cfg.model, r.cfg.horizons, 7);
    r.scenes.resize(32);
    return r;
  }();
  return in;
}

// Batch loss and gradient over 32 scenes at the default model width.
void BM_batch_gradients(benchmark::State& st) {
  const auto& in = model_input();
  k::set_threads(static_cast<int>(st.range(0)));
  const auto flat = in.bank.flat();
  for (auto _ : st) {
    num::GradMap g;
    benchmark::DoNotOptimize(model::batch_gradients(in.params, in.cfg.model, in.scenes, flat, g));
  }
  k::set_threads(1);
}

}  // namespace

BENCHMARK(BM_matmul_serial)->Arg(128)->Arg(256)->UseRealTime();
BENCHMARK(BM_matmul_omp)->ArgsProduct({{128, 256}, {2, 4}})->UseRealTime();
BENCHMARK(BM_sqdist_serial)->Arg(4096)->UseRealTime();
BENCHMARK(BM_sqdist_omp)->ArgsProduct({{4096}, {2, 4}})->UseRealTime();
BENCHMARK(BM_field_serial)->Arg(500)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_field_omp)->ArgsProduct({{500}, {2, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_batch_gradients)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
