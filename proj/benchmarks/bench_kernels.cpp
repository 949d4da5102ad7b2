#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "protobank/arcface.hpp"
#include "protobank/embedding.hpp"
#include "protobank/leakage.hpp"
#include "protobank/trainer.hpp"

using namespace protobank;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = normal(eng);
  return m;
}

void bm_cosine_block(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0)), dim = 256;
  Matrix a = gaussian(n, dim, 1), b = gaussian(n, dim, 2);
  for (auto _ : state) {
    Matrix c = cosine_block(a, b);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(n * n));
  state.counters["flops"] = benchmark::Counter(double(state.iterations()) * 2.0 * double(n) *
                                                   double(n) * double(dim),
                                               benchmark::Counter::kIsRate);
}
BENCHMARK(bm_cosine_block)->Arg(256)->Arg(1024);

void bm_max_offdiag(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0)), dim = 256;
  Matrix m = gaussian(n, dim, 3);
  for (auto _ : state) benchmark::DoNotOptimize(max_offdiag_cosine(m));
  state.counters["flops"] = benchmark::Counter(
      double(state.iterations()) * double(n) * double(n) * double(dim), benchmark::Counter::kIsRate);
}
BENCHMARK(bm_max_offdiag)->Arg(1024)->Arg(4096);

void bm_arcface_step(benchmark::State& state) {
  const std::size_t batch = 179, classes = 70, dim = 64;
  Matrix emb = normalize_rows(gaussian(batch, dim, 4));
  Matrix protos = gaussian(classes, dim, 5);
  std::vector<std::int64_t> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = std::int64_t(i % classes);
  ArcFaceConfig cfg{0.5, 30.0};
  for (auto _ : state) {
    LossResult res = arcface_forward_backward(emb, labels, protos, cfg);
    benchmark::DoNotOptimize(res.loss);
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(batch));
}
BENCHMARK(bm_arcface_step);

void bm_leakage_scan(benchmark::State& state) {
  const std::size_t nq = 256, nr = std::size_t(state.range(0)), dim = 256;
  ClassCenterSet queries{normalize_rows(gaussian(nq, dim, 6)), std::vector<std::size_t>(nq, 1)};
  ClassCenterSet refs{normalize_rows(gaussian(nr, dim, 7)), std::vector<std::size_t>(nr, 1)};
  for (auto _ : state) {
    LeakageReport rep = leakage_audit(queries, refs, 1);
    benchmark::DoNotOptimize(rep.queries.data());
  }
  state.counters["flops"] = benchmark::Counter(double(state.iterations()) * 2.0 * double(nq) *
                                                   double(nr) * double(dim),
                                               benchmark::Counter::kIsRate);
}
BENCHMARK(bm_leakage_scan)->Arg(8192)->Arg(32768);

void bm_trainer_step(benchmark::State& state) {
  const std::size_t n_real = 50, k_virtual = 20, dim = 64, batch = 128;
  TrainRunConfig cfg;
  cfg.k_virtual = k_virtual;
  cfg.batch_real = batch;
  cfg.iterations = 1u << 30;  // stepped manually; never reached
  Stage1Trainer trainer(PrototypeBank::random_init(n_real, k_virtual, dim, 8), cfg);
  Matrix emb = normalize_rows(gaussian(batch, dim, 9));
  std::vector<std::int64_t> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = std::int64_t(i % n_real);
  std::uint64_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(emb, labels, ++step));
  state.SetItemsProcessed(std::int64_t(state.iterations()));
}
BENCHMARK(bm_trainer_step);

}  // namespace

BENCHMARK_MAIN();
