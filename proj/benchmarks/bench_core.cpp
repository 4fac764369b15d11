// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "imc/evaluator.hpp"
#include "imc/linalg.hpp"
#include "imc/loss.hpp"
#include "imc/model.hpp"
#include "imc/rng.hpp"

namespace {

imc::EmbeddingBatch make_batch(std::size_t B, std::size_t d) {
  imc::Rng rng(1);
  imc::EmbeddingBatch b;
  b.images = imc::Mat(B, d);
  b.texts = imc::Mat(B, d);
  for (double& x : b.images.data()) x = rng.normal();
  for (double& x : b.texts.data()) x = rng.normal();
  b.group_ids.resize(B);
  for (std::size_t i = 0; i < B; ++i) b.group_ids[i] = static_cast<std::int64_t>(i);
  return b;
}

void BM_MatMul(benchmark::State& state) {
  imc::Rng rng(2);
  const imc::Mat a = imc::xavier_init(rng, 128, 1024);
  const imc::Mat b = imc::xavier_init(rng, 1024, 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(imc::matmul(a, b));
  }
}
BENCHMARK(BM_MatMul);

void BM_ShLoss(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)), 64);
  const imc::LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(imc::sh_loss(batch, cfg));
  }
}
BENCHMARK(BM_ShLoss)->Arg(32)->Arg(128);

void BM_MhLoss(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)), 64);
  const imc::LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(imc::mh_loss(batch, cfg));
  }
}
BENCHMARK(BM_MhLoss)->Arg(32)->Arg(128);

void BM_ImcLoss(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)), 64);
  imc::LossConfig cfg;
  cfg.delta_kind = static_cast<imc::DeltaKind>(state.range(1));
  cfg.mu_up = 3.0;  // keep a fair share of pairs in band
  for (auto _ : state) {
    benchmark::DoNotOptimize(imc::imc_loss(batch, cfg));
  }
}
BENCHMARK(BM_ImcLoss)->Args({128, 0})->Args({128, 1})->Args({128, 2})->Args({128, 3});

void BM_ForwardEval(benchmark::State& state) {
  imc::Rng rng(3);
  const imc::Mat feats = imc::xavier_init(rng, 128, 1024);
  imc::ProjectionModel model = imc::make_model(rng, 1024, 1024, 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(imc::forward_eval(model, feats, imc::Modality::Image));
  }
}
BENCHMARK(BM_ForwardEval);

void BM_RecallAtK(benchmark::State& state) {
  imc::Rng rng(4);
  imc::ScoreMatrix sm;
  const std::size_t n = 1000;
  sm.scores = imc::Mat(n, n);
  for (double& x : sm.scores.data()) x = rng.normal();
  sm.relevant.resize(n);
  for (std::size_t q = 0; q < n; ++q) sm.relevant[q] = {q};
  for (auto _ : state) {
    benchmark::DoNotOptimize(imc::recall_at_k(sm, 10));
  }
}
BENCHMARK(BM_RecallAtK);

}  // namespace

BENCHMARK_MAIN();
