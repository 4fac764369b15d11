// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "imc/dataset.hpp"
#include "imc/evaluator.hpp"
#include "imc/trainer.hpp"

namespace imc {

/// Everything needed to reproduce one training run on a store.
struct RunParams {
  std::size_t embed_dim = 16;
  double dropout_p = 0.5;
  bool normalize_embeddings = true;
  TrainSpec spec;
};

struct RunOutcome {
  TrainResult result;
  RetrievalReport test_report;
};

/// Seeded model init + training + test-set evaluation of the best snapshot.
RunOutcome run_training(const FeatureStore& store, const SplitSpec& split,
                        const RunParams& params);

struct AblationRow {
  std::string label;
  double lambda = 0.0;
  DeltaKind delta_kind = DeltaKind::L1;
  RetrievalReport report;
};

/// One training per row under a shared seed: lambda = 0 (the hardest-negative
/// baseline), then lambda = 1 with each similarity distance.
std::vector<AblationRow> run_ablation(const FeatureStore& store, const SplitSpec& split,
                                      RunParams base);

std::string ablation_csv(std::span<const AblationRow> rows);

struct SweepRow {
  double lambda = 0.0;
  RetrievalReport report;
};

/// One training + evaluation per lambda value under a shared seed. Rejects
/// negative lambdas.
std::vector<SweepRow> run_lambda_sweep(const FeatureStore& store, const SplitSpec& split,
                                       RunParams base, std::span<const double> lambdas);

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace imc
