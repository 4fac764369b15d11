// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "imc/dataset.hpp"
#include "imc/loss.hpp"
#include "imc/model.hpp"

namespace imc {

struct TrainSpec {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr0 = 2e-4;
  std::size_t decay_every = 15;  // epochs between learning-rate decays
  double decay_factor = 0.1;
  std::uint64_t seed = 42;
  LossKind loss_kind = LossKind::Imc;
  LossConfig loss_cfg;
  AdamConfig adam;

  void validate() const;
};

/// lr0 * decay_factor^floor(epoch / decay_every).
double lr_at_epoch(const TrainSpec& spec, std::size_t epoch);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_rsum = 0.0;
};

struct TrainResult {
  ProjectionModel model;  // snapshot with the best validation R-sum
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;
  double best_val_rsum = 0.0;
};

/// Seeded, single-threaded training loop: per-epoch shuffled caption batches,
/// dropout, Adam with step decay, validation R-sum after every epoch.
/// Deterministic for a fixed seed. Throws NumericalError if the loss or a
/// gradient goes non-finite.
TrainResult train(const FeatureStore& store, const SplitSpec& split, ProjectionModel model,
                  const TrainSpec& spec);

/// "epoch,lr,train_loss,val_rsum" with full-precision values.
void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const EpochMetrics> log);
std::string metrics_csv_string(std::span<const EpochMetrics> log);

/// Inverse projection heads for a zero-noise synthetic store: transposes of
/// the orthonormal generator maps recover the latent class direction exactly.
ProjectionModel oracle_model(const SyntheticData& data);

}  // namespace imc
