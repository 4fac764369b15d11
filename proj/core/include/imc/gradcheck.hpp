// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "imc/loss.hpp"
#include "imc/rng.hpp"

namespace imc {

struct GradCheckConfig {
  double fd_step = 1e-6;          // central-difference half step
  double tol = 1e-4;              // max relative error accepted
  double abs_floor = 1e-7;        // below this both sides count as zero
  double boundary_margin = 1e-3;  // keep hinges and band edges this far away
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool pass = true;
};

using BatchLossFn = std::function<LossOutput(const EmbeddingBatch&)>;

/// Central finite differences over every entry of both embedding matrices,
/// compared against the analytic gradients of `fn`.
GradCheckResult check_batch_gradients(const BatchLossFn& fn, const EmbeddingBatch& batch,
                                      const GradCheckConfig& gc = {});

/// Random unit-row batch guaranteed to sit away from hinge activations, band
/// edges, and (for L1) coordinate ties. For the combined loss the band
/// thresholds in `cfg` are moved to straddle the batch's observed deltas so
/// the in-band gradient path is actually exercised.
EmbeddingBatch make_gradcheck_batch(Rng& rng, std::size_t batch_size, std::size_t dim,
                                    LossKind kind, LossConfig& cfg,
                                    const GradCheckConfig& gc = {});

struct GradCheckSuiteEntry {
  LossKind loss;
  DeltaKind delta_kind;
  double max_rel_err = 0.0;
  bool pass = true;
};

/// Finite-difference verification of every loss x delta combination on a
/// seeded random batch each.
std::vector<GradCheckSuiteEntry> run_gradcheck_suite(std::uint64_t seed,
                                                     std::size_t batch_size = 8,
                                                     std::size_t dim = 16,
                                                     const GradCheckConfig& gc = {});

}  // namespace imc
