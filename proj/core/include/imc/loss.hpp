// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imc/linalg.hpp"
#include "imc/similarity.hpp"

namespace imc {

/// How the hardest-negative loss reduces over the batch.
///   PerAnchorSum: per-anchor max over negatives, averaged over anchors
///                 (the usual hardest-negative semantics).
///   GlobalMax:    one single max over all (anchor, negative) pairs per
///                 direction, unnormalized.
enum class MhReduction { PerAnchorSum, GlobalMax };

/// Direction of the banded intra-modal term.
///   AsWritten:  penalizes delta itself inside the (mu_down, mu_up) band,
///               pulling in-band intra-modal negatives together.
///   Repulsive:  penalizes [mu_up - delta]_+ inside the band, pushing
///               intra-modal negatives apart until delta reaches mu_up.
enum class ImcVariant { AsWritten, Repulsive };

std::string to_string(MhReduction r);
MhReduction mh_reduction_from_string(const std::string& s);
std::string to_string(ImcVariant v);
ImcVariant imc_variant_from_string(const std::string& s);

struct LossConfig {
  double alpha = 0.2;     // ranking margin
  double lambda = 1.0;    // intra-modal constraint weight
  double mu_down = 0.05;  // lower band threshold
  double mu_up = 0.5;     // upper band threshold
  DeltaKind delta_kind = DeltaKind::L1;
  MhReduction mh_reduction = MhReduction::PerAnchorSum;
  ImcVariant imc_variant = ImcVariant::AsWritten;

  /// Throws ConfigError unless alpha >= 0, lambda >= 0, 0 <= mu_down < mu_up.
  void validate() const;
};

/// One mini-batch of paired embeddings. Row n of `images` and row n of
/// `texts` is a positive pair; rows sharing a group id describe the same
/// underlying image and are never used as negatives of each other.
struct EmbeddingBatch {
  Mat images;  // B x d
  Mat texts;   // B x d
  std::vector<std::int64_t> group_ids;

  std::size_t size() const { return group_ids.size(); }
};

struct LossOutput {
  double value = 0.0;
  Mat d_images;  // dL/d(images), B x d
  Mat d_texts;   // dL/d(texts),  B x d
};

/// Value plus gradient of an intra-modal constraint term over one modality.
struct ImcTermOutput {
  double value = 0.0;
  Mat d_v;
};

/// Sum-of-hinges ranking loss over all in-batch negatives, both directions,
/// divided by the anchor count. Exact subgradients; an inactive hinge
/// contributes nothing.
LossOutput sh_loss(const EmbeddingBatch& batch, const LossConfig& cfg);

/// Hardest-negative ranking loss. Gradient flows only through the maximizing
/// negative per anchor (ties broken by the lowest negative index).
LossOutput mh_loss(const EmbeddingBatch& batch, const LossConfig& cfg);

/// Banded intra-modal constraint over one modality's rows. Only unordered
/// pairs with differing group ids and mu_down < delta < mu_up contribute;
/// the sum is scaled by lambda and divided by the number of contributing
/// pairs (zero when none contribute). Band boundaries contribute zero value
/// and zero gradient.
ImcTermOutput imc_term(const Mat& v, std::span<const std::int64_t> group_ids,
                       const LossConfig& cfg);

/// mh_loss + imc_term(images) + imc_term(texts). With lambda == 0 this is
/// bit-identical to mh_loss, value and gradients.
LossOutput imc_loss(const EmbeddingBatch& batch, const LossConfig& cfg);

enum class LossKind { Sh, Mh, Imc };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

LossOutput compute_loss(LossKind kind, const EmbeddingBatch& batch, const LossConfig& cfg);

}  // namespace imc
