// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "imc/linalg.hpp"
#include "imc/rng.hpp"

namespace imc {

/// Raw (pre-embedding) feature vectors with the caption -> image grouping.
/// Several captions may describe the same image; that mapping defines both
/// retrieval relevance and which pairs are forbidden as negatives.
struct FeatureStore {
  Mat image_feats;  // num_images x d_in_img
  Mat text_feats;   // num_captions x d_in_txt
  std::vector<std::size_t> caption_to_image;

  std::size_t num_images() const { return image_feats.rows(); }
  std::size_t num_captions() const { return text_feats.rows(); }

  /// Integrity check: mapping in range, every image described at least once,
  /// all values finite. Throws DataError.
  void validate() const;
};

/// Disjoint train/val/test image-id sets, with an optional partition of the
/// test ids into equal folds for fold-averaged evaluation.
struct SplitSpec {
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
  std::vector<std::size_t> test_ids;
  std::vector<std::vector<std::size_t>> folds;

  void validate(std::size_t num_images) const;
};

/// Seeded shuffle of [0, num_images) carved into train/val/test by fraction;
/// folds, when requested, are contiguous equal chunks of the shuffled test
/// ids. Throws ConfigError if the test set does not divide evenly.
SplitSpec make_split(std::size_t num_images, double train_frac, double val_frac,
                     std::uint64_t seed, std::size_t num_folds = 0);

struct SyntheticSpec {
  std::size_t num_classes = 100;
  std::size_t captions_per_image = 5;
  std::size_t d_in_img = 64;
  std::size_t d_in_txt = 64;
  double noise_sigma = 0.05;
  /// Use identity feature maps instead of random orthogonal ones. Requires
  /// d_in_img == d_in_txt.
  bool identity_maps = false;
};

/// Synthetic store plus the ground truth that produced it. The maps have
/// orthonormal rows, so transposing them yields projection heads that
/// recover the latent class direction exactly (the zero-noise oracle).
struct SyntheticData {
  FeatureStore store;
  Mat class_dirs;  // num_classes x latent_dim, unit rows
  Mat img_map;     // latent_dim x d_in_img, orthonormal rows
  Mat txt_map;     // latent_dim x d_in_txt, orthonormal rows
};

/// One latent unit direction per class; the image feature is that direction
/// through a fixed linear map plus Gaussian noise, and each caption goes
/// through a different fixed map with independent noise.
SyntheticData generate_synthetic(Rng& rng, const SyntheticSpec& spec);

/// Binary feature-vector files (magic "CMFV") plus a caption_id,image_id
/// index CSV.
void save_store(const std::filesystem::path& image_path,
                const std::filesystem::path& text_path,
                const std::filesystem::path& index_path, const FeatureStore& store);

FeatureStore load_store(const std::filesystem::path& image_path,
                        const std::filesystem::path& text_path,
                        const std::filesystem::path& index_path);

struct BatchPlan {
  std::uint64_t seed = 0;
  std::size_t batch_size = 128;
};

/// Raw-feature mini-batch: caption rows paired with their image's feature
/// row; group ids carry the image identity.
struct FeatureBatch {
  Mat image_feats;  // B x d_in_img
  Mat text_feats;   // B x d_in_txt
  std::vector<std::int64_t> group_ids;
  std::vector<std::size_t> caption_ids;
};

/// Every caption of the given images exactly once per epoch, in a seeded
/// per-epoch order. A trailing batch smaller than 2 is dropped (the ranking
/// losses need at least one negative).
std::vector<FeatureBatch> make_batches(const FeatureStore& store,
                                       std::span<const std::size_t> image_ids,
                                       const BatchPlan& plan, std::size_t epoch);

}  // namespace imc
