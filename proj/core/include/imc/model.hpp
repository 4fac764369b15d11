// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "imc/linalg.hpp"
#include "imc/rng.hpp"

namespace imc {

enum class Modality { Image, Text };

/// One trainable affine head per modality projecting raw features into the
/// shared embedding space. Dropout is applied to the head input in training
/// mode (by default only on the text side); rows are L2-normalized on output
/// when normalize_output is set.
struct ProjectionModel {
  Mat w_img;  // d_in_img x d
  Vec b_img;  // d
  Mat w_txt;  // d_in_txt x d
  Vec b_txt;  // d

  double dropout_p = 0.5;
  bool dropout_on_img = false;
  bool dropout_on_txt = true;
  bool normalize_output = true;

  std::size_t embed_dim() const { return w_img.cols(); }
  std::size_t input_dim(Modality mod) const {
    return mod == Modality::Image ? w_img.rows() : w_txt.rows();
  }
};

/// Xavier-initialized heads with zero biases.
ProjectionModel make_model(Rng& rng, std::size_t d_in_img, std::size_t d_in_txt,
                           std::size_t embed_dim, double dropout_p = 0.5);

/// Intermediate values retained for the backward pass.
struct ForwardCache {
  Mat input;     // head input after dropout (train) or as-is (eval)
  Mat pre_norm;  // affine output
  Mat output;    // final embeddings
};

/// Projects a batch of feature rows. In training mode, inverted dropout with
/// keep probability 1 - p runs on the head input so that evaluation needs no
/// rescaling; rng is only consumed when dropout actually applies.
ForwardCache forward_cached(const ProjectionModel& model, const Mat& feats, Modality mod,
                            bool train_mode, Rng* rng);

Mat forward(const ProjectionModel& model, const Mat& feats, Modality mod, bool train_mode,
            Rng& rng);

/// Evaluation-mode forward: no dropout, no rng.
Mat forward_eval(const ProjectionModel& model, const Mat& feats, Modality mod);

struct HeadGrads {
  Mat d_w;
  Vec d_b;
};

/// Backpropagates d(loss)/d(embeddings) through normalization and the affine
/// map to the head parameters.
HeadGrads backward_head(const ProjectionModel& model, const ForwardCache& cache,
                        const Mat& d_out);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter tensor.
struct AdamState {
  Vec m;
  Vec v;
  std::int64_t t = 0;
  AdamConfig cfg;

  explicit AdamState(std::size_t n, AdamConfig cfg = {});
};

/// Standard bias-corrected Adam update. Throws NumericalError on a
/// non-finite gradient; increments t.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr);

/// Binary checkpoint, magic "IMCK": the four named parameter tensors with
/// row-major little-endian doubles. Runtime flags (dropout, normalization)
/// are configuration, not checkpoint state.
void save_checkpoint(const std::filesystem::path& path, const ProjectionModel& model);
ProjectionModel load_checkpoint(const std::filesystem::path& path);

}  // namespace imc
