// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/loss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "imc/errors.hpp"

namespace imc {

namespace {

constexpr double kDegenerateNorm = 1e-20;

void validate_batch(const EmbeddingBatch& b) {
  if (b.images.rows() != b.texts.rows() || b.images.cols() != b.texts.cols()) {
    throw InvalidShapeError("embedding batch: images and texts must have identical shape");
  }
  if (b.group_ids.size() != b.images.rows()) {
    throw InvalidShapeError("embedding batch: group_ids size must equal batch size");
  }
  if (b.size() < 2) {
    throw InsufficientBatchError("embedding batch: need at least 2 rows to form a negative");
  }
  require_finite(b.images, "embedding batch images");
  require_finite(b.texts, "embedding batch texts");
}

struct RowGeometry {
  Mat hat;    // row-normalized
  Vec norms;  // row norms
};

RowGeometry row_geometry(const Mat& m, const char* what) {
  RowGeometry g;
  g.hat = Mat(m.rows(), m.cols());
  g.norms.resize(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm(m.row(r));
    if (n < kDegenerateNorm) {
      throw DegenerateInputError(std::string(what) + ": row " + std::to_string(r) +
                                 " has norm below 1e-20");
    }
    g.norms[r] = n;
    for (std::size_t c = 0; c < m.cols(); ++c) g.hat(r, c) = m(r, c) / n;
  }
  return g;
}

// d cos(a, b) / d a = (b_hat - cos * a_hat) / ||a||, accumulated with a sign.
void add_cos_grad(std::span<double> out, std::span<const double> self_hat,
                  double self_norm, std::span<const double> other_hat, double cos_val,
                  double sign) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] += sign * (other_hat[k] - cos_val * self_hat[k]) / self_norm;
  }
}

void scale_in_place(Mat& m, double s) {
  for (double& x : m.data()) x *= s;
}

void check_output(const LossOutput& out, const char* what) {
  if (!std::isfinite(out.value) || !all_finite(out.d_images) || !all_finite(out.d_texts)) {
    throw NumericalError(std::string(what) + ": non-finite loss or gradient");
  }
}

// Shared state for the two hinge losses: cosine table over the batch.
struct HingeContext {
  RowGeometry img;
  RowGeometry txt;
  Mat cos_it;  // cos(i_n, t_m), B x B
  Vec pos;     // cos(i_n, t_n)

  explicit HingeContext(const EmbeddingBatch& b)
      : img(row_geometry(b.images, "sh/mh loss images")),
        txt(row_geometry(b.texts, "sh/mh loss texts")) {
    cos_it = matmul(img.hat, transpose(txt.hat));
    pos.resize(b.size());
    for (std::size_t n = 0; n < b.size(); ++n) pos[n] = cos_it(n, n);
  }
};

// Accumulates the gradient of one active image-anchored hinge
// [alpha - cos(i_n, t_n) + cos(i_n, t_m)]_+ into the output.
void add_image_anchor_grad(LossOutput& out, const HingeContext& ctx, std::size_t n,
                           std::size_t m) {
  add_cos_grad(out.d_images.row(n), ctx.img.hat.row(n), ctx.img.norms[n],
               ctx.txt.hat.row(n), ctx.pos[n], -1.0);
  add_cos_grad(out.d_texts.row(n), ctx.txt.hat.row(n), ctx.txt.norms[n],
               ctx.img.hat.row(n), ctx.pos[n], -1.0);
  add_cos_grad(out.d_images.row(n), ctx.img.hat.row(n), ctx.img.norms[n],
               ctx.txt.hat.row(m), ctx.cos_it(n, m), 1.0);
  add_cos_grad(out.d_texts.row(m), ctx.txt.hat.row(m), ctx.txt.norms[m],
               ctx.img.hat.row(n), ctx.cos_it(n, m), 1.0);
}

// Text-anchored counterpart: [alpha - cos(i_n, t_n) + cos(i_m, t_n)]_+.
void add_text_anchor_grad(LossOutput& out, const HingeContext& ctx, std::size_t n,
                          std::size_t m) {
  add_cos_grad(out.d_images.row(n), ctx.img.hat.row(n), ctx.img.norms[n],
               ctx.txt.hat.row(n), ctx.pos[n], -1.0);
  add_cos_grad(out.d_texts.row(n), ctx.txt.hat.row(n), ctx.txt.norms[n],
               ctx.img.hat.row(n), ctx.pos[n], -1.0);
  add_cos_grad(out.d_texts.row(n), ctx.txt.hat.row(n), ctx.txt.norms[n],
               ctx.img.hat.row(m), ctx.cos_it(m, n), 1.0);
  add_cos_grad(out.d_images.row(m), ctx.img.hat.row(m), ctx.img.norms[m],
               ctx.txt.hat.row(n), ctx.cos_it(m, n), 1.0);
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("loss config: alpha must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("loss config: lambda must be >= 0");
  if (!(mu_down >= 0.0 && mu_down < mu_up)) {
    throw ConfigError("loss config: need 0 <= mu_down < mu_up");
  }
}

std::string to_string(MhReduction r) {
  return r == MhReduction::PerAnchorSum ? "per-anchor" : "global-max";
}

MhReduction mh_reduction_from_string(const std::string& s) {
  if (s == "per-anchor") return MhReduction::PerAnchorSum;
  if (s == "global-max") return MhReduction::GlobalMax;
  throw ConfigError("unknown mh reduction '" + s + "' (expected per-anchor|global-max)");
}

std::string to_string(ImcVariant v) {
  return v == ImcVariant::AsWritten ? "as-written" : "repulsive";
}

ImcVariant imc_variant_from_string(const std::string& s) {
  if (s == "as-written") return ImcVariant::AsWritten;
  if (s == "repulsive") return ImcVariant::Repulsive;
  throw ConfigError("unknown imc variant '" + s + "' (expected as-written|repulsive)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Sh: return "sh";
    case LossKind::Mh: return "mh";
    case LossKind::Imc: return "imc";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "sh") return LossKind::Sh;
  if (s == "mh") return LossKind::Mh;
  if (s == "imc") return LossKind::Imc;
  throw ConfigError("unknown loss '" + s + "' (expected sh|mh|imc)");
}

LossOutput sh_loss(const EmbeddingBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  validate_batch(batch);
  const std::size_t B = batch.size();
  HingeContext ctx(batch);

  LossOutput out;
  out.d_images = Mat(B, batch.images.cols());
  out.d_texts = Mat(B, batch.texts.cols());

  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t m = 0; m < B; ++m) {
      if (batch.group_ids[m] == batch.group_ids[n]) continue;
      const double h_img = cfg.alpha - ctx.pos[n] + ctx.cos_it(n, m);
      if (h_img > 0.0) {
        out.value += h_img;
        add_image_anchor_grad(out, ctx, n, m);
      }
      const double h_txt = cfg.alpha - ctx.pos[n] + ctx.cos_it(m, n);
      if (h_txt > 0.0) {
        out.value += h_txt;
        add_text_anchor_grad(out, ctx, n, m);
      }
    }
  }

  const double inv_b = 1.0 / static_cast<double>(B);
  out.value *= inv_b;
  scale_in_place(out.d_images, inv_b);
  scale_in_place(out.d_texts, inv_b);
  check_output(out, "sh_loss");
  return out;
}

LossOutput mh_loss(const EmbeddingBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  validate_batch(batch);
  const std::size_t B = batch.size();
  HingeContext ctx(batch);

  LossOutput out;
  out.d_images = Mat(B, batch.images.cols());
  out.d_texts = Mat(B, batch.texts.cols());

  constexpr double kNoNegative = -std::numeric_limits<double>::infinity();

  if (cfg.mh_reduction == MhReduction::PerAnchorSum) {
    for (std::size_t n = 0; n < B; ++n) {
      double best_img = kNoNegative, best_txt = kNoNegative;
      std::size_t arg_img = 0, arg_txt = 0;
      for (std::size_t m = 0; m < B; ++m) {
        if (batch.group_ids[m] == batch.group_ids[n]) continue;
        const double h_img = cfg.alpha - ctx.pos[n] + ctx.cos_it(n, m);
        if (h_img > best_img) {
          best_img = h_img;
          arg_img = m;
        }
        const double h_txt = cfg.alpha - ctx.pos[n] + ctx.cos_it(m, n);
        if (h_txt > best_txt) {
          best_txt = h_txt;
          arg_txt = m;
        }
      }
      if (best_img > 0.0) {
        out.value += best_img;
        add_image_anchor_grad(out, ctx, n, arg_img);
      }
      if (best_txt > 0.0) {
        out.value += best_txt;
        add_text_anchor_grad(out, ctx, n, arg_txt);
      }
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    out.value *= inv_b;
    scale_in_place(out.d_images, inv_b);
    scale_in_place(out.d_texts, inv_b);
  } else {
    // Literal reading: a single max over all (anchor, negative) pairs per
    // direction, ties broken by the lowest (n, m). No batch normalization.
    double best_img = kNoNegative, best_txt = kNoNegative;
    std::size_t arg_img_n = 0, arg_img_m = 0, arg_txt_n = 0, arg_txt_m = 0;
    for (std::size_t n = 0; n < B; ++n) {
      for (std::size_t m = 0; m < B; ++m) {
        if (batch.group_ids[m] == batch.group_ids[n]) continue;
        const double h_img = cfg.alpha - ctx.pos[n] + ctx.cos_it(n, m);
        if (h_img > best_img) {
          best_img = h_img;
          arg_img_n = n;
          arg_img_m = m;
        }
        const double h_txt = cfg.alpha - ctx.pos[n] + ctx.cos_it(m, n);
        if (h_txt > best_txt) {
          best_txt = h_txt;
          arg_txt_n = n;
          arg_txt_m = m;
        }
      }
    }
    if (best_img > 0.0) {
      out.value += best_img;
      add_image_anchor_grad(out, ctx, arg_img_n, arg_img_m);
    }
    if (best_txt > 0.0) {
      out.value += best_txt;
      add_text_anchor_grad(out, ctx, arg_txt_n, arg_txt_m);
    }
  }
  check_output(out, "mh_loss");
  return out;
}

ImcTermOutput imc_term(const Mat& v, std::span<const std::int64_t> group_ids,
                       const LossConfig& cfg) {
  cfg.validate();
  if (group_ids.size() != v.rows()) {
    throw InvalidShapeError("imc_term: group_ids size must equal row count");
  }
  if (v.rows() < 2) {
    throw InsufficientBatchError("imc_term: need at least 2 rows");
  }
  require_finite(v, "imc_term");

  ImcTermOutput out;
  out.d_v = Mat(v.rows(), v.cols());
  if (cfg.lambda == 0.0) return out;

  double sum = 0.0;
  std::size_t contributing = 0;
  Mat grad(v.rows(), v.cols());

  for (std::size_t n = 0; n + 1 < v.rows(); ++n) {
    for (std::size_t m = n + 1; m < v.rows(); ++m) {
      if (group_ids[m] == group_ids[n]) continue;
      ScoreGrad sg = delta(cfg.delta_kind, v.row(n), v.row(m));
      if (!(sg.value > cfg.mu_down && sg.value < cfg.mu_up)) continue;
      ++contributing;
      const double sign = cfg.imc_variant == ImcVariant::AsWritten ? 1.0 : -1.0;
      sum += cfg.imc_variant == ImcVariant::AsWritten ? sg.value : cfg.mu_up - sg.value;
      auto gn = grad.row(n);
      auto gm = grad.row(m);
      for (std::size_t k = 0; k < v.cols(); ++k) {
        gn[k] += sign * sg.d_x[k];
        gm[k] += sign * sg.d_y[k];
      }
    }
  }

  if (contributing == 0) return out;
  const double scale = cfg.lambda / static_cast<double>(contributing);
  out.value = scale * sum;
  scale_in_place(grad, scale);
  out.d_v = std::move(grad);
  if (!std::isfinite(out.value) || !all_finite(out.d_v)) {
    throw NumericalError("imc_term: non-finite value or gradient");
  }
  return out;
}

LossOutput imc_loss(const EmbeddingBatch& batch, const LossConfig& cfg) {
  LossOutput out = mh_loss(batch, cfg);
  // lambda == 0 must reproduce the hardest-negative loss bit for bit, so the
  // constraint terms are not even added (x + 0.0 flips the sign of -0.0).
  if (cfg.lambda == 0.0) return out;

  ImcTermOutput img = imc_term(batch.images, batch.group_ids, cfg);
  ImcTermOutput txt = imc_term(batch.texts, batch.group_ids, cfg);
  out.value += img.value + txt.value;
  for (std::size_t i = 0; i < out.d_images.data().size(); ++i) {
    out.d_images.data()[i] += img.d_v.data()[i];
  }
  for (std::size_t i = 0; i < out.d_texts.data().size(); ++i) {
    out.d_texts.data()[i] += txt.d_v.data()[i];
  }
  check_output(out, "imc_loss");
  return out;
}

LossOutput compute_loss(LossKind kind, const EmbeddingBatch& batch, const LossConfig& cfg) {
  switch (kind) {
    case LossKind::Sh: return sh_loss(batch, cfg);
    case LossKind::Mh: return mh_loss(batch, cfg);
    case LossKind::Imc: return imc_loss(batch, cfg);
  }
  throw ConfigError("compute_loss: unknown kind");
}

}  // namespace imc
