// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "imc/errors.hpp"
#include "imc/evaluator.hpp"

namespace imc {

namespace {

constexpr std::uint64_t kDropoutSalt = 0xd509;

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainSpec::validate() const {
  if (epochs < 1) throw ConfigError("train spec: epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("train spec: batch size must be >= 2");
  if (!(lr0 >= 0.0)) throw ConfigError("train spec: lr0 must be >= 0");
  if (decay_every < 1) throw ConfigError("train spec: decay_every must be >= 1");
  if (!(decay_factor > 0.0)) throw ConfigError("train spec: decay_factor must be > 0");
  loss_cfg.validate();
}

double lr_at_epoch(const TrainSpec& spec, std::size_t epoch) {
  const auto decays = static_cast<double>(epoch / spec.decay_every);
  return spec.lr0 * std::pow(spec.decay_factor, decays);
}

TrainResult train(const FeatureStore& store, const SplitSpec& split, ProjectionModel model,
                  const TrainSpec& spec) {
  spec.validate();
  store.validate();
  split.validate(store.num_images());
  if (split.train_ids.empty()) throw DataError("train: empty training split");
  if (split.val_ids.empty()) {
    throw DataError("train: empty validation split (needed for model selection)");
  }
  if (model.input_dim(Modality::Image) != store.image_feats.cols() ||
      model.input_dim(Modality::Text) != store.text_feats.cols()) {
    throw InvalidShapeError("train: model input dims do not match the store");
  }

  Rng dropout_rng = Rng(spec.seed).derive(kDropoutSalt);
  const BatchPlan plan{spec.seed, spec.batch_size};

  AdamState st_w_img(model.w_img.data().size(), spec.adam);
  AdamState st_b_img(model.b_img.size(), spec.adam);
  AdamState st_w_txt(model.w_txt.data().size(), spec.adam);
  AdamState st_b_txt(model.b_txt.size(), spec.adam);

  TrainResult result;
  result.best_val_rsum = -1.0;

  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    const double lr = lr_at_epoch(spec, epoch);
    const auto batches = make_batches(store, split.train_ids, plan, epoch);
    if (batches.empty()) {
      throw DataError("train: epoch produced no usable batches");
    }

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& fb : batches) {
      try {
        ForwardCache img_cache = forward_cached(model, fb.image_feats, Modality::Image,
                                                /*train_mode=*/true, &dropout_rng);
        ForwardCache txt_cache = forward_cached(model, fb.text_feats, Modality::Text,
                                                /*train_mode=*/true, &dropout_rng);
        EmbeddingBatch eb{img_cache.output, txt_cache.output, fb.group_ids};
        LossOutput lo = compute_loss(spec.loss_kind, eb, spec.loss_cfg);
        if (!std::isfinite(lo.value)) {
          throw NonFiniteError("loss value");
        }
        HeadGrads g_img = backward_head(model, img_cache, lo.d_images);
        HeadGrads g_txt = backward_head(model, txt_cache, lo.d_texts);

        adam_step(st_w_img, std::span(model.w_img.data()), std::span(g_img.d_w.data()),
                  lr);
        adam_step(st_b_img, std::span(model.b_img), std::span(g_img.d_b), lr);
        adam_step(st_w_txt, std::span(model.w_txt.data()), std::span(g_txt.d_w.data()),
                  lr);
        adam_step(st_b_txt, std::span(model.b_txt), std::span(g_txt.d_b), lr);

        loss_sum += lo.value;
      } catch (const NonFiniteError& e) {
        throw NumericalError("train: diverged at epoch " + std::to_string(epoch) +
                             " step " + std::to_string(steps) + ": " + e.what());
      }
      ++steps;
    }

    const double val_rsum = evaluate_on(model, store, split.val_ids).rsum;
    result.log.push_back({epoch, lr, loss_sum / static_cast<double>(steps), val_rsum});
    if (val_rsum > result.best_val_rsum) {
      result.best_val_rsum = val_rsum;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

std::string metrics_csv_string(std::span<const EpochMetrics> log) {
  std::string out = "epoch,lr,train_loss,val_rsum\n";
  for (const auto& em : log) {
    out += std::to_string(em.epoch) + "," + format_full(em.lr) + "," +
           format_full(em.train_loss) + "," + format_full(em.val_rsum) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const EpochMetrics> log) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for write: " + path.string());
  os << metrics_csv_string(log);
  if (!os) throw DataError("write failed: " + path.string());
}

ProjectionModel oracle_model(const SyntheticData& data) {
  ProjectionModel model;
  model.w_img = transpose(data.img_map);
  model.w_txt = transpose(data.txt_map);
  model.b_img.assign(model.w_img.cols(), 0.0);
  model.b_txt.assign(model.w_txt.cols(), 0.0);
  model.dropout_p = 0.0;
  model.normalize_output = true;
  return model;
}

}  // namespace imc
