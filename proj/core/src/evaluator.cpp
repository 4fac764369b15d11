// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "imc/errors.hpp"

namespace imc {

namespace {

std::string format_pct(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// R@K with K beyond the pool is the recall over the whole pool; clamping
// keeps small validation sets usable.
DirectionRecalls direction_recalls(const ScoreMatrix& sm) {
  const std::size_t candidates = sm.scores.cols();
  DirectionRecalls r;
  r.r1 = recall_at_k(sm, 1);
  r.r5 = recall_at_k(sm, std::min<std::size_t>(5, candidates));
  r.r10 = recall_at_k(sm, std::min<std::size_t>(10, candidates));
  return r;
}

}  // namespace

const char* const kReportCsvHeader =
    "i2t_r1,i2t_r5,i2t_r10,t2i_r1,t2i_r5,t2i_r10,rsum";

double recall_at_k(const ScoreMatrix& sm, std::size_t k) {
  const std::size_t queries = sm.scores.rows();
  const std::size_t candidates = sm.scores.cols();
  if (queries == 0 || candidates == 0) {
    throw InvalidShapeError("recall_at_k: empty score matrix");
  }
  if (k < 1 || k > candidates) {
    throw ConfigError("recall_at_k: k must be in [1, candidate count]");
  }
  if (sm.relevant.size() != queries) {
    throw InvalidShapeError("recall_at_k: relevance list size mismatch");
  }
  require_finite(sm.scores, "recall_at_k scores");

  std::size_t hits = 0;
  for (std::size_t q = 0; q < queries; ++q) {
    if (sm.relevant[q].empty()) {
      throw DataError("recall_at_k: query " + std::to_string(q) +
                      " has no relevant candidates");
    }
    auto row = sm.scores.row(q);
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t c : sm.relevant[q]) {
      if (c >= candidates) {
        throw DataError("recall_at_k: relevant candidate out of range");
      }
      // Rank under descending score with ties broken by lower index.
      std::size_t rank = 1;
      for (std::size_t j = 0; j < candidates; ++j) {
        if (row[j] > row[c] || (row[j] == row[c] && j < c)) ++rank;
      }
      best_rank = std::min(best_rank, rank);
    }
    if (best_rank <= k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(queries);
}

double r_sum(const DirectionRecalls& i2t, const DirectionRecalls& t2i) {
  return i2t.r1 + i2t.r5 + i2t.r10 + t2i.r1 + t2i.r5 + t2i.r10;
}

RetrievalReport evaluate_on(const ProjectionModel& model, const FeatureStore& store,
                            std::span<const std::size_t> image_ids) {
  if (image_ids.empty()) throw DataError("evaluate: empty image set");

  std::vector<std::size_t> image_pos(store.num_images(),
                                     std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (image_ids[i] >= store.num_images()) {
      throw DataError("evaluate: image id out of range");
    }
    image_pos[image_ids[i]] = i;
  }

  std::vector<std::size_t> caption_ids;
  for (std::size_t c = 0; c < store.num_captions(); ++c) {
    if (image_pos[store.caption_to_image[c]] !=
        std::numeric_limits<std::size_t>::max()) {
      caption_ids.push_back(c);
    }
  }
  if (caption_ids.empty()) throw DataError("evaluate: no captions for the image set");

  Mat img_feats(image_ids.size(), store.image_feats.cols());
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    auto src = store.image_feats.row(image_ids[i]);
    std::copy(src.begin(), src.end(), img_feats.row(i).begin());
  }
  Mat txt_feats(caption_ids.size(), store.text_feats.cols());
  for (std::size_t i = 0; i < caption_ids.size(); ++i) {
    auto src = store.text_feats.row(caption_ids[i]);
    std::copy(src.begin(), src.end(), txt_feats.row(i).begin());
  }

  // Retrieval scores are cosine similarities in the learned space.
  const Mat img_hat = normalize_rows(forward_eval(model, img_feats, Modality::Image));
  const Mat txt_hat = normalize_rows(forward_eval(model, txt_feats, Modality::Text));
  const Mat scores_i2t = matmul(img_hat, transpose(txt_hat));

  ScoreMatrix i2t;
  i2t.direction = Direction::ImageQueryText;
  i2t.scores = scores_i2t;
  i2t.relevant.resize(image_ids.size());
  for (std::size_t c = 0; c < caption_ids.size(); ++c) {
    i2t.relevant[image_pos[store.caption_to_image[caption_ids[c]]]].push_back(c);
  }

  ScoreMatrix t2i;
  t2i.direction = Direction::TextQueryImage;
  t2i.scores = transpose(scores_i2t);
  t2i.relevant.resize(caption_ids.size());
  for (std::size_t c = 0; c < caption_ids.size(); ++c) {
    t2i.relevant[c].push_back(image_pos[store.caption_to_image[caption_ids[c]]]);
  }

  RetrievalReport report;
  report.i2t = direction_recalls(i2t);
  report.t2i = direction_recalls(t2i);
  report.rsum = r_sum(report.i2t, report.t2i);
  return report;
}

RetrievalReport evaluate(const ProjectionModel& model, const FeatureStore& store,
                         const SplitSpec& split) {
  if (split.folds.empty()) {
    return evaluate_on(model, store, split.test_ids);
  }
  RetrievalReport mean;
  for (const auto& fold : split.folds) {
    mean.folds.push_back(evaluate_on(model, store, fold));
  }
  const double n = static_cast<double>(mean.folds.size());
  for (const auto& fr : mean.folds) {
    mean.i2t.r1 += fr.i2t.r1 / n;
    mean.i2t.r5 += fr.i2t.r5 / n;
    mean.i2t.r10 += fr.i2t.r10 / n;
    mean.t2i.r1 += fr.t2i.r1 / n;
    mean.t2i.r5 += fr.t2i.r5 / n;
    mean.t2i.r10 += fr.t2i.r10 / n;
  }
  mean.rsum = r_sum(mean.i2t, mean.t2i);
  return mean;
}

std::string report_to_json(const RetrievalReport& report) {
  nlohmann::json j;
  j["image_query_text"] = {{"r1", report.i2t.r1}, {"r5", report.i2t.r5}, {"r10", report.i2t.r10}};
  j["text_query_image"] = {{"r1", report.t2i.r1}, {"r5", report.t2i.r5}, {"r10", report.t2i.r10}};
  j["rsum"] = report.rsum;
  if (!report.folds.empty()) {
    j["folds"] = nlohmann::json::array();
    for (const auto& fr : report.folds) {
      j["folds"].push_back(nlohmann::json::parse(report_to_json(fr)));
    }
  }
  return j.dump(2);
}

std::string report_csv_row(const RetrievalReport& report) {
  return format_pct(report.i2t.r1) + "," + format_pct(report.i2t.r5) + "," +
         format_pct(report.i2t.r10) + "," + format_pct(report.t2i.r1) + "," +
         format_pct(report.t2i.r5) + "," + format_pct(report.t2i.r10) + "," +
         format_pct(report.rsum);
}

}  // namespace imc
