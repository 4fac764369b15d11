// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "imc/dataset.hpp"
#include "imc/linalg.hpp"
#include "imc/model.hpp"

namespace imc {

enum class Direction { ImageQueryText, TextQueryImage };

/// Scores of every query row against every candidate column, with the set of
/// relevant candidates per query.
struct ScoreMatrix {
  Mat scores;
  Direction direction = Direction::ImageQueryText;
  std::vector<std::vector<std::size_t>> relevant;  // per query
};

/// Percentage of queries whose top-k candidates (descending score, ties by
/// lower candidate index) contain at least one relevant item.
double recall_at_k(const ScoreMatrix& sm, std::size_t k);

struct DirectionRecalls {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
};

struct RetrievalReport {
  DirectionRecalls i2t;  // image-query-text
  DirectionRecalls t2i;  // text-query-image
  double rsum = 0.0;
  std::vector<RetrievalReport> folds;  // per-fold reports when folded
};

/// R@1 + R@5 + R@10 summed over both directions.
double r_sum(const DirectionRecalls& i2t, const DirectionRecalls& t2i);

/// Embeds the given test images and their captions (eval mode), scores with
/// cosine similarity, and reports both retrieval directions.
RetrievalReport evaluate_on(const ProjectionModel& model, const FeatureStore& store,
                            std::span<const std::size_t> image_ids);

/// Full-test report; with folds present, the top-level numbers are the
/// arithmetic mean over the per-fold reports.
RetrievalReport evaluate(const ProjectionModel& model, const FeatureStore& store,
                         const SplitSpec& split);

std::string report_to_json(const RetrievalReport& report);

extern const char* const kReportCsvHeader;  // "i2t_r1,...,rsum"
std::string report_csv_row(const RetrievalReport& report);

}  // namespace imc
