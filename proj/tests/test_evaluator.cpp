// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "imc/errors.hpp"
#include "imc/evaluator.hpp"
#include "imc/experiments.hpp"
#include "imc/trainer.hpp"
#include "support/oracles.hpp"

using namespace imc;
using namespace imc::testing;
using Catch::Approx;

namespace {

ScoreMatrix diagonal_matrix(std::size_t n) {
  ScoreMatrix sm;
  sm.scores = Mat(n, n, 0.0);
  sm.relevant.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sm.scores(i, i) = 1.0;
    sm.relevant[i] = {i};
  }
  return sm;
}

ScoreMatrix random_matrix(Rng& rng, std::size_t q, std::size_t c) {
  ScoreMatrix sm;
  sm.scores = Mat(q, c);
  for (double& x : sm.scores.data()) x = rng.normal();
  sm.relevant.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    const std::size_t count = 1 + rng.next_u64() % 3;
    for (std::size_t j = 0; j < count; ++j) {
      sm.relevant[i].push_back(rng.next_u64() % c);
    }
  }
  return sm;
}

}  // namespace

TEST_CASE("recall_at_k: perfect diagonal retrieval") {
  const ScoreMatrix sm = diagonal_matrix(8);
  REQUIRE(recall_at_k(sm, 1) == 100.0);
  REQUIRE(recall_at_k(sm, 5) == 100.0);
}

TEST_CASE("recall_at_k: relevant at ranks 1, 3, 7") {
  ScoreMatrix sm;
  sm.scores = Mat(3, 12);
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t c = 0; c < 12; ++c) {
      sm.scores(q, c) = 1.0 / static_cast<double>(c + 1);  // rank c+1 at index c
    }
  }
  sm.relevant = {{0}, {2}, {6}};
  REQUIRE(recall_at_k(sm, 1) == Approx(100.0 / 3.0).margin(1e-9));
  REQUIRE(recall_at_k(sm, 5) == Approx(200.0 / 3.0).margin(1e-9));
  REQUIRE(recall_at_k(sm, 10) == 100.0);
}

TEST_CASE("recall_at_k: ties break toward the lower candidate index") {
  ScoreMatrix sm;
  sm.scores = Mat(1, 4, 1.0);  // all tied
  sm.relevant = {{0}};
  REQUIRE(recall_at_k(sm, 1) == 100.0);
  sm.relevant = {{3}};
  REQUIRE(recall_at_k(sm, 1) == 0.0);
  REQUIRE(recall_at_k(sm, 4) == 100.0);
}

TEST_CASE("recall_at_k: equals the sort-based oracle on random matrices") {
  Rng rng(401);
  for (int trial = 0; trial < 20; ++trial) {
    const ScoreMatrix sm = random_matrix(rng, 50, 50);
    for (std::size_t k : {1ul, 5ul, 10ul, 50ul}) {
      REQUIRE(recall_at_k(sm, k) == recall_oracle(sm.scores, sm.relevant, k));
    }
  }
}

TEST_CASE("recall_at_k: monotone in k") {
  Rng rng(402);
  const ScoreMatrix sm = random_matrix(rng, 30, 40);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 40; ++k) {
    const double r = recall_at_k(sm, k);
    REQUIRE(r >= prev);
    prev = r;
  }
  REQUIRE(prev == 100.0);
}

TEST_CASE("recall_at_k: invariant under strictly increasing transforms") {
  Rng rng(403);
  ScoreMatrix sm = random_matrix(rng, 25, 30);
  ScoreMatrix warped = sm;
  for (double& x : warped.scores.data()) x = std::exp(x) + 3.0;
  for (std::size_t k : {1ul, 5ul, 10ul}) {
    REQUIRE(recall_at_k(sm, k) == recall_at_k(warped, k));
  }
}

TEST_CASE("recall_at_k: bad inputs rejected") {
  const ScoreMatrix sm = diagonal_matrix(4);
  REQUIRE_THROWS_AS(recall_at_k(sm, 0), ConfigError);
  REQUIRE_THROWS_AS(recall_at_k(sm, 5), ConfigError);
  ScoreMatrix empty;
  empty.scores = Mat(0, 0);
  REQUIRE_THROWS_AS(recall_at_k(empty, 1), InvalidShapeError);
  ScoreMatrix no_rel = diagonal_matrix(3);
  no_rel.relevant[1].clear();
  REQUIRE_THROWS_AS(recall_at_k(no_rel, 1), DataError);
}

TEST_CASE("r_sum: six-way totals on reference recall rows") {
  // 58.5 + 85.0 + 91.2 + 45.4 + 74.8 + 83.0.
  REQUIRE(r_sum({58.5, 85.0, 91.2}, {45.4, 74.8, 83.0}) ==
          Approx(437.9).margin(1e-12));
  // 57.1 + 83.7 + 90.9 + 44.5 + 74.5 + 83.2.
  REQUIRE(r_sum({57.1, 83.7, 90.9}, {44.5, 74.5, 83.2}) ==
          Approx(433.9).margin(1e-12));
  REQUIRE(r_sum({0, 0, 0}, {0, 0, 0}) == 0.0);
}

TEST_CASE("evaluate_on: zero-noise oracle scores a perfect 600") {
  Rng rng(404);
  SyntheticSpec spec;
  spec.num_classes = 40;
  spec.captions_per_image = 5;
  spec.noise_sigma = 0.0;
  const SyntheticData data = generate_synthetic(rng, spec);
  std::vector<std::size_t> ids(40);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const RetrievalReport report = evaluate_on(oracle_model(data), data.store, ids);
  REQUIRE(report.rsum == 600.0);
}

TEST_CASE("evaluate_on: random heads retrieve at chance level") {
  Rng rng(405);
  const SyntheticData data = generate_synthetic(rng, SyntheticSpec{});
  std::vector<std::size_t> ids(100);
  std::iota(ids.begin(), ids.end(), std::size_t{0});

  const double chance = 100.0 / 100.0;  // one relevant image among 100
  double mean_r1 = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    Rng mrng(1000 + s);
    const ProjectionModel model = make_model(mrng, 64, 64, 16, 0.0);
    const RetrievalReport report = evaluate_on(model, data.store, ids);
    mean_r1 += (report.i2t.r1 + report.t2i.r1) / 2.0;
  }
  mean_r1 /= seeds;
  REQUIRE(mean_r1 >= chance / 3.0);
  REQUIRE(mean_r1 <= chance * 3.0);
}

TEST_CASE("evaluate: fold mean equals the mean of fold reports") {
  Rng rng(406);
  SyntheticSpec spec;
  spec.num_classes = 80;
  const SyntheticData data = generate_synthetic(rng, spec);
  // 80 * 0.25 test = 20 test images in 2 folds of 10.
  const SplitSpec split = make_split(80, 0.6, 0.15, 9, 2);
  Rng mrng(407);
  const ProjectionModel model = make_model(mrng, 64, 64, 16, 0.0);

  const RetrievalReport report = evaluate(model, data.store, split);
  REQUIRE(report.folds.size() == 2);
  double mean_rsum = 0.0, mean_r1 = 0.0;
  for (const auto& f : report.folds) {
    mean_rsum += f.rsum;
    mean_r1 += f.i2t.r1;
  }
  mean_rsum /= 2.0;
  mean_r1 /= 2.0;
  REQUIRE(report.i2t.r1 == Approx(mean_r1).margin(1e-12));
  REQUIRE(report.rsum == Approx(mean_rsum).margin(1e-12));
}

TEST_CASE("evaluate_on: monotone recalls on every report") {
  Rng rng(408);
  SyntheticSpec spec;
  spec.num_classes = 30;
  const SyntheticData data = generate_synthetic(rng, spec);
  std::vector<std::size_t> ids(30);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (int s = 0; s < 5; ++s) {
    Rng mrng(500 + s);
    const ProjectionModel model = make_model(mrng, 64, 64, 8, 0.0);
    const RetrievalReport r = evaluate_on(model, data.store, ids);
    REQUIRE(r.i2t.r1 <= r.i2t.r5);
    REQUIRE(r.i2t.r5 <= r.i2t.r10);
    REQUIRE(r.t2i.r1 <= r.t2i.r5);
    REQUIRE(r.t2i.r5 <= r.t2i.r10);
    REQUIRE(r.rsum == Approx(r.i2t.r1 + r.i2t.r5 + r.i2t.r10 + r.t2i.r1 + r.t2i.r5 +
                             r.t2i.r10)
                          .margin(1e-12));
  }
}

TEST_CASE("report serialization: json and csv carry the same numbers") {
  RetrievalReport report;
  report.i2t = {50.0, 75.0, 90.0};
  report.t2i = {40.0, 70.0, 85.0};
  report.rsum = r_sum(report.i2t, report.t2i);
  const std::string json = report_to_json(report);
  REQUIRE(json.find("\"rsum\": 410.0") != std::string::npos);
  const std::string csv = report_csv_row(report);
  REQUIRE(csv == "50,75,90,40,70,85,410");
  REQUIRE(std::string(kReportCsvHeader) ==
          "i2t_r1,i2t_r5,i2t_r10,t2i_r1,t2i_r5,t2i_r10,rsum");
}
