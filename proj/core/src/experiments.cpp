// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#include "imc/experiments.hpp"

#include "imc/errors.hpp"

namespace imc {

namespace {
constexpr std::uint64_t kInitSalt = 0x171a7;
}

RunOutcome run_training(const FeatureStore& store, const SplitSpec& split,
                        const RunParams& params) {
  params.spec.validate();
  Rng init_rng = Rng(params.spec.seed).derive(kInitSalt);
  ProjectionModel model = make_model(init_rng, store.image_feats.cols(),
                                     store.text_feats.cols(), params.embed_dim,
                                     params.dropout_p);
  model.normalize_output = params.normalize_embeddings;

  RunOutcome outcome;
  outcome.result = train(store, split, std::move(model), params.spec);
  outcome.test_report = evaluate(outcome.result.model, store, split);
  return outcome;
}

std::vector<AblationRow> run_ablation(const FeatureStore& store, const SplitSpec& split,
                                      RunParams base) {
  base.spec.loss_kind = LossKind::Imc;

  std::vector<AblationRow> rows;
  auto run_row = [&](double lambda, DeltaKind dk, const std::string& label) {
    RunParams p = base;
    p.spec.loss_cfg.lambda = lambda;
    p.spec.loss_cfg.delta_kind = dk;
    AblationRow row;
    row.label = label;
    row.lambda = lambda;
    row.delta_kind = dk;
    row.report = run_training(store, split, p).test_report;
    rows.push_back(std::move(row));
  };

  run_row(0.0, base.spec.loss_cfg.delta_kind, "lambda=0 (mh)");
  for (DeltaKind dk :
       {DeltaKind::Msd, DeltaKind::CosDistance, DeltaKind::L2, DeltaKind::L1}) {
    run_row(1.0, dk, "lambda=1 delta=" + to_string(dk));
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = std::string("label,lambda,delta,") + kReportCsvHeader + "\n";
  for (const auto& row : rows) {
    out += row.label + "," + std::to_string(row.lambda) + "," +
           to_string(row.delta_kind) + "," + report_csv_row(row.report) + "\n";
  }
  return out;
}

std::vector<SweepRow> run_lambda_sweep(const FeatureStore& store, const SplitSpec& split,
                                       RunParams base, std::span<const double> lambdas) {
  if (lambdas.empty()) throw ConfigError("lambda sweep: need at least one value");
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambda sweep: negative lambda rejected");
  }
  base.spec.loss_kind = LossKind::Imc;

  std::vector<SweepRow> rows;
  for (double l : lambdas) {
    RunParams p = base;
    p.spec.loss_cfg.lambda = l;
    rows.push_back({l, run_training(store, split, p).test_report});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = std::string("lambda,") + kReportCsvHeader + "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.lambda) + "," + report_csv_row(row.report) + "\n";
  }
  return out;
}

}  // namespace imc
