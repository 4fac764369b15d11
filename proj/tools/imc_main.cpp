// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: gradcheck, gen-data, train, eval, ablate, sweep.
// Flag values override --config JSON values, which override built-in
// defaults. Every command writes a manifest.json with the resolved
// configuration next to its outputs, and nothing is written until the
// configuration has validated.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "imc/errors.hpp"
#include "imc/experiments.hpp"
#include "imc/gradcheck.hpp"
#include "imc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::uint64_t seed = 42;
  std::string out_dir = "out";

  std::string store_images;
  std::string store_texts;
  std::string index_path;
  std::string checkpoint;

  std::string loss = "imc";
  std::string delta = "l1";
  std::string imc_variant = "as-written";
  std::string mh_reduction = "per-anchor";
  double lambda = 1.0;
  double alpha = 0.2;
  double mu_down = 0.05;
  double mu_up = 0.5;

  std::size_t epochs = 30;
  std::size_t batch = 128;
  double lr = 2e-4;
  std::size_t decay_every = 15;
  double decay_factor = 0.1;
  std::size_t dim = 16;
  double dropout = 0.5;
  double train_frac = 0.7;
  double val_frac = 0.1;
  std::size_t folds = 0;

  std::size_t classes = 100;
  std::size_t captions_per = 5;
  std::size_t d_in_img = 64;
  std::size_t d_in_txt = 64;
  double noise = 0.05;

  std::size_t gc_batch = 8;
  std::size_t gc_dim = 16;
  double gc_tol = 1e-4;

  std::string lambdas = "0,0.5,1,2";
};

// Applies --config JSON before CLI11 parses, so flags win over file values.
void apply_config_file(CliOptions& o, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw imc::ConfigError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw imc::ConfigError("bad JSON in " + path + ": " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") o.seed = value.get<std::uint64_t>();
      else if (key == "out") o.out_dir = value.get<std::string>();
      else if (key == "store-images") o.store_images = value.get<std::string>();
      else if (key == "store-texts") o.store_texts = value.get<std::string>();
      else if (key == "index") o.index_path = value.get<std::string>();
      else if (key == "checkpoint") o.checkpoint = value.get<std::string>();
      else if (key == "loss") o.loss = value.get<std::string>();
      else if (key == "delta") o.delta = value.get<std::string>();
      else if (key == "imc-variant") o.imc_variant = value.get<std::string>();
      else if (key == "mh-reduction") o.mh_reduction = value.get<std::string>();
      else if (key == "lambda") o.lambda = value.get<double>();
      else if (key == "alpha") o.alpha = value.get<double>();
      else if (key == "mu-down") o.mu_down = value.get<double>();
      else if (key == "mu-up") o.mu_up = value.get<double>();
      else if (key == "epochs") o.epochs = value.get<std::size_t>();
      else if (key == "batch") o.batch = value.get<std::size_t>();
      else if (key == "lr") o.lr = value.get<double>();
      else if (key == "decay-every") o.decay_every = value.get<std::size_t>();
      else if (key == "decay-factor") o.decay_factor = value.get<double>();
      else if (key == "dim") o.dim = value.get<std::size_t>();
      else if (key == "dropout") o.dropout = value.get<double>();
      else if (key == "train-frac") o.train_frac = value.get<double>();
      else if (key == "val-frac") o.val_frac = value.get<double>();
      else if (key == "folds") o.folds = value.get<std::size_t>();
      else if (key == "classes") o.classes = value.get<std::size_t>();
      else if (key == "captions-per") o.captions_per = value.get<std::size_t>();
      else if (key == "d-in-img") o.d_in_img = value.get<std::size_t>();
      else if (key == "d-in-txt") o.d_in_txt = value.get<std::size_t>();
      else if (key == "noise") o.noise = value.get<double>();
      else if (key == "lambdas") o.lambdas = value.get<std::string>();
      else throw imc::ConfigError("unknown config key '" + key + "' in " + path);
    } catch (const json::exception& e) {
      throw imc::ConfigError("bad value for config key '" + key + "': " + e.what());
    }
  }
}

imc::LossConfig loss_config_from(const CliOptions& o) {
  imc::LossConfig cfg;
  cfg.alpha = o.alpha;
  cfg.lambda = o.lambda;
  cfg.mu_down = o.mu_down;
  cfg.mu_up = o.mu_up;
  cfg.delta_kind = imc::delta_kind_from_string(o.delta);
  cfg.mh_reduction = imc::mh_reduction_from_string(o.mh_reduction);
  cfg.imc_variant = imc::imc_variant_from_string(o.imc_variant);
  cfg.validate();
  return cfg;
}

imc::RunParams run_params_from(const CliOptions& o) {
  imc::RunParams p;
  p.embed_dim = o.dim;
  p.dropout_p = o.dropout;
  p.spec.epochs = o.epochs;
  p.spec.batch_size = o.batch;
  p.spec.lr0 = o.lr;
  p.spec.decay_every = o.decay_every;
  p.spec.decay_factor = o.decay_factor;
  p.spec.seed = o.seed;
  p.spec.loss_kind = imc::loss_kind_from_string(o.loss);
  p.spec.loss_cfg = loss_config_from(o);
  p.spec.validate();
  return p;
}

imc::FeatureStore load_store_checked(const CliOptions& o) {
  if (o.store_images.empty() || o.store_texts.empty() || o.index_path.empty()) {
    throw imc::ConfigError("need --store-images, --store-texts and --index");
  }
  return imc::load_store(o.store_images, o.store_texts, o.index_path);
}

std::vector<double> parse_lambda_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw imc::ConfigError("bad lambda value '" + item + "' in --lambdas");
    }
  }
  if (out.empty()) throw imc::ConfigError("--lambdas parsed to an empty list");
  for (double v : out) {
    if (!(v >= 0.0)) throw imc::ConfigError("negative lambda rejected");
  }
  return out;
}

json resolved_config_json(const CliOptions& o, const std::string& command) {
  json j;
  j["command"] = command;
  j["version"] = std::string(imc::kVersion);
  j["seed"] = o.seed;
  j["out"] = o.out_dir;
  if (command == "gen-data") {
    j["classes"] = o.classes;
    j["captions-per"] = o.captions_per;
    j["d-in-img"] = o.d_in_img;
    j["d-in-txt"] = o.d_in_txt;
    j["noise"] = o.noise;
    return j;
  }
  if (command == "gradcheck") {
    j["gc-batch"] = o.gc_batch;
    j["gc-dim"] = o.gc_dim;
    j["tol"] = o.gc_tol;
    return j;
  }
  j["store-images"] = o.store_images;
  j["store-texts"] = o.store_texts;
  j["index"] = o.index_path;
  j["loss"] = o.loss;
  j["delta"] = o.delta;
  j["imc-variant"] = o.imc_variant;
  j["mh-reduction"] = o.mh_reduction;
  j["lambda"] = o.lambda;
  j["alpha"] = o.alpha;
  j["mu-down"] = o.mu_down;
  j["mu-up"] = o.mu_up;
  j["dim"] = o.dim;
  j["train-frac"] = o.train_frac;
  j["val-frac"] = o.val_frac;
  j["folds"] = o.folds;
  if (command == "eval") {
    j["checkpoint"] = o.checkpoint;
    return j;
  }
  j["epochs"] = o.epochs;
  j["batch"] = o.batch;
  j["lr"] = o.lr;
  j["decay-every"] = o.decay_every;
  j["decay-factor"] = o.decay_factor;
  j["dropout"] = o.dropout;
  if (command == "sweep") j["lambdas"] = o.lambdas;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw imc::DataError("cannot open for write: " + path.string());
  os << text;
  if (!os) throw imc::DataError("write failed: " + path.string());
}

// Creates the output directory and drops the manifest; call only after the
// whole configuration validated.
void start_outputs(const CliOptions& o, const std::string& command) {
  fs::create_directories(o.out_dir);
  write_text(fs::path(o.out_dir) / "manifest.json",
             resolved_config_json(o, command).dump(2) + "\n");
}

int cmd_gradcheck(const CliOptions& o) {
  imc::GradCheckConfig gc;
  gc.tol = o.gc_tol;
  const auto entries = imc::run_gradcheck_suite(o.seed, o.gc_batch, o.gc_dim, gc);
  bool all_pass = true;
  for (const auto& e : entries) {
    std::printf("loss=%-4s delta=%-4s max_rel_err=%.3e %s\n",
                imc::to_string(e.loss).c_str(), imc::to_string(e.delta_kind).c_str(),
                e.max_rel_err, e.pass ? "pass" : "FAIL");
    all_pass = all_pass && e.pass;
  }
  std::printf("gradcheck: %s (%zu/%zu combinations within %.1e)\n",
              all_pass ? "PASS" : "FAIL",
              static_cast<std::size_t>(
                  std::count_if(entries.begin(), entries.end(),
                                [](const auto& e) { return e.pass; })),
              entries.size(), gc.tol);
  return all_pass ? 0 : 3;
}

int cmd_gen_data(const CliOptions& o) {
  imc::SyntheticSpec spec;
  spec.num_classes = o.classes;
  spec.captions_per_image = o.captions_per;
  spec.d_in_img = o.d_in_img;
  spec.d_in_txt = o.d_in_txt;
  spec.noise_sigma = o.noise;

  imc::Rng rng(o.seed);
  const imc::SyntheticData data = imc::generate_synthetic(rng, spec);

  start_outputs(o, "gen-data");
  const fs::path dir(o.out_dir);
  imc::save_store(dir / "images.cmfv", dir / "texts.cmfv", dir / "index.csv", data.store);
  std::printf("gen-data: wrote %zu images, %zu captions to %s\n", data.store.num_images(),
              data.store.num_captions(), o.out_dir.c_str());
  return 0;
}

int cmd_train(const CliOptions& o) {
  const imc::RunParams params = run_params_from(o);
  const imc::FeatureStore store = load_store_checked(o);
  const imc::SplitSpec split =
      imc::make_split(store.num_images(), o.train_frac, o.val_frac, o.seed, o.folds);

  start_outputs(o, "train");
  const imc::RunOutcome outcome = imc::run_training(store, split, params);

  const fs::path dir(o.out_dir);
  imc::save_checkpoint(dir / "checkpoint.imck", outcome.result.model);
  imc::write_metrics_csv(dir / "metrics.csv", outcome.result.log);
  write_text(dir / "report.json", imc::report_to_json(outcome.test_report) + "\n");
  write_text(dir / "report.csv", std::string(imc::kReportCsvHeader) + "\n" +
                                     imc::report_csv_row(outcome.test_report) + "\n");

  std::printf("train: best epoch %zu (val R-sum %.4f), test R-sum %.4f\n",
              outcome.result.best_epoch, outcome.result.best_val_rsum,
              outcome.test_report.rsum);
  return 0;
}

int cmd_eval(const CliOptions& o) {
  if (o.checkpoint.empty()) throw imc::ConfigError("need --checkpoint");
  const imc::FeatureStore store = load_store_checked(o);
  const imc::SplitSpec split =
      imc::make_split(store.num_images(), o.train_frac, o.val_frac, o.seed, o.folds);
  imc::ProjectionModel model = imc::load_checkpoint(o.checkpoint);
  if (model.input_dim(imc::Modality::Image) != store.image_feats.cols() ||
      model.input_dim(imc::Modality::Text) != store.text_feats.cols()) {
    throw imc::DataError("eval: checkpoint dims do not match the store");
  }

  start_outputs(o, "eval");
  const imc::RetrievalReport report = imc::evaluate(model, store, split);
  const fs::path dir(o.out_dir);
  write_text(dir / "report.json", imc::report_to_json(report) + "\n");
  write_text(dir / "report.csv", std::string(imc::kReportCsvHeader) + "\n" +
                                     imc::report_csv_row(report) + "\n");
  std::printf("eval: test R-sum %.4f\n", report.rsum);
  return 0;
}

int cmd_ablate(const CliOptions& o) {
  imc::RunParams params = run_params_from(o);
  const imc::FeatureStore store = load_store_checked(o);
  const imc::SplitSpec split =
      imc::make_split(store.num_images(), o.train_frac, o.val_frac, o.seed, o.folds);

  start_outputs(o, "ablate");
  const auto rows = imc::run_ablation(store, split, params);
  write_text(fs::path(o.out_dir) / "ablation.csv", imc::ablation_csv(rows));
  for (const auto& row : rows) {
    std::printf("%-22s R-sum %.4f\n", row.label.c_str(), row.report.rsum);
  }
  return 0;
}

int cmd_sweep(const CliOptions& o) {
  imc::RunParams params = run_params_from(o);
  const std::vector<double> lambdas = parse_lambda_list(o.lambdas);
  const imc::FeatureStore store = load_store_checked(o);
  const imc::SplitSpec split =
      imc::make_split(store.num_images(), o.train_frac, o.val_frac, o.seed, o.folds);

  start_outputs(o, "sweep");
  const auto rows = imc::run_lambda_sweep(store, split, params, lambdas);
  write_text(fs::path(o.out_dir) / "sweep.csv", imc::sweep_csv(rows));
  for (const auto& row : rows) {
    std::printf("lambda=%-8g R-sum %.4f\n", row.lambda, row.report.rsum);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliOptions o;

  // Pre-scan for --config so its values sit under the real flags.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    try {
      if (arg == "--config" || arg == "-c") {
        if (i + 1 >= argc) {
          std::fprintf(stderr, "error: --config needs a path\n");
          return 1;
        }
        apply_config_file(o, argv[i + 1]);
      } else if (arg.rfind("--config=", 0) == 0) {
        apply_config_file(o, arg.substr(9));
      }
    } catch (const imc::ConfigError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }

  CLI::App app{"joint-embedding training and cross-modal retrieval toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(imc::kVersion));

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config,-c", o.config_path, "JSON config file (flags override it)");
    cmd->add_option("--seed", o.seed, "global random seed");
    cmd->add_option("--out", o.out_dir, "output directory");
  };
  auto add_store = [&](CLI::App* cmd) {
    cmd->add_option("--store-images", o.store_images, "image feature file (CMFV)");
    cmd->add_option("--store-texts", o.store_texts, "text feature file (CMFV)");
    cmd->add_option("--index", o.index_path, "caption_id,image_id CSV");
  };
  auto add_loss = [&](CLI::App* cmd) {
    cmd->add_option("--loss", o.loss, "sh|mh|imc");
    cmd->add_option("--delta", o.delta, "cos|msd|l1|l2");
    cmd->add_option("--lambda", o.lambda, "intra-modal constraint weight");
    cmd->add_option("--alpha", o.alpha, "ranking margin");
    cmd->add_option("--mu-down", o.mu_down, "lower band threshold");
    cmd->add_option("--mu-up", o.mu_up, "upper band threshold");
    cmd->add_option("--imc-variant", o.imc_variant, "as-written|repulsive");
    cmd->add_option("--mh-reduction", o.mh_reduction, "per-anchor|global-max");
  };
  auto add_train = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--batch", o.batch, "mini-batch size");
    cmd->add_option("--lr", o.lr, "initial learning rate");
    cmd->add_option("--decay-every", o.decay_every, "epochs between lr decays");
    cmd->add_option("--decay-factor", o.decay_factor, "lr decay multiplier");
    cmd->add_option("--dim", o.dim, "embedding dimension");
    cmd->add_option("--dropout", o.dropout, "dropout probability (text head input)");
  };
  auto add_split = [&](CLI::App* cmd) {
    cmd->add_option("--train-frac", o.train_frac, "train fraction of images");
    cmd->add_option("--val-frac", o.val_frac, "validation fraction of images");
    cmd->add_option("--folds", o.folds, "test folds (0 = no folding)");
  };

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(gradcheck);
  gradcheck->add_option("--gc-batch", o.gc_batch, "batch size for the check");
  gradcheck->add_option("--gc-dim", o.gc_dim, "embedding dimension for the check");
  gradcheck->add_option("--tol", o.gc_tol, "max relative error accepted");

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic feature store");
  add_common(gen);
  gen->add_option("--classes", o.classes, "number of image classes");
  gen->add_option("--captions-per", o.captions_per, "captions per image");
  gen->add_option("--d-in-img", o.d_in_img, "image feature dimension");
  gen->add_option("--d-in-txt", o.d_in_txt, "text feature dimension");
  gen->add_option("--noise", o.noise, "feature noise sigma");

  CLI::App* train = app.add_subcommand("train", "train projection heads");
  add_common(train);
  add_store(train);
  add_loss(train);
  add_train(train);
  add_split(train);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  add_store(eval);
  add_split(eval);
  eval->add_option("--checkpoint", o.checkpoint, "IMCK checkpoint path");

  CLI::App* ablate = app.add_subcommand("ablate", "lambda=0 vs lambda=1 x delta table");
  add_common(ablate);
  add_store(ablate);
  add_loss(ablate);
  add_train(ablate);
  add_split(ablate);

  CLI::App* sweep = app.add_subcommand("sweep", "train and evaluate per lambda");
  add_common(sweep);
  add_store(sweep);
  add_loss(sweep);
  add_train(sweep);
  add_split(sweep);
  sweep->add_option("--lambdas", o.lambdas, "comma-separated lambda values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gradcheck->parsed()) return cmd_gradcheck(o);
    if (gen->parsed()) return cmd_gen_data(o);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (sweep->parsed()) return cmd_sweep(o);
  } catch (const imc::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const imc::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const imc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
