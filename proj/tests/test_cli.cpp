// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs of the installed command-line binary. The binary path
// arrives via the IMC_CLI_BIN compile definition.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include <unistd.h>

#include "imc/dataset.hpp"
#include "imc/evaluator.hpp"

using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(IMC_CLI_BIN) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("imc_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& sub = "") const {
    return (sub.empty() ? path : path / sub).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Small shared store so each training run stays fast.
const std::string kGenArgs =
    "--classes 20 --captions-per 3 --d-in-img 12 --d-in-txt 12 --noise 0.05 --seed 5";
const std::string kTrainArgs =
    "--epochs 2 --batch 16 --dim 8 --train-frac 0.6 --val-frac 0.2 --seed 5";

std::string store_args(const TempDir& data) {
  return "--store-images " + data.str("images.cmfv") + " --store-texts " +
         data.str("texts.cmfv") + " --index " + data.str("index.csv");
}

}  // namespace

TEST_CASE("cli: gen-data writes a loadable store plus manifest") {
  TempDir data("gendata");
  const RunResult r = run_cli("gen-data " + kGenArgs + " --out " + data.str());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);

  const imc::FeatureStore store =
      imc::load_store(data.str("images.cmfv"), data.str("texts.cmfv"),
                      data.str("index.csv"));
  REQUIRE(store.num_images() == 20);
  REQUIRE(store.num_captions() == 60);

  const auto manifest = nlohmann::json::parse(slurp(data.path / "manifest.json"));
  REQUIRE(manifest["command"] == "gen-data");
  REQUIRE(manifest["seed"] == 5);
}

TEST_CASE("cli: gradcheck passes and reports per-combination errors") {
  const RunResult r = run_cli("gradcheck --gc-batch 6 --gc-dim 8 --seed 3");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.output.find("gradcheck: PASS (12/12") != std::string::npos);
  REQUIRE(r.output.find("loss=imc") != std::string::npos);
  REQUIRE(r.output.find("delta=msd") != std::string::npos);

  const RunResult again = run_cli("gradcheck --gc-batch 6 --gc-dim 8 --seed 3");
  REQUIRE(again.output == r.output);
}

TEST_CASE("cli: train then eval reproduce the same report") {
  TempDir data("trainveal_data");
  REQUIRE(run_cli("gen-data " + kGenArgs + " --out " + data.str()).exit_code == 0);

  TempDir out("trainveal_run");
  const RunResult tr = run_cli("train " + store_args(data) + " " + kTrainArgs +
                               " --out " + out.str());
  INFO(tr.output);
  REQUIRE(tr.exit_code == 0);
  for (const char* f :
       {"checkpoint.imck", "metrics.csv", "report.json", "report.csv", "manifest.json"}) {
    REQUIRE(fs::exists(out.path / f));
  }
  const std::string metrics = slurp(out.path / "metrics.csv");
  REQUIRE(metrics.rfind("epoch,lr,train_loss,val_rsum\n", 0) == 0);
  REQUIRE(std::count(metrics.begin(), metrics.end(), '\n') == 3);  // header + 2 epochs

  TempDir eval_out("trainveal_eval");
  const RunResult ev = run_cli("eval " + store_args(data) +
                               " --checkpoint " + out.str("checkpoint.imck") +
                               " --train-frac 0.6 --val-frac 0.2 --seed 5 --out " +
                               eval_out.str());
  INFO(ev.output);
  REQUIRE(ev.exit_code == 0);
  REQUIRE(slurp(eval_out.path / "report.csv") == slurp(out.path / "report.csv"));
}

TEST_CASE("cli: identical train runs are byte-identical") {
  TempDir data("determinism_data");
  REQUIRE(run_cli("gen-data " + kGenArgs + " --out " + data.str()).exit_code == 0);

  TempDir out1("determinism_a");
  TempDir out2("determinism_b");
  REQUIRE(run_cli("train " + store_args(data) + " " + kTrainArgs + " --out " +
                  out1.str())
              .exit_code == 0);
  REQUIRE(run_cli("train " + store_args(data) + " " + kTrainArgs + " --out " +
                  out2.str())
              .exit_code == 0);
  REQUIRE(slurp(out1.path / "metrics.csv") == slurp(out2.path / "metrics.csv"));
  REQUIRE(slurp(out1.path / "report.csv") == slurp(out2.path / "report.csv"));
  REQUIRE(slurp(out1.path / "checkpoint.imck") == slurp(out2.path / "checkpoint.imck"));
}

TEST_CASE("cli: ablate lambda=0 row equals a plain mh training run") {
  TempDir data("ablate_data");
  REQUIRE(run_cli("gen-data " + kGenArgs + " --out " + data.str()).exit_code == 0);

  TempDir ab("ablate_run");
  const RunResult r =
      run_cli("ablate " + store_args(data) + " " + kTrainArgs + " --out " + ab.str());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(ab.path / "ablation.csv");
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + 5 rows
  REQUIRE(csv.find("label,lambda,delta,") == 0);
  REQUIRE(csv.find("lambda=0 (mh)") != std::string::npos);

  TempDir mh("ablate_mh");
  REQUIRE(run_cli("train " + store_args(data) + " " + kTrainArgs +
                  " --loss mh --out " + mh.str())
              .exit_code == 0);
  const std::string mh_report = slurp(mh.path / "report.csv");
  std::string mh_values = mh_report.substr(mh_report.find('\n') + 1);
  mh_values = mh_values.substr(0, mh_values.find('\n'));

  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  std::getline(lines, line);  // lambda=0 row: label,lambda,delta,<7 values>
  std::size_t fields_skipped = 0, pos = 0;
  while (fields_skipped < 3) {
    pos = line.find(',', pos) + 1;
    ++fields_skipped;
  }
  REQUIRE(line.substr(pos) == mh_values);
}

TEST_CASE("cli: sweep emits one row per lambda with consistent r-sum") {
  TempDir data("sweep_data");
  REQUIRE(run_cli("gen-data " + kGenArgs + " --out " + data.str()).exit_code == 0);

  TempDir sw("sweep_run");
  const RunResult r = run_cli("sweep " + store_args(data) + " " + kTrainArgs +
                              " --lambdas 0,0.5 --out " + sw.str());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(sw.path / "sweep.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == std::string("lambda,") + imc::kReportCsvHeader);
  int rows = 0;
  std::string lambda0_values;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    std::vector<double> vals;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) vals.push_back(std::stod(field));
    REQUIRE(vals.size() == 8);
    REQUIRE(vals[7] ==
            Approx(vals[1] + vals[2] + vals[3] + vals[4] + vals[5] + vals[6])
                .margin(1e-9));
    if (rows == 1) lambda0_values = line.substr(line.find(',') + 1);
  }
  REQUIRE(rows == 2);

  // The sweep's lambda=0 row and the ablation's lambda=0 row are the same
  // training run under the same seed.
  TempDir ab("sweep_vs_ablate");
  REQUIRE(run_cli("ablate " + store_args(data) + " " + kTrainArgs + " --out " + ab.str())
              .exit_code == 0);
  std::istringstream ab_lines(slurp(ab.path / "ablation.csv"));
  std::getline(ab_lines, line);  // header
  std::getline(ab_lines, line);  // lambda=0 row
  std::size_t pos = 0;
  for (int skip = 0; skip < 3; ++skip) pos = line.find(',', pos) + 1;
  REQUIRE(line.substr(pos) == lambda0_values);
}

TEST_CASE("cli: failed gradient check exits with code 3") {
  // A tolerance below the finite-difference noise floor cannot be met, so
  // the suite must report failure through the numerical-failure exit code.
  const RunResult r = run_cli("gradcheck --gc-batch 6 --gc-dim 8 --seed 3 --tol 1e-13");
  INFO(r.output);
  REQUIRE(r.exit_code == 3);
  REQUIRE(r.output.find("FAIL") != std::string::npos);
}

TEST_CASE("cli: invalid configurations fail before writing anything") {
  TempDir data("invalid_data");
  REQUIRE(run_cli("gen-data " + kGenArgs + " --out " + data.str()).exit_code == 0);

  const fs::path out = fs::temp_directory_path() /
                       ("imc_cli_invalid_out_" + std::to_string(::getpid()));
  fs::remove_all(out);

  const RunResult bad_band =
      run_cli("train " + store_args(data) + " " + kTrainArgs +
              " --mu-down 0.6 --mu-up 0.5 --out " + out.string());
  REQUIRE(bad_band.exit_code == 1);
  REQUIRE_FALSE(fs::exists(out));

  const RunResult neg_lambda = run_cli("sweep " + store_args(data) + " " + kTrainArgs +
                                       " --lambdas 0,-1 --out " + out.string());
  REQUIRE(neg_lambda.exit_code == 1);
  REQUIRE_FALSE(fs::exists(out));

  const RunResult no_store = run_cli("train --epochs 1 --out " + out.string());
  REQUIRE(no_store.exit_code == 1);
  REQUIRE_FALSE(fs::exists(out));

  const RunResult missing_file =
      run_cli("train --store-images /nonexistent.cmfv --store-texts /nonexistent2.cmfv"
              " --index /nonexistent.csv --out " +
              out.string());
  REQUIRE(missing_file.exit_code == 2);
  REQUIRE_FALSE(fs::exists(out));

  const RunResult bad_subcommand = run_cli("fit");
  REQUIRE(bad_subcommand.exit_code == 1);
}

TEST_CASE("cli: json config provides defaults that flags override") {
  TempDir data("config_data");
  REQUIRE(run_cli("gen-data " + kGenArgs + " --out " + data.str()).exit_code == 0);

  const fs::path cfg_path = data.path / "run.json";
  {
    nlohmann::json cfg;
    cfg["store-images"] = data.str("images.cmfv");
    cfg["store-texts"] = data.str("texts.cmfv");
    cfg["index"] = data.str("index.csv");
    cfg["epochs"] = 2;
    cfg["batch"] = 16;
    cfg["dim"] = 8;
    cfg["train-frac"] = 0.6;
    cfg["val-frac"] = 0.2;
    cfg["seed"] = 5;
    cfg["lambda"] = 0.25;
    std::ofstream os(cfg_path);
    os << cfg.dump(2);
  }

  TempDir from_cfg("config_run");
  const RunResult r =
      run_cli("train --config " + cfg_path.string() + " --out " + from_cfg.str());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  const auto manifest = nlohmann::json::parse(slurp(from_cfg.path / "manifest.json"));
  REQUIRE(manifest["lambda"] == Approx(0.25));
  REQUIRE(manifest["epochs"] == 2);

  TempDir overridden("config_override");
  const RunResult r2 = run_cli("train --config " + cfg_path.string() +
                               " --lambda 0.75 --out " + overridden.str());
  REQUIRE(r2.exit_code == 0);
  const auto manifest2 = nlohmann::json::parse(slurp(overridden.path / "manifest.json"));
  REQUIRE(manifest2["lambda"] == Approx(0.75));

  const fs::path bad_cfg = data.path / "bad.json";
  {
    std::ofstream os(bad_cfg);
    os << "{\"unknown-knob\": 3}";
  }
  const RunResult unknown =
      run_cli("train --config " + bad_cfg.string() + " --out " + overridden.str());
  REQUIRE(unknown.exit_code == 1);
}
