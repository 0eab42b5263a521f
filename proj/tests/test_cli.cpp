#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "ugtsr/cli.hpp"
#include "ugtsr/config.hpp"
#include "ugtsr/dataset.hpp"

using namespace ugtsr;

namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage = {"ugtsr"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

struct CliFixture {
  fs::path root;
  std::string config_path;

  CliFixture() {
    root = fs::temp_directory_path() / ("ugtsr_test_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);

    RunConfig cfg;
    cfg.data.out_dir = (root / "data").string();
    cfg.data.n = 8;
    cfg.data.size = 32;
    cfg.data.scale = 2;
    cfg.data.seed = 17;
    cfg.model.scale = 2;
    cfg.model.n_z = 8;
    cfg.model.codebook_size = 16;
    cfg.model.d_k = 8;
    cfg.model.topk = 3;
    cfg.model.seed = 5;
    cfg.train.pretrain_steps = 4;
    cfg.train.stage1_steps = 4;
    cfg.train.stage2_steps = 2;
    cfg.train.batch_size = 2;
    cfg.train.checkpoint_every = 2;
    cfg.train.warmup_fraction = 0.0;
    cfg.out_dir = (root / "run").string();
    cfg.seed = 11;

    config_path = (root / "config.json").string();
    std::ofstream out(config_path);
    out << config_to_json_text(cfg);
  }
  ~CliFixture() { fs::remove_all(root); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli({}) == 2);                       // missing subcommand
    CHECK(run_cli({"frobnicate"}) == 2);           // unknown subcommand
    CHECK(run_cli({"make-data", "--bogus"}) == 2); // unknown flag
    CHECK(run_cli({"train-stage2", "--variant", "everything"}) == 2);
    CHECK(run_cli({"infer", "--in", "/definitely/missing.png", "--output", "x.png"}) == 2);
    CHECK(run_cli({"plot", "--from", "/definitely/missing.csv"}) == 2);
    CHECK(run_cli({"evaluate", "--split", "test"}) == 2);
  }

  TEST_CASE("runtime failures exit with code 1") {
    CHECK(run_cli({"make-data"}) == 1);  // no dataset directory anywhere
    // No dataset on disk yet, so training cannot resolve its config.
    fs::path empty = fs::temp_directory_path() / ("ugtsr_test_cli_empty_" + std::to_string(::getpid()));
    fs::create_directories(empty);
    CHECK(run_cli({"pretrain-codebook", "--data", empty.string(), "--out", empty.string()}) == 1);
    fs::remove_all(empty);
  }

  TEST_CASE_FIXTURE(CliFixture, "the full pipeline drives from the command line") {
    const std::string data_dir = (root / "data").string();
    const std::string run_dir = (root / "run").string();

    // Dataset generation, with overwrite protection on the second run.
    REQUIRE(run_cli({"make-data", "--config", config_path}) == 0);
    CHECK(fs::exists(fs::path(data_dir) / "manifest.jsonl"));
    CHECK(fs::exists(fs::path(data_dir) / "config.json"));
    CHECK(run_cli({"make-data", "--config", config_path}) == 1);
    CHECK(run_cli({"make-data", "--config", config_path, "--overwrite"}) == 0);

    // Training phases in order; each snapshots the effective config.
    REQUIRE(run_cli({"pretrain-codebook", "--config", config_path}) == 0);
    CHECK(fs::exists(fs::path(run_dir) / "pretrain.ckpt"));
    CHECK(fs::exists(fs::path(run_dir) / "config.json"));
    CHECK(run_cli({"pretrain-codebook", "--config", config_path}) == 1);  // ckpt exists
    REQUIRE(run_cli({"train-stage1", "--config", config_path}) == 0);
    CHECK(fs::exists(fs::path(run_dir) / "stage1.ckpt"));
    // Stage 1 must come before stage 2; a fresh out dir has no prerequisite.
    fs::path fresh = root / "fresh";
    CHECK(run_cli({"train-stage2", "--config", config_path, "--out", fresh.string()}) == 1);
    REQUIRE(run_cli({"train-stage2", "--config", config_path, "--variant", "full"}) == 0);
    CHECK(fs::exists(fs::path(run_dir) / "stage2.ckpt"));

    // Inference on one of the dataset's own LR images.
    const Dataset ds = load_dataset(data_dir);
    REQUIRE(!ds.items.empty());
    const std::string lr_png = (fs::path(data_dir) / ds.items.front().lr_png).string();
    const std::string sr_png = (root / "sr.png").string();
    REQUIRE(run_cli({"infer", "--config", config_path, "--in", lr_png, "--output", sr_png}) == 0);
    CHECK(fs::exists(sr_png));
    CHECK(run_cli({"infer", "--config", config_path, "--in", lr_png, "--output", sr_png}) == 1);
    CHECK(run_cli({"infer", "--config", config_path, "--in", lr_png, "--output", sr_png,
                   "--overwrite"}) == 0);

    // Metric and hit-rate reports.
    REQUIRE(run_cli({"evaluate", "--config", config_path}) == 0);
    CHECK(fs::exists(fs::path(run_dir) / "metrics_val.csv"));
    CHECK(run_cli({"evaluate", "--config", config_path}) == 1);
    REQUIRE(run_cli({"hit-rate", "--config", config_path, "--k", "1", "2"}) == 0);
    const fs::path hr_csv = fs::path(run_dir) / "hit_rate_val.csv";
    REQUIRE(fs::exists(hr_csv));
    {
      std::ifstream in(hr_csv);
      std::string header;
      std::getline(in, header);
      CHECK(header == "k,hits,cells,rate");
      std::string line;
      int rows = 0;
      while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
      }
      CHECK(rows == 2);  // one row per requested k
    }
    CHECK(run_cli({"hit-rate", "--config", config_path}) == 1);  // report exists

    // Plot from a handcrafted benchmark CSV (running the real benchmark here
    // would dwarf the rest of the suite).
    const std::string bench_csv = (root / "bench.csv").string();
    {
      std::ofstream out(bench_csv);
      out << "matcher,K,median_seconds,slope\n";
      out << "topk,64,0.001,1.00\n";
      out << "topk,128,0.002,1.00\n";
      out << "naive,64,0.004,1.90\n";
      out << "naive,128,0.015,1.90\n";
    }
    const std::string svg = (root / "bench.svg").string();
    REQUIRE(run_cli({"plot", "--from", bench_csv, "--out", svg}) == 0);
    CHECK(fs::exists(svg));
    CHECK(run_cli({"plot", "--from", bench_csv, "--out", svg}) == 1);
    CHECK(run_cli({"plot", "--from", bench_csv, "--out", svg, "--overwrite"}) == 0);

    // Ablation over a two-variant grid reuses the run's shared checkpoints.
    REQUIRE(run_cli({"ablate", "--config", config_path, "--variant", "baseline", "--variant",
                     "top3"}) == 0);
    CHECK(fs::exists(fs::path(run_dir) / "ablation.csv"));
    CHECK(run_cli({"ablate", "--config", config_path, "--variant", "baseline"}) == 1);
  }
}
