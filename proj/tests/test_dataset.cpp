#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>

#include "test_support.hpp"
#include "ugtsr/dataset.hpp"
#include "ugtsr/image.hpp"

using namespace ugtsr;
using test::tensor_eq;

namespace fs = std::filesystem;

namespace {

DatasetConfig tiny_config(const std::string& dir) {
  DatasetConfig cfg;
  cfg.out_dir = dir;
  cfg.n = 12;
  cfg.size = 32;
  cfg.scale = 2;
  cfg.seed = 21;
  cfg.overwrite = true;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ugtsr_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("build produces the requested items, files, and unique ids") {
    TempDir tmp("ds_build");
    const Dataset ds = build_toy_dataset(tiny_config(tmp.path.string()));

    CHECK(ds.items.size() == 12);
    std::set<int> ids;
    for (const DatasetItem& item : ds.items) {
      ids.insert(item.id);
      CHECK(fs::exists(tmp.path / item.hr_raw));
      CHECK(fs::exists(tmp.path / item.lr_raw));
      CHECK(fs::exists(tmp.path / item.hr_png));
      CHECK(fs::exists(tmp.path / item.lr_png));
      CHECK_NOTHROW(item.recipe.validate());
      CHECK(item.recipe.scale == 2);
    }
    CHECK(ids.size() == 12);
  }

  TEST_CASE("an 80/20 split of 12 items lands 10 train / 2 val") {
    TempDir tmp("ds_split");
    const Dataset ds = build_toy_dataset(tiny_config(tmp.path.string()));
    CHECK(ds.split("train").size() == 10);
    CHECK(ds.split("val").size() == 2);
    CHECK(ds.split("test").empty());
  }

  TEST_CASE("stored pairs reproduce from the stored recipe") {
    TempDir tmp("ds_extent");
    const Dataset ds = build_toy_dataset(tiny_config(tmp.path.string()));
    for (const DatasetItem* item : ds.split("val")) {
      const ImagePatch hr = load_item_hr(ds, *item);
      const ImagePatch lr = load_item_lr(ds, *item);
      CHECK(hr.height() == 32);
      CHECK(hr.width() == 32);
      CHECK(lr.height() == 16);
      CHECK(lr.width() == 16);
      // The stored LR must be exactly what the stored recipe produces from
      // the stored HR: every corruption is reproducible from the manifest.
      CHECK(tensor_eq(degrade(hr, item->recipe).data, lr.data));
    }
  }

  TEST_CASE("the artifact is a pure function of the config") {
    TempDir a("ds_pure_a");
    TempDir b("ds_pure_b");
    const Dataset da = build_toy_dataset(tiny_config(a.path.string()));
    const Dataset db = build_toy_dataset(tiny_config(b.path.string()));
    REQUIRE(da.items.size() == db.items.size());
    for (std::size_t i = 0; i < da.items.size(); ++i) {
      CHECK(da.items[i].kind == db.items[i].kind);
      CHECK(da.items[i].split == db.items[i].split);
      CHECK(da.items[i].recipe.to_json_string() == db.items[i].recipe.to_json_string());
      CHECK(tensor_eq(load_item_hr(da, da.items[i]).data, load_item_hr(db, db.items[i]).data));
      CHECK(tensor_eq(load_item_lr(da, da.items[i]).data, load_item_lr(db, db.items[i]).data));
    }
  }

  TEST_CASE("a different seed changes content and recipes") {
    TempDir a("ds_seed_a");
    TempDir b("ds_seed_b");
    DatasetConfig cb = tiny_config(b.path.string());
    cb.seed = 22;
    const Dataset da = build_toy_dataset(tiny_config(a.path.string()));
    const Dataset db = build_toy_dataset(cb);
    bool any_recipe_diff = false;
    for (std::size_t i = 0; i < da.items.size(); ++i) {
      if (da.items[i].recipe.to_json_string() != db.items[i].recipe.to_json_string()) {
        any_recipe_diff = true;
      }
    }
    CHECK(any_recipe_diff);
    CHECK_FALSE(tensor_eq(load_item_hr(da, da.items[0]).data, load_item_hr(db, db.items[0]).data));
  }

  TEST_CASE("load round-trips the manifest") {
    TempDir tmp("ds_load");
    const Dataset built = build_toy_dataset(tiny_config(tmp.path.string()));
    const Dataset loaded = load_dataset(tmp.path.string());
    REQUIRE(loaded.items.size() == built.items.size());
    CHECK(loaded.config.n == built.config.n);
    CHECK(loaded.config.size == built.config.size);
    CHECK(loaded.config.scale == built.config.scale);
    CHECK(loaded.config.seed == built.config.seed);
    for (std::size_t i = 0; i < built.items.size(); ++i) {
      CHECK(loaded.items[i].id == built.items[i].id);
      CHECK(loaded.items[i].kind == built.items[i].kind);
      CHECK(loaded.items[i].split == built.items[i].split);
      CHECK(loaded.items[i].recipe.to_json_string() == built.items[i].recipe.to_json_string());
    }
  }

  TEST_CASE("existing manifests are protected unless overwrite is set") {
    TempDir tmp("ds_overwrite");
    DatasetConfig cfg = tiny_config(tmp.path.string());
    build_toy_dataset(cfg);
    cfg.overwrite = false;
    CHECK_THROWS_AS(build_toy_dataset(cfg), std::runtime_error);
    cfg.overwrite = true;
    CHECK_NOTHROW(build_toy_dataset(cfg));
  }

  TEST_CASE("load_pairs follows manifest order and matches per-item loads") {
    TempDir tmp("ds_pairs");
    const Dataset ds = build_toy_dataset(tiny_config(tmp.path.string()));
    const PairList pairs = load_pairs(ds, "train");
    const auto train = ds.split("train");
    REQUIRE(pairs.hr.size() == train.size());
    REQUIRE(pairs.lr.size() == train.size());
    REQUIRE(pairs.ids.size() == train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      CHECK(pairs.ids[i] == train[i]->id);
      CHECK(tensor_eq(pairs.hr[i].data, load_item_hr(ds, *train[i]).data));
      CHECK(tensor_eq(pairs.lr[i].data, load_item_lr(ds, *train[i]).data));
    }
    CHECK_THROWS_AS(load_pairs(ds, "nonexistent"), std::runtime_error);
  }

  TEST_CASE("config validation rejects broken settings") {
    DatasetConfig cfg = tiny_config("/tmp/ugtsr_never_used");
    cfg.n = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_config("/tmp/ugtsr_never_used");
    cfg.scale = 3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_config("/tmp/ugtsr_never_used");
    cfg.size = 31;  // not divisible by scale
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_config("/tmp/ugtsr_never_used");
    cfg.train_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_config("/tmp/ugtsr_never_used");
    cfg.kinds = {"checkerboard", "no-such-family"};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("loading a directory without a manifest throws") {
    TempDir tmp("ds_missing");
    CHECK_THROWS_AS(load_dataset(tmp.path.string()), std::runtime_error);
  }
}
