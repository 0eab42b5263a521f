#include "ugtsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ugtsr/png_io.hpp"
#include "ugtsr/rng.hpp"
#include "ugtsr/textures.hpp"

namespace fs = std::filesystem;

namespace ugtsr {

namespace {

int kind_index(const std::string& name) {
  if (name == "checkerboard") return 0;
  if (name == "grating") return 1;
  if (name == "blobs") return 2;
  if (name == "edge-chart") return 3;
  throw std::invalid_argument("unknown texture kind '" + name + "'");
}

std::string item_stem(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "item_%04d", id);
  return buf;
}

nlohmann::json config_to_json(const DatasetConfig& c) {
  return nlohmann::json{{"n", c.n},
                        {"size", c.size},
                        {"scale", c.scale},
                        {"seed", c.seed},
                        {"train_fraction", c.train_fraction},
                        {"kinds", c.kinds}};
}

DatasetConfig config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.n = j.at("n").get<int>();
  c.size = j.at("size").get<int>();
  c.scale = j.at("scale").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.kinds = j.at("kinds").get<std::vector<std::string>>();
  return c;
}

}  // namespace

void DatasetConfig::validate() const {
  if (n < 2) throw std::invalid_argument("dataset needs n >= 2");
  if (size < 8) throw std::invalid_argument("dataset patch size must be >= 8");
  if (scale != 1 && scale != 2 && scale != 4) {
    throw std::invalid_argument("dataset scale must be 1, 2, or 4");
  }
  if (size % std::max(scale, 1) != 0) {
    throw std::invalid_argument("patch size must be divisible by the scale");
  }
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  if (kinds.empty()) throw std::invalid_argument("dataset needs at least one texture kind");
  for (const auto& k : kinds) kind_index(k);  // throws on unknown names
}

std::vector<const DatasetItem*> Dataset::split(const std::string& name) const {
  std::vector<const DatasetItem*> out;
  for (const auto& it : items) {
    if (it.split == name) out.push_back(&it);
  }
  return out;
}

Dataset build_toy_dataset(const DatasetConfig& config) {
  config.validate();
  const fs::path dir(config.out_dir);
  const fs::path manifest_path = dir / "manifest.jsonl";
  if (fs::exists(manifest_path) && !config.overwrite) {
    throw std::runtime_error("dataset already exists at " + config.out_dir +
                             " (pass overwrite to regenerate)");
  }
  fs::create_directories(dir / "images");

  const int n_train = static_cast<int>(std::llround(config.train_fraction * config.n));

  Dataset ds;
  ds.dir = config.out_dir;
  ds.config = config;
  ds.items.reserve(config.n);

  std::ofstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot write " + manifest_path.string());

  for (int id = 0; id < config.n; ++id) {
    DatasetItem item;
    item.id = id;
    item.kind = config.kinds[static_cast<std::size_t>(id) % config.kinds.size()];
    item.split = id < n_train ? "train" : "val";

    const std::uint64_t item_seed = mix_seed(config.seed, static_cast<std::uint64_t>(id));
    const ImagePatch hr = make_texture(kind_index(item.kind), config.size, item_seed);
    item.recipe = sample_recipe(item_seed, config.scale);
    const ImagePatch lr = degrade(hr, item.recipe);

    const std::string stem = item_stem(id);
    item.hr_raw = "images/" + stem + "_hr.f64";
    item.lr_raw = "images/" + stem + "_lr.f64";
    item.hr_png = "images/" + stem + "_hr.png";
    item.lr_png = "images/" + stem + "_lr.png";
    save_raw_image(hr, (dir / item.hr_raw).string());
    save_raw_image(lr, (dir / item.lr_raw).string());
    save_png(hr, (dir / item.hr_png).string());
    save_png(lr, (dir / item.lr_png).string());

    nlohmann::json rec;
    rec["id"] = item.id;
    rec["kind"] = item.kind;
    rec["split"] = item.split;
    rec["hr_raw"] = item.hr_raw;
    rec["lr_raw"] = item.lr_raw;
    rec["hr_png"] = item.hr_png;
    rec["lr_png"] = item.lr_png;
    rec["recipe"] = nlohmann::json::parse(item.recipe.to_json_string());
    manifest << rec.dump() << "\n";

    ds.items.push_back(std::move(item));
  }
  manifest.close();
  if (!manifest) throw std::runtime_error("write failed for " + manifest_path.string());

  std::ofstream cfg(dir / "dataset.json");
  cfg << config_to_json(config).dump(2) << "\n";
  if (!cfg) throw std::runtime_error("write failed for dataset.json in " + config.out_dir);
  return ds;
}

Dataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  std::ifstream cfg(base / "dataset.json");
  if (!cfg) throw std::runtime_error("no dataset.json in " + dir);
  nlohmann::json jcfg;
  cfg >> jcfg;

  Dataset ds;
  ds.dir = dir;
  ds.config = config_from_json(jcfg);
  ds.config.out_dir = dir;

  std::ifstream manifest(base / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("no manifest.jsonl in " + dir);
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const nlohmann::json rec = nlohmann::json::parse(line);
    DatasetItem item;
    item.id = rec.at("id").get<int>();
    item.kind = rec.at("kind").get<std::string>();
    item.split = rec.at("split").get<std::string>();
    item.hr_raw = rec.at("hr_raw").get<std::string>();
    item.lr_raw = rec.at("lr_raw").get<std::string>();
    item.hr_png = rec.at("hr_png").get<std::string>();
    item.lr_png = rec.at("lr_png").get<std::string>();
    item.recipe = DegradationRecipe::from_json_string(rec.at("recipe").dump());
    ds.items.push_back(std::move(item));
  }
  if (static_cast<int>(ds.items.size()) != ds.config.n) {
    throw std::runtime_error("manifest lists " + std::to_string(ds.items.size()) +
                             " items, dataset.json says " + std::to_string(ds.config.n));
  }
  return ds;
}

ImagePatch load_item_hr(const Dataset& ds, const DatasetItem& item) {
  return load_raw_image((fs::path(ds.dir) / item.hr_raw).string());
}

ImagePatch load_item_lr(const Dataset& ds, const DatasetItem& item) {
  return load_raw_image((fs::path(ds.dir) / item.lr_raw).string());
}

PairList load_pairs(const Dataset& ds, const std::string& split) {
  PairList pl;
  for (const auto& it : ds.items) {
    if (it.split != split) continue;
    pl.hr.push_back(load_item_hr(ds, it));
    pl.lr.push_back(load_item_lr(ds, it));
    pl.ids.push_back(it.id);
  }
  if (pl.hr.empty()) throw std::runtime_error("dataset split '" + split + "' is empty");
  return pl;
}

}  // namespace ugtsr
