#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugtsr/degradation.hpp"
#include "ugtsr/image.hpp"

namespace ugtsr {

struct DatasetConfig {
  std::string out_dir;
  int n = 240;
  int size = 64;  // HR patch extent
  int scale = 2;
  std::uint64_t seed = 7;
  double train_fraction = 0.8;
  bool overwrite = false;
  // Texture families cycled over item ids; names from
  // {checkerboard, grating, blobs, edge-chart}.
  std::vector<std::string> kinds = {"checkerboard", "grating", "blobs", "edge-chart"};

  void validate() const;
};

struct DatasetItem {
  int id = 0;
  std::string kind;
  std::string split;  // "train" or "val"
  std::string hr_raw, lr_raw, hr_png, lr_png;  // paths relative to the dataset dir
  DegradationRecipe recipe;
};

struct Dataset {
  std::string dir;
  DatasetConfig config;
  std::vector<DatasetItem> items;

  std::vector<const DatasetItem*> split(const std::string& name) const;
};

// Generates HR textures, degrades each with a per-item sampled recipe, and
// persists PNG + raw float copies plus a line-per-item manifest. The whole
// artifact is a pure function of the config. Throws when the output
// directory already holds a manifest and `overwrite` is false.
Dataset build_toy_dataset(const DatasetConfig& config);

// Reads a previously built dataset's manifest and config.
Dataset load_dataset(const std::string& dir);

// Loads the lossless float copies (HR and LR) of one item.
ImagePatch load_item_hr(const Dataset& ds, const DatasetItem& item);
ImagePatch load_item_lr(const Dataset& ds, const DatasetItem& item);

// In-memory pair list for training loops; order follows manifest ids.
struct PairList {
  std::vector<ImagePatch> hr, lr;
  std::vector<int> ids;
};
PairList load_pairs(const Dataset& ds, const std::string& split);

}  // namespace ugtsr
