#include "ugtsr/config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ugtsr {

namespace {

using nlohmann::json;

json schedule_to_json(const TrainSchedule& t) {
  return json{{"pretrain_steps", t.pretrain_steps},
              {"stage1_steps", t.stage1_steps},
              {"stage2_steps", t.stage2_steps},
              {"batch_size", t.batch_size},
              {"lr", t.lr},
              {"disc_lr", t.disc_lr},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"adam_eps", t.adam_eps},
              {"warmup_fraction", t.warmup_fraction},
              {"commit_weight", t.commit_weight},
              {"warm_start_stage2", t.warm_start_stage2},
              {"checkpoint_every", t.checkpoint_every},
              {"alpha", t.weights.alpha},
              {"beta", t.weights.beta},
              {"lambda_adv", t.weights.lambda_adv},
              {"variant", t.variant}};
}

TrainSchedule schedule_from_json(const json& j) {
  TrainSchedule t;
  t.pretrain_steps = j.value("pretrain_steps", t.pretrain_steps);
  t.stage1_steps = j.value("stage1_steps", t.stage1_steps);
  t.stage2_steps = j.value("stage2_steps", t.stage2_steps);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lr = j.value("lr", t.lr);
  t.disc_lr = j.value("disc_lr", t.disc_lr);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.adam_eps = j.value("adam_eps", t.adam_eps);
  t.warmup_fraction = j.value("warmup_fraction", t.warmup_fraction);
  t.commit_weight = j.value("commit_weight", t.commit_weight);
  t.warm_start_stage2 = j.value("warm_start_stage2", t.warm_start_stage2);
  t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
  t.weights.alpha = j.value("alpha", t.weights.alpha);
  t.weights.beta = j.value("beta", t.weights.beta);
  t.weights.lambda_adv = j.value("lambda_adv", t.weights.lambda_adv);
  t.variant = j.value("variant", t.variant);
  return t;
}

json data_to_json(const DatasetConfig& d) {
  return json{{"dir", d.out_dir},    {"n", d.n},
              {"size", d.size},      {"scale", d.scale},
              {"seed", d.seed},      {"train_fraction", d.train_fraction},
              {"kinds", d.kinds}};
}

DatasetConfig data_from_json(const json& j) {
  DatasetConfig d;
  d.out_dir = j.value("dir", d.out_dir);
  d.n = j.value("n", d.n);
  d.size = j.value("size", d.size);
  d.scale = j.value("scale", d.scale);
  d.seed = j.value("seed", d.seed);
  d.train_fraction = j.value("train_fraction", d.train_fraction);
  d.kinds = j.value("kinds", d.kinds);
  return d;
}

json model_to_json(const ModelConfig& m) {
  return json{{"scale", m.scale},   {"n_z", m.n_z},
              {"codebook_size", m.codebook_size}, {"d_k", m.d_k},
              {"topk", m.topk}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.scale = j.value("scale", m.scale);
  m.n_z = j.value("n_z", m.n_z);
  m.codebook_size = j.value("codebook_size", m.codebook_size);
  m.d_k = j.value("d_k", m.d_k);
  m.topk = j.value("topk", m.topk);
  return m;
}

}  // namespace

void TrainSchedule::validate() const {
  if (pretrain_steps < 1 || stage1_steps < 1 || stage2_steps < 1) {
    throw std::invalid_argument("step budgets must be positive");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (!(lr > 0.0) || !(disc_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw std::invalid_argument("warmup fraction must lie in [0,1]");
  }
  if (commit_weight < 0.0) throw std::invalid_argument("commitment weight must be >= 0");
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint interval must be positive");
  weights.validate();
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  train.validate();
  if (data.scale != model.scale) {
    throw std::invalid_argument("dataset scale " + std::to_string(data.scale) +
                                " does not match model scale " + std::to_string(model.scale));
  }
  if (data.size % (model.scale * ModelConfig::encoder_factor) != 0) {
    throw std::invalid_argument("patch size must be divisible by scale * encoder factor");
  }
  if (out_dir.empty()) throw std::invalid_argument("run config needs an output directory");
}

std::string config_to_json_text(const RunConfig& cfg) {
  json j;
  j["data"] = data_to_json(cfg.data);
  j["model"] = model_to_json(cfg.model);
  j["train"] = schedule_to_json(cfg.train);
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

RunConfig config_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  RunConfig cfg;
  if (j.contains("data")) cfg.data = data_from_json(j.at("data"));
  if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = schedule_from_json(j.at("train"));
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.model.seed = cfg.seed;
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  json j;
  j["model"] = json{{"scale", cfg.model.scale},
                    {"n_z", cfg.model.n_z},
                    {"codebook_size", cfg.model.codebook_size},
                    {"d_k", cfg.model.d_k}};
  j["seed"] = cfg.seed;
  j["data"] = json{{"n", cfg.data.n},
                   {"size", cfg.data.size},
                   {"scale", cfg.data.scale},
                   {"seed", cfg.data.seed}};
  const std::uint64_t h = fnv1a(j.dump());
  return h == 0 ? 1 : h;  // 0 is the "no expectation" sentinel in load_checkpoint
}

void snapshot_config(const RunConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / "config.json").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config snapshot to " + path);
  out << config_to_json_text(cfg) << "\n";
  if (!out) throw std::runtime_error("config snapshot write failed for " + path);
}

}  // namespace ugtsr
