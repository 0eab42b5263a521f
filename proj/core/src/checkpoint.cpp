#include "ugtsr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ugtsr {

namespace {

constexpr char kMagic[8] = {'U', 'G', 'T', 'S', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_tensor(std::ostream& out, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int64_t read_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
Tensor read_tensor(std::istream& in) {
  const std::uint32_t rank = read_u32(in);
  std::vector<int> shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(read_u32(in));
  Tensor t = Tensor::zeros(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(sizeof(double) * t.size()));
  return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  if (ck.phase != "pretrain" && ck.phase != "stage1" && ck.phase != "stage2") {
    throw std::invalid_argument("checkpoint phase must be pretrain/stage1/stage2, got '" +
                                ck.phase + "'");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_string(out, ck.phase);
  write_u64(out, ck.config_hash);
  write_i64(out, ck.step);
  write_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, tensor] : ck.tensors) {
    write_string(out, name);
    write_tensor(out, tensor);
  }
  write_u64(out, ck.optimizer_state.size());
  out.write(ck.optimizer_state.data(), static_cast<std::streamsize>(ck.optimizer_state.size()));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_phase,
                           std::uint64_t expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version) +
                             " in " + path);
  }
  Checkpoint ck;
  ck.phase = read_string(in);
  ck.config_hash = read_u64(in);
  ck.step = read_i64(in);
  const std::uint32_t n = read_u32(in);
  ck.tensors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = read_string(in);
    Tensor t = read_tensor(in);
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  const std::uint64_t blob = read_u64(in);
  ck.optimizer_state.resize(blob);
  in.read(ck.optimizer_state.data(), static_cast<std::streamsize>(blob));
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);

  if (!expected_phase.empty() && ck.phase != expected_phase) {
    throw std::runtime_error("load_checkpoint: " + path + " holds phase '" + ck.phase +
                             "', expected '" + expected_phase + "'");
  }
  if (expected_config_hash != 0 && ck.config_hash != expected_config_hash) {
    throw std::runtime_error("load_checkpoint: config hash mismatch for " + path);
  }
  return ck;
}

Checkpoint snapshot_model(const SrModel& model, const std::string& phase,
                          std::uint64_t config_hash, std::int64_t step, const Adam* optimizer) {
  Checkpoint ck;
  ck.phase = phase;
  ck.config_hash = config_hash;
  ck.step = step;
  for (const auto& g : model.groups()) {
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      ck.tensors.emplace_back(g.name + "/" + std::to_string(i), g.params[i]->value);
    }
  }
  if (optimizer) {
    std::ostringstream blob(std::ios::binary);
    optimizer->save_state(blob);
    const std::string s = blob.str();
    ck.optimizer_state.assign(s.begin(), s.end());
  }
  return ck;
}

void restore_model(SrModel& model, const Checkpoint& ck, Adam* optimizer) {
  std::size_t cursor = 0;
  for (const auto& g : model.groups()) {
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      const std::string want = g.name + "/" + std::to_string(i);
      if (cursor >= ck.tensors.size() || ck.tensors[cursor].first != want) {
        throw std::runtime_error("restore_model: checkpoint missing tensor '" + want + "'");
      }
      const Tensor& t = ck.tensors[cursor].second;
      if (!t.same_shape(g.params[i]->value)) {
        throw std::runtime_error("restore_model: shape mismatch for '" + want + "': checkpoint " +
                                 t.shape_str() + " vs model " + g.params[i]->value.shape_str());
      }
      g.params[i]->value = t;
      ++cursor;
    }
  }
  if (cursor != ck.tensors.size()) {
    throw std::runtime_error("restore_model: checkpoint holds " +
                             std::to_string(ck.tensors.size()) + " tensors, model expects " +
                             std::to_string(cursor));
  }
  if (optimizer && !ck.optimizer_state.empty()) {
    std::istringstream blob(std::string(ck.optimizer_state.begin(), ck.optimizer_state.end()),
                            std::ios::binary);
    optimizer->load_state(blob);
  }
}

}  // namespace ugtsr
