#include <atomic>
#include <bit>
#include <cstring>

#include "urbanfn/io.hpp"
#include "urbanfn/nn/checkpoint.hpp"
#include "urbanfn/nn/hrnet.hpp"
#include "urbanfn/nn/parallel.hpp"

namespace urbanfn::nn {

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(); }
void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

namespace hrnet {

std::string architecture_hash() {
  std::string desc = "hrnet-mini/v1";
  for (const auto& s : kLayout) desc += ";" + std::string(s.name) + shape_string(s.shape);
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char ch : desc) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hrnet

static_assert(std::endian::native == std::endian::little);

std::string Checkpoint::id() const { return hrnet::architecture_hash() + "@" + std::to_string(step); }

namespace {

using Array = TensorT<float>::Array;

void write_blob(const std::filesystem::path& path, const Array& a) {
  std::string bytes(std::size_t(a.size()) * sizeof(float), '\0');
  std::memcpy(bytes.data(), a.data(), bytes.size());
  write_file_atomic(path, bytes);
}

Array read_blob(const std::filesystem::path& path, std::size_t expected) {
  std::string bytes = read_file(path);
  if (bytes.size() != expected * sizeof(float))
    throw DataError("checkpoint blob " + path.string() + " has wrong size");
  Array a(static_cast<Eigen::Index>(expected));
  std::memcpy(a.data(), bytes.data(), bytes.size());
  return a;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::array();
  const bool has_adam = ckpt.optimizer.m.size() == ckpt.params.tensors.size();
  for (std::size_t i = 0; i < ckpt.params.tensors.size(); ++i) {
    const auto& name = ckpt.params.names[i];
    const auto& t = ckpt.params.tensors[i];
    write_blob(dir / (name + ".f32"), t.values);
    if (has_adam) {
      write_blob(dir / ("adam_m." + name + ".f32"), ckpt.optimizer.m[i]);
      write_blob(dir / ("adam_v." + name + ".f32"), ckpt.optimizer.v[i]);
    }
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"file", name + ".f32"}});
  }
  nlohmann::json manifest = {
      {"format", "urbanfn-checkpoint/1"},
      {"architecture", "hrnet-mini"},
      {"architecture_hash", hrnet::architecture_hash()},
      {"step", ckpt.step},
      {"tensors", tensors},
      {"optimizer",
       {{"type", "adam"},
        {"step", ckpt.optimizer.step},
        {"present", has_adam},
        {"state_shapes", has_adam ? nlohmann::json(ckpt.params.names) : nlohmann::json::array()}}},
      {"meta", ckpt.meta},
  };
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("architecture_hash", "") != hrnet::architecture_hash())
    throw DataError("checkpoint " + dir.string() + " was written for a different architecture");
  Checkpoint ckpt;
  ckpt.params = hrnet::zero_params<float>();
  ckpt.step = manifest.value("step", std::int64_t(0));
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != ckpt.params.tensors.size())
    throw DataError("checkpoint tensor count mismatch");
  const auto& opt = manifest.at("optimizer");
  const bool has_adam = opt.value("present", false);
  ckpt.optimizer.step = opt.value("step", std::int64_t(0));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& name = ckpt.params.names[i];
    if (tensors[i].at("name").get<std::string>() != name ||
        tensors[i].at("shape").get<Shape>() != ckpt.params.tensors[i].shape)
      throw DataError("checkpoint tensor " + std::to_string(i) + " does not match layout");
    const std::size_t n = ckpt.params.tensors[i].size();
    ckpt.params.tensors[i].values = read_blob(dir / (name + ".f32"), n);
    if (has_adam) {
      ckpt.optimizer.m.push_back(read_blob(dir / ("adam_m." + name + ".f32"), n));
      ckpt.optimizer.v.push_back(read_blob(dir / ("adam_v." + name + ".f32"), n));
    }
  }
  return ckpt;
}

}  // namespace urbanfn::nn
