#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "urbanfn/nn/adam.hpp"

namespace urbanfn::nn {

struct Checkpoint {
  ParamSet<float> params;
  AdamState<float> optimizer;
  std::int64_t step = 0;
  nlohmann::json meta = nlohmann::json::object();  // free-form run metadata

  // "<architecture hash>@<step>"
  std::string id() const;
};

// Directory layout: manifest.json plus one raw little-endian float32 blob per
// named tensor (`<name>.f32`, `adam_m.<name>.f32`, `adam_v.<name>.f32`).
void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& dir);

}  // namespace urbanfn::nn
