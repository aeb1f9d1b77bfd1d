#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "numerics/tensor.hpp"

namespace prectr::num {

// Text parameter container.
//
//   prectr-params v1
//   meta <key> <value...>            zero or more
//   param <name> <group> <rank> <extent...>
//   <value> <value> ...              one line, %.17g, row-major
//
// Values use 17 significant digits so save/load is exact at float64.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<ParamTensor> params;

  const ParamTensor& find(const std::string& name) const;
};

inline constexpr const char* kCheckpointHeader = "prectr-params v1";

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

}  // namespace prectr::num
