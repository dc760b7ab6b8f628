#pragma once

// FRWT parameter checkpoints (little-endian):
//   "FRWT" | version u32 | repeated { name_len u16 | name | rows u32 | cols u32 | rows*cols f32 }
// Records appear in the model's deterministic parameter order and run to EOF.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fusionrec/autodiff.hpp"

namespace fusionrec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Matrix<float> value;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const std::vector<ad::Parameter<T>*>& params);

std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path);

/// Loads values into `params`, requiring identical count, order, names and shapes.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, const std::vector<ad::Parameter<T>*>& params);

}  // namespace fusionrec
