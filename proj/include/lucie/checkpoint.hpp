#pragma once

#include <string>

#include "lucie/data_io.hpp"
#include "lucie/sfno.hpp"

namespace lucie {

/// Everything needed to run inference: architecture, channel layout,
/// normalization statistics, grid geometry, and all parameter tensors.
struct Checkpoint {
  ModelParams params;
  ChannelLayout layout;
  NormStats stats;
  int nlat = 0, nlon = 0;
  std::vector<double> sigma_levels;
};

inline constexpr uint32_t kCheckpointVersion = 1;

/// Binary container, versioned header, bit-exact round trip.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace lucie
