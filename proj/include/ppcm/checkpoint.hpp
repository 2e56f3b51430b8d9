#pragma once

#include "ppcm/convmixer.hpp"

#include <filesystem>
#include <string>

namespace ppcm {

// Checkpoint layout:
//
//   ppcm-checkpoint 1
//   config hidden=... depth=... kernel=... patch=... n_classes=... image_size=... use_adaptive_matrix=... lambda=...
//   tensor <name> <d0>x<d1>x...
//   ...
//   end
//   <float64 little-endian values of every listed tensor, in header order>
//
// Parameters come first in Model::parameters() order, then normalisation
// running statistics in Model::buffers() order.

void save_checkpoint(const std::filesystem::path& path, Model& model);
Model load_checkpoint(const std::filesystem::path& path);

std::string format_model_config(const ModelConfig& cfg);

} // namespace ppcm
