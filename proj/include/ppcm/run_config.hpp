#pragma once

#include "ppcm/convmixer.hpp"
#include "ppcm/train.hpp"

#include <filesystem>
#include <string_view>

namespace ppcm {

/// Plain-text key=value run description. Unknown keys are rejected.
struct RunConfig {
    ModelConfig model;
    TrainSettings train;
    EncryptionMode encryption = EncryptionMode::off;
};

RunConfig parse_run_config(std::string_view text);
RunConfig read_run_config(const std::filesystem::path& path);

} // namespace ppcm
