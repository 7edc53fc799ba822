#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "mplab/models.hpp"

namespace mplab {

using AnyModel = std::variant<LinearModel, TinyMLP>;

enum class CheckpointFormat { text, binary };

// Text form:
//   linear K            followed by K weights then the bias, one value per line
//   mlp L d0 d1 .. dL   followed by each layer's weights (row-major) then its biases
// Binary form: "MPLABCK1", u32 kind (0 linear, 1 mlp), u32 dim count, u64 dims,
// then the same parameter sequence as little-endian float64.
std::string encode_checkpoint(const AnyModel& model, CheckpointFormat format);
AnyModel decode_checkpoint(const std::string& bytes);

void save_checkpoint(const AnyModel& model, const std::filesystem::path& path,
                     CheckpointFormat format = CheckpointFormat::text);
AnyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mplab
