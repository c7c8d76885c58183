#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gsvin/training.hpp"

namespace gsvin {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// "GSVINCK", u16 version, length-prefixed JSON (model config, run record, epoch, step, divergence history),
/// then every named tensor as (length-prefixed name, four u32 dims, little-endian doubles), CRC-32 trailer.
/// Optimizer slots are stored under "rmsprop/<parameter name>".
std::string encode_checkpoint(const TrainState& state);
TrainState decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace gsvin
