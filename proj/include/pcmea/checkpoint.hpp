#pragma once

#include <cstdint>
#include <filesystem>

#include "pcmea/config.hpp"
#include "pcmea/trainer.hpp"

namespace pcmea {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  TrainConfig config;
  TrainState state;
};

/// Binary archive: magic, format version, a JSON manifest (config text and
/// hash, epoch, stage, RNG state, optimizer step, pseudo-labels, history,
/// array index) and then every array as raw row-major doubles.
void save_checkpoint(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path);

/// Throws IncompatibleCheckpoint on a foreign magic, an unknown version or a
/// manifest hash that does not match the embedded config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally requires the stored config hash to equal
/// config_hash(expected).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected);

}  // namespace pcmea
