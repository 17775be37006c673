#pragma once

#include <filesystem>
#include <optional>

#include "rrg/training.hpp"

namespace rrg {

// Versioned binary container: run config, vocab, named parameter arrays and
// optional optimizer state. Loading refuses version or shape mismatches.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& file, const Model& model, int epoch,
                     const OptState* opt = nullptr);

struct LoadedCheckpoint {
  Model model;
  int epoch = 0;
  std::optional<OptState> opt;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace rrg
