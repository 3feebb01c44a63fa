#pragma once

// Parameter checkpoints.
//
// Layout:
//   bytes 0..7    "BGANCKPT"
//   bytes 8..15   header length H, unsigned 64-bit little-endian
//   next H bytes  canonical JSON header: format version, seed, training
//                 config, config hash, tensor names and shapes, payload hash
//   remainder     every tensor in header order, row-major, IEEE-754 binary64
//                 little-endian

#include <filesystem>
#include <string>

#include "bganlab/trainer.hpp"

namespace bganlab {

struct Checkpoint {
  TrainConfig config;
  TrainParams params;
};

std::string checkpoint_bytes(const TrainParams& p, const TrainConfig& c);
/// Throws SchemaError / ParseError on malformed input, including tensor
/// shapes that disagree with the config.
Checkpoint read_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainParams& p, const TrainConfig& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bganlab
