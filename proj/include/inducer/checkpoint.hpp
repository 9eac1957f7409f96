#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "inducer/model.hpp"

namespace inducer {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
    ModelConfig config;
    TuningMode mode;
    std::uint64_t seed = 0;
};

/// Layout: magic "INDCKPT\0", u32 version, u32 header length, JSON header
/// (config, mode, seed), u32 record count, then per tensor: u32 name length,
/// name, u8 frozen, u32 rank, u64 dims, little-endian f64 data.
std::string serialize_checkpoint(const Model& model);
void save_checkpoint(const Model& model, const std::filesystem::path& path);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);
/// Rebuilds the model named in the header and restores every tensor and
/// frozen flag.
Model load_checkpoint(const std::filesystem::path& path);
/// Restores tensors into an existing model; the name sets must match.
void load_checkpoint_into(Model& model, const std::filesystem::path& path);

}  // namespace inducer
