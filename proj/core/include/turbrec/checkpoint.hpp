#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "turbrec/config.hpp"
#include "turbrec/mitigator.hpp"

// Checkpoint directory layout:
//   manifest.json  config, config hash, step, epoch, metrics, tensor table
//   weights.bin    raw little-endian tensors at the offsets in the table
//   optimizer.pt   Adam moments (optional, libtorch archive)
namespace turbrec::checkpoint {

namespace fs = std::filesystem;

struct CheckpointInfo {
    ProjectConfig config;
    std::string config_hash;
    std::int64_t step = 0;
    int epoch = 0;
    nlohmann::json metrics = nlohmann::json::object();
};

void save(const fs::path& dir, mitigator::Mitigator& model, const CheckpointInfo& info,
          torch::optim::Adam* optimizer = nullptr);

CheckpointInfo read_info(const fs::path& dir);

/// Copies stored tensors into the model. Names and shapes must match.
void load_weights(const fs::path& dir, mitigator::Mitigator& model);

/// Builds the model from the stored config and loads its weights.
mitigator::Mitigator load_model(const fs::path& dir, CheckpointInfo* info = nullptr);

/// False when the checkpoint carries no optimizer state.
bool load_optimizer(const fs::path& dir, torch::optim::Adam& optimizer);

}  // namespace turbrec::checkpoint
