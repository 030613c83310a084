#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "turbrec/pipeline.hpp"
#include "turbrec/trainer.hpp"

namespace turbrec {

/// Single configuration document covering every module. Sections:
/// mitigator, conditioning, matf, losses, trainer, plus top-level history.
struct ProjectConfig {
    PipelineConfig pipeline;
    trainer::TrainConfig train;

    void validate() const;
};

nlohmann::json to_json(const ProjectConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ProjectConfig project_config_from_json(const nlohmann::json& j);
ProjectConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ProjectConfig& config);

/// FNV-1a 64 over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ProjectConfig& config);

}  // namespace turbrec
