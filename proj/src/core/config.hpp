#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "core/model.hpp"
#include "core/scene.hpp"
#include "core/trainer.hpp"

namespace oandet {

// Everything a run needs, deserialized from one JSON document. Unknown keys
// are rejected and all violations are reported together.
struct RunConfig {
    std::uint64_t seed = 1;
    int num_scenes = 200;
    SceneSpec scene;     // seed field filled per scene at generation time
    ModelConfig model;   // includes tiling, loss, gate and inference settings
    TrainConfig train;

    SceneSpec scene_spec_for(int index) const {
        SceneSpec s = scene;
        s.seed = Rng::mix(seed, static_cast<std::uint64_t>(index));
        return s;
    }
};

nlohmann::json default_config_json();

// Parses and validates a config document. The input must be a JSON object;
// missing keys fall back to defaults. Throws ConfigError whose message lists
// every violation, one per line.
RunConfig parse_config(const nlohmann::json& doc);

RunConfig parse_config_text(const std::string& text);

// The fully resolved document (defaults applied), used for hashing so that
// two configs meaning the same run hash identically.
nlohmann::json effective_config_json(const RunConfig& cfg);

std::uint64_t config_hash(const RunConfig& cfg);

std::string hex_u64(std::uint64_t v);

} // namespace oandet
