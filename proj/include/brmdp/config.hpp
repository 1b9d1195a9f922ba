#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "brmdp/bandit.hpp"
#include "brmdp/harness.hpp"
#include "brmdp/model.hpp"

namespace brmdp {

/// Reads a JSON file; throws ConfigError on I/O or syntax errors.
nlohmann::json read_json(const std::filesystem::path& path);

/// Environment from the "environment" selector and its matching block.
Environment parse_environment(const nlohmann::json& j);

/// Full experiment configuration. Unknown keys are rejected.
ExperimentConfig parse_experiment(const nlohmann::json& j);

struct BanditSpec {
    BanditInstance instance;
    std::vector<long long> checkpoints{100, 1000, 10000};
    int runs = 200;
    std::uint64_t seed = 1;
};

BanditSpec parse_bandit(const nlohmann::json& j);

}  // namespace brmdp
