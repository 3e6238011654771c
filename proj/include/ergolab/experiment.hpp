#pragma once
// JSON-configured experiments behind the command-line runner.
//
// A config is an object with a "system" description, an optional
// "observable", kind-specific "params" and, for randomized kinds, a "seed".
// Every run writes report.json plus one or more CSV files into the output
// directory; CSV contents depend only on the config and the seed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergolab/distributions.hpp"
#include "ergolab/space.hpp"

namespace ergolab {

struct Diagnostic {
    std::string path;
    std::string message;
};

std::vector<std::string> experiment_kinds();
bool is_randomized(const std::string& kind, const nlohmann::json& cfg);

/// All problems with `cfg` for experiment `kind` (empty when valid). The seed
/// requirement is checked against `seed_override` when given.
std::vector<Diagnostic> validate_config(const std::string& kind, const nlohmann::json& cfg,
                                        std::optional<std::uint64_t> seed_override = std::nullopt);

FiniteSystem system_from_json(const nlohmann::json& j);
EmpiricalDistribution target_from_json(const nlohmann::json& j);
Observable observable_from_json(const FiniteSystem& sys, const nlohmann::json& j, std::uint64_t seed);

std::string config_hash(const nlohmann::json& cfg);

struct RunOutput {
    nlohmann::json report;
    std::vector<std::string> files;  // written, relative to the output directory
};

/// Validates, runs and writes results to `out_dir` (created if missing).
/// Throws Error with all diagnostics on an invalid config.
RunOutput run_experiment(const std::string& kind, const nlohmann::json& cfg, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace ergolab
