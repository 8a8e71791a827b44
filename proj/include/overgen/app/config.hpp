// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "overgen/daclassify.hpp"
#include "overgen/evaluator.hpp"
#include "overgen/generation.hpp"

namespace overgen::app {

inline constexpr const char* kConfigEnvVar = "OVERGEN_CONFIG";

struct GeneratorSettings {
    std::string type = "reference";  // "reference" or "http"
    std::string host = "127.0.0.1";
    int port = 8081;
    std::string path = "/generate";
};

/// Every key is optional in the file; see README for the key list.
struct AppConfig {
    std::size_t feature_dim = 4096;
    int beam_width = 5;
    int top_k = 50;
    int sampling_draws = 5;
    double da_threshold = 0.5;
    double evaluator_lambda = 1e-4;
    double classifier_lambda = 1e-3;
    std::size_t reference_training_pairs = 2000;
    double rater_noise_sd = 0.5;

    std::filesystem::path data_dir = "overgen-data";
    std::optional<std::filesystem::path> de_evaluator;
    std::optional<std::filesystem::path> da_evaluator;
    std::optional<std::filesystem::path> judging_items;
    GeneratorSettings generator;

    std::filesystem::path sessions_dir() const { return data_dir / "sessions"; }
    std::filesystem::path reports_dir() const { return data_dir / "reports"; }
    std::filesystem::path judging_dir() const { return data_dir / "judging"; }

    GenerationConfig generation() const;
    FeatureConfig features() const;
    EvaluatorTraining evaluator_training() const;
    ClassifierTraining classifier_training() const;
};

/// Unknown keys are rejected so typos surface early. Relative paths resolve
/// against the config file's directory.
AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const AppConfig& config);
AppConfig load_config(const std::filesystem::path& path);

/// `explicit_path` if given, else $OVERGEN_CONFIG if set, else defaults.
AppConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path);

std::unique_ptr<GeneratorBackend> make_backend(const GeneratorSettings& settings);

}  // namespace overgen::app
