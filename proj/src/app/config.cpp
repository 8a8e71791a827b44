// SPDX-License-Identifier: Apache-2.0

#include "overgen/app/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "overgen/error.hpp"

namespace overgen::app {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

GenerationConfig AppConfig::generation() const {
    GenerationConfig g;
    g.beam_width = beam_width;
    g.top_k = top_k;
    g.sampling_draws = sampling_draws;
    return g;
}

FeatureConfig AppConfig::features() const {
    FeatureConfig f;
    f.dim = feature_dim;
    return f;
}

EvaluatorTraining AppConfig::evaluator_training() const {
    EvaluatorTraining t;
    t.lambda = evaluator_lambda;
    t.features = features();
    return t;
}

ClassifierTraining AppConfig::classifier_training() const {
    ClassifierTraining t;
    t.lambda = classifier_lambda;
    t.threshold = da_threshold;
    t.features = features();
    return t;
}

AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    static const std::set<std::string> kKeys = {
        "feature_dim",      "beam_width",        "top_k",
        "sampling_draws",   "da_threshold",      "evaluator_lambda",
        "classifier_lambda", "reference_training_pairs", "rater_noise_sd",
        "data_dir",         "de_evaluator",      "da_evaluator",
        "judging_items",    "generator",
    };
    if (!j.is_object()) throw DataError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKeys.contains(key)) throw DataError("unknown config key \"" + key + "\"");
    }
    AppConfig c;
    try {
        read(j, "feature_dim", c.feature_dim);
        read(j, "beam_width", c.beam_width);
        read(j, "top_k", c.top_k);
        read(j, "sampling_draws", c.sampling_draws);
        read(j, "da_threshold", c.da_threshold);
        read(j, "evaluator_lambda", c.evaluator_lambda);
        read(j, "classifier_lambda", c.classifier_lambda);
        read(j, "reference_training_pairs", c.reference_training_pairs);
        read(j, "rater_noise_sd", c.rater_noise_sd);
        if (j.contains("data_dir")) c.data_dir = resolve(base_dir, j["data_dir"].get<std::string>());
        for (auto [key, slot] : {std::pair{"de_evaluator", &c.de_evaluator},
                                 std::pair{"da_evaluator", &c.da_evaluator},
                                 std::pair{"judging_items", &c.judging_items}}) {
            if (j.contains(key) && !j[key].is_null()) *slot = resolve(base_dir, j[key].get<std::string>());
        }
        if (auto it = j.find("generator"); it != j.end()) {
            read(*it, "type", c.generator.type);
            read(*it, "host", c.generator.host);
            read(*it, "port", c.generator.port);
            read(*it, "path", c.generator.path);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad config value: ") + e.what());
    }
    if (c.beam_width < 1 || c.top_k < 1 || c.sampling_draws < 0) {
        throw DataError("beam_width and top_k must be positive, sampling_draws non-negative");
    }
    if (!(c.da_threshold > 0.0 && c.da_threshold < 1.0)) throw DataError("da_threshold must lie in (0, 1)");
    if (c.generator.type != "reference" && c.generator.type != "http") {
        throw DataError("generator.type must be \"reference\" or \"http\"");
    }
    validate(c.features());
    return c;
}

nlohmann::json to_json(const AppConfig& c) {
    auto opt = [](const std::optional<std::filesystem::path>& p) {
        return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
    };
    return {
        {"feature_dim", c.feature_dim},
        {"beam_width", c.beam_width},
        {"top_k", c.top_k},
        {"sampling_draws", c.sampling_draws},
        {"da_threshold", c.da_threshold},
        {"evaluator_lambda", c.evaluator_lambda},
        {"classifier_lambda", c.classifier_lambda},
        {"reference_training_pairs", c.reference_training_pairs},
        {"rater_noise_sd", c.rater_noise_sd},
        {"data_dir", c.data_dir.string()},
        {"de_evaluator", opt(c.de_evaluator)},
        {"da_evaluator", opt(c.da_evaluator)},
        {"judging_items", opt(c.judging_items)},
        {"generator",
         {{"type", c.generator.type},
          {"host", c.generator.host},
          {"port", c.generator.port},
          {"path", c.generator.path}}},
    };
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

AppConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path) {
    if (explicit_path) return load_config(*explicit_path);
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') {
        return load_config(env);
    }
    return AppConfig{};
}

std::unique_ptr<GeneratorBackend> make_backend(const GeneratorSettings& settings) {
    if (settings.type == "http") {
        return std::make_unique<HttpGeneratorBackend>(settings.host, settings.port, settings.path);
    }
    return std::make_unique<ReferenceBackend>();
}

}  // namespace overgen::app
