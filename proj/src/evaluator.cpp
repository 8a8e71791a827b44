// SPDX-License-Identifier: Apache-2.0

#include "overgen/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "overgen/error.hpp"

namespace overgen {

namespace {

constexpr std::string_view kFormatTag = "overgen-evaluator";

constexpr std::array<std::string_view, 4> kProvenanceNames = {"de_data", "da_data", "twitter_only",
                                                              "synthetic"};

}  // namespace

std::string_view to_string(Provenance p) { return kProvenanceNames[static_cast<std::size_t>(p)]; }

Provenance parse_provenance(std::string_view name) {
    for (std::size_t i = 0; i < kProvenanceNames.size(); ++i) {
        if (kProvenanceNames[i] == name) return static_cast<Provenance>(i);
    }
    throw DataError("unknown provenance \"" + std::string(name) + "\"");
}

Provenance native_provenance(Strategy strategy) {
    return strategy == Strategy::DE ? Provenance::DeData : Provenance::DaData;
}

TrainedEvaluator::TrainedEvaluator(FeatureConfig config, FeatureStats stats,
                                   std::vector<double> weights, double bias, double lambda,
                                   Provenance provenance)
    : config_(config),
      stats_(stats),
      weights_(std::move(weights)),
      bias_(bias),
      lambda_(lambda),
      provenance_(provenance) {
    validate(config_);
    if (weights_.size() != config_.dim) {
        throw ValidationError("evaluator has " + std::to_string(weights_.size()) +
                              " weights but feature dimension " + std::to_string(config_.dim));
    }
    if (!std::isfinite(bias_) ||
        !std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); })) {
        throw ValidationError("evaluator parameters must be finite");
    }
    if (!(lambda_ >= 0.0)) throw ValidationError("lambda must be non-negative");
}

double TrainedEvaluator::raw_score(std::string_view context, std::string_view response) const {
    const auto x = featurize_sparse(context, response, config_, stats_);
    return x.dot(weights_) + bias_;
}

double TrainedEvaluator::score(std::string_view context, std::string_view response) const {
    return std::clamp(raw_score(context, response), kMinScore, kMaxScore);
}

nlohmann::json TrainedEvaluator::to_json() const {
    return {
        {"format", kFormatTag},
        {"version", kFormatVersion},
        {"feature_config", overgen::to_json(config_)},
        {"feature_stats", overgen::to_json(stats_)},
        {"weights", weights_},
        {"bias", bias_},
        {"lambda", lambda_},
        {"provenance", overgen::to_string(provenance_)},
    };
}

TrainedEvaluator TrainedEvaluator::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kFormatTag) {
            throw DataError("not an evaluator file");
        }
        if (const int v = j.at("version").get<int>(); v != kFormatVersion) {
            throw DataError("unsupported evaluator format version " + std::to_string(v) +
                            " (expected " + std::to_string(kFormatVersion) + ")");
        }
        return TrainedEvaluator(feature_config_from_json(j.at("feature_config")),
                                feature_stats_from_json(j.at("feature_stats")),
                                j.at("weights").get<std::vector<double>>(),
                                j.at("bias").get<double>(), j.at("lambda").get<double>(),
                                parse_provenance(j.at("provenance").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed evaluator file: ") + e.what());
    }
}

void TrainedEvaluator::save(const std::filesystem::path& path) const {
    write_text_file(path, to_json().dump() + "\n");
}

TrainedEvaluator TrainedEvaluator::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed evaluator file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

TrainedEvaluator train_evaluator(std::span<const RatedPair> data, const EvaluatorTraining& options,
                                 std::uint64_t seed) {
    if (data.empty()) throw ValidationError("cannot train an evaluator on empty data");
    validate(options.features);
    std::vector<std::array<double, kScalarFeatures>> scalars;
    std::vector<double> targets;
    scalars.reserve(data.size());
    targets.reserve(data.size());
    for (const auto& d : data) {
        if (!(d.engagingness >= kMinScore && d.engagingness <= kMaxScore)) {
            throw ValidationError("target for pair " + d.pair.id + " outside [1, 5]");
        }
        scalars.push_back(pair_scalars(d.pair.context_text, d.pair.response_text, options.features));
        targets.push_back(d.engagingness);
    }
    const auto stats = fit_feature_stats(scalars);
    std::vector<SparseFeatures> xs;
    xs.reserve(data.size());
    for (const auto& d : data) {
        xs.push_back(
            featurize_sparse(d.pair.context_text, d.pair.response_text, options.features, stats));
    }
    auto model = fit_linear(LossKind::Squared, xs, targets, options.features.dim, options.lambda,
                            seed, options.optimizer);
    return TrainedEvaluator(options.features, stats, std::move(model.weights), model.bias,
                            options.lambda, options.provenance);
}

double training_mse(const TrainedEvaluator& evaluator, std::span<const RatedPair> data) {
    if (data.empty()) return 0.0;
    double sse = 0.0;
    for (const auto& d : data) {
        const double r =
            evaluator.raw_score(d.pair.context_text, d.pair.response_text) - d.engagingness;
        sse += r * r;
    }
    return sse / static_cast<double>(data.size());
}

const Candidate& ScoredSelection::selected() const {
    for (const auto& c : candidates) {
        if (c.ordinal == selected_ordinal) return c;
    }
    throw ValidationError("selected ordinal not among candidates");
}

int argmax_ordinal(std::span<const Candidate> candidates) {
    if (candidates.empty()) throw ValidationError("empty candidate list");
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!c.score) throw ValidationError("candidate " + std::to_string(c.ordinal) + " unscored");
        if (best == nullptr || *c.score > *best->score ||
            (*c.score == *best->score && c.ordinal < best->ordinal)) {
            best = &c;
        }
    }
    return best->ordinal;
}

ScoredSelection select_best(std::vector<Candidate> candidates, const Scorer& scorer,
                            std::string_view context) {
    if (candidates.empty()) throw ValidationError("empty candidate list");
    for (auto& c : candidates) c.score = scorer.score(context, c.text);
    const int selected = argmax_ordinal(candidates);
    return {std::move(candidates), selected};
}

}  // namespace overgen
