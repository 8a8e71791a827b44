// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "overgen/corpus.hpp"
#include "overgen/features.hpp"
#include "overgen/generation.hpp"
#include "overgen/linear.hpp"

namespace overgen {

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 5.0;

/// Anything that rates a (context, response) pair on the 1-5 scale.
/// Implementations must be safe for concurrent calls.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score(std::string_view context, std::string_view response) const = 0;
};

/// Which rating data an evaluator was trained on.
enum class Provenance : std::uint8_t { DeData, DaData, TwitterOnly, Synthetic };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

/// de_data for DE, da_data for DA and DADE.
Provenance native_provenance(Strategy strategy);

struct RatedPair {
    UtteranceResponsePair pair;
    double engagingness = 3.0;
};

class TrainedEvaluator final : public Scorer {
public:
    static constexpr int kFormatVersion = 1;

    TrainedEvaluator(FeatureConfig config, FeatureStats stats, std::vector<double> weights,
                     double bias, double lambda, Provenance provenance);

    /// Affine prediction before clipping.
    double raw_score(std::string_view context, std::string_view response) const;
    /// raw_score clipped to [1, 5].
    double score(std::string_view context, std::string_view response) const override;

    const FeatureConfig& feature_config() const { return config_; }
    const FeatureStats& feature_stats() const { return stats_; }
    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }
    double lambda() const { return lambda_; }
    Provenance provenance() const { return provenance_; }

    nlohmann::json to_json() const;
    static TrainedEvaluator from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static TrainedEvaluator load(const std::filesystem::path& path);

private:
    FeatureConfig config_;
    FeatureStats stats_;
    std::vector<double> weights_;
    double bias_;
    double lambda_;
    Provenance provenance_;
};

struct EvaluatorTraining {
    double lambda = 1e-4;
    FeatureConfig features;
    Provenance provenance = Provenance::Synthetic;
    OptimizerOptions optimizer;
};

/// Regularized least squares on pair features; the scalar statistics are fit
/// on `data` first.
TrainedEvaluator train_evaluator(std::span<const RatedPair> data, const EvaluatorTraining& options,
                                 std::uint64_t seed);

/// Training-set MSE of an evaluator's unclipped predictions.
double training_mse(const TrainedEvaluator& evaluator, std::span<const RatedPair> data);

struct ScoredSelection {
    std::vector<Candidate> candidates;
    int selected_ordinal = 0;

    const Candidate& selected() const;
};

/// Scores every candidate against `context` and picks the highest score,
/// ties going to the lowest ordinal. Input order is preserved.
ScoredSelection select_best(std::vector<Candidate> candidates, const Scorer& scorer,
                            std::string_view context);

/// Argmax over candidates whose scores are already set.
int argmax_ordinal(std::span<const Candidate> candidates);

}  // namespace overgen
