// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "overgen/corpus.hpp"
#include "overgen/features.hpp"
#include "overgen/generation.hpp"
#include "overgen/linear.hpp"

namespace overgen {

struct LabeledResponse {
    std::string response_text;
    bool is_da = false;
};

/// Logistic regressor over response-only hashed n-grams for one act.
class BinaryDAClassifier {
public:
    static constexpr int kFormatVersion = 1;

    BinaryDAClassifier(DialogueAct da, FeatureConfig config, std::vector<double> weights,
                       double bias, double lambda, double threshold = 0.5);

    DialogueAct da() const { return da_; }
    double threshold() const { return threshold_; }
    void set_threshold(double threshold);
    const FeatureConfig& feature_config() const { return config_; }
    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }
    double lambda() const { return lambda_; }

    double probability(std::string_view response) const;
    bool predict(std::string_view response) const { return probability(response) >= threshold_; }

    nlohmann::json to_json() const;
    static BinaryDAClassifier from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static BinaryDAClassifier load(const std::filesystem::path& path);

private:
    DialogueAct da_;
    FeatureConfig config_;
    std::vector<double> weights_;
    double bias_;
    double lambda_;
    double threshold_;
};

struct ClassifierTraining {
    double lambda = 1e-3;
    double threshold = 0.5;
    FeatureConfig features;
    OptimizerOptions optimizer{1500, 1e-8};
};

BinaryDAClassifier train_da_classifier(std::span<const LabeledResponse> labeled, DialogueAct da,
                                       const ClassifierTraining& options, std::uint64_t seed);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

struct FoldMetrics {
    double precision = 0.0;  // 0 when nothing was predicted positive
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t size = 0;

    bool operator==(const FoldMetrics&) const = default;
};

struct CVReport {
    DialogueAct da = DialogueAct::Advice;
    std::uint64_t seed = 0;
    std::vector<FoldMetrics> folds;
    double precision = 0.0;  // macro means over folds
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const CVReport&) const = default;
};

/// Stratified fold ids (0..k-1) for each example: positives then negatives,
/// each shuffled with the seed, dealt round-robin.
std::vector<int> stratified_folds(std::span<const LabeledResponse> labeled, int k,
                                  std::uint64_t seed);

CVReport cross_validate(std::span<const LabeledResponse> labeled, DialogueAct da, int k,
                        std::uint64_t seed, const ClassifierTraining& options = {});

/// Dialogue Act | Precision | Recall | F1, two decimals.
std::string render_cv_table(std::span<const CVReport> reports);

struct AugmentationResult {
    /// Inputs with at least one act assigned; da_labels holds the acts.
    std::vector<UtteranceResponsePair> labeled;
    /// One prompt-formatted pair per (input, act).
    std::vector<UtteranceResponsePair> prompt_pairs;
    std::map<DialogueAct, std::size_t> counts;

    /// Dialogue Act | Amount, thousands separators.
    std::string render_counts() const;
};

/// Applies each classifier to every response. `acts` defaults to the seven
/// annotatable acts; each must have a classifier.
AugmentationResult augment_corpus(std::span<const BinaryDAClassifier> classifiers,
                                  std::span<const UtteranceResponsePair> unlabeled,
                                  std::span<const DialogueAct> acts = kAnnotatableActs,
                                  const PromptTemplates& prompts = {}, int shards = 1);

/// Examples for one act from a DA-labelled corpus.
std::vector<LabeledResponse> labeled_for(std::span<const UtteranceResponsePair> pairs,
                                         DialogueAct da);

}  // namespace overgen
