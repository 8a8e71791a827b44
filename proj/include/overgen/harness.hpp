// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "overgen/corpus.hpp"
#include "overgen/evaluator.hpp"
#include "overgen/generation.hpp"

namespace overgen {

// ---------------------------------------------------------------------------
// Systems under test

struct BestPolicy {
    std::shared_ptr<const Scorer> scorer;
};
struct GreedyPolicy {};
struct RandomPolicy {
    std::uint64_t seed = 0;
};
struct GeneralPolicy {};

using SelectionPolicy = std::variant<BestPolicy, GreedyPolicy, RandomPolicy, GeneralPolicy>;

struct SystemUnderTest {
    std::string name;
    Strategy strategy = Strategy::DE;
    SelectionPolicy policy;
};

/// Greedy is DE-only, General is DA-only, Best needs a scorer.
void validate(const SystemUnderTest& system);

/// Ordinal the system answers with for one item. `candidates` must come from
/// the system's strategy; Best scores them in place.
int choose_response(const SystemUnderTest& system, std::vector<Candidate>& candidates,
                    std::string_view context, std::string_view item_id);

// ---------------------------------------------------------------------------
// Judging

enum class Judgment : std::uint8_t { A, B, Even };
enum class Outcome : std::uint8_t { Win, Lose, Even };

std::string_view to_string(Judgment j);
std::string_view to_string(Outcome o);
Judgment parse_judgment(std::string_view name);

/// Value held by at least two of three judges; no majority resolves to Even.
Outcome majority_vote(std::span<const Judgment> judgments);

/// (context, left response, right response, judge index) -> preference,
/// where A means the left response.
using Judge = std::function<Judgment(std::string_view, std::string_view, std::string_view, int)>;

using LatentQualityFn = std::function<double(std::string_view context, std::string_view response)>;

/// Judge preferring the response with higher noisy latent quality: A if
/// q(left) - q(right) > tau, B if < -tau, otherwise Even. The noise added to
/// each side is keyed by (seed, judge index, context, that response), so the
/// judge is deterministic and invariant to presentation order.
Judge simulate_judge(LatentQualityFn quality, double noise_sd, std::uint64_t seed,
                     double tau = 0.1);

/// Latent quality of a reference-backend response (1.0 for unknown text).
double reference_latent_quality(std::string_view context, std::string_view response);

// ---------------------------------------------------------------------------
// Reports

struct ComparisonItem {
    std::string item_id;
    std::string context;
    std::string response_a;
    std::string response_b;
    int ordinal_a = 0;
    int ordinal_b = 0;
    bool swapped = false;  // B was shown on the left
    std::array<Judgment, 3> judgments{};  // in A/B terms, un-randomized
    Outcome outcome = Outcome::Even;
};

struct ComparisonReport {
    std::string system_a;
    std::string system_b;
    std::size_t win_count = 0;
    std::size_t lose_count = 0;
    std::size_t even_count = 0;
    std::vector<ComparisonItem> items;
    std::optional<Provenance> evaluator_provenance;
    std::optional<Provenance> native_provenance;

    std::size_t n_items() const { return win_count + lose_count + even_count; }
    double win_pct() const;
    double lose_pct() const;
    double even_pct() const;

    /// "A vs B & W% & L% & E%" with integer-rounded percentages.
    std::string render_row() const;
    nlohmann::json summary_json() const;
};

/// Report with only aggregate counts, e.g. to render published rows.
ComparisonReport report_from_counts(std::string system_a, std::string system_b, std::size_t wins,
                                    std::size_t losses, std::size_t evens);

nlohmann::json to_json(const ComparisonItem& item);
ComparisonItem comparison_item_from_json(const nlohmann::json& j);

/// Writes <prefix>.items.jsonl and <prefix>.summary.json.
void write_report(const ComparisonReport& report, const std::filesystem::path& prefix);

struct ComparisonOptions {
    GenerationConfig generation;
};

/// Both systems answer every test pair's context; three judges compare the
/// answers with seeded left/right presentation. Systems sharing a strategy
/// see the same candidate set per item.
ComparisonReport run_comparison(const SystemUnderTest& a, const SystemUnderTest& b,
                                std::span<const UtteranceResponsePair> test,
                                const GeneratorBackend& backend, const Judge& judge,
                                std::uint64_t seed, const ComparisonOptions& options = {});

/// Best-of-strategy with an evaluator trained on another generator's data,
/// against `baseline`. Throws if the evaluator's provenance is native.
ComparisonReport run_ood_experiment(Strategy strategy,
                                    std::shared_ptr<const TrainedEvaluator> evaluator,
                                    const SystemUnderTest& baseline,
                                    std::span<const UtteranceResponsePair> test,
                                    const GeneratorBackend& backend, const Judge& judge,
                                    std::uint64_t seed, const ComparisonOptions& options = {});

// ---------------------------------------------------------------------------
// Selection analysis

struct SelectionDistribution {
    Strategy strategy = Strategy::DE;
    std::vector<std::pair<std::string, std::size_t>> counts;  // fixed key order
    std::size_t total = 0;

    double ratio(std::string_view key) const;
    /// "Greedy-Search & 12%" style lines.
    std::string render() const;
    nlohmann::json to_json() const;
};

/// Strategy a selection's candidate list was generated with.
Strategy infer_strategy(const ScoredSelection& selection);

/// DE: greedy / beam / sampling (draws pooled). DA: the seven generation
/// acts. DADE: "<act>/<greedy|beam|sampling>".
SelectionDistribution selection_distribution(std::span<const ScoredSelection> log);

// ---------------------------------------------------------------------------
// Synthetic corpora for desk-scale experiments

/// Short single-turn dialogues from a fixed word bank.
std::vector<UtteranceResponsePair> synthetic_dialogues(std::size_t n, std::uint64_t seed,
                                                       std::string_view id_prefix = "syn");

/// Rated candidate responses for `contexts`: every candidate of `strategy`
/// is rated by five simulated raters around its latent quality, and the
/// engagingness mean becomes the target. Stops after `max_pairs`.
std::vector<RatedPair> synthetic_engagingness(const GeneratorBackend& backend,
                                              std::span<const UtteranceResponsePair> contexts,
                                              Strategy strategy, const LatentQualityFn& quality,
                                              std::size_t max_pairs, double rater_noise_sd,
                                              std::uint64_t seed,
                                              const GenerationConfig& generation = {});

struct ReferenceEvaluatorOptions {
    std::size_t pairs = 2000;
    double rater_noise_sd = 0.5;
    EvaluatorTraining training{};
};

/// Evaluator trained on synthetic ratings of `strategy`'s candidates, with
/// the strategy's native provenance.
TrainedEvaluator train_reference_evaluator(const GeneratorBackend& backend, Strategy strategy,
                                           std::uint64_t seed,
                                           const ReferenceEvaluatorOptions& options = {});

/// Same, rating candidates for the given contexts only.
TrainedEvaluator train_reference_evaluator(const GeneratorBackend& backend, Strategy strategy,
                                           std::span<const UtteranceResponsePair> contexts,
                                           std::uint64_t seed,
                                           const ReferenceEvaluatorOptions& options = {});

}  // namespace overgen
