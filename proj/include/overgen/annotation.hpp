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

namespace overgen {

enum class Viewpoint : std::uint8_t { Relevance, Interestingness, Engagingness, Empathy };

inline constexpr std::array<Viewpoint, 4> kViewpoints = {
    Viewpoint::Relevance, Viewpoint::Interestingness, Viewpoint::Engagingness, Viewpoint::Empathy};

std::string_view to_string(Viewpoint v);
Viewpoint parse_viewpoint(std::string_view name);

inline constexpr int kRatersPerItem = 5;
inline constexpr int kDaVoteThreshold = 3;

struct RatingRecord {
    std::string pair_id;
    Viewpoint viewpoint = Viewpoint::Engagingness;
    std::string rater_id;
    int grade = 3;

    bool operator==(const RatingRecord&) const = default;
};

struct AggregatedRating {
    std::string pair_id;
    Viewpoint viewpoint = Viewpoint::Engagingness;
    double mean = 0.0;
    int n_raters = 0;

    bool operator==(const AggregatedRating&) const = default;
};

struct DAVoteRecord {
    std::string utterance_id;
    std::string rater_id;
    DialogueActSet labels;

    bool operator==(const DAVoteRecord&) const = default;
};

/// One output per (pair_id, viewpoint), ordered by first appearance. In
/// strict mode every group must have exactly five distinct raters.
std::vector<AggregatedRating> aggregate_ratings(std::span<const RatingRecord> records,
                                                bool strict = true);

/// utterance_id -> acts with at least three of five votes. Empty sets are
/// kept in the map; callers building the DA dataset drop them.
std::map<std::string, DialogueActSet> aggregate_da_votes(std::span<const DAVoteRecord> votes);

/// Five simulated crowdworker grades: round(clip(latent + N(0, sd), 1, 5)).
std::vector<RatingRecord> simulate_raters(const UtteranceResponsePair& pair, double latent_quality,
                                          double noise_sd, std::uint64_t seed,
                                          Viewpoint viewpoint = Viewpoint::Engagingness);

/// Distinct pair counts per viewpoint and response source.
struct DatasetStats {
    std::array<std::array<std::size_t, 3>, 4> counts{};  // [viewpoint][source]

    std::size_t count(Viewpoint v, PairSource s) const {
        return counts[static_cast<std::size_t>(v)][static_cast<std::size_t>(s)];
    }
    /// Amount cell, e.g. "4,000/4,000/4,000"; zero sources omitted, "0" if none.
    std::string amount_cell(Viewpoint v) const;
    std::string response_cell(Viewpoint v) const;
    /// Viewpoint | Response | Amount table.
    std::string render() const;
};

/// Throws DataError when a rating refers to a pair not in `pairs`.
DatasetStats dataset_stats(std::span<const RatingRecord> records,
                           std::span<const UtteranceResponsePair> pairs);

nlohmann::json to_json(const RatingRecord& r);
RatingRecord rating_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregatedRating& r);
AggregatedRating aggregated_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DAVoteRecord& r);
DAVoteRecord vote_from_json(const nlohmann::json& j);

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path);
std::vector<DAVoteRecord> load_votes(const std::filesystem::path& path);
void write_aggregated(std::span<const AggregatedRating> ratings, const std::filesystem::path& path);

}  // namespace overgen
