// SPDX-License-Identifier: Apache-2.0

#include "overgen/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "overgen/error.hpp"
#include "overgen/hash.hpp"
#include "overgen/random.hpp"
#include "overgen/text.hpp"

namespace overgen {

namespace {

constexpr std::array<std::string_view, 4> kViewpointNames = {
    "relevance", "interestingness", "engagingness", "empathy"};

constexpr std::array<std::string_view, 4> kViewpointTitles = {
    "Relevance", "Interestingness", "Engagingness", "Empathy"};

constexpr std::array<std::string_view, 3> kSourceTitles = {"Twitter", "decoding model", "DA model"};

std::string group_name(const std::string& pair_id, Viewpoint v) {
    return "(" + pair_id + ", " + std::string(to_string(v)) + ")";
}

}  // namespace

std::string_view to_string(Viewpoint v) { return kViewpointNames[static_cast<std::size_t>(v)]; }

Viewpoint parse_viewpoint(std::string_view name) {
    for (std::size_t i = 0; i < kViewpointNames.size(); ++i) {
        if (kViewpointNames[i] == name) return static_cast<Viewpoint>(i);
    }
    throw DataError("unknown viewpoint \"" + std::string(name) + "\"");
}

std::vector<AggregatedRating> aggregate_ratings(std::span<const RatingRecord> records, bool strict) {
    struct Group {
        std::string pair_id;
        Viewpoint viewpoint;
        std::set<std::string> raters;
        long long grade_sum = 0;
    };
    std::vector<Group> groups;
    std::map<std::pair<std::string, Viewpoint>, std::size_t> index;

    for (const auto& r : records) {
        if (r.grade < 1 || r.grade > 5) {
            throw ValidationError("grade " + std::to_string(r.grade) + " out of range 1..5 in group " +
                                  group_name(r.pair_id, r.viewpoint));
        }
        auto [it, inserted] = index.try_emplace({r.pair_id, r.viewpoint}, groups.size());
        if (inserted) groups.push_back({r.pair_id, r.viewpoint, {}, 0});
        auto& g = groups[it->second];
        if (!g.raters.insert(r.rater_id).second) {
            throw ValidationError("duplicate rating by rater " + r.rater_id + " in group " +
                                  group_name(r.pair_id, r.viewpoint));
        }
        g.grade_sum += r.grade;
    }

    std::vector<AggregatedRating> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        const int n = static_cast<int>(g.raters.size());
        if (strict && n != kRatersPerItem) {
            throw ValidationError("group " + group_name(g.pair_id, g.viewpoint) + " has " +
                                  std::to_string(n) + " raters, expected 5");
        }
        out.push_back({g.pair_id, g.viewpoint, static_cast<double>(g.grade_sum) / n, n});
    }
    return out;
}

std::map<std::string, DialogueActSet> aggregate_da_votes(std::span<const DAVoteRecord> votes) {
    struct Tally {
        std::set<std::string> raters;
        std::array<int, 8> counts{};
    };
    std::map<std::string, Tally> tallies;
    for (const auto& v : votes) {
        auto& t = tallies[v.utterance_id];
        if (!t.raters.insert(v.rater_id).second) {
            throw ValidationError("duplicate DA vote by rater " + v.rater_id + " for utterance " +
                                  v.utterance_id);
        }
        for (auto da : v.labels) {
            if (da == DialogueAct::General) {
                throw ValidationError("general is not an annotatable act (utterance " +
                                      v.utterance_id + ")");
            }
            ++t.counts[static_cast<std::size_t>(da)];
        }
    }
    std::map<std::string, DialogueActSet> out;
    for (const auto& [id, t] : tallies) {
        if (static_cast<int>(t.raters.size()) != kRatersPerItem) {
            throw ValidationError("utterance " + id + " has " + std::to_string(t.raters.size()) +
                                  " DA raters, expected 5");
        }
        DialogueActSet adopted;
        for (auto da : kAnnotatableActs) {
            if (t.counts[static_cast<std::size_t>(da)] >= kDaVoteThreshold) adopted.insert(da);
        }
        out.emplace(id, std::move(adopted));
    }
    return out;
}

std::vector<RatingRecord> simulate_raters(const UtteranceResponsePair& pair, double latent_quality,
                                          double noise_sd, std::uint64_t seed, Viewpoint viewpoint) {
    if (!(latent_quality >= 1.0 && latent_quality <= 5.0)) {
        throw ValidationError("latent_quality must lie in [1, 5]");
    }
    if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be non-negative");
    Rng rng(derive_seed(seed, pair.id));
    std::vector<RatingRecord> out;
    out.reserve(kRatersPerItem);
    for (int i = 0; i < kRatersPerItem; ++i) {
        const double noisy = latent_quality + (noise_sd > 0 ? rng.normal(0.0, noise_sd) : 0.0);
        const int grade = static_cast<int>(std::lround(std::clamp(noisy, 1.0, 5.0)));
        out.push_back({pair.id, viewpoint, "r" + std::to_string(i + 1), grade});
    }
    return out;
}

std::string DatasetStats::amount_cell(Viewpoint v) const {
    std::string cell;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto n = counts[static_cast<std::size_t>(v)][s];
        if (n == 0) continue;
        if (!cell.empty()) cell.push_back('/');
        cell += text::with_thousands(n);
    }
    return cell.empty() ? "0" : cell;
}

std::string DatasetStats::response_cell(Viewpoint v) const {
    std::string cell;
    for (std::size_t s = 0; s < 3; ++s) {
        if (counts[static_cast<std::size_t>(v)][s] == 0) continue;
        if (!cell.empty()) cell.push_back('/');
        cell += kSourceTitles[s];
    }
    return cell.empty() ? "-" : cell;
}

std::string DatasetStats::render() const {
    std::size_t w0 = 9, w1 = 8;
    for (auto v : kViewpoints) {
        w0 = std::max(w0, kViewpointTitles[static_cast<std::size_t>(v)].size());
        w1 = std::max(w1, response_cell(v).size());
    }
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(s.size(), w), ' ');
        return s;
    };
    std::ostringstream out;
    out << pad("Viewpoint", w0) << " | " << pad("Response", w1) << " | Amount\n";
    for (auto v : kViewpoints) {
        out << pad(std::string(kViewpointTitles[static_cast<std::size_t>(v)]), w0) << " | "
            << pad(response_cell(v), w1) << " | " << amount_cell(v) << '\n';
    }
    return out.str();
}

DatasetStats dataset_stats(std::span<const RatingRecord> records,
                           std::span<const UtteranceResponsePair> pairs) {
    std::unordered_map<std::string, PairSource> source_of;
    for (const auto& p : pairs) source_of.emplace(p.id, p.source);
    std::array<std::set<std::string>, 12> seen;
    DatasetStats stats;
    for (const auto& r : records) {
        auto it = source_of.find(r.pair_id);
        if (it == source_of.end()) throw DataError("rating refers to unknown pair " + r.pair_id);
        const auto v = static_cast<std::size_t>(r.viewpoint);
        const auto s = static_cast<std::size_t>(it->second);
        if (seen[v * 3 + s].insert(r.pair_id).second) ++stats.counts[v][s];
    }
    return stats;
}

nlohmann::json to_json(const RatingRecord& r) {
    return {{"pair_id", r.pair_id},
            {"viewpoint", to_string(r.viewpoint)},
            {"rater_id", r.rater_id},
            {"grade", r.grade}};
}

RatingRecord rating_from_json(const nlohmann::json& j) {
    try {
        RatingRecord r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.viewpoint = parse_viewpoint(j.at("viewpoint").get<std::string>());
        r.rater_id = j.at("rater_id").get<std::string>();
        r.grade = j.at("grade").get<int>();
        if (r.grade < 1 || r.grade > 5) throw DataError("grade out of range 1..5");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed rating record: ") + e.what());
    }
}

nlohmann::json to_json(const AggregatedRating& r) {
    return {{"pair_id", r.pair_id},
            {"viewpoint", to_string(r.viewpoint)},
            {"mean", r.mean},
            {"n_raters", r.n_raters}};
}

AggregatedRating aggregated_from_json(const nlohmann::json& j) {
    try {
        return {j.at("pair_id").get<std::string>(),
                parse_viewpoint(j.at("viewpoint").get<std::string>()), j.at("mean").get<double>(),
                j.at("n_raters").get<int>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed aggregated rating: ") + e.what());
    }
}

nlohmann::json to_json(const DAVoteRecord& r) {
    auto labels = nlohmann::json::array();
    for (auto da : r.labels) labels.push_back(to_string(da));
    return {{"utterance_id", r.utterance_id}, {"rater_id", r.rater_id}, {"labels", labels}};
}

DAVoteRecord vote_from_json(const nlohmann::json& j) {
    try {
        DAVoteRecord r;
        r.utterance_id = j.at("utterance_id").get<std::string>();
        r.rater_id = j.at("rater_id").get<std::string>();
        for (const auto& l : j.at("labels")) r.labels.insert(parse_dialogue_act(l.get<std::string>()));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed DA vote record: ") + e.what());
    }
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
    std::vector<RatingRecord> out;
    const auto records = read_jsonl(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            out.push_back(rating_from_json(records[i]));
        } catch (const Error& e) {
            throw DataError(std::string(e.what()) + " at record " + std::to_string(i + 1));
        }
    }
    return out;
}

std::vector<DAVoteRecord> load_votes(const std::filesystem::path& path) {
    std::vector<DAVoteRecord> out;
    const auto records = read_jsonl(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            out.push_back(vote_from_json(records[i]));
        } catch (const Error& e) {
            throw DataError(std::string(e.what()) + " at record " + std::to_string(i + 1));
        }
    }
    return out;
}

void write_aggregated(std::span<const AggregatedRating> ratings, const std::filesystem::path& path) {
    std::vector<nlohmann::json> records;
    for (const auto& r : ratings) records.push_back(to_json(r));
    write_jsonl(records, path);
}

}  // namespace overgen
