// SPDX-License-Identifier: Apache-2.0

#include "overgen/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "overgen/annotation.hpp"
#include "overgen/error.hpp"
#include "overgen/hash.hpp"
#include "overgen/random.hpp"

namespace overgen {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

constexpr std::uint64_t kPresentationSalt = 0x70726573656e74ULL;  // "present"

int find_ordinal(const std::vector<Candidate>& candidates, auto&& pred, const char* what) {
    for (const auto& c : candidates) {
        if (pred(c)) return c.ordinal;
    }
    throw ValidationError(std::string("candidate set has no ") + what + " candidate");
}

const Candidate& by_ordinal(const std::vector<Candidate>& candidates, int ordinal) {
    for (const auto& c : candidates) {
        if (c.ordinal == ordinal) return c;
    }
    throw ValidationError("ordinal " + std::to_string(ordinal) + " not in candidate set");
}

std::string scheme_family(const DecodingScheme& scheme) {
    return std::visit(Overloaded{
                          [](const Greedy&) { return std::string("greedy"); },
                          [](const Beam&) { return std::string("beam"); },
                          [](const TopKSampling&) { return std::string("sampling"); },
                      },
                      scheme);
}

std::string percent(double pct) { return std::to_string(std::lround(pct)) + "%"; }

std::vector<std::string> distribution_keys(Strategy strategy) {
    std::vector<std::string> keys;
    const std::array<std::string, 3> families = {"greedy", "beam", "sampling"};
    switch (strategy) {
        case Strategy::DE:
            keys.assign(families.begin(), families.end());
            break;
        case Strategy::DA:
            for (auto da : kGenerationActs) keys.emplace_back(to_string(da));
            break;
        case Strategy::DADE:
            for (auto da : kGenerationActs) {
                for (const auto& f : families) keys.push_back(std::string(to_string(da)) + "/" + f);
            }
            break;
    }
    return keys;
}

std::string display_key(Strategy strategy, const std::string& key) {
    if (strategy == Strategy::DE) {
        if (key == "greedy") return "Greedy-Search";
        if (key == "beam") return "Beam-Search";
        return "Sampling (x5)";
    }
    std::string out = key;
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
}

// Word banks for synthetic dialogues.
constexpr std::array<std::string_view, 16> kPlaces = {
    "station", "library", "beach",  "office", "park",   "cafe",    "gym",     "museum",
    "market",  "school",  "river",  "temple", "studio", "bakery",  "stadium", "garden",
};
constexpr std::array<std::string_view, 12> kTimes = {
    "today", "yesterday", "this morning", "last night", "on Sunday", "after work",
    "at noon", "this week", "again", "for the first time", "with friends", "alone",
};
constexpr std::array<std::string_view, 12> kFeelings = {
    "tired", "happy", "bored", "excited", "nervous", "relaxed",
    "hungry", "sleepy", "busy", "lucky", "curious", "proud",
};
constexpr std::array<std::string_view, 12> kThings = {
    "Taiwanese tea", "the new phone", "my homework", "a long novel", "the concert", "ramen",
    "my bike", "the assignment", "a movie", "the rain", "my battery", "a puzzle",
};

}  // namespace

// ---------------------------------------------------------------------------

void validate(const SystemUnderTest& system) {
    std::visit(Overloaded{
                   [&](const BestPolicy& p) {
                       if (!p.scorer) throw ValidationError(system.name + ": Best needs a scorer");
                   },
                   [&](const GreedyPolicy&) {
                       if (system.strategy != Strategy::DE) {
                           throw ValidationError(system.name + ": Greedy is only valid for DE");
                       }
                   },
                   [&](const RandomPolicy&) {},
                   [&](const GeneralPolicy&) {
                       if (system.strategy != Strategy::DA) {
                           throw ValidationError(system.name + ": General is only valid for DA");
                       }
                   },
               },
               system.policy);
}

int choose_response(const SystemUnderTest& system, std::vector<Candidate>& candidates,
                    std::string_view context, std::string_view item_id) {
    if (candidates.empty()) throw ValidationError("empty candidate list");
    return std::visit(
        Overloaded{
            [&](const BestPolicy& p) {
                auto selection = select_best(std::move(candidates), *p.scorer, context);
                candidates = std::move(selection.candidates);
                return selection.selected_ordinal;
            },
            [&](const GreedyPolicy&) {
                return find_ordinal(
                    candidates,
                    [](const Candidate& c) {
                        return !c.spec.da && std::holds_alternative<Greedy>(c.spec.scheme);
                    },
                    "greedy");
            },
            [&](const RandomPolicy& p) {
                const auto idx = derive_seed(p.seed, item_id) % candidates.size();
                return candidates[idx].ordinal;
            },
            [&](const GeneralPolicy&) {
                return find_ordinal(
                    candidates,
                    [](const Candidate& c) { return c.spec.da == DialogueAct::General; },
                    "general-DA");
            },
        },
        system.policy);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Judgment j) {
    switch (j) {
        case Judgment::A: return "A";
        case Judgment::B: return "B";
        case Judgment::Even: return "even";
    }
    return "?";
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Win: return "win";
        case Outcome::Lose: return "lose";
        case Outcome::Even: return "even";
    }
    return "?";
}

Judgment parse_judgment(std::string_view name) {
    if (name == "A" || name == "a") return Judgment::A;
    if (name == "B" || name == "b") return Judgment::B;
    if (name == "even" || name == "Even") return Judgment::Even;
    throw DataError("unknown judgment \"" + std::string(name) + "\"");
}

Outcome majority_vote(std::span<const Judgment> judgments) {
    if (judgments.size() != 3) {
        throw ValidationError("majority vote needs exactly 3 judgments, got " +
                              std::to_string(judgments.size()));
    }
    std::array<int, 3> tally{};
    for (auto j : judgments) {
        const auto k = static_cast<std::size_t>(j);
        if (k > 2) throw ValidationError("invalid judgment value");
        ++tally[k];
    }
    if (tally[0] >= 2) return Outcome::Win;
    if (tally[1] >= 2) return Outcome::Lose;
    return Outcome::Even;
}

Judge simulate_judge(LatentQualityFn quality, double noise_sd, std::uint64_t seed, double tau) {
    return [quality = std::move(quality), noise_sd, seed, tau](
               std::string_view context, std::string_view left, std::string_view right,
               int judge_index) {
        auto noisy = [&](std::string_view response) {
            double q = quality(context, response);
            if (noise_sd > 0) {
                Rng rng(hash_values({seed, static_cast<std::uint64_t>(judge_index), fnv1a64(context),
                                     fnv1a64(response)}));
                q += rng.normal(0.0, noise_sd);
            }
            return q;
        };
        const double diff = noisy(left) - noisy(right);
        if (diff > tau) return Judgment::A;
        if (diff < -tau) return Judgment::B;
        return Judgment::Even;
    };
}

double reference_latent_quality(std::string_view, std::string_view response) {
    return ReferenceBackend::latent_quality(response).value_or(1.0);
}

// ---------------------------------------------------------------------------

double ComparisonReport::win_pct() const {
    return n_items() == 0 ? 0.0 : 100.0 * static_cast<double>(win_count) / n_items();
}
double ComparisonReport::lose_pct() const {
    return n_items() == 0 ? 0.0 : 100.0 * static_cast<double>(lose_count) / n_items();
}
double ComparisonReport::even_pct() const {
    return n_items() == 0 ? 0.0 : 100.0 * static_cast<double>(even_count) / n_items();
}

std::string ComparisonReport::render_row() const {
    return system_a + " vs " + system_b + " & " + percent(win_pct()) + " & " +
           percent(lose_pct()) + " & " + percent(even_pct());
}

nlohmann::json ComparisonReport::summary_json() const {
    nlohmann::json j = {
        {"system_a", system_a},     {"system_b", system_b},     {"n_items", n_items()},
        {"win_count", win_count},   {"lose_count", lose_count}, {"even_count", even_count},
        {"win_pct", win_pct()},     {"lose_pct", lose_pct()},   {"even_pct", even_pct()},
        {"row", render_row()},
    };
    if (evaluator_provenance) j["evaluator_provenance"] = to_string(*evaluator_provenance);
    if (native_provenance) j["native_provenance"] = to_string(*native_provenance);
    return j;
}

ComparisonReport report_from_counts(std::string system_a, std::string system_b, std::size_t wins,
                                    std::size_t losses, std::size_t evens) {
    ComparisonReport r;
    r.system_a = std::move(system_a);
    r.system_b = std::move(system_b);
    r.win_count = wins;
    r.lose_count = losses;
    r.even_count = evens;
    return r;
}

nlohmann::json to_json(const ComparisonItem& item) {
    auto judgments = nlohmann::json::array();
    for (auto j : item.judgments) judgments.push_back(to_string(j));
    return {
        {"item_id", item.item_id},       {"context", item.context},
        {"response_a", item.response_a}, {"response_b", item.response_b},
        {"ordinal_a", item.ordinal_a},   {"ordinal_b", item.ordinal_b},
        {"swapped", item.swapped},       {"judgments", judgments},
        {"outcome", to_string(item.outcome)},
    };
}

ComparisonItem comparison_item_from_json(const nlohmann::json& j) {
    try {
        ComparisonItem item;
        item.item_id = j.at("item_id").get<std::string>();
        item.context = j.at("context").get<std::string>();
        item.response_a = j.at("response_a").get<std::string>();
        item.response_b = j.at("response_b").get<std::string>();
        item.ordinal_a = j.value("ordinal_a", 0);
        item.ordinal_b = j.value("ordinal_b", 0);
        item.swapped = j.value("swapped", false);
        if (auto it = j.find("judgments"); it != j.end()) {
            if (it->size() != 3) throw DataError("item " + item.item_id + " needs 3 judgments");
            for (std::size_t k = 0; k < 3; ++k) {
                item.judgments[k] = parse_judgment((*it)[k].get<std::string>());
            }
            item.outcome = majority_vote(item.judgments);
        }
        return item;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed comparison item: ") + e.what());
    }
}

void write_report(const ComparisonReport& report, const std::filesystem::path& prefix) {
    std::vector<nlohmann::json> items;
    items.reserve(report.items.size());
    for (const auto& item : report.items) items.push_back(to_json(item));
    write_jsonl(items, std::filesystem::path(prefix.string() + ".items.jsonl"));
    write_text_file(std::filesystem::path(prefix.string() + ".summary.json"),
                    report.summary_json().dump(2) + "\n");
}

ComparisonReport run_comparison(const SystemUnderTest& a, const SystemUnderTest& b,
                                std::span<const UtteranceResponsePair> test,
                                const GeneratorBackend& backend, const Judge& judge,
                                std::uint64_t seed, const ComparisonOptions& options) {
    validate(a);
    validate(b);
    if (!judge) throw ValidationError("no judge supplied");
    ComparisonReport report;
    report.system_a = a.name;
    report.system_b = b.name;
    report.items.reserve(test.size());

    for (const auto& pair : test) {
        const auto gen_seed = derive_seed(seed, pair.id);
        std::map<Strategy, std::vector<Candidate>> pools;
        auto pool_for = [&](Strategy s) -> std::vector<Candidate>& {
            auto it = pools.find(s);
            if (it == pools.end()) {
                it = pools
                         .emplace(s, generate_candidates(backend, pair.context_text, s, gen_seed,
                                                         options.generation))
                         .first;
            }
            return it->second;
        };

        ComparisonItem item;
        item.item_id = pair.id;
        item.context = pair.context_text;
        {
            auto candidates = pool_for(a.strategy);
            item.ordinal_a = choose_response(a, candidates, pair.context_text, pair.id);
            item.response_a = by_ordinal(candidates, item.ordinal_a).text;
        }
        {
            auto candidates = pool_for(b.strategy);
            item.ordinal_b = choose_response(b, candidates, pair.context_text, pair.id);
            item.response_b = by_ordinal(candidates, item.ordinal_b).text;
        }
        item.swapped = (derive_seed(seed ^ kPresentationSalt, pair.id) & 1U) != 0;
        const auto& left = item.swapped ? item.response_b : item.response_a;
        const auto& right = item.swapped ? item.response_a : item.response_b;
        for (int j = 0; j < 3; ++j) {
            const Judgment raw = judge(pair.context_text, left, right, j);
            if (static_cast<std::uint8_t>(raw) > 2) {
                throw DataError("judge returned an invalid judgment for item " + pair.id);
            }
            Judgment un = raw;
            if (item.swapped && raw != Judgment::Even) {
                un = raw == Judgment::A ? Judgment::B : Judgment::A;
            }
            item.judgments[static_cast<std::size_t>(j)] = un;
        }
        item.outcome = majority_vote(item.judgments);
        switch (item.outcome) {
            case Outcome::Win: ++report.win_count; break;
            case Outcome::Lose: ++report.lose_count; break;
            case Outcome::Even: ++report.even_count; break;
        }
        report.items.push_back(std::move(item));
    }
    return report;
}

ComparisonReport run_ood_experiment(Strategy strategy,
                                    std::shared_ptr<const TrainedEvaluator> evaluator,
                                    const SystemUnderTest& baseline,
                                    std::span<const UtteranceResponsePair> test,
                                    const GeneratorBackend& backend, const Judge& judge,
                                    std::uint64_t seed, const ComparisonOptions& options) {
    if (!evaluator) throw ValidationError("no evaluator supplied");
    const auto native = native_provenance(strategy);
    if (evaluator->provenance() == native) {
        throw ValidationError("evaluator provenance " + std::string(to_string(native)) +
                              " is native to " + std::string(to_string(strategy)) +
                              "; use run_comparison");
    }
    std::string name(to_string(strategy));
    std::transform(name.begin(), name.end(), name.begin(), [](char c) {
        return static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c);
    });
    SystemUnderTest best{name + " Best'", strategy, BestPolicy{evaluator}};
    auto report = run_comparison(best, baseline, test, backend, judge, seed, options);
    report.evaluator_provenance = evaluator->provenance();
    report.native_provenance = native;
    return report;
}

// ---------------------------------------------------------------------------

double SelectionDistribution::ratio(std::string_view key) const {
    for (const auto& [k, n] : counts) {
        if (k == key) return total == 0 ? 0.0 : static_cast<double>(n) / total;
    }
    throw ValidationError("no distribution key \"" + std::string(key) + "\"");
}

std::string SelectionDistribution::render() const {
    std::ostringstream out;
    for (const auto& [k, n] : counts) {
        out << display_key(strategy, k) << " & "
            << percent(total == 0 ? 0.0 : 100.0 * static_cast<double>(n) / total) << '\n';
    }
    return out.str();
}

nlohmann::json SelectionDistribution::to_json() const {
    nlohmann::json ratios = nlohmann::json::object();
    for (const auto& [k, n] : counts) ratios[k] = total == 0 ? 0.0 : static_cast<double>(n) / total;
    return {{"strategy", to_string(strategy)}, {"total", total}, {"ratios", ratios}};
}

Strategy infer_strategy(const ScoredSelection& selection) {
    const auto& cs = selection.candidates;
    const bool any_da = std::any_of(cs.begin(), cs.end(), [](auto& c) { return c.spec.da.has_value(); });
    const bool all_da = std::all_of(cs.begin(), cs.end(), [](auto& c) { return c.spec.da.has_value(); });
    if (!any_da) return Strategy::DE;
    if (!all_da) throw ValidationError("selection mixes conditioned and unconditioned candidates");
    const bool all_greedy = std::all_of(
        cs.begin(), cs.end(), [](auto& c) { return std::holds_alternative<Greedy>(c.spec.scheme); });
    return all_greedy ? Strategy::DA : Strategy::DADE;
}

SelectionDistribution selection_distribution(std::span<const ScoredSelection> log) {
    if (log.empty()) throw ValidationError("empty selection log");
    SelectionDistribution dist;
    dist.strategy = infer_strategy(log.front());
    for (const auto& k : distribution_keys(dist.strategy)) dist.counts.emplace_back(k, 0);
    for (const auto& sel : log) {
        if (infer_strategy(sel) != dist.strategy) {
            throw ValidationError("selection log mixes strategies");
        }
        const auto& spec = sel.selected().spec;
        std::string key;
        switch (dist.strategy) {
            case Strategy::DE: key = scheme_family(spec.scheme); break;
            case Strategy::DA: key = std::string(to_string(*spec.da)); break;
            case Strategy::DADE:
                key = std::string(to_string(*spec.da)) + "/" + scheme_family(spec.scheme);
                break;
        }
        auto it = std::find_if(dist.counts.begin(), dist.counts.end(),
                               [&](const auto& e) { return e.first == key; });
        if (it == dist.counts.end()) throw ValidationError("unexpected selection key " + key);
        ++it->second;
        ++dist.total;
    }
    return dist;
}

// ---------------------------------------------------------------------------

std::vector<UtteranceResponsePair> synthetic_dialogues(std::size_t n, std::uint64_t seed,
                                                       std::string_view id_prefix) {
    Rng rng(seed);
    auto pick = [&](const auto& bank) { return std::string(bank[rng.below(bank.size())]); };
    std::vector<UtteranceResponsePair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string context;
        switch (rng.below(4)) {
            case 0: context = "I went to the " + pick(kPlaces) + " " + pick(kTimes) + "."; break;
            case 1: context = "I'm so " + pick(kFeelings) + " " + pick(kTimes) + "."; break;
            case 2: context = "I haven't finished " + pick(kThings) + " yet."; break;
            default:
                context = pick(kThings) + " at the " + pick(kPlaces) + " was great " +
                          pick(kTimes) + ".";
                context[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(context[0])));
                break;
        }
        std::string response = "Oh, the " + pick(kPlaces) + "? I was " + pick(kFeelings) + " " +
                               pick(kTimes) + " too.";
        UtteranceResponsePair p;
        p.id = std::string(id_prefix) + "-" + std::to_string(i);
        p.context_text = std::move(context);
        p.response_text = std::move(response);
        p.source = PairSource::HumanCorpus;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<RatedPair> synthetic_engagingness(const GeneratorBackend& backend,
                                              std::span<const UtteranceResponsePair> contexts,
                                              Strategy strategy, const LatentQualityFn& quality,
                                              std::size_t max_pairs, double rater_noise_sd,
                                              std::uint64_t seed,
                                              const GenerationConfig& generation) {
    const auto source = strategy == Strategy::DE ? PairSource::GeneratorDE : PairSource::GeneratorDA;
    std::vector<RatedPair> out;
    for (const auto& ctx : contexts) {
        if (out.size() >= max_pairs) break;
        const auto candidates = generate_candidates(backend, ctx.context_text, strategy,
                                                    derive_seed(seed, ctx.id), generation);
        for (const auto& c : candidates) {
            if (out.size() >= max_pairs) break;
            UtteranceResponsePair pair;
            pair.id = ctx.id + "/" + std::to_string(c.ordinal);
            pair.context_text = ctx.context_text;
            pair.response_text = c.text;
            pair.source = source;
            const double latent = std::clamp(quality(ctx.context_text, c.text), 1.0, 5.0);
            const auto ratings = simulate_raters(pair, latent, rater_noise_sd, seed);
            const double mean = aggregate_ratings(ratings).front().mean;
            out.push_back({std::move(pair), mean});
        }
    }
    return out;
}

TrainedEvaluator train_reference_evaluator(const GeneratorBackend& backend, Strategy strategy,
                                           std::uint64_t seed,
                                           const ReferenceEvaluatorOptions& options) {
    const std::size_t per_context = build_candidate_specs(strategy, 0).size();
    const std::size_t n_contexts = options.pairs / per_context + 1;
    const auto contexts = synthetic_dialogues(n_contexts, derive_seed(seed, "contexts"),
                                              "train-" + std::string(to_string(strategy)));
    return train_reference_evaluator(backend, strategy, contexts, seed, options);
}

TrainedEvaluator train_reference_evaluator(const GeneratorBackend& backend, Strategy strategy,
                                           std::span<const UtteranceResponsePair> contexts,
                                           std::uint64_t seed,
                                           const ReferenceEvaluatorOptions& options) {
    const auto data = synthetic_engagingness(backend, contexts, strategy, reference_latent_quality,
                                             options.pairs, options.rater_noise_sd, seed);
    auto training = options.training;
    training.provenance = native_provenance(strategy);
    return train_evaluator(data, training, seed);
}

}  // namespace overgen
