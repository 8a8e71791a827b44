// SPDX-License-Identifier: Apache-2.0

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "app_support.hpp"
#include "oracles.hpp"
#include "overgen/annotation.hpp"
#include "overgen/app/service.hpp"
#include "overgen/corpus.hpp"
#include "overgen/daclassify.hpp"
#include "overgen/evaluator.hpp"
#include "overgen/features.hpp"
#include "overgen/generation.hpp"
#include "overgen/harness.hpp"
#include "overgen/hash.hpp"
#include "test_support.hpp"

using namespace overgen;
using overgen::testing::TempDir;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::string round2(double v) { return fmt("%.2f", v); }

// ---------------------------------------------------------------------------

Verdict cardinality() {
    const ReferenceBackend backend;
    Rng rng(101);
    std::size_t checked = 0;
    for (int i = 0; i < 200; ++i) {
        const auto utterance = overgen::testing::random_text(rng);
        const std::uint64_t seed = rng.below(1ULL << 53);
        for (auto [strategy, expected] : {std::pair{Strategy::DE, 7}, {Strategy::DA, 7}, {Strategy::DADE, 49}}) {
            const auto cands = generate_candidates(backend, utterance, strategy, seed);
            if (cands.size() != static_cast<std::size_t>(expected)) {
                return {false, "size " + std::to_string(cands.size()) + " for " + std::string(to_string(strategy))};
            }
            std::map<std::string, int> families;
            std::set<std::optional<DialogueAct>> acts;
            for (const auto& c : cands) {
                ++families[std::string(scheme_tag(c.spec.scheme))];
                acts.insert(c.spec.da);
                if (c.spec.da == DialogueAct::Emotion) return {false, "emotion candidate present"};
            }
            const int per_act = strategy == Strategy::DE ? 1 : strategy == Strategy::DA ? 0 : 7;
            if (strategy == Strategy::DA) {
                if (acts.size() != 7 || families["greedy"] != 7) return {false, "DA composition"};
            } else if (families["greedy"] != per_act || families["beam"] != per_act ||
                       families["top_k"] != 5 * per_act) {
                return {false, "DE/DADE composition"};
            }
            if (strategy == Strategy::DADE && acts.size() != 7) return {false, "DADE acts"};
            ++checked;
        }
    }
    return {true, std::to_string(checked) + " candidate sets (7/7/49)"};
}

Verdict f1_table() {
    struct Row {
        const char* act;
        double p, r, f1;
    };
    const Row rows[] = {{"Advice", 0.52, 0.57, 0.54},  {"Emotion", 0.54, 0.37, 0.44},
                        {"Opinion", 0.60, 0.51, 0.55}, {"Inform", 0.44, 0.55, 0.49},
                        {"Schedule", 0.41, 0.47, 0.44}, {"Question", 0.88, 0.51, 0.65},
                        {"Agree", 0.69, 0.53, 0.60}};
    double worst = 0.0;
    for (const auto& row : rows) {
        const double f1 = f1_score(row.p, row.r);
        const double oracle = 2.0 / (1.0 / row.p + 1.0 / row.r);
        if (std::abs(f1 - oracle) > 1e-12) return {false, std::string(row.act) + " disagrees with 2/(1/P+1/R)"};
        worst = std::max(worst, std::abs(f1 - row.f1));
        if (std::abs(f1 - row.f1) > 0.005) return {false, std::string(row.act) + " F1 " + fmt("%.4f", f1)};
    }
    if (round2(f1_score(0.88, 0.51)) != "0.65" || round2(f1_score(0.52, 0.57)) != "0.54") {
        return {false, "rounded Question/Advice"};
    }
    return {true, "7 rows, max |F1 - table| " + fmt("%.4f", worst)};
}

Verdict aggregation() {
    // Every 5-grade pattern against the exact rational mean.
    double worst = 0.0;
    for (int code = 0; code < 3125; ++code) {
        std::vector<RatingRecord> records;
        int sum = 0;
        for (int r = 0, c = code; r < 5; ++r, c /= 5) {
            const int grade = 1 + c % 5;
            sum += grade;
            records.push_back({"p", Viewpoint::Engagingness, "r" + std::to_string(r), grade});
        }
        const auto agg = aggregate_ratings(records);
        worst = std::max(worst, std::abs(agg.at(0).mean - sum / 5.0));
    }
    if (worst > 1e-12) return {false, "mean error " + fmt("%.3g", worst)};

    // Every subset choice of 3 acts for each of 5 raters.
    const std::array<DialogueAct, 3> acts = {DialogueAct::Advice, DialogueAct::Question, DialogueAct::Agree};
    std::size_t patterns = 0;
    for (int code = 0; code < 32768; ++code) {
        std::vector<DAVoteRecord> votes;
        std::array<int, 3> tally{};
        for (int r = 0; r < 5; ++r) {
            const int mask = (code >> (3 * r)) & 7;
            DAVoteRecord v{"u", "r" + std::to_string(r), {}};
            for (int a = 0; a < 3; ++a) {
                if (mask & (1 << a)) {
                    v.labels.insert(acts[static_cast<std::size_t>(a)]);
                    ++tally[static_cast<std::size_t>(a)];
                }
            }
            votes.push_back(std::move(v));
        }
        DialogueActSet expected;
        for (int a = 0; a < 3; ++a) {
            if (tally[static_cast<std::size_t>(a)] >= 3) expected.insert(acts[static_cast<std::size_t>(a)]);
        }
        const auto got = aggregate_da_votes(votes);
        if (got.at("u") != expected) return {false, "vote pattern " + std::to_string(code)};
        ++patterns;
    }
    return {true, "3125 grade patterns (max error " + fmt("%.1g", worst) + "), " + std::to_string(patterns) +
                      " vote patterns"};
}

Verdict gradients() {
    const ReferenceBackend backend;
    FeatureConfig config;
    config.dim = 260;

    oracle::Problem squared;
    squared.dim = config.dim;
    const auto contexts = synthetic_dialogues(5, 7, "grad");
    const auto rated = synthetic_engagingness(backend, contexts, Strategy::DE, reference_latent_quality, 30, 0.5, 7);
    std::vector<std::array<double, kScalarFeatures>> scalars;
    for (const auto& r : rated) scalars.push_back(pair_scalars(r.pair.context_text, r.pair.response_text, config));
    const auto stats = fit_feature_stats(scalars);
    for (const auto& r : rated) {
        squared.xs.push_back(featurize_sparse(r.pair.context_text, r.pair.response_text, config, stats));
        squared.ys.push_back(r.engagingness);
    }

    oracle::Problem logistic;
    logistic.dim = config.dim;
    for (const auto& l : oracle::separable_da_corpus(30, 9)) {
        logistic.xs.push_back(featurize_response(l.response_text, config));
        logistic.ys.push_back(l.is_da ? 1.0 : 0.0);
    }

    const auto sq = oracle::finite_difference_check(LossKind::Squared, squared, 1e-4, 100, 1);
    const auto lg = oracle::finite_difference_check(LossKind::Logistic, logistic, 1e-3, 100, 2);
    const bool ok = sq.max_rel_error <= 1e-5 && lg.max_rel_error <= 1e-5 && sq.max_loss_mismatch <= 1e-12 &&
                    lg.max_loss_mismatch <= 1e-12;
    return {ok, fmt("squared max rel %.2e, logistic %.2e, loss mismatch %.1e", sq.max_rel_error, lg.max_rel_error,
                    std::max(sq.max_loss_mismatch, lg.max_loss_mismatch)) + " over " +
                    std::to_string(sq.coordinates + lg.coordinates) + " coordinates"};
}

Verdict synthetic_cv() {
    const auto corpus = oracle::separable_da_corpus(1000, 2024);
    ClassifierTraining options;
    const auto a = cross_validate(corpus, DialogueAct::Advice, 5, 17, options);
    const auto b = cross_validate(corpus, DialogueAct::Advice, 5, 17, options);
    bool same = a.f1 == b.f1 && a.precision == b.precision && a.recall == b.recall;
    for (std::size_t f = 0; same && f < a.folds.size(); ++f) same = a.folds[f].f1 == b.folds[f].f1;
    return {a.f1 >= 0.95 && same, fmt("macro F1 %.4f", a.f1) + (same ? ", repeat identical" : ", NOT deterministic")};
}

Verdict uniform_distribution() {
    const ReferenceBackend backend;
    Rng rng(77);
    std::vector<ScoredSelection> log;
    log.reserve(10000);
    for (int i = 0; i < 10000; ++i) {
        auto cands = generate_candidates(backend, "utterance " + std::to_string(i), Strategy::DE,
                                         derive_seed(77, static_cast<std::uint64_t>(i)));
        for (auto& c : cands) c.score = 1.0 + 4.0 * rng.uniform();
        const int sel = argmax_ordinal(cands);
        log.push_back({std::move(cands), sel});
    }
    const double ratio = selection_distribution(log).ratio("sampling");
    return {std::abs(ratio - 5.0 / 7.0) <= 0.03, fmt("sampling ratio %.4f (5/7 = %.4f)", ratio, 5.0 / 7.0)};
}

struct EndToEnd {
    std::shared_ptr<const TrainedEvaluator> evaluator;
    std::vector<UtteranceResponsePair> test;
};

EndToEnd& shared_setup() {
    static EndToEnd setup = [] {
        const ReferenceBackend backend;
        EndToEnd s;
        s.evaluator = std::make_shared<const TrainedEvaluator>(train_reference_evaluator(backend, Strategy::DE, 5));
        s.test = synthetic_dialogues(500, 1234, "test");
        return s;
    }();
    return setup;
}

ComparisonReport best_vs_random(std::size_t n_items, std::uint64_t seed) {
    const auto& s = shared_setup();
    const ReferenceBackend backend;
    const SystemUnderTest a{"DE Best", Strategy::DE, BestPolicy{s.evaluator}};
    const SystemUnderTest b{"DE Random", Strategy::DE, RandomPolicy{derive_seed(seed, "random")}};
    const std::span<const UtteranceResponsePair> items(s.test.data(), n_items);
    return run_comparison(a, b, items, backend, simulate_judge(reference_latent_quality, 0.0, seed), seed);
}

Verdict oracle_end_to_end() {
    const auto r = best_vs_random(500, 9);
    std::size_t w = 0, l = 0, e = 0;
    for (const auto& item : r.items) {
        (item.outcome == Outcome::Win ? w : item.outcome == Outcome::Lose ? l : e)++;
    }
    const bool conserve = r.items.size() == 500 && w == r.win_count && l == r.lose_count && e == r.even_count &&
                          w + l + e == 500;
    const double margin = 100.0 * (static_cast<double>(w) - static_cast<double>(l)) / 500.0;
    return {conserve && margin >= 15.0,
            r.render_row() + fmt(" (Win-Lose %.1f points)", margin) + (conserve ? "" : " counts do not conserve")};
}

Verdict majority_table() {
    const std::array<Judgment, 3> values = {Judgment::A, Judgment::B, Judgment::Even};
    int n = 0;
    for (auto x : values) {
        for (auto y : values) {
            for (auto z : values) {
                const std::array<Judgment, 3> js = {x, y, z};
                if (majority_vote(js) != oracle::majority(x, y, z)) return {false, "combination " + std::to_string(n)};
                ++n;
            }
        }
    }
    return {n == 27, std::to_string(n) + " combinations"};
}

Verdict determinism() {
    TempDir dir;
    const ReferenceBackend backend;
    std::vector<std::string> problems;

    auto write_candidates = [&](const std::filesystem::path& path) {
        std::vector<nlohmann::json> records;
        for (int i = 0; i < 40; ++i) {
            for (const auto& c : generate_candidates(backend, "utterance " + std::to_string(i), Strategy::DADE, 3,
                                                     {}, {i % 2 == 0})) {
                records.push_back(to_json(c));
            }
        }
        write_jsonl(records, path);
    };
    write_candidates(dir / "c1.jsonl");
    write_candidates(dir / "c2.jsonl");
    if (overgen::testing::read_file(dir / "c1.jsonl") != overgen::testing::read_file(dir / "c2.jsonl")) {
        problems.push_back("candidate files");
    }

    write_report(best_vs_random(100, 4), dir / "r1");
    write_report(best_vs_random(100, 4), dir / "r2");
    for (const char* ext : {".summary.json", ".items.jsonl"}) {
        if (overgen::testing::read_file(dir / (std::string("r1") + ext)) !=
            overgen::testing::read_file(dir / (std::string("r2") + ext))) {
            problems.push_back(std::string("report ") + ext);
        }
    }

    const auto evaluator = shared_setup().evaluator;
    auto provider = [evaluator](Provenance) -> std::shared_ptr<const Scorer> { return evaluator; };
    const auto reference = overgen::testing::reference_backend();
    std::string transcripts[2];
    for (int k = 0; k < 2; ++k) {
        app::ChatService chat(dir / ("sessions" + std::to_string(k)), reference, provider);
        const auto id = chat.create_session(Strategy::DE, 21).session_id;
        for (const char* u : {"good morning", "any plans today?", "see you"}) chat.post_turn(id, u);
        chat.override_selection(id, 1, 2);
        transcripts[k] = chat.transcript(id).dump();
        app::ChatService reopened(dir / ("sessions" + std::to_string(k)), reference, provider);
        if (reopened.transcript(id).dump() != transcripts[k]) problems.push_back("transcript replay");
    }
    if (transcripts[0] != transcripts[1]) problems.push_back("transcripts");

    Rng rng(1000);
    std::vector<UtteranceResponsePair> pairs;
    for (std::size_t i = 0; i < 1000; ++i) pairs.push_back(overgen::testing::random_pair(rng, i));
    write_pairs(pairs, dir / "p1.jsonl");
    const auto back = load_pairs(dir / "p1.jsonl");
    write_pairs(back, dir / "p2.jsonl");
    if (back != pairs) problems.push_back("JSONL records");
    if (overgen::testing::read_file(dir / "p1.jsonl") != overgen::testing::read_file(dir / "p2.jsonl")) {
        problems.push_back("JSONL bytes");
    }

    if (!problems.empty()) {
        std::string d = "differs:";
        for (const auto& p : problems) d += " " + p;
        return {false, d};
    }
    return {true, "candidates, reports, transcripts byte-identical; 1000 JSONL records round-trip"};
}

Verdict ood_protocol() {
    const ReferenceBackend backend;
    // Distinct contexts split into disjoint train and test sets.
    std::vector<UtteranceResponsePair> pool;
    std::set<std::string> seen;
    for (auto& p : synthetic_dialogues(20000, 4321, "pool")) {
        if (seen.insert(p.context_text).second) pool.push_back(std::move(p));
    }
    const auto split = split_dataset(pool, {0.8, 0.0, 0.2}, 31);
    std::set<std::string> train_contexts;
    for (const auto& p : split.train) train_contexts.insert(p.context_text);
    const std::vector<UtteranceResponsePair> test(split.test.begin(),
                                                  split.test.begin() + std::min<std::ptrdiff_t>(500, split.test.size()));
    for (const auto& p : test) {
        if (train_contexts.contains(p.context_text)) return {false, "test context seen in training"};
    }
    // Trained on DA candidates, so da_data provenance: mismatched for DE.
    auto evaluator = std::make_shared<const TrainedEvaluator>(
        train_reference_evaluator(backend, Strategy::DA, split.train, 31));
    const SystemUnderTest baseline{"DE Greedy", Strategy::DE, GreedyPolicy{}};
    const auto r = run_ood_experiment(Strategy::DE, evaluator, baseline, test, backend,
                                      simulate_judge(reference_latent_quality, 0.0, 31), 31);
    const bool provenance_ok = r.evaluator_provenance == Provenance::DaData && r.native_provenance == Provenance::DeData;
    return {provenance_ok && r.win_count >= r.lose_count,
            r.render_row() + " over " + std::to_string(test.size()) + " unseen contexts" +
                (provenance_ok ? "" : " wrong provenance")};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;  // 0: none
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria = {
        {"candidate cardinality", 1.0, cardinality},
        {"F1 arithmetic vs DA classification table", 0.0, f1_table},
        {"aggregation exactness", 0.0, aggregation},
        {"gradient checks", 30.0, gradients},
        {"synthetic cross-validation", 10.0, synthetic_cv},
        {"uniform-scorer selection distribution", 60.0, uniform_distribution},
        {"oracle end-to-end Best vs Random", 120.0, oracle_end_to_end},
        {"majority-vote truth table", 0.0, majority_table},
        {"determinism and round-trips", 0.0, determinism},
        {"out-of-distribution protocol", 0.0, ood_protocol},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0 && elapsed > c.budget_s) {
            v.pass = false;
            v.detail += fmt(" (over the %.0f s budget)", c.budget_s);
        }
        failed += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << v.detail << fmt(" [%.2f s]", elapsed)
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
