// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "overgen/annotation.hpp"
#include "overgen/error.hpp"
#include "overgen/random.hpp"
#include "test_support.hpp"

using namespace overgen;

namespace {

std::vector<RatingRecord> group(const std::string& id, std::vector<int> grades,
                                Viewpoint v = Viewpoint::Engagingness) {
    std::vector<RatingRecord> out;
    for (std::size_t i = 0; i < grades.size(); ++i) {
        out.push_back({id, v, "r" + std::to_string(i + 1), grades[i]});
    }
    return out;
}

std::vector<DAVoteRecord> votes(const std::string& id, std::vector<DialogueActSet> per_rater) {
    std::vector<DAVoteRecord> out;
    for (std::size_t i = 0; i < per_rater.size(); ++i) {
        out.push_back({id, "r" + std::to_string(i + 1), per_rater[i]});
    }
    return out;
}

}  // namespace

TEST_CASE("five-grade means are exact") {
    CHECK(aggregate_ratings(group("a", {3, 4, 5, 4, 4}))[0].mean == 4.0);
    CHECK(aggregate_ratings(group("a", {1, 1, 1, 1, 1}))[0].mean == 1.0);
    CHECK(aggregate_ratings(group("a", {5, 4, 3, 2, 1}))[0].mean == 3.0);
    for (int g = 1; g <= 5; ++g) {
        CHECK(aggregate_ratings(group("g", {g, g, g, g, g}))[0].mean == static_cast<double>(g));
    }
}

TEST_CASE("groups are keyed by pair and viewpoint in first-appearance order") {
    auto records = group("b", {2, 2, 2, 2, 3});
    auto more = group("a", {5, 5, 5, 5, 5}, Viewpoint::Empathy);
    auto again = group("b", {1, 1, 1, 1, 1}, Viewpoint::Relevance);
    records.insert(records.end(), more.begin(), more.end());
    records.insert(records.end(), again.begin(), again.end());
    const auto out = aggregate_ratings(records);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == AggregatedRating{"b", Viewpoint::Engagingness, 2.2, 5});
    CHECK(out[1].pair_id == "a");
    CHECK(out[1].viewpoint == Viewpoint::Empathy);
    CHECK(out[2].viewpoint == Viewpoint::Relevance);
    CHECK(out[2].mean == 1.0);
}

TEST_CASE("rating validation") {
    CHECK_THROWS_WITH_AS(aggregate_ratings(group("x", {3, 4, 5, 4})), doctest::Contains("x"),
                         ValidationError);
    CHECK_THROWS_AS(aggregate_ratings(group("x", {3, 4, 5, 4, 4, 1})), ValidationError);
    CHECK_THROWS_AS(aggregate_ratings(group("x", {3, 4, 6, 4, 4})), ValidationError);
    CHECK_THROWS_AS(aggregate_ratings(group("x", {0, 4, 5, 4, 4})), ValidationError);
    auto dup = group("x", {3, 4, 5, 4, 4});
    dup[4].rater_id = "r1";
    CHECK_THROWS_AS(aggregate_ratings(dup), ValidationError);
}

TEST_CASE("lenient mode averages whatever raters exist") {
    const auto out = aggregate_ratings(group("x", {2, 4, 3}), false);
    REQUIRE(out.size() == 1);
    CHECK(out[0].mean == 3.0);
    CHECK(out[0].n_raters == 3);
}

TEST_CASE("DA votes need three of five") {
    using DA = DialogueAct;
    SUBCASE("single winner") {
        const auto out = aggregate_da_votes(
            votes("u", {{DA::Advice}, {DA::Advice}, {DA::Advice}, {DA::Question}, {DA::Question}}));
        CHECK(out.at("u") == DialogueActSet{DA::Advice});
    }
    SUBCASE("nothing reaches the threshold") {
        const auto out = aggregate_da_votes(
            votes("u", {{DA::Advice}, {DA::Advice}, {DA::Inform}, {DA::Inform}, {}}));
        CHECK(out.at("u").empty());
    }
    SUBCASE("multi-label") {
        const auto out = aggregate_da_votes(votes(
            "u", {{DA::Emotion}, {DA::Emotion, DA::Opinion}, {DA::Emotion, DA::Opinion}, {DA::Opinion}, {}}));
        CHECK(out.at("u") == DialogueActSet{DA::Emotion, DA::Opinion});
    }
    SUBCASE("wrong rater count names the utterance") {
        CHECK_THROWS_WITH_AS(aggregate_da_votes(votes("u17", {{}, {}, {}, {}})),
                             doctest::Contains("u17"), ValidationError);
    }
    SUBCASE("general cannot be voted") {
        CHECK_THROWS_AS(aggregate_da_votes(votes("u", {{DA::General}, {}, {}, {}, {}})),
                        ValidationError);
    }
}

TEST_CASE("adding a vote never removes an act") {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<DialogueActSet> per(5);
        for (auto& s : per) {
            for (auto da : kAnnotatableActs) {
                if (rng.bernoulli(0.4)) s.insert(da);
            }
        }
        const auto before = aggregate_da_votes(votes("u", per)).at("u");
        CHECK(before.size() <= 7);
        const auto da = kAnnotatableActs[rng.below(7)];
        per[rng.below(5)].insert(da);
        const auto after = aggregate_da_votes(votes("u", per)).at("u");
        for (auto d : before) CHECK(after.contains(d));
    }
}

TEST_CASE("simulated raters") {
    UtteranceResponsePair p{"p1", "ctx", "resp", PairSource::HumanCorpus, {}, {}};
    SUBCASE("zero noise reproduces the latent grade") {
        for (auto r : simulate_raters(p, 4.0, 0.0, 1)) CHECK(r.grade == 4);
        const auto agg = aggregate_ratings(simulate_raters(p, 2.0, 0.0, 9));
        CHECK(agg[0].mean == 2.0);
    }
    SUBCASE("clipping keeps grades in range") {
        const auto rs = simulate_raters(p, 1.0, 0.5, 3);
        CHECK(rs.size() == 5);
        for (const auto& r : rs) {
            CHECK(r.grade >= 1);
            CHECK(r.grade <= 5);
        }
    }
    SUBCASE("deterministic in seed") {
        CHECK(simulate_raters(p, 3.3, 1.0, 42) == simulate_raters(p, 3.3, 1.0, 42));
    }
}

namespace {

void add_cell(std::vector<RatingRecord>& records, std::vector<UtteranceResponsePair>& pairs,
              Viewpoint v, PairSource s, std::size_t n) {
    const std::string tag = std::string(to_string(v)) + std::to_string(static_cast<int>(s));
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = tag + "-" + std::to_string(i);
        pairs.push_back({id, "c", "r", s, {}, {}});
        for (int r = 1; r <= 5; ++r) records.push_back({id, v, "r" + std::to_string(r), 3});
    }
}

}  // namespace

TEST_CASE("dataset statistics table") {
    std::vector<RatingRecord> records;
    std::vector<UtteranceResponsePair> pairs;
    SUBCASE("full engagingness row") {
        add_cell(records, pairs, Viewpoint::Engagingness, PairSource::HumanCorpus, 4000);
        add_cell(records, pairs, Viewpoint::Engagingness, PairSource::GeneratorDE, 4000);
        add_cell(records, pairs, Viewpoint::Engagingness, PairSource::GeneratorDA, 4000);
        const auto stats = dataset_stats(records, pairs);
        CHECK(stats.amount_cell(Viewpoint::Engagingness) == "4,000/4,000/4,000");
        CHECK(stats.response_cell(Viewpoint::Engagingness) == "Twitter/decoding model/DA model");
        CHECK(stats.render().find("Engagingness") != std::string::npos);
    }
    SUBCASE("empty input") {
        const auto stats = dataset_stats(records, pairs);
        for (auto v : kViewpoints) {
            CHECK(stats.amount_cell(v) == "0");
            for (int s = 0; s < 3; ++s) CHECK(stats.count(v, static_cast<PairSource>(s)) == 0);
        }
    }
    SUBCASE("empathy only") {
        add_cell(records, pairs, Viewpoint::Empathy, PairSource::HumanCorpus, 2000);
        const auto stats = dataset_stats(records, pairs);
        CHECK(stats.amount_cell(Viewpoint::Empathy) == "2,000");
        CHECK(stats.response_cell(Viewpoint::Empathy) == "Twitter");
        CHECK(stats.amount_cell(Viewpoint::Relevance) == "0");
    }
    SUBCASE("unknown pair") {
        records.push_back({"ghost", Viewpoint::Relevance, "r1", 3});
        CHECK_THROWS_AS(dataset_stats(records, pairs), DataError);
    }
}

TEST_CASE("ratings and votes load from JSONL") {
    overgen::testing::TempDir dir;
    overgen::testing::write_file(
        dir / "r.jsonl",
        R"({"pair_id":"a","viewpoint":"engagingness","rater_id":"w1","grade":4})"
        "\n"
        R"({"pair_id":"a","viewpoint":"engagingness","rater_id":"w2","grade":9})"
        "\n");
    CHECK_THROWS_WITH_AS(load_ratings(dir / "r.jsonl"), doctest::Contains("record 2"), DataError);
    overgen::testing::write_file(
        dir / "v.jsonl", R"({"utterance_id":"u","rater_id":"w1","labels":["advice","agree"]})"
                         "\n");
    const auto v = load_votes(dir / "v.jsonl");
    REQUIRE(v.size() == 1);
    CHECK(v[0].labels == DialogueActSet{DialogueAct::Advice, DialogueAct::Agree});
}
