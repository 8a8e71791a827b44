// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include "app_support.hpp"
#include "overgen/app/config.hpp"
#include "overgen/app/service.hpp"
#include "overgen/error.hpp"
#include "test_support.hpp"

using namespace overgen;
using namespace overgen::app;
using overgen::testing::TempDir;

namespace {

ChatService make_chat(const TempDir& dir) {
    return ChatService(dir / "sessions", overgen::testing::reference_backend(),
                       overgen::testing::latent_provider());
}

}  // namespace

TEST_CASE("config defaults and overrides") {
    const AppConfig defaults = config_from_json(nlohmann::json::object());
    CHECK(defaults.feature_dim == 4096);
    CHECK(defaults.beam_width == 5);
    CHECK(defaults.top_k == 50);
    CHECK(defaults.sampling_draws == 5);
    CHECK(defaults.generator.type == "reference");
    CHECK(defaults.generation().sampling_draws == 5);

    const auto c = config_from_json(
        {{"feature_dim", 512}, {"data_dir", "state"}, {"de_evaluator", "/abs/de.json"},
         {"generator", {{"type", "http"}, {"port", 9000}}}},
        "/etc/overgen");
    CHECK(c.feature_dim == 512);
    CHECK(c.features().dim == 512);
    CHECK(c.data_dir == std::filesystem::path("/etc/overgen/state"));
    CHECK(c.sessions_dir() == std::filesystem::path("/etc/overgen/state/sessions"));
    CHECK(*c.de_evaluator == std::filesystem::path("/abs/de.json"));
    CHECK(c.generator.port == 9000);
    CHECK(config_from_json(to_json(c)).feature_dim == 512);
}

TEST_CASE("config rejects typos and bad values") {
    CHECK_THROWS_WITH_AS(config_from_json({{"beam_widht", 4}}), doctest::Contains("beam_widht"), DataError);
    CHECK_THROWS_AS(config_from_json({{"da_threshold", 1.5}}), DataError);
    CHECK_THROWS_AS(config_from_json({{"beam_width", "five"}}), DataError);
    CHECK_THROWS_AS(config_from_json({{"generator", {{"type", "gpu"}}}}), DataError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), DataError);
}

TEST_CASE("config file resolution order") {
    TempDir dir;
    overgen::testing::write_file(dir / "env.json", R"({"top_k": 7})");
    overgen::testing::write_file(dir / "cli.json", R"({"top_k": 9})");
    ::setenv(kConfigEnvVar, (dir / "env.json").c_str(), 1);
    CHECK(resolve_config(std::nullopt).top_k == 7);
    CHECK(resolve_config(dir / "cli.json").top_k == 9);
    ::unsetenv(kConfigEnvVar);
    CHECK(resolve_config(std::nullopt).top_k == 50);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
    overgen::testing::write_file(dir / "bad.json", "{");
    CHECK_THROWS_AS(load_config(dir / "bad.json"), DataError);
}

TEST_CASE("make_backend builds the configured generator") {
    auto ref = make_backend({});
    CHECK(dynamic_cast<const ReferenceBackend*>(ref.get()) != nullptr);
    GeneratorSettings http;
    http.type = "http";
    CHECK(dynamic_cast<const HttpGeneratorBackend*>(make_backend(http).get()) != nullptr);
}

TEST_CASE("a turn returns every scored candidate and the argmax") {
    TempDir dir;
    auto chat = make_chat(dir);
    for (auto [strategy, n] : {std::pair{Strategy::DE, 7}, {Strategy::DA, 7}, {Strategy::DADE, 49}}) {
        const auto info = chat.create_session(strategy, 5);
        const auto turn = chat.post_turn(info.session_id, "do you like green tea?");
        REQUIRE(turn.candidates.size() == static_cast<std::size_t>(n));
        double best = 0.0;
        for (const auto& c : turn.candidates) {
            REQUIRE(c.score.has_value());
            best = std::max(best, *c.score);
        }
        CHECK(*turn.candidates[static_cast<std::size_t>(turn.selected_ordinal)].score == best);
        CHECK(turn.reply().text == turn.candidates[static_cast<std::size_t>(turn.selected_ordinal)].text);
        CHECK(turn.to_json()["candidates"][0].contains("scheme"));
    }
}

TEST_CASE("sessions are deterministic given strategy, seed and utterances") {
    TempDir a, b;
    auto chat_a = make_chat(a);
    auto chat_b = make_chat(b);
    const auto ia = chat_a.create_session(Strategy::DA, 42);
    const auto ib = chat_b.create_session(Strategy::DA, 42);
    for (const char* u : {"hello", "what should I cook?", "thanks"}) {
        chat_a.post_turn(ia.session_id, u);
        chat_b.post_turn(ib.session_id, u);
    }
    CHECK(chat_a.transcript(ia.session_id).dump() == chat_b.transcript(ib.session_id).dump());

    const auto other = chat_a.create_session(Strategy::DA, 43);
    const auto t = chat_a.post_turn(other.session_id, "hello");
    CHECK(t.seed != chat_a.transcript(ia.session_id)["turns"][0]["seed"].get<std::uint64_t>());
}

TEST_CASE("turn validation") {
    TempDir dir;
    auto chat = make_chat(dir);
    const auto info = chat.create_session(Strategy::DE, 1);
    CHECK_THROWS_AS(chat.post_turn(info.session_id, "  \t"), ValidationError);
    CHECK_THROWS_AS(chat.post_turn("s-99", "hi"), NotFoundError);
    CHECK_THROWS_AS(chat.transcript("s-99"), NotFoundError);
    CHECK(chat.transcript(info.session_id)["turns"].empty());
}

TEST_CASE("override keeps the evaluator's original choice") {
    TempDir dir;
    auto chat = make_chat(dir);
    const auto info = chat.create_session(Strategy::DE, 3);
    const auto turn = chat.post_turn(info.session_id, "I went hiking today");
    const int other = (turn.selected_ordinal + 1) % 7;
    const auto changed = chat.override_selection(info.session_id, 0, other);
    CHECK(changed.selected_ordinal == turn.selected_ordinal);
    CHECK(changed.override_ordinal == other);
    CHECK(changed.reply().text == turn.candidates[static_cast<std::size_t>(other)].text);

    const auto t = chat.transcript(info.session_id);
    CHECK(t["turns"][0]["selected_ordinal"] == turn.selected_ordinal);
    CHECK(t["turns"][0]["override_ordinal"] == other);

    CHECK_THROWS_AS(chat.override_selection(info.session_id, 1, 0), NotFoundError);
    CHECK_THROWS_AS(chat.override_selection(info.session_id, -1, 0), NotFoundError);
    CHECK_THROWS_AS(chat.override_selection(info.session_id, 0, 7), ValidationError);
}

TEST_CASE("sessions survive a restart byte-identically") {
    TempDir dir;
    std::string before;
    std::string id;
    {
        auto chat = make_chat(dir);
        id = chat.create_session(Strategy::DADE, 8).session_id;
        chat.post_turn(id, "any plans for the weekend?");
        chat.post_turn(id, "台湾茶が好きです");
        chat.override_selection(id, 1, 3);
        before = chat.transcript(id).dump();
    }
    auto reopened = make_chat(dir);
    CHECK(reopened.transcript(id).dump() == before);
    CHECK(reopened.create_session(Strategy::DE, 0).session_id == "s-2");

    overgen::testing::write_file(dir / "sessions" / "s-9.jsonl", "{\"event\":\"mystery\"}\n");
    CHECK_THROWS_AS(make_chat(dir), DataError);
}

TEST_CASE("concurrent sessions stay isolated") {
    TempDir dir;
    auto chat = make_chat(dir);
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) ids.push_back(chat.create_session(Strategy::DE, 11).session_id);
    std::vector<std::thread> threads;
    for (const auto& id : ids) {
        threads.emplace_back([&chat, id] {
            for (int t = 0; t < 3; ++t) chat.post_turn(id, "turn " + std::to_string(t));
        });
    }
    for (auto& t : threads) t.join();
    auto first = chat.transcript(ids[0]);
    for (const auto& id : ids) {
        auto t = chat.transcript(id);
        CHECK(t["turns"].size() == 3);
        t["session_id"] = first["session_id"];
        CHECK(t.dump() == first.dump());
    }
}

TEST_CASE("judging board blinds and aggregates") {
    JudgingBoard board("run-1", "DE Best", "DE Greedy", overgen::testing::judging_items(2));
    const auto first = board.next_item();
    REQUIRE(first);
    std::set<std::string> keys;
    for (auto it = first->begin(); it != first->end(); ++it) keys.insert(it.key());
    CHECK(keys == std::set<std::string>{"item_id", "slot", "context", "response_left", "response_right"});
    CHECK(first->dump().find("DE Best") == std::string::npos);

    // item-1 shows B on the left: left, left, right is B, B, A.
    CHECK(board.submit("item-1", 0, "left")["judgments_recorded"] == 1);
    board.submit("item-1", 1, "left");
    const auto done = board.submit("item-1", 2, "right");
    CHECK(done["outcome"] == "lose");
    CHECK_THROWS_AS(board.submit("item-1", 0, "even"), ConflictError);

    board.submit("item-0", 0, "left");
    CHECK_THROWS_AS(board.submit("item-0", 0, "right"), ConflictError);
    CHECK_THROWS_AS(board.submit("item-0", 3, "right"), ValidationError);
    CHECK_THROWS_AS(board.submit("item-0", 1, "A"), ValidationError);
    CHECK_THROWS_AS(board.submit("item-7", 1, "left"), NotFoundError);

    const auto r = board.report();
    CHECK(r.n_items() == 1);
    CHECK(r.lose_count == 1);
    CHECK(r.items[0].judgments == std::array{Judgment::B, Judgment::B, Judgment::A});
}

TEST_CASE("judging board hands out each slot once") {
    JudgingBoard board("run-2", "A", "B", overgen::testing::judging_items(3));
    std::set<std::pair<std::string, int>> seen;
    while (auto next = board.next_item()) {
        const auto& j = *next;
        CHECK(seen.insert({j["item_id"].get<std::string>(), j["slot"].get<int>()}).second);
        const int i = std::stoi(j["item_id"].get<std::string>().substr(5));
        CHECK(j["response_left"] == (i % 2 ? "beta " : "alpha ") + std::to_string(i));
    }
    CHECK(seen.size() == 9);
}

TEST_CASE("judging log replays on restart") {
    TempDir dir;
    const auto log = dir / "judging" / "run.jsonl";
    {
        JudgingBoard board("run", "A", "B", overgen::testing::judging_items(2), log);
        board.submit("item-0", 0, "left");
        board.submit("item-0", 1, "even");
        board.submit("item-0", 2, "left");
        board.submit("item-1", 2, "right");
    }
    JudgingBoard again("run", "A", "B", overgen::testing::judging_items(2), log);
    const auto r = again.report();
    CHECK(r.win_count == 1);
    CHECK_THROWS_AS(again.submit("item-1", 2, "left"), ConflictError);
    CHECK(again.submit("item-1", 0, "left")["judgments_recorded"] == 2);
}

TEST_CASE("judging board reads a written comparison") {
    TempDir dir;
    ComparisonReport report;
    report.system_a = "DE Best";
    report.system_b = "DE Random";
    report.items = overgen::testing::judging_items(4);
    report.even_count = 4;
    write_report(report, dir / "cmp");
    const auto board = JudgingBoard::from_items_file(dir / "cmp.items.jsonl", "cmp");
    CHECK(board->report().system_a == "DE Best");
    CHECK(board->report().n_items() == 0);
    int slots = 0;
    while (board->next_item()) ++slots;
    CHECK(slots == 12);
}

TEST_CASE("report store") {
    TempDir dir;
    ReportStore store(dir.path());
    CHECK_THROWS_AS(store.get("missing"), NotFoundError);
    CHECK_THROWS_AS(store.get("../etc"), ValidationError);

    ComparisonReport report;
    report.system_a = "X";
    report.system_b = "Y";
    report.items = overgen::testing::judging_items(1);
    report.win_count = 1;
    write_report(report, dir / "offline");
    const auto j = store.get("offline");
    CHECK(j["source"] == "file");
    CHECK(j["win_count"] == 1);

    auto board = std::make_shared<JudgingBoard>("live", "P", "Q", overgen::testing::judging_items(1));
    store.attach(board);
    CHECK(store.get("live")["source"] == "judging");
    CHECK(store.get("live")["n_items"] == 0);
}

TEST_CASE("safe ids") {
    CHECK(is_safe_id("de-best-vs-de-random-3"));
    CHECK(is_safe_id("run_1.v2"));
    CHECK_FALSE(is_safe_id(""));
    CHECK_FALSE(is_safe_id(".."));
    CHECK_FALSE(is_safe_id("a/b"));
    CHECK_FALSE(is_safe_id(std::string(129, 'a')));
}

TEST_CASE("racing submissions to one slot record exactly once") {
    JudgingBoard board("race", "A", "B", overgen::testing::judging_items(1));
    std::atomic<int> accepted{0}, conflicts{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            try {
                board.submit("item-0", 1, "even");
                ++accepted;
            } catch (const ConflictError&) {
                ++conflicts;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(accepted == 1);
    CHECK(conflicts == 7);
}
