// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "app_support.hpp"
#include "overgen/app/http_api.hpp"
#include "test_support.hpp"

using namespace overgen;
using namespace overgen::app;
using overgen::testing::TempDir;

namespace {

struct Fixture {
    TempDir dir;
    std::shared_ptr<ChatService> chat;
    std::shared_ptr<JudgingBoard> board;
    std::shared_ptr<ReportStore> reports;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    Fixture() {
        chat = std::make_shared<ChatService>(dir / "sessions", overgen::testing::reference_backend(),
                                             overgen::testing::latent_provider());
        board = std::make_shared<JudgingBoard>("live", "DE Best", "DE Greedy",
                                               overgen::testing::judging_items(2));
        reports = std::make_shared<ReportStore>(dir / "reports");
        reports->attach(board);
        HttpApi(chat, board, reports).mount(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~Fixture() {
        server.stop();
        thread.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

nlohmann::json body(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

httplib::Result post(httplib::Client& c, const std::string& path, const nlohmann::json& j) {
    return c.Post(path, j.dump(), "application/json");
}

}  // namespace

TEST_CASE("chat endpoints") {
    Fixture f;
    auto c = f.client();

    auto created = post(c, "/sessions", {{"strategy", "dade"}, {"seed", 4}});
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto id = body(created)["session_id"].get<std::string>();
    CHECK(body(created)["evaluator"] == "da_data");

    auto turn = post(c, "/sessions/" + id + "/turns", {{"utterance", "how was your day?"}});
    REQUIRE(turn->status == 200);
    const auto t = body(turn);
    CHECK(t["candidates"].size() == 49);
    CHECK(t["candidates"][3]["score"].is_number());
    CHECK(t["reply"] == t["candidates"][t["selected_ordinal"].get<int>()]["text"]);

    auto over = post(c, "/sessions/" + id + "/turns/0/override", {{"ordinal", 10}});
    REQUIRE(over->status == 200);
    CHECK(body(over)["override_ordinal"] == 10);
    CHECK(body(over)["selected_ordinal"] == t["selected_ordinal"]);

    auto transcript = c.Get("/sessions/" + id + "/transcript");
    REQUIRE(transcript->status == 200);
    CHECK(body(transcript)["turns"].size() == 1);
    CHECK(body(transcript) == f.chat->transcript(id));
}

TEST_CASE("chat endpoint errors") {
    Fixture f;
    auto c = f.client();
    const auto id = body(post(c, "/sessions", {{"strategy", "de"}}))["session_id"].get<std::string>();

    CHECK(post(c, "/sessions", {{"strategy", "xyz"}})->status == 400);
    CHECK(post(c, "/sessions", nlohmann::json::object())->status == 400);
    CHECK(c.Post("/sessions", "{not json", "application/json")->status == 400);
    CHECK(post(c, "/sessions/" + id + "/turns", {{"utterance", "   "}})->status == 400);
    CHECK(post(c, "/sessions/" + id + "/turns", {{"utterance", 5}})->status == 400);
    CHECK(post(c, "/sessions/s-404/turns", {{"utterance", "hi"}})->status == 404);
    CHECK(post(c, "/sessions/" + id + "/turns/0/override", {{"ordinal", 1}})->status == 404);
    CHECK(post(c, "/sessions/" + id + "/turns/zero/override", {{"ordinal", 1}})->status == 400);
    post(c, "/sessions/" + id + "/turns", {{"utterance", "hi"}});
    auto bad = post(c, "/sessions/" + id + "/turns/0/override", {{"ordinal", 50}});
    CHECK(bad->status == 400);
    CHECK(body(bad).contains("error"));
    CHECK(c.Get("/sessions/s-404/transcript")->status == 404);
}

TEST_CASE("judging endpoints") {
    Fixture f;
    auto c = f.client();
    int served = 0;
    nlohmann::json first;
    while (true) {
        auto next = c.Get("/judging/next");
        REQUIRE(next);
        if (next->status == 204) break;
        REQUIRE(next->status == 200);
        if (served++ == 0) first = body(next);
    }
    CHECK(served == 6);
    CHECK_FALSE(first.contains("system_a"));
    CHECK_FALSE(first.contains("swapped"));

    for (int slot = 0; slot < 2; ++slot) {
        CHECK(post(c, "/judging/item-1", {{"slot", slot}, {"judgment", "left"}})->status == 200);
    }
    auto last = post(c, "/judging/item-1", {{"slot", 2}, {"judgment", "right"}});
    CHECK(body(last)["outcome"] == "lose");
    CHECK(post(c, "/judging/item-1", {{"slot", 0}, {"judgment", "even"}})->status == 409);
    CHECK(post(c, "/judging/item-0", {{"slot", 5}, {"judgment", "even"}})->status == 400);
    CHECK(post(c, "/judging/item-0", {{"slot", 0}, {"judgment", "maybe"}})->status == 400);
    CHECK(post(c, "/judging/nope", {{"slot", 0}, {"judgment", "left"}})->status == 404);

    auto report = c.Get("/reports/live");
    REQUIRE(report->status == 200);
    CHECK(body(report)["lose_count"] == 1);
    CHECK(body(report)["n_items"] == 1);
    CHECK(c.Get("/reports/unknown")->status == 404);
}

TEST_CASE("endpoints without a judging board") {
    TempDir dir;
    httplib::Server server;
    HttpApi(nullptr, nullptr, std::make_shared<ReportStore>(dir.path())).mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client c("127.0.0.1", port);
    CHECK(c.Get("/judging/next")->status == 404);
    CHECK(c.Post("/sessions", R"({"strategy":"de"})", "application/json")->status == 404);
    server.stop();
    th.join();
}
