// SPDX-License-Identifier: Apache-2.0

#include "overgen/app/http_api.hpp"

#include <httplib.h>

#include "overgen/error.hpp"

namespace overgen::app {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what());
    }
}

template <class T>
T field(const nlohmann::json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end()) throw ValidationError(std::string("missing field \"") + key + "\"");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("field \"") + key + "\" has the wrong type");
    }
}

int parse_index(const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw ValidationError("bad turn index " + s);
        return v;
    } catch (const std::logic_error&) {
        throw ValidationError("bad turn index " + s);
    }
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ValidationError& e) {
            send_json(res, 400, {{"error", e.what()}});
        } catch (const NotFoundError& e) {
            send_json(res, 404, {{"error", e.what()}});
        } catch (const ConflictError& e) {
            send_json(res, 409, {{"error", e.what()}});
        } catch (const DataError& e) {
            send_json(res, 422, {{"error", e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
        }
    };
}

}  // namespace

HttpApi::HttpApi(std::shared_ptr<ChatService> chat, std::shared_ptr<JudgingBoard> judging,
                 std::shared_ptr<ReportStore> reports)
    : chat_(std::move(chat)), judging_(std::move(judging)), reports_(std::move(reports)) {}

void HttpApi::mount(httplib::Server& server) const {
    auto chat = chat_;
    auto judging = judging_;
    auto reports = reports_;

    auto require_chat = [chat]() -> ChatService& {
        if (!chat) throw NotFoundError("chat service is not enabled");
        return *chat;
    };
    auto require_board = [judging]() -> JudgingBoard& {
        if (!judging) throw NotFoundError("no comparison run is loaded for judging");
        return *judging;
    };

    server.Post("/sessions", guarded([=](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        const auto strategy = parse_strategy(field<std::string>(body, "strategy"));
        const auto seed = body.contains("seed") ? field<std::uint64_t>(body, "seed") : 0;
        send_json(res, 201, require_chat().create_session(strategy, seed).to_json());
    }));

    server.Post(R"(/sessions/([^/]+)/turns)",
                guarded([=](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req);
                    const auto turn =
                        require_chat().post_turn(req.matches[1], field<std::string>(body, "utterance"));
                    send_json(res, 200, turn.to_json());
                }));

    server.Post(R"(/sessions/([^/]+)/turns/([^/]+)/override)",
                guarded([=](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req);
                    const auto turn = require_chat().override_selection(
                        req.matches[1], parse_index(req.matches[2]), field<int>(body, "ordinal"));
                    send_json(res, 200, turn.to_json());
                }));

    server.Get(R"(/sessions/([^/]+)/transcript)",
               guarded([=](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, require_chat().transcript(req.matches[1]));
               }));

    server.Get("/judging/next", guarded([=](const httplib::Request&, httplib::Response& res) {
        if (auto item = require_board().next_item()) {
            send_json(res, 200, *item);
        } else {
            res.status = 204;
        }
    }));

    server.Post(R"(/judging/([^/]+))", guarded([=](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        send_json(res, 200,
                  require_board().submit(req.matches[1], field<int>(body, "slot"),
                                         field<std::string>(body, "judgment")));
    }));

    server.Get(R"(/reports/([^/]+))", guarded([=](const httplib::Request& req, httplib::Response& res) {
        if (!reports) throw NotFoundError("no report store");
        send_json(res, 200, reports->get(req.matches[1]));
    }));
}

void HttpApi::listen(const std::string& host, int port) const {
    httplib::Server server;
    mount(server);
    if (!server.listen(host, port)) {
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace overgen::app
