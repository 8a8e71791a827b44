// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "overgen/app/service.hpp"

namespace httplib {
class Server;
}

namespace overgen::app {

/// JSON routes:
///   POST /sessions                          {strategy, seed}
///   POST /sessions/{id}/turns               {utterance}
///   POST /sessions/{id}/turns/{n}/override  {ordinal}
///   GET  /sessions/{id}/transcript
///   GET  /judging/next                      204 once every slot is assigned
///   POST /judging/{item_id}                 {slot, judgment}
///   GET  /reports/{run_id}
/// Errors come back as {"error": message} with 400 (validation), 404,
/// 409 (conflict), 422 (data) or 500.
class HttpApi {
public:
    HttpApi(std::shared_ptr<ChatService> chat, std::shared_ptr<JudgingBoard> judging,
            std::shared_ptr<ReportStore> reports);

    void mount(httplib::Server& server) const;

    /// Blocks until the server stops.
    void listen(const std::string& host, int port) const;

private:
    std::shared_ptr<ChatService> chat_;
    std::shared_ptr<JudgingBoard> judging_;
    std::shared_ptr<ReportStore> reports_;
};

}  // namespace overgen::app
