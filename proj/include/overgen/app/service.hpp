// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "overgen/app/config.hpp"
#include "overgen/evaluator.hpp"
#include "overgen/generation.hpp"
#include "overgen/harness.hpp"

namespace overgen::app {

struct TurnRecord {
    int index = 0;
    std::string utterance;
    std::uint64_t seed = 0;
    std::vector<Candidate> candidates;
    int selected_ordinal = 0;
    std::optional<int> override_ordinal;

    /// The override if one is set, else the evaluator's choice.
    const Candidate& reply() const;
    nlohmann::json to_json() const;
    static TurnRecord from_json(const nlohmann::json& j);
};

struct SessionInfo {
    std::string session_id;
    Strategy strategy = Strategy::DE;
    std::uint64_t seed = 0;
    Provenance evaluator = Provenance::DeData;

    nlohmann::json to_json() const;
};

/// Supplies the scorer for a provenance, e.g. by loading or training it.
using ScorerProvider = std::function<std::shared_ptr<const Scorer>(Provenance)>;

/// Chat sessions backed by append-only JSONL event logs in `sessions_dir`.
/// Requests for one session are serialized; distinct sessions run
/// concurrently.
class ChatService {
public:
    ChatService(std::filesystem::path sessions_dir, std::shared_ptr<const GeneratorBackend> backend,
                ScorerProvider scorers, GenerationConfig generation = {});

    SessionInfo create_session(Strategy strategy, std::uint64_t seed);
    TurnRecord post_turn(const std::string& session_id, const std::string& utterance);
    TurnRecord override_selection(const std::string& session_id, int turn_index, int ordinal);
    nlohmann::json transcript(const std::string& session_id) const;
    SessionInfo session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

private:
    struct Session {
        SessionInfo info;
        std::vector<TurnRecord> turns;
        mutable std::mutex mutex;
    };

    std::shared_ptr<Session> find(const std::string& session_id) const;
    void append_event(const std::string& session_id, const nlohmann::json& event) const;
    void replay();

    std::filesystem::path dir_;
    std::shared_ptr<const GeneratorBackend> backend_;
    ScorerProvider scorers_;
    GenerationConfig generation_;

    mutable std::mutex index_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

/// Caches scorers per provenance: loaded from the configured evaluator
/// file when present, otherwise trained on synthetic reference data.
ScorerProvider default_scorer_provider(const AppConfig& config,
                                       std::shared_ptr<const GeneratorBackend> backend,
                                       std::uint64_t seed);

/// Blinded three-slot pairwise judging over a finished comparison's items.
class JudgingBoard {
public:
    static constexpr int kSlots = 3;

    /// Items as written by write_report (.items.jsonl). Submissions are
    /// logged to `log_path` if given and replayed on construction.
    JudgingBoard(std::string run_id, std::string system_a, std::string system_b,
                 std::vector<ComparisonItem> items, std::optional<std::filesystem::path> log_path = {});

    static std::shared_ptr<JudgingBoard> from_items_file(const std::filesystem::path& items_path, std::string run_id,
                                        std::optional<std::filesystem::path> log_path = {});

    const std::string& run_id() const { return run_id_; }

    /// Next item with an unassigned slot, as {item_id, slot, context,
    /// response_left, response_right}; nullopt when every slot is taken.
    std::optional<nlohmann::json> next_item();

    /// `choice` is "left", "right" or "even". Returns {item_id, slot,
    /// judgments_recorded, outcome?}.
    nlohmann::json submit(const std::string& item_id, int slot, const std::string& choice);

    ComparisonReport report() const;

private:
    struct Slotted {
        ComparisonItem item;
        std::array<bool, kSlots> issued{};
        std::array<std::optional<Judgment>, kSlots> judged{};
        int recorded = 0;
    };

    nlohmann::json record(Slotted& s, int slot, const std::string& choice);

    std::string run_id_;
    std::string system_a_;
    std::string system_b_;
    std::vector<Slotted> items_;
    std::map<std::string, std::size_t> by_id_;
    std::optional<std::filesystem::path> log_path_;
    mutable std::mutex mutex_;
};

/// Reports by run id: live judging boards first, then
/// <reports_dir>/<run_id>.summary.json.
class ReportStore {
public:
    explicit ReportStore(std::filesystem::path reports_dir) : dir_(std::move(reports_dir)) {}
    void attach(std::shared_ptr<JudgingBoard> board);
    nlohmann::json get(const std::string& run_id) const;

private:
    std::filesystem::path dir_;
    std::map<std::string, std::shared_ptr<JudgingBoard>> boards_;
};

/// Run ids and session ids are restricted to [A-Za-z0-9._-].
bool is_safe_id(std::string_view id);

}  // namespace overgen::app
