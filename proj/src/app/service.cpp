// SPDX-License-Identifier: Apache-2.0

#include "overgen/app/service.hpp"

#include <algorithm>
#include <fstream>

#include "overgen/error.hpp"
#include "overgen/hash.hpp"
#include "overgen/text.hpp"

namespace overgen::app {

namespace {

std::optional<std::uint64_t> session_number(std::string_view id) {
    if (id.size() < 3 || id.substr(0, 2) != "s-") return std::nullopt;
    std::uint64_t n = 0;
    for (char c : id.substr(2)) {
        if (c < '0' || c > '9') return std::nullopt;
        n = n * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return n;
}

void append_line(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

bool is_safe_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '.' || c == '_' || c == '-';
    });
}

// ---------------------------------------------------------------------------

const Candidate& TurnRecord::reply() const {
    const int ordinal = override_ordinal.value_or(selected_ordinal);
    for (const auto& c : candidates) {
        if (c.ordinal == ordinal) return c;
    }
    throw DataError("turn " + std::to_string(index) + " has no candidate " + std::to_string(ordinal));
}

nlohmann::json TurnRecord::to_json() const {
    auto cands = nlohmann::json::array();
    for (const auto& c : candidates) cands.push_back(overgen::to_json(c));
    return {
        {"index", index},
        {"utterance", utterance},
        {"seed", seed},
        {"candidates", cands},
        {"selected_ordinal", selected_ordinal},
        {"override_ordinal", override_ordinal ? nlohmann::json(*override_ordinal) : nlohmann::json(nullptr)},
        {"reply", reply().text},
    };
}

TurnRecord TurnRecord::from_json(const nlohmann::json& j) {
    try {
        TurnRecord t;
        t.index = j.at("index").get<int>();
        t.utterance = j.at("utterance").get<std::string>();
        t.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& c : j.at("candidates")) t.candidates.push_back(candidate_from_json(c));
        t.selected_ordinal = j.at("selected_ordinal").get<int>();
        if (const auto& o = j.at("override_ordinal"); !o.is_null()) t.override_ordinal = o.get<int>();
        t.reply();  // validates the ordinals
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed turn record: ") + e.what());
    }
}

nlohmann::json SessionInfo::to_json() const {
    return {{"session_id", session_id},
            {"strategy", overgen::to_string(strategy)},
            {"seed", seed},
            {"evaluator", overgen::to_string(evaluator)}};
}

// ---------------------------------------------------------------------------

ChatService::ChatService(std::filesystem::path sessions_dir,
                         std::shared_ptr<const GeneratorBackend> backend, ScorerProvider scorers,
                         GenerationConfig generation)
    : dir_(std::move(sessions_dir)),
      backend_(std::move(backend)),
      scorers_(std::move(scorers)),
      generation_(std::move(generation)) {
    if (!backend_) throw ValidationError("chat service needs a generator backend");
    if (!scorers_) throw ValidationError("chat service needs a scorer provider");
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
    replay();
}

void ChatService::replay() {
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
        const auto events = read_jsonl(path);
        if (events.empty()) continue;
        auto session = std::make_shared<Session>();
        try {
            for (const auto& ev : events) {
                const auto kind = ev.at("event").get<std::string>();
                if (kind == "created") {
                    session->info.session_id = ev.at("session_id").get<std::string>();
                    session->info.strategy = parse_strategy(ev.at("strategy").get<std::string>());
                    session->info.seed = ev.at("seed").get<std::uint64_t>();
                    session->info.evaluator = parse_provenance(ev.at("evaluator").get<std::string>());
                } else if (kind == "turn") {
                    session->turns.push_back(TurnRecord::from_json(ev.at("turn")));
                } else if (kind == "override") {
                    const auto idx = ev.at("turn_index").get<std::size_t>();
                    if (idx >= session->turns.size()) throw DataError("override of a missing turn");
                    session->turns[idx].override_ordinal = ev.at("ordinal").get<int>();
                } else {
                    throw DataError("unknown event \"" + kind + "\"");
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError("corrupt session log " + path.string() + ": " + e.what());
        } catch (const Error& e) {
            throw DataError("corrupt session log " + path.string() + ": " + e.what());
        }
        const auto& id = session->info.session_id;
        if (id.empty()) throw DataError("session log " + path.string() + " lacks a created event");
        if (auto n = session_number(id)) next_id_ = std::max(next_id_, *n + 1);
        sessions_.emplace(id, std::move(session));
    }
}

void ChatService::append_event(const std::string& session_id, const nlohmann::json& event) const {
    append_line(dir_ / (session_id + ".jsonl"), event);
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& session_id) const {
    std::lock_guard lock(index_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("no session \"" + session_id + "\"");
    return it->second;
}

SessionInfo ChatService::create_session(Strategy strategy, std::uint64_t seed) {
    auto session = std::make_shared<Session>();
    session->info.strategy = strategy;
    session->info.seed = seed;
    session->info.evaluator = native_provenance(strategy);
    std::lock_guard lock(index_mutex_);
    session->info.session_id = "s-" + std::to_string(next_id_++);
    auto event = session->info.to_json();
    event["event"] = "created";
    append_event(session->info.session_id, event);
    sessions_.emplace(session->info.session_id, session);
    return session->info;
}

TurnRecord ChatService::post_turn(const std::string& session_id, const std::string& utterance) {
    auto session = find(session_id);
    if (text::is_blank(utterance)) throw ValidationError("utterance is empty");
    std::lock_guard lock(session->mutex);
    TurnRecord turn;
    turn.index = static_cast<int>(session->turns.size());
    turn.utterance = utterance;
    turn.seed = derive_seed(session->info.seed, static_cast<std::uint64_t>(turn.index));
    auto candidates = generate_candidates(*backend_, utterance, session->info.strategy, turn.seed,
                                          generation_, {true});
    const auto scorer = scorers_(session->info.evaluator);
    if (!scorer) throw Error("no scorer for " + std::string(to_string(session->info.evaluator)));
    auto selection = select_best(std::move(candidates), *scorer, utterance);
    turn.candidates = std::move(selection.candidates);
    turn.selected_ordinal = selection.selected_ordinal;
    append_event(session_id, {{"event", "turn"}, {"turn", turn.to_json()}});
    session->turns.push_back(turn);
    return turn;
}

TurnRecord ChatService::override_selection(const std::string& session_id, int turn_index,
                                           int ordinal) {
    auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    if (turn_index < 0 || static_cast<std::size_t>(turn_index) >= session->turns.size()) {
        throw NotFoundError("session " + session_id + " has no turn " + std::to_string(turn_index));
    }
    auto& turn = session->turns[static_cast<std::size_t>(turn_index)];
    const bool known = std::any_of(turn.candidates.begin(), turn.candidates.end(),
                                   [&](const Candidate& c) { return c.ordinal == ordinal; });
    if (!known) {
        throw ValidationError("ordinal " + std::to_string(ordinal) + " out of range 0.." +
                              std::to_string(turn.candidates.size() - 1));
    }
    append_event(session_id, {{"event", "override"}, {"turn_index", turn_index}, {"ordinal", ordinal}});
    turn.override_ordinal = ordinal;
    return turn;
}

nlohmann::json ChatService::transcript(const std::string& session_id) const {
    auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    auto turns = nlohmann::json::array();
    for (const auto& t : session->turns) turns.push_back(t.to_json());
    auto j = session->info.to_json();
    j["turns"] = std::move(turns);
    return j;
}

SessionInfo ChatService::session(const std::string& session_id) const {
    return find(session_id)->info;
}

std::vector<std::string> ChatService::session_ids() const {
    std::lock_guard lock(index_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, s] : sessions_) ids.push_back(id);
    return ids;
}

ScorerProvider default_scorer_provider(const AppConfig& config,
                                       std::shared_ptr<const GeneratorBackend> backend,
                                       std::uint64_t seed) {
    struct Cache {
        std::mutex mutex;
        std::map<Provenance, std::shared_ptr<const Scorer>> scorers;
    };
    auto cache = std::make_shared<Cache>();
    return [cache, config, backend = std::move(backend), seed](Provenance p) {
        std::lock_guard lock(cache->mutex);
        if (auto it = cache->scorers.find(p); it != cache->scorers.end()) return it->second;
        if (p != Provenance::DeData && p != Provenance::DaData) {
            throw ValidationError("no evaluator configured for provenance " + std::string(to_string(p)));
        }
        const auto& path = p == Provenance::DeData ? config.de_evaluator : config.da_evaluator;
        std::shared_ptr<const Scorer> scorer;
        if (path) {
            scorer = std::make_shared<TrainedEvaluator>(TrainedEvaluator::load(*path));
        } else {
            ReferenceEvaluatorOptions options;
            options.pairs = config.reference_training_pairs;
            options.rater_noise_sd = config.rater_noise_sd;
            options.training = config.evaluator_training();
            const auto strategy = p == Provenance::DeData ? Strategy::DE : Strategy::DA;
            scorer = std::make_shared<TrainedEvaluator>(
                train_reference_evaluator(*backend, strategy, seed, options));
        }
        cache->scorers.emplace(p, scorer);
        return scorer;
    };
}

// ---------------------------------------------------------------------------

JudgingBoard::JudgingBoard(std::string run_id, std::string system_a, std::string system_b,
                           std::vector<ComparisonItem> items,
                           std::optional<std::filesystem::path> log_path)
    : run_id_(std::move(run_id)),
      system_a_(std::move(system_a)),
      system_b_(std::move(system_b)),
      log_path_(std::move(log_path)) {
    if (!is_safe_id(run_id_)) throw ValidationError("invalid run id \"" + run_id_ + "\"");
    for (auto& item : items) {
        if (by_id_.contains(item.item_id)) throw DataError("duplicate item id " + item.item_id);
        by_id_.emplace(item.item_id, items_.size());
        Slotted s;
        s.item = std::move(item);
        items_.push_back(std::move(s));
    }
    if (log_path_ && std::filesystem::exists(*log_path_)) {
        for (const auto& ev : read_jsonl(*log_path_)) {
            try {
                auto it = by_id_.find(ev.at("item_id").get<std::string>());
                if (it == by_id_.end()) throw DataError("judging log names an unknown item");
                record(items_[it->second], ev.at("slot").get<int>(), ev.at("choice").get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                throw DataError("corrupt judging log: " + std::string(e.what()));
            }
        }
    }
}

std::shared_ptr<JudgingBoard> JudgingBoard::from_items_file(const std::filesystem::path& items_path,
                                           std::string run_id,
                                           std::optional<std::filesystem::path> log_path) {
    std::vector<ComparisonItem> items;
    for (const auto& j : read_jsonl(items_path)) items.push_back(comparison_item_from_json(j));
    std::string a = "A", b = "B";
    const std::string name = items_path.string();
    constexpr std::string_view kSuffix = ".items.jsonl";
    if (name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
        const std::filesystem::path summary = name.substr(0, name.size() - kSuffix.size()) + ".summary.json";
        if (std::filesystem::exists(summary)) {
            std::ifstream in(summary);
            try {
                const auto j = nlohmann::json::parse(in);
                a = j.value("system_a", a);
                b = j.value("system_b", b);
            } catch (const nlohmann::json::exception& e) {
                throw DataError("malformed summary " + summary.string() + ": " + e.what());
            }
        }
    }
    return std::make_shared<JudgingBoard>(std::move(run_id), a, b, std::move(items), std::move(log_path));
}

std::optional<nlohmann::json> JudgingBoard::next_item() {
    std::lock_guard lock(mutex_);
    for (auto& s : items_) {
        if (s.recorded == kSlots) continue;
        for (int slot = 0; slot < kSlots; ++slot) {
            if (s.issued[slot] || s.judged[slot]) continue;
            s.issued[slot] = true;
            const auto& left = s.item.swapped ? s.item.response_b : s.item.response_a;
            const auto& right = s.item.swapped ? s.item.response_a : s.item.response_b;
            return nlohmann::json{{"item_id", s.item.item_id},
                                  {"slot", slot},
                                  {"context", s.item.context},
                                  {"response_left", left},
                                  {"response_right", right}};
        }
    }
    return std::nullopt;
}

nlohmann::json JudgingBoard::record(Slotted& s, int slot, const std::string& choice) {
    if (slot < 0 || slot >= kSlots) {
        throw ValidationError("slot must be 0.." + std::to_string(kSlots - 1));
    }
    Judgment j;
    if (choice == "left") {
        j = s.item.swapped ? Judgment::B : Judgment::A;
    } else if (choice == "right") {
        j = s.item.swapped ? Judgment::A : Judgment::B;
    } else if (choice == "even") {
        j = Judgment::Even;
    } else {
        throw ValidationError("judgment must be \"left\", \"right\" or \"even\"");
    }
    if (s.recorded == kSlots) throw ConflictError("item " + s.item.item_id + " is already finalized");
    if (s.judged[slot]) {
        throw ConflictError("slot " + std::to_string(slot) + " of item " + s.item.item_id +
                            " was already judged");
    }
    s.judged[slot] = j;
    s.issued[slot] = true;
    ++s.recorded;
    nlohmann::json out = {{"item_id", s.item.item_id}, {"slot", slot}, {"judgments_recorded", s.recorded}};
    if (s.recorded == kSlots) {
        for (int k = 0; k < kSlots; ++k) s.item.judgments[k] = *s.judged[k];
        s.item.outcome = majority_vote(s.item.judgments);
        out["outcome"] = to_string(s.item.outcome);
    }
    return out;
}

nlohmann::json JudgingBoard::submit(const std::string& item_id, int slot, const std::string& choice) {
    std::lock_guard lock(mutex_);
    auto it = by_id_.find(item_id);
    if (it == by_id_.end()) throw NotFoundError("no judging item \"" + item_id + "\"");
    auto out = record(items_[it->second], slot, choice);
    if (log_path_) {
        std::error_code ec;
        std::filesystem::create_directories(log_path_->parent_path(), ec);
        append_line(*log_path_, {{"item_id", item_id}, {"slot", slot}, {"choice", choice}});
    }
    return out;
}

ComparisonReport JudgingBoard::report() const {
    std::lock_guard lock(mutex_);
    ComparisonReport r;
    r.system_a = system_a_;
    r.system_b = system_b_;
    for (const auto& s : items_) {
        if (s.recorded != kSlots) continue;
        r.items.push_back(s.item);
        switch (s.item.outcome) {
            case Outcome::Win: ++r.win_count; break;
            case Outcome::Lose: ++r.lose_count; break;
            case Outcome::Even: ++r.even_count; break;
        }
    }
    return r;
}

void ReportStore::attach(std::shared_ptr<JudgingBoard> board) {
    if (board) boards_[board->run_id()] = std::move(board);
}

nlohmann::json ReportStore::get(const std::string& run_id) const {
    if (!is_safe_id(run_id)) throw ValidationError("invalid run id \"" + run_id + "\"");
    if (auto it = boards_.find(run_id); it != boards_.end()) {
        const auto report = it->second->report();
        auto j = report.summary_json();
        j["run_id"] = run_id;
        j["source"] = "judging";
        return j;
    }
    const auto path = dir_ / (run_id + ".summary.json");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("no report \"" + run_id + "\"");
    try {
        auto j = nlohmann::json::parse(in);
        j["run_id"] = run_id;
        j["source"] = "file";
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed report " + path.string() + ": " + e.what());
    }
}

}  // namespace overgen::app
