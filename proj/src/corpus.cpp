// SPDX-License-Identifier: Apache-2.0

#include "overgen/corpus.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "overgen/error.hpp"
#include "overgen/random.hpp"
#include "overgen/text.hpp"

namespace overgen {

namespace {

constexpr std::array<std::string_view, 8> kActNames = {
    "advice", "emotion", "opinion", "inform", "schedule", "question", "agree", "general",
};

constexpr std::array<std::string_view, 3> kSourceNames = {
    "human_corpus", "generator_de", "generator_da",
};

const std::string& require_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("missing field ") + key);
    if (!it->is_string()) throw DataError(std::string("field ") + key + " must be a string");
    return it->get_ref<const std::string&>();
}

}  // namespace

std::string_view to_string(DialogueAct da) { return kActNames[static_cast<std::size_t>(da)]; }

std::optional<DialogueAct> try_parse_dialogue_act(std::string_view name) {
    for (std::size_t i = 0; i < kActNames.size(); ++i) {
        if (kActNames[i] == name) return static_cast<DialogueAct>(i);
    }
    return std::nullopt;
}

DialogueAct parse_dialogue_act(std::string_view name) {
    if (auto da = try_parse_dialogue_act(name)) return *da;
    throw DataError("unknown dialogue act \"" + std::string(name) + "\"");
}

std::string_view to_string(PairSource source) {
    return kSourceNames[static_cast<std::size_t>(source)];
}

PairSource parse_pair_source(std::string_view name) {
    for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
        if (kSourceNames[i] == name) return static_cast<PairSource>(i);
    }
    throw DataError("unknown source \"" + std::string(name) + "\"");
}

void validate(const UtteranceResponsePair& pair) {
    if (pair.id.empty()) throw ValidationError("empty id");
    if (text::is_blank(pair.context_text)) throw ValidationError("empty context_text");
    if (text::is_blank(pair.response_text)) throw ValidationError("empty response_text");
    if (pair.da_labels.contains(DialogueAct::General)) {
        throw ValidationError("da_labels may not contain general");
    }
}

nlohmann::json to_json(const UtteranceResponsePair& pair) {
    nlohmann::json j = pair.extra.is_object() ? pair.extra : nlohmann::json::object();
    j["id"] = pair.id;
    j["context_text"] = pair.context_text;
    j["response_text"] = pair.response_text;
    j["source"] = to_string(pair.source);
    auto labels = nlohmann::json::array();
    for (auto da : pair.da_labels) labels.push_back(to_string(da));
    j["da_labels"] = std::move(labels);
    return j;
}

UtteranceResponsePair pair_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("record is not an object");
    UtteranceResponsePair pair;
    pair.id = require_string(j, "id");
    pair.context_text = require_string(j, "context_text");
    pair.response_text = require_string(j, "response_text");
    pair.source = parse_pair_source(require_string(j, "source"));
    if (auto it = j.find("da_labels"); it != j.end()) {
        if (!it->is_array()) throw DataError("field da_labels must be an array");
        for (const auto& label : *it) {
            if (!label.is_string()) throw DataError("da_labels entries must be strings");
            pair.da_labels.insert(parse_dialogue_act(label.get<std::string>()));
        }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        if (key == "id" || key == "context_text" || key == "response_text" || key == "source" ||
            key == "da_labels") {
            continue;
        }
        pair.extra[key] = it.value();
    }
    validate(pair);
    return pair;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::is_blank(line)) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("malformed JSON at line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void write_jsonl(std::span<const nlohmann::json> records, const std::filesystem::path& path) {
    std::string buffer;
    for (const auto& r : records) {
        buffer += r.dump();
        buffer.push_back('\n');
    }
    write_text_file(path, buffer);
}

std::vector<UtteranceResponsePair> load_pairs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<UtteranceResponsePair> pairs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::is_blank(line)) continue;
        const auto where = " at line " + std::to_string(line_no);
        UtteranceResponsePair pair;
        try {
            pair = pair_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed record" + where + ": " + e.what());
        } catch (const ValidationError& e) {
            throw DataError(e.what() + where);
        } catch (const DataError& e) {
            throw DataError(e.what() + where);
        }
        if (!seen.insert(pair.id).second) {
            throw DataError("duplicate id \"" + pair.id + "\"" + where);
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

void write_pairs(std::span<const UtteranceResponsePair> pairs, const std::filesystem::path& path) {
    std::vector<nlohmann::json> records;
    records.reserve(pairs.size());
    for (const auto& p : pairs) {
        validate(p);
        records.push_back(to_json(p));
    }
    write_jsonl(records, path);
}

DatasetSplit split_dataset(std::span<const UtteranceResponsePair> pairs, SplitFractions fractions,
                           std::uint64_t seed) {
    if (pairs.empty()) throw ValidationError("cannot split an empty dataset");
    if (fractions.train < 0 || fractions.dev < 0 || fractions.test < 0) {
        throw ValidationError("split fractions must be non-negative");
    }
    if (std::abs(fractions.train + fractions.dev + fractions.test - 1.0) > 1e-9) {
        throw ValidationError("split fractions must sum to 1");
    }
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto n = static_cast<double>(pairs.size());
    // A small epsilon keeps 0.1 * 10 from flooring to 0.
    const auto n_dev = static_cast<std::size_t>(std::floor(n * fractions.dev + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(n * fractions.test + 1e-9));

    DatasetSplit split;
    split.seed = seed;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& p = pairs[order[i]];
        if (i < n_test) {
            split.test.push_back(p);
        } else if (i < n_test + n_dev) {
            split.dev.push_back(p);
        } else {
            split.train.push_back(p);
        }
    }
    return split;
}

}  // namespace overgen
