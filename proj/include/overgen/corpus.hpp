// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace overgen {

enum class DialogueAct : std::uint8_t {
    Advice,
    Emotion,
    Opinion,
    Inform,
    Schedule,
    Question,
    Agree,
    General,  // generation prompt condition only, never an annotation label
};

using DialogueActSet = std::set<DialogueAct>;

/// The seven acts a crowdworker may assign.
inline constexpr std::array<DialogueAct, 7> kAnnotatableActs = {
    DialogueAct::Advice, DialogueAct::Emotion, DialogueAct::Opinion, DialogueAct::Inform,
    DialogueAct::Schedule, DialogueAct::Question, DialogueAct::Agree,
};

std::string_view to_string(DialogueAct da);
DialogueAct parse_dialogue_act(std::string_view name);
std::optional<DialogueAct> try_parse_dialogue_act(std::string_view name);

enum class PairSource : std::uint8_t { HumanCorpus, GeneratorDE, GeneratorDA };

std::string_view to_string(PairSource source);
PairSource parse_pair_source(std::string_view name);

struct UtteranceResponsePair {
    std::string id;
    std::string context_text;
    std::string response_text;
    PairSource source = PairSource::HumanCorpus;
    DialogueActSet da_labels;
    // Fields the record carried that this model does not know about.
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const UtteranceResponsePair&) const = default;
};

/// Throws ValidationError on a blank text field or a General label.
void validate(const UtteranceResponsePair& pair);

nlohmann::json to_json(const UtteranceResponsePair& pair);
UtteranceResponsePair pair_from_json(const nlohmann::json& j);

std::vector<UtteranceResponsePair> load_pairs(const std::filesystem::path& path);
void write_pairs(std::span<const UtteranceResponsePair> pairs, const std::filesystem::path& path);

struct SplitFractions {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    std::vector<UtteranceResponsePair> train;
    std::vector<UtteranceResponsePair> dev;
    std::vector<UtteranceResponsePair> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then floor(n * fraction) for dev and test; train takes
/// the remainder.
DatasetSplit split_dataset(std::span<const UtteranceResponsePair> pairs, SplitFractions fractions,
                           std::uint64_t seed);

// Line-oriented JSON helpers shared by the other record types.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(std::span<const nlohmann::json> records, const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace overgen
