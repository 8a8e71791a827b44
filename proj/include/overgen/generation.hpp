// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "overgen/corpus.hpp"

namespace overgen {

struct Greedy {
    bool operator==(const Greedy&) const = default;
};

struct Beam {
    int width = 5;
    bool operator==(const Beam&) const = default;
};

struct TopKSampling {
    int k = 50;
    int draw_index = 0;
    std::uint64_t seed = 0;
    bool operator==(const TopKSampling&) const = default;
};

using DecodingScheme = std::variant<Greedy, Beam, TopKSampling>;

/// "greedy", "beam" or "top_k".
std::string_view scheme_tag(const DecodingScheme& scheme);
/// Adapter wire form: {"type", "width"?, "k"?, "draw_index"?, "seed"}.
nlohmann::json scheme_to_json(const DecodingScheme& scheme, std::uint64_t seed);
DecodingScheme scheme_from_json(const nlohmann::json& j);

enum class Strategy : std::uint8_t { DE, DA, DADE };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

/// Acts a DA or DADE candidate set is conditioned on, in ordinal order.
inline constexpr std::array<DialogueAct, 7> kGenerationActs = {
    DialogueAct::General, DialogueAct::Advice, DialogueAct::Opinion, DialogueAct::Inform,
    DialogueAct::Schedule, DialogueAct::Question, DialogueAct::Agree,
};

struct CandidateSpec {
    DecodingScheme scheme;
    std::optional<DialogueAct> da;  // nullopt: no prompt conditioning

    bool operator==(const CandidateSpec&) const = default;
};

/// Human-readable provenance: "greedy", "beam", "sample #3",
/// "advice / greedy", "advice / sample #3".
std::string spec_label(const CandidateSpec& spec);

struct Candidate {
    std::string text;
    CandidateSpec spec;
    int ordinal = 0;
    std::optional<double> score;

    bool operator==(const Candidate&) const = default;
};

nlohmann::json to_json(const Candidate& c);
Candidate candidate_from_json(const nlohmann::json& j);

/// Prompt surface forms. `conditioned` must contain "{da}".
struct PromptTemplates {
    std::string general = "Return a response: ";
    std::string conditioned = "Return a response of {da} to the interlocutor: ";
    std::map<DialogueAct, std::string> da_phrases = {
        {DialogueAct::Advice, "advice"},     {DialogueAct::Emotion, "emotion"},
        {DialogueAct::Opinion, "opinion"},   {DialogueAct::Inform, "information"},
        {DialogueAct::Schedule, "schedule"}, {DialogueAct::Question, "question"},
        {DialogueAct::Agree, "agreement"},
    };
};

struct GenerationConfig {
    int beam_width = 5;
    int top_k = 50;
    int sampling_draws = 5;
    PromptTemplates prompts;
};

std::vector<CandidateSpec> build_candidate_specs(Strategy strategy, std::uint64_t base_seed,
                                                 const GenerationConfig& config = {});

std::string format_da_prompt(DialogueAct da, std::string_view utterance,
                             const PromptTemplates& templates = {});

/// Text-in/text-out sequence-to-sequence model.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string generate(std::string_view input_text, const DecodingScheme& scheme,
                                 std::uint64_t seed) const = 0;
    /// Whether generate() may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }
};

struct GenerateOptions {
    bool parallel = false;
};

std::vector<Candidate> generate_candidates(const GeneratorBackend& backend,
                                           std::string_view utterance, Strategy strategy,
                                           std::uint64_t seed, const GenerationConfig& config = {},
                                           GenerateOptions options = {});

/// Deterministic stand-in for a trained generator.
///
/// The output is `template + " (" + digest + ")"`, where `digest` is the first
/// six hex digits of fnv1a64(input_text) and `template` is drawn from a fixed
/// bank of 64 responses, each with a latent quality in [1, 5].
///
/// Template index:
///   key(tag) = hash_values({fnv1a64(input_text), fnv1a64(tag), seed}) for
///   greedy ("greedy") and beam ("beam"); sampling adds draw_index:
///   hash_values({fnv1a64(input_text), fnv1a64("top_k"), draw_index, seed}).
///   greedy:   key("greedy") % 64
///   beam:     (greedy_index + 1 + key("beam") % 63) % 64, never the greedy template
///   sampling: key % 64
/// The beam width and k do not enter the selection.
class ReferenceBackend final : public GeneratorBackend {
public:
    static constexpr std::size_t kBankSize = 64;

    struct Template {
        std::string_view text;
        double quality;
    };

    std::string generate(std::string_view input_text, const DecodingScheme& scheme,
                         std::uint64_t seed) const override;
    bool concurrent_safe() const override { return true; }

    std::size_t template_index(std::string_view input_text, const DecodingScheme& scheme,
                               std::uint64_t seed) const;

    /// Latent quality of a text this backend produced; nullopt otherwise.
    static std::optional<double> latent_quality(std::string_view response_text);
    static const std::array<Template, kBankSize>& bank();
};

std::string reference_generate(std::string_view input_text, const DecodingScheme& scheme,
                               std::uint64_t seed);

/// Adapter for an out-of-process generator. POSTs
/// {"input": str, "scheme": {...}} to `path` and expects {"text": str}.
class HttpGeneratorBackend final : public GeneratorBackend {
public:
    HttpGeneratorBackend(std::string host, int port, std::string path = "/generate");

    std::string generate(std::string_view input_text, const DecodingScheme& scheme,
                         std::uint64_t seed) const override;
    bool concurrent_safe() const override { return true; }

private:
    std::string host_;
    int port_;
    std::string path_;
};

}  // namespace overgen
