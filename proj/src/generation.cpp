// SPDX-License-Identifier: Apache-2.0

#include "overgen/generation.hpp"

#include <future>
#include <unordered_map>

#include <httplib.h>

#include "overgen/error.hpp"
#include "overgen/hash.hpp"
#include "overgen/text.hpp"

namespace overgen {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

constexpr std::array<ReferenceBackend::Template, ReferenceBackend::kBankSize> kBank = {{
    {"Yes.", 1.2},
    {"I see.", 1.3},
    {"Okay.", 1.1},
    {"That's right.", 1.5},
    {"Hmm.", 1.0},
    {"Sure.", 1.4},
    {"I don't know.", 1.2},
    {"Yeah, yeah.", 1.3},
    {"Really.", 1.6},
    {"Same.", 1.5},
    {"Thanks.", 1.8},
    {"Good.", 1.7},
    {"Is that so.", 1.9},
    {"Well, maybe.", 2.0},
    {"No idea, sorry.", 1.6},
    {"That happens.", 2.1},
    {"I guess so.", 2.0},
    {"Right, right.", 1.4},
    {"Oh, okay then.", 2.2},
    {"Fair enough.", 2.3},
    {"Sounds fine to me.", 2.5},
    {"That is interesting.", 2.4},
    {"I think so too.", 2.8},
    {"Nice, good for you.", 2.7},
    {"That sounds a bit tough.", 2.9},
    {"I had something similar once.", 3.0},
    {"You should get some rest.", 3.1},
    {"That must have been fun.", 3.2},
    {"I agree, it is really nice.", 3.0},
    {"I want to try that next week.", 3.3},
    {"What did you think of it?", 3.4},
    {"Are you doing okay now?", 3.3},
    {"Good luck, I'm rooting for you.", 3.5},
    {"I love that kind of thing too.", 3.4},
    {"Let me know how it turns out.", 3.2},
    {"That reminds me of my summer trip.", 3.6},
    {"Please take care of yourself today.", 3.5},
    {"Wow, how long did that take you?", 3.7},
    {"I have been wanting to go there myself.", 3.6},
    {"Honestly I think you made the right call.", 3.8},
    {"Which one was your favourite part?", 3.9},
    {"I'm planning to watch it this weekend too!", 3.8},
    {"That tea shop near the station is great, have you been?", 4.0},
    {"Try reading the first chapter tonight, then start the assignment.", 4.1},
    {"It tastes easy to drink and feels a little luxurious for the price.", 4.2},
    {"Ha, the same thing happened to me and I laughed for days.", 4.0},
    {"That sounds amazing, what made you pick that place?", 4.3},
    {"If the battery keeps dying, a replacement usually fixes it.", 4.1},
    {"I totally agree, the ending surprised me as well!", 4.2},
    {"You worked so hard, you deserve a fun weekend.", 4.4},
    {"Oh nice, I went last spring and the cherry blossoms were stunning.", 4.5},
    {"Tell me more, I'd love to hear how you got into it.", 4.6},
    {"Congratulations! How are you going to celebrate?", 4.5},
    {"I know that feeling, want to grab coffee and talk about it?", 4.7},
    {"That's such a good idea, I might borrow it for my own project.", 4.4},
    {"Honestly that made my day, thanks for sharing it!", 4.6},
    {"Have you tried the new ramen place? Their broth is incredible.", 4.8},
    {"I'm so glad it worked out, you must be relieved.", 4.3},
    {"We should go together sometime, I know a quiet spot nearby.", 4.7},
    {"That photo looks wonderful, where exactly was it taken?", 4.9},
    {"Your story made me want to pick up painting again.", 4.8},
    {"What a lovely surprise, did they know you were coming?", 4.6},
    {"Let's make a plan for it, I'm free on Saturday afternoon.", 4.9},
    {"I'd recommend starting small, it gets easier every day.", 5.0},
}};

const std::unordered_map<std::string_view, double>& quality_index() {
    static const auto index = [] {
        std::unordered_map<std::string_view, double> m;
        for (const auto& t : kBank) m.emplace(t.text, t.quality);
        return m;
    }();
    return index;
}

std::uint64_t selection_key(std::string_view input, std::string_view tag, std::uint64_t seed) {
    return hash_values({fnv1a64(input), fnv1a64(tag), seed});
}

std::string da_tag(const std::optional<DialogueAct>& da) {
    return da ? std::string(to_string(*da)) : std::string("none");
}

}  // namespace

std::string_view scheme_tag(const DecodingScheme& scheme) {
    return std::visit(Overloaded{
                          [](const Greedy&) { return std::string_view("greedy"); },
                          [](const Beam&) { return std::string_view("beam"); },
                          [](const TopKSampling&) { return std::string_view("top_k"); },
                      },
                      scheme);
}

nlohmann::json scheme_to_json(const DecodingScheme& scheme, std::uint64_t seed) {
    nlohmann::json j = {{"type", scheme_tag(scheme)}};
    std::visit(Overloaded{
                   [&](const Greedy&) { j["seed"] = seed; },
                   [&](const Beam& b) {
                       j["width"] = b.width;
                       j["seed"] = seed;
                   },
                   [&](const TopKSampling& s) {
                       j["k"] = s.k;
                       j["draw_index"] = s.draw_index;
                       j["seed"] = s.seed;
                   },
               },
               scheme);
    return j;
}

DecodingScheme scheme_from_json(const nlohmann::json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        if (type == "greedy") return Greedy{};
        if (type == "beam") return Beam{j.value("width", 5)};
        if (type == "top_k") {
            return TopKSampling{j.value("k", 50), j.value("draw_index", 0),
                                j.value<std::uint64_t>("seed", 0)};
        }
        throw DataError("unknown decoding scheme \"" + type + "\"");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed decoding scheme: ") + e.what());
    }
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::DE: return "de";
        case Strategy::DA: return "da";
        case Strategy::DADE: return "dade";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "de" || name == "DE") return Strategy::DE;
    if (name == "da" || name == "DA") return Strategy::DA;
    if (name == "dade" || name == "DADE") return Strategy::DADE;
    throw ValidationError("unknown strategy \"" + std::string(name) + "\"");
}

std::string spec_label(const CandidateSpec& spec) {
    std::string scheme = std::visit(
        Overloaded{
            [](const Greedy&) { return std::string("greedy"); },
            [](const Beam&) { return std::string("beam"); },
            [](const TopKSampling& s) { return "sample #" + std::to_string(s.draw_index + 1); },
        },
        spec.scheme);
    if (!spec.da) return scheme;
    return std::string(to_string(*spec.da)) + " / " + scheme;
}

nlohmann::json to_json(const Candidate& c) {
    nlohmann::json j = {
        {"ordinal", c.ordinal},
        {"text", c.text},
        {"scheme", scheme_to_json(c.spec.scheme, 0)},
        {"da", c.spec.da ? nlohmann::json(to_string(*c.spec.da)) : nlohmann::json(nullptr)},
        {"label", spec_label(c.spec)},
        {"score", c.score ? nlohmann::json(*c.score) : nlohmann::json(nullptr)},
    };
    // Greedy and beam carry no seed of their own.
    if (!std::holds_alternative<TopKSampling>(c.spec.scheme)) j["scheme"].erase("seed");
    return j;
}

Candidate candidate_from_json(const nlohmann::json& j) {
    try {
        Candidate c;
        c.ordinal = j.at("ordinal").get<int>();
        c.text = j.at("text").get<std::string>();
        c.spec.scheme = scheme_from_json(j.at("scheme"));
        if (const auto& da = j.at("da"); !da.is_null()) {
            c.spec.da = parse_dialogue_act(da.get<std::string>());
        }
        if (auto it = j.find("score"); it != j.end() && !it->is_null()) c.score = it->get<double>();
        if (text::is_blank(c.text)) throw DataError("candidate text is empty");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed candidate: ") + e.what());
    }
}

std::vector<CandidateSpec> build_candidate_specs(Strategy strategy, std::uint64_t base_seed,
                                                 const GenerationConfig& config) {
    std::vector<DecodingScheme> schemes;
    schemes.emplace_back(Greedy{});
    schemes.emplace_back(Beam{config.beam_width});
    for (int draw = 0; draw < config.sampling_draws; ++draw) {
        schemes.emplace_back(TopKSampling{config.top_k, draw,
                                          derive_seed(base_seed, static_cast<std::uint64_t>(draw))});
    }

    std::vector<CandidateSpec> specs;
    switch (strategy) {
        case Strategy::DE:
            for (const auto& s : schemes) specs.push_back({s, std::nullopt});
            break;
        case Strategy::DA:
            for (auto da : kGenerationActs) specs.push_back({Greedy{}, da});
            break;
        case Strategy::DADE:
            for (auto da : kGenerationActs) {
                for (const auto& s : schemes) specs.push_back({s, da});
            }
            break;
    }
    return specs;
}

std::string format_da_prompt(DialogueAct da, std::string_view utterance,
                             const PromptTemplates& templates) {
    if (text::is_blank(utterance)) throw ValidationError("empty utterance");
    if (da == DialogueAct::General) return templates.general + std::string(utterance);
    auto it = templates.da_phrases.find(da);
    if (it == templates.da_phrases.end()) {
        throw ValidationError("no prompt phrase configured for " + std::string(to_string(da)));
    }
    std::string prompt = templates.conditioned;
    const auto pos = prompt.find("{da}");
    if (pos == std::string::npos) throw ValidationError("conditioned prompt lacks {da}");
    prompt.replace(pos, 4, it->second);
    return prompt + std::string(utterance);
}

std::vector<Candidate> generate_candidates(const GeneratorBackend& backend,
                                           std::string_view utterance, Strategy strategy,
                                           std::uint64_t seed, const GenerationConfig& config,
                                           GenerateOptions options) {
    if (text::is_blank(utterance)) throw ValidationError("empty utterance");
    const auto specs = build_candidate_specs(strategy, seed, config);

    auto run_one = [&](std::size_t i) {
        const auto& spec = specs[i];
        const std::string input =
            spec.da ? format_da_prompt(*spec.da, utterance, config.prompts) : std::string(utterance);
        std::string out = backend.generate(input, spec.scheme, seed);
        if (text::is_blank(out)) {
            throw DataError("backend returned empty text for candidate " + std::to_string(i) +
                            " (" + spec_label(spec) + ", da=" + da_tag(spec.da) + ")");
        }
        return Candidate{std::move(out), spec, static_cast<int>(i), std::nullopt};
    };

    std::vector<Candidate> candidates;
    candidates.reserve(specs.size());
    if (options.parallel && backend.concurrent_safe() && specs.size() > 1) {
        std::vector<std::future<Candidate>> pending;
        pending.reserve(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i) {
            pending.push_back(std::async(std::launch::async, run_one, i));
        }
        for (auto& f : pending) candidates.push_back(f.get());
    } else {
        for (std::size_t i = 0; i < specs.size(); ++i) candidates.push_back(run_one(i));
    }
    return candidates;
}

const std::array<ReferenceBackend::Template, ReferenceBackend::kBankSize>& ReferenceBackend::bank() {
    return kBank;
}

std::size_t ReferenceBackend::template_index(std::string_view input_text,
                                             const DecodingScheme& scheme,
                                             std::uint64_t seed) const {
    const std::size_t greedy = selection_key(input_text, "greedy", seed) % kBankSize;
    return std::visit(
        Overloaded{
            [&](const Greedy&) { return greedy; },
            [&](const Beam&) {
                const auto offset = 1 + selection_key(input_text, "beam", seed) % (kBankSize - 1);
                return (greedy + offset) % kBankSize;
            },
            [&](const TopKSampling& s) {
                const auto key = hash_values({fnv1a64(input_text), fnv1a64("top_k"),
                                              static_cast<std::uint64_t>(s.draw_index), s.seed});
                return static_cast<std::size_t>(key % kBankSize);
            },
        },
        scheme);
}

std::string ReferenceBackend::generate(std::string_view input_text, const DecodingScheme& scheme,
                                       std::uint64_t seed) const {
    if (text::is_blank(input_text)) throw ValidationError("empty input_text");
    const auto& t = kBank[template_index(input_text, scheme, seed)];
    const auto digest = text::to_hex(fnv1a64(input_text) >> 40, 6);
    return std::string(t.text) + " (" + digest + ")";
}

std::optional<double> ReferenceBackend::latent_quality(std::string_view response_text) {
    // Strip the " (xxxxxx)" digest suffix.
    constexpr std::size_t kSuffix = 9;
    if (response_text.size() <= kSuffix || response_text.back() != ')') return std::nullopt;
    const auto body = response_text.substr(0, response_text.size() - kSuffix);
    const auto& index = quality_index();
    auto it = index.find(body);
    if (it == index.end()) return std::nullopt;
    return it->second;
}

std::string reference_generate(std::string_view input_text, const DecodingScheme& scheme,
                               std::uint64_t seed) {
    return ReferenceBackend{}.generate(input_text, scheme, seed);
}

HttpGeneratorBackend::HttpGeneratorBackend(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

std::string HttpGeneratorBackend::generate(std::string_view input_text,
                                           const DecodingScheme& scheme,
                                           std::uint64_t seed) const {
    httplib::Client client(host_, port_);
    client.set_read_timeout(60, 0);
    const nlohmann::json body = {{"input", input_text}, {"scheme", scheme_to_json(scheme, seed)}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) {
        throw IoError("generator backend unreachable at " + host_ + ":" + std::to_string(port_));
    }
    if (res->status != 200) {
        throw DataError("generator backend returned HTTP " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed generator backend reply: ") + e.what());
    }
}

}  // namespace overgen
