// SPDX-License-Identifier: Apache-2.0

#include "overgen/daclassify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "overgen/error.hpp"
#include "overgen/hash.hpp"
#include "overgen/random.hpp"
#include "overgen/text.hpp"

namespace overgen {

namespace {

constexpr std::string_view kFormatTag = "overgen-da-classifier";

std::string title(DialogueAct da) {
    std::string s(to_string(da));
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string two_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

BinaryDAClassifier::BinaryDAClassifier(DialogueAct da, FeatureConfig config,
                                       std::vector<double> weights, double bias, double lambda,
                                       double threshold)
    : da_(da),
      config_(config),
      weights_(std::move(weights)),
      bias_(bias),
      lambda_(lambda),
      threshold_(0.5) {
    if (da_ == DialogueAct::General) throw ValidationError("no classifier exists for general");
    validate(config_);
    if (weights_.size() != config_.dim) throw ValidationError("classifier dimension mismatch");
    if (!std::isfinite(bias_) ||
        !std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); })) {
        throw ValidationError("classifier parameters must be finite");
    }
    set_threshold(threshold);
}

void BinaryDAClassifier::set_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
    threshold_ = threshold;
}

double BinaryDAClassifier::probability(std::string_view response) const {
    const auto x = featurize_response(response, config_);
    return sigmoid(x.dot(weights_) + bias_);
}

nlohmann::json BinaryDAClassifier::to_json() const {
    return {
        {"format", kFormatTag},  {"version", kFormatVersion},
        {"da", to_string(da_)},  {"feature_config", overgen::to_json(config_)},
        {"weights", weights_},   {"bias", bias_},
        {"lambda", lambda_},     {"threshold", threshold_},
    };
}

BinaryDAClassifier BinaryDAClassifier::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kFormatTag) {
            throw DataError("not a DA classifier file");
        }
        if (const int v = j.at("version").get<int>(); v != kFormatVersion) {
            throw DataError("unsupported DA classifier format version " + std::to_string(v));
        }
        return BinaryDAClassifier(parse_dialogue_act(j.at("da").get<std::string>()),
                                  feature_config_from_json(j.at("feature_config")),
                                  j.at("weights").get<std::vector<double>>(),
                                  j.at("bias").get<double>(), j.at("lambda").get<double>(),
                                  j.at("threshold").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed DA classifier file: ") + e.what());
    }
}

void BinaryDAClassifier::save(const std::filesystem::path& path) const {
    write_text_file(path, to_json().dump() + "\n");
}

BinaryDAClassifier BinaryDAClassifier::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed DA classifier file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

BinaryDAClassifier train_da_classifier(std::span<const LabeledResponse> labeled, DialogueAct da,
                                       const ClassifierTraining& options, std::uint64_t seed) {
    const auto positives = std::count_if(labeled.begin(), labeled.end(),
                                         [](const LabeledResponse& l) { return l.is_da; });
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labeled.size())) {
        throw ValidationError("training data for " + std::string(to_string(da)) +
                              " needs both positive and negative examples");
    }
    std::vector<SparseFeatures> xs;
    std::vector<double> ys;
    xs.reserve(labeled.size());
    ys.reserve(labeled.size());
    for (const auto& l : labeled) {
        xs.push_back(featurize_response(l.response_text, options.features));
        ys.push_back(l.is_da ? 1.0 : 0.0);
    }
    auto model = fit_linear(LossKind::Logistic, xs, ys, options.features.dim, options.lambda, seed,
                            options.optimizer);
    return BinaryDAClassifier(da, options.features, std::move(model.weights), model.bias,
                              options.lambda, options.threshold);
}

double f1_score(double precision, double recall) {
    if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0)) {
        throw ValidationError("precision and recall must lie in [0, 1]");
    }
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<int> stratified_folds(std::span<const LabeledResponse> labeled, int k,
                                  std::uint64_t seed) {
    if (k < 2) throw ValidationError("k must be at least 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labeled.size(); ++i) (labeled[i].is_da ? pos : neg).push_back(i);
    Rng rng(seed);
    shuffle(pos, rng);
    shuffle(neg, rng);
    std::vector<int> fold(labeled.size(), 0);
    std::size_t dealt = 0;
    for (auto i : pos) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
    for (auto i : neg) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
    return fold;
}

CVReport cross_validate(std::span<const LabeledResponse> labeled, DialogueAct da, int k,
                        std::uint64_t seed, const ClassifierTraining& options) {
    const auto fold = stratified_folds(labeled, k, seed);
    CVReport report;
    report.da = da;
    report.seed = seed;
    for (int f = 0; f < k; ++f) {
        std::vector<LabeledResponse> train, held;
        for (std::size_t i = 0; i < labeled.size(); ++i) {
            (fold[i] == f ? held : train).push_back(labeled[i]);
        }
        const bool has_pos = std::any_of(train.begin(), train.end(), [](auto& l) { return l.is_da; });
        const bool has_neg = std::any_of(train.begin(), train.end(), [](auto& l) { return !l.is_da; });
        if (!has_pos || !has_neg) {
            throw ValidationError("fold " + std::to_string(f) +
                                  " has single-class training data; try a different seed or k");
        }
        const auto clf = train_da_classifier(train, da, options, derive_seed(seed, f));
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& l : held) {
            const bool p = clf.predict(l.response_text);
            if (p && l.is_da) ++tp;
            if (p && !l.is_da) ++fp;
            if (!p && l.is_da) ++fn;
        }
        FoldMetrics m;
        m.size = held.size();
        m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.f1 = f1_score(m.precision, m.recall);
        report.folds.push_back(m);
    }
    for (const auto& m : report.folds) {
        report.precision += m.precision / k;
        report.recall += m.recall / k;
        report.f1 += m.f1 / k;
    }
    return report;
}

std::string render_cv_table(std::span<const CVReport> reports) {
    std::ostringstream out;
    out << "Dialogue Act | Precision | Recall | F1\n";
    for (const auto& r : reports) {
        std::string name = title(r.da);
        name.resize(std::max<std::size_t>(name.size(), 12), ' ');
        out << name << " | " << two_decimals(r.precision) << "      | " << two_decimals(r.recall)
            << "   | " << two_decimals(r.f1) << '\n';
    }
    return out.str();
}

std::string AugmentationResult::render_counts() const {
    std::ostringstream out;
    out << "Dialogue Act | Amount\n";
    for (const auto& [da, n] : counts) {
        std::string name = title(da);
        name.resize(std::max<std::size_t>(name.size(), 12), ' ');
        out << name << " | " << text::with_thousands(n) << '\n';
    }
    return out.str();
}

AugmentationResult augment_corpus(std::span<const BinaryDAClassifier> classifiers,
                                  std::span<const UtteranceResponsePair> unlabeled,
                                  std::span<const DialogueAct> acts, const PromptTemplates& prompts,
                                  int shards) {
    std::vector<const BinaryDAClassifier*> selected;
    for (auto da : acts) {
        auto it = std::find_if(classifiers.begin(), classifiers.end(),
                               [da](const BinaryDAClassifier& c) { return c.da() == da; });
        if (it == classifiers.end()) {
            throw ValidationError("missing classifier for " + std::string(to_string(da)));
        }
        selected.push_back(&*it);
    }

    // Per-input label sets; shards only partition the work.
    std::vector<DialogueActSet> labels(unlabeled.size());
    auto label_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (const auto* clf : selected) {
                if (clf->predict(unlabeled[i].response_text)) labels[i].insert(clf->da());
            }
        }
    };
    shards = std::max(1, shards);
    if (shards == 1 || unlabeled.size() < 2) {
        label_range(0, unlabeled.size());
    } else {
        std::vector<std::future<void>> jobs;
        const std::size_t chunk = (unlabeled.size() + shards - 1) / static_cast<std::size_t>(shards);
        for (std::size_t b = 0; b < unlabeled.size(); b += chunk) {
            jobs.push_back(std::async(std::launch::async, label_range, b,
                                      std::min(unlabeled.size(), b + chunk)));
        }
        for (auto& j : jobs) j.get();
    }

    AugmentationResult result;
    for (auto da : acts) result.counts[da] = 0;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
        if (labels[i].empty()) continue;
        auto pair = unlabeled[i];
        pair.da_labels = labels[i];
        for (auto da : labels[i]) {
            UtteranceResponsePair prompt_pair = pair;
            prompt_pair.id = pair.id + "#" + std::string(to_string(da));
            prompt_pair.context_text = format_da_prompt(da, pair.context_text, prompts);
            prompt_pair.da_labels = {da};
            prompt_pair.extra = nlohmann::json::object();
            result.prompt_pairs.push_back(std::move(prompt_pair));
            ++result.counts[da];
        }
        result.labeled.push_back(std::move(pair));
    }
    return result;
}

std::vector<LabeledResponse> labeled_for(std::span<const UtteranceResponsePair> pairs,
                                         DialogueAct da) {
    std::vector<LabeledResponse> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back({p.response_text, p.da_labels.contains(da)});
    return out;
}

}  // namespace overgen
