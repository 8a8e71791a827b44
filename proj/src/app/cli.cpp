// SPDX-License-Identifier: Apache-2.0

#include "overgen/app/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "overgen/annotation.hpp"
#include "overgen/app/config.hpp"
#include "overgen/app/http_api.hpp"
#include "overgen/app/service.hpp"
#include "overgen/corpus.hpp"
#include "overgen/daclassify.hpp"
#include "overgen/error.hpp"
#include "overgen/evaluator.hpp"
#include "overgen/generation.hpp"
#include "overgen/harness.hpp"
#include "overgen/hash.hpp"
#include "overgen/random.hpp"
#include "overgen/text.hpp"

namespace overgen::app {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::uint64_t seed = 0;
    std::optional<std::string> config_path;

    AppConfig config() const {
        return resolve_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    cmd->add_option("--config", common.config_path,
                    std::string("Config file (default: $") + kConfigEnvVar + ")");
}

const std::map<std::string, std::string> kStrategyNames = {{"de", "de"}, {"da", "da"}, {"dade", "dade"}};

std::string display_name(std::string_view name) {
    // "de-best" -> "DE Best"
    const auto dash = name.find('-');
    std::string strategy(name.substr(0, dash));
    std::string policy(dash == std::string_view::npos ? "" : name.substr(dash + 1));
    std::transform(strategy.begin(), strategy.end(), strategy.begin(),
                   [](char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); });
    if (!policy.empty()) policy[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(policy[0])));
    return policy.empty() ? strategy : strategy + " " + policy;
}

struct Runtime {
    AppConfig config;
    std::shared_ptr<const GeneratorBackend> backend;
    ScorerProvider scorers;

    Runtime(AppConfig c, std::uint64_t seed) : config(std::move(c)) {
        backend = make_backend(config.generator);
        scorers = default_scorer_provider(config, backend, seed);
    }

    std::shared_ptr<const Scorer> scorer_for(Strategy strategy, const std::optional<std::string>& path) const {
        if (path) return std::make_shared<TrainedEvaluator>(TrainedEvaluator::load(*path));
        return scorers(native_provenance(strategy));
    }
};

SystemUnderTest parse_system(const std::string& name, const Runtime& rt,
                             const std::optional<std::string>& evaluator, std::uint64_t seed) {
    const auto dash = name.find('-');
    if (dash == std::string::npos) throw ValidationError("system must look like <strategy>-<policy>: " + name);
    SystemUnderTest s;
    s.name = display_name(name);
    s.strategy = parse_strategy(name.substr(0, dash));
    const auto policy = name.substr(dash + 1);
    if (policy == "best") {
        s.policy = BestPolicy{rt.scorer_for(s.strategy, evaluator)};
    } else if (policy == "greedy") {
        s.policy = GreedyPolicy{};
    } else if (policy == "random") {
        s.policy = RandomPolicy{derive_seed(seed, "random")};
    } else if (policy == "general") {
        s.policy = GeneralPolicy{};
    } else {
        throw ValidationError("unknown policy \"" + policy + "\" (best, greedy, random, general)");
    }
    validate(s);
    return s;
}

struct Utterance {
    std::string id;
    std::string text;
};

std::vector<Utterance> load_utterances(const fs::path& path) {
    std::vector<Utterance> out;
    std::size_t n = 0;
    for (const auto& j : read_jsonl(path)) {
        ++n;
        if (!j.is_object()) throw DataError("record " + std::to_string(n) + " is not an object");
        Utterance u;
        u.id = j.contains("id") ? j["id"].get<std::string>() : "u" + std::to_string(n);
        for (const char* key : {"utterance", "text", "context_text"}) {
            if (j.contains(key)) {
                u.text = j[key].get<std::string>();
                break;
            }
        }
        if (text::is_blank(u.text)) throw DataError("record " + std::to_string(n) + " has no utterance text");
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<UtteranceResponsePair> relabel_with_votes(std::vector<UtteranceResponsePair> pairs,
                                                      const std::optional<std::string>& votes_path) {
    if (!votes_path) return pairs;
    const auto labels = aggregate_da_votes(load_votes(*votes_path));
    std::vector<UtteranceResponsePair> kept;
    for (auto& p : pairs) {
        auto it = labels.find(p.id);
        if (it == labels.end()) throw DataError("no DA votes for pair " + p.id);
        if (it->second.empty()) continue;  // no act reached three votes
        p.da_labels = it->second;
        kept.push_back(std::move(p));
    }
    return kept;
}

std::vector<DialogueAct> acts_or_all(const std::vector<std::string>& names) {
    if (names.empty()) return {kAnnotatableActs.begin(), kAnnotatableActs.end()};
    std::vector<DialogueAct> out;
    for (const auto& n : names) {
        const auto da = parse_dialogue_act(n);
        if (da == DialogueAct::General) throw ValidationError("general has no classifier");
        out.push_back(da);
    }
    return out;
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

Judge make_judge(double noise, double tau, std::uint64_t seed) {
    return simulate_judge(reference_latent_quality, noise, derive_seed(seed, "judge"), tau);
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Overgenerate-and-select dialogue response tools", "overgen"};
    app.require_subcommand(1);
    Common common;

    // generate
    auto* gen = app.add_subcommand("generate", "Write every candidate for each utterance");
    std::string gen_in, gen_out, gen_strategy = "de";
    gen->add_option("--in", gen_in, "Utterances JSONL")->required();
    gen->add_option("--out", gen_out, "Candidates JSONL")->required();
    gen->add_option("--strategy", gen_strategy)->check(CLI::IsMember(kStrategyNames))->capture_default_str();
    add_common(gen, common);

    // train-evaluator
    auto* tev = app.add_subcommand("train-evaluator", "Fit the response evaluator");
    std::optional<std::string> tev_data, tev_pairs, tev_ratings, tev_provenance;
    std::optional<double> tev_lambda;
    std::string tev_out, tev_strategy = "de";
    bool tev_synthetic = false;
    tev->add_option("--data", tev_data, "Pairs JSONL with an engagingness field");
    tev->add_option("--pairs", tev_pairs, "Pairs JSONL (with --ratings)");
    tev->add_option("--ratings", tev_ratings, "Rating records JSONL");
    tev->add_flag("--synthetic", tev_synthetic, "Train on simulated ratings of reference candidates");
    tev->add_option("--strategy", tev_strategy, "Candidate strategy for --synthetic")
        ->check(CLI::IsMember(kStrategyNames));
    tev->add_option("--provenance", tev_provenance, "de_data, da_data, twitter_only or synthetic");
    tev->add_option("--lambda", tev_lambda);
    tev->add_option("--out", tev_out, "Evaluator file")->required();
    add_common(tev, common);

    // train-da
    auto* tda = app.add_subcommand("train-da", "Fit one binary classifier per dialogue act");
    std::string tda_pairs, tda_out;
    std::optional<std::string> tda_votes;
    std::vector<std::string> tda_acts;
    tda->add_option("--pairs", tda_pairs, "DA-labelled pairs JSONL")->required();
    tda->add_option("--votes", tda_votes, "Raw DA votes; labels are re-derived from them");
    tda->add_option("--da", tda_acts, "Acts to train (default: all seven)");
    tda->add_option("--out-dir", tda_out)->required();
    add_common(tda, common);

    // cross-validate
    auto* cv = app.add_subcommand("cross-validate", "Stratified k-fold DA classifier metrics");
    std::string cv_pairs;
    std::optional<std::string> cv_votes, cv_out;
    std::vector<std::string> cv_acts;
    int cv_k = 5;
    cv->add_option("--pairs", cv_pairs)->required();
    cv->add_option("--votes", cv_votes);
    cv->add_option("--da", cv_acts);
    cv->add_option("--k", cv_k)->check(CLI::Range(2, 100))->capture_default_str();
    cv->add_option("--out", cv_out, "Write the reports as JSON");
    add_common(cv, common);

    // augment
    auto* aug = app.add_subcommand("augment", "Label an unlabeled corpus with DA classifiers");
    std::string aug_dir, aug_in, aug_out;
    std::optional<std::string> aug_labeled;
    std::optional<double> aug_threshold;
    std::vector<std::string> aug_acts;
    int aug_shards = 1;
    aug->add_option("--classifiers", aug_dir, "Directory written by train-da")->required();
    aug->add_option("--in", aug_in, "Unlabeled pairs JSONL")->required();
    aug->add_option("--out", aug_out, "Prompt-formatted pairs JSONL")->required();
    aug->add_option("--labeled-out", aug_labeled, "Labelled pairs JSONL");
    aug->add_option("--threshold", aug_threshold);
    aug->add_option("--da", aug_acts);
    aug->add_option("--shards", aug_shards)->check(CLI::PositiveNumber);
    add_common(aug, common);

    // compare / ood-compare share most options
    struct CompareOpts {
        std::string test;
        std::optional<std::string> evaluator_a, evaluator_b, run_id, out_prefix;
        double noise = 0.0;
        double tau = 0.1;
    };
    auto add_compare = [&](CLI::App* cmd, CompareOpts& o) {
        cmd->add_option("--test", o.test, "Test pairs JSONL; contexts are the prompts")->required();
        cmd->add_option("--run-id", o.run_id);
        cmd->add_option("--out-prefix", o.out_prefix, "Report path prefix");
        cmd->add_option("--judge-noise", o.noise, "Simulated judge noise sd")->capture_default_str();
        cmd->add_option("--judge-tau", o.tau, "Simulated judge Even band")->capture_default_str();
        add_common(cmd, common);
    };
    auto* cmp = app.add_subcommand("compare", "Pairwise comparison of two systems");
    CompareOpts cmp_opts;
    std::string cmp_a, cmp_b;
    cmp->add_option("--a", cmp_a, "System A, e.g. de-best")->required();
    cmp->add_option("--b", cmp_b, "System B, e.g. de-random")->required();
    cmp->add_option("--evaluator-a", cmp_opts.evaluator_a, "Evaluator for a Best system A");
    cmp->add_option("--evaluator-b", cmp_opts.evaluator_b, "Evaluator for a Best system B");
    add_compare(cmp, cmp_opts);

    auto* ood = app.add_subcommand("ood-compare", "Best with an evaluator trained on other data");
    CompareOpts ood_opts;
    std::string ood_strategy = "de", ood_evaluator, ood_baseline;
    ood->add_option("--strategy", ood_strategy)->check(CLI::IsMember(kStrategyNames));
    ood->add_option("--evaluator", ood_evaluator, "Evaluator with non-native provenance")->required();
    ood->add_option("--baseline", ood_baseline, "Baseline system, e.g. de-greedy")->required();
    add_compare(ood, ood_opts);

    // analyze-selection
    auto* ana = app.add_subcommand("analyze-selection", "Which candidate kinds get selected");
    std::string ana_test, ana_strategy = "de", ana_scorer = "evaluator";
    std::optional<std::string> ana_evaluator, ana_out;
    ana->add_option("--test", ana_test, "Pairs or utterances JSONL")->required();
    ana->add_option("--strategy", ana_strategy)->check(CLI::IsMember(kStrategyNames));
    ana->add_option("--scorer", ana_scorer)->check(CLI::IsMember({"evaluator", "uniform"}));
    ana->add_option("--evaluator", ana_evaluator);
    ana->add_option("--out", ana_out, "Write the distribution as JSON");
    add_common(ana, common);

    // serve
    auto* srv = app.add_subcommand("serve", "Run the HTTP service");
    std::string srv_host = "127.0.0.1";
    int srv_port = 8080;
    std::optional<std::string> srv_items, srv_run_id;
    srv->add_option("--host", srv_host)->capture_default_str();
    srv->add_option("--port", srv_port)->check(CLI::Range(0, 65535))->capture_default_str();
    srv->add_option("--judging-items", srv_items, "Comparison .items.jsonl to judge");
    srv->add_option("--run-id", srv_run_id, "Run id for the judging board");
    add_common(srv, common);

    if (args.empty()) {
        err << app.help();
        return kExitUsage;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        const auto config = common.config();
        const auto seed = common.seed;

        if (*gen) {
            const auto backend = make_backend(config.generator);
            const auto strategy = parse_strategy(gen_strategy);
            std::vector<nlohmann::json> records;
            const auto utterances = load_utterances(gen_in);
            for (const auto& u : utterances) {
                const auto cands = generate_candidates(*backend, u.text, strategy, derive_seed(seed, u.id),
                                                       config.generation(), {true});
                for (const auto& c : cands) {
                    auto j = to_json(c);
                    j["utterance_id"] = u.id;
                    j["utterance"] = u.text;
                    records.push_back(std::move(j));
                }
            }
            ensure_parent(gen_out);
            write_jsonl(records, gen_out);
            out << "wrote " << records.size() << " candidates for " << utterances.size()
                << " utterances to " << gen_out << '\n';
            return kExitOk;
        }

        if (*tev) {
            auto training = config.evaluator_training();
            if (tev_lambda) training.lambda = *tev_lambda;
            const int sources = (tev_data ? 1 : 0) + (tev_pairs || tev_ratings ? 1 : 0) + (tev_synthetic ? 1 : 0);
            if (sources != 1) {
                err << "error: give exactly one of --data, --pairs/--ratings or --synthetic\n";
                return kExitUsage;
            }
            std::vector<RatedPair> data;
            TrainedEvaluator* result = nullptr;
            std::optional<TrainedEvaluator> trained;
            if (tev_synthetic) {
                Runtime rt(config, seed);
                ReferenceEvaluatorOptions options;
                options.pairs = config.reference_training_pairs;
                options.rater_noise_sd = config.rater_noise_sd;
                options.training = training;
                trained.emplace(train_reference_evaluator(*rt.backend, parse_strategy(tev_strategy), seed, options));
            } else {
                if (tev_data) {
                    std::size_t n = 0;
                    for (const auto& j : read_jsonl(*tev_data)) {
                        ++n;
                        try {
                            data.push_back({pair_from_json(j), j.at("engagingness").get<double>()});
                        } catch (const nlohmann::json::exception& e) {
                            throw DataError(std::string(e.what()) + " at record " + std::to_string(n));
                        }
                    }
                } else {
                    if (!tev_pairs || !tev_ratings) {
                        err << "error: --pairs and --ratings go together\n";
                        return kExitUsage;
                    }
                    const auto pairs = load_pairs(*tev_pairs);
                    std::map<std::string, const UtteranceResponsePair*> by_id;
                    for (const auto& p : pairs) by_id[p.id] = &p;
                    for (const auto& r : aggregate_ratings(load_ratings(*tev_ratings))) {
                        if (r.viewpoint != Viewpoint::Engagingness) continue;
                        auto it = by_id.find(r.pair_id);
                        if (it == by_id.end()) throw DataError("rating for unknown pair " + r.pair_id);
                        data.push_back({*it->second, r.mean});
                    }
                }
                training.provenance = tev_provenance ? parse_provenance(*tev_provenance) : Provenance::Synthetic;
                trained.emplace(train_evaluator(data, training, seed));
            }
            result = &*trained;
            if (tev_synthetic && tev_provenance) {
                // Relabel only; the training data stays the strategy's own.
                result = &trained.emplace(result->feature_config(), result->feature_stats(), result->weights(),
                                          result->bias(), result->lambda(), parse_provenance(*tev_provenance));
            }
            ensure_parent(tev_out);
            result->save(tev_out);
            out << "evaluator (" << to_string(result->provenance()) << ") written to " << tev_out;
            if (!data.empty()) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "; training MSE %.4f over %zu pairs", training_mse(*result, data),
                              data.size());
                out << buf;
            }
            out << '\n';
            return kExitOk;
        }

        if (*tda) {
            const auto pairs = relabel_with_votes(load_pairs(tda_pairs), tda_votes);
            fs::create_directories(tda_out);
            const auto options = config.classifier_training();
            for (auto da : acts_or_all(tda_acts)) {
                const auto labeled = labeled_for(pairs, da);
                const auto clf = train_da_classifier(labeled, da, options, derive_seed(seed, to_string(da)));
                const auto path = fs::path(tda_out) / (std::string(to_string(da)) + ".json");
                clf.save(path);
                out << to_string(da) << ": " << std::count_if(labeled.begin(), labeled.end(),
                                                             [](auto& l) { return l.is_da; })
                    << " positive of " << labeled.size() << " -> " << path.string() << '\n';
            }
            return kExitOk;
        }

        if (*cv) {
            const auto pairs = relabel_with_votes(load_pairs(cv_pairs), cv_votes);
            const auto options = config.classifier_training();
            std::vector<CVReport> reports;
            for (auto da : acts_or_all(cv_acts)) {
                reports.push_back(cross_validate(labeled_for(pairs, da), da, cv_k, seed, options));
            }
            out << render_cv_table(reports);
            if (cv_out) {
                auto j = nlohmann::json::array();
                for (const auto& r : reports) {
                    auto folds = nlohmann::json::array();
                    for (const auto& f : r.folds) {
                        folds.push_back({{"precision", f.precision}, {"recall", f.recall}, {"f1", f.f1}, {"size", f.size}});
                    }
                    j.push_back({{"da", to_string(r.da)}, {"seed", r.seed}, {"precision", r.precision},
                                 {"recall", r.recall}, {"f1", r.f1}, {"folds", folds}});
                }
                ensure_parent(*cv_out);
                write_text_file(*cv_out, j.dump(2) + "\n");
            }
            return kExitOk;
        }

        if (*aug) {
            const auto acts = acts_or_all(aug_acts);
            std::vector<BinaryDAClassifier> classifiers;
            for (auto da : acts) {
                const auto path = fs::path(aug_dir) / (std::string(to_string(da)) + ".json");
                auto clf = BinaryDAClassifier::load(path);
                if (clf.da() != da) throw DataError(path.string() + " holds a classifier for another act");
                if (aug_threshold) clf.set_threshold(*aug_threshold);
                classifiers.push_back(std::move(clf));
            }
            const auto result = augment_corpus(classifiers, load_pairs(aug_in), acts, {}, aug_shards);
            ensure_parent(aug_out);
            write_pairs(result.prompt_pairs, aug_out);
            if (aug_labeled) {
                ensure_parent(*aug_labeled);
                write_pairs(result.labeled, *aug_labeled);
            }
            out << result.render_counts();
            return kExitOk;
        }

        auto finish_report = [&](const ComparisonReport& report, const CompareOpts& o,
                                 const std::string& default_id) {
            const std::string run_id = o.run_id.value_or(default_id);
            if (!is_safe_id(run_id)) throw ValidationError("invalid run id \"" + run_id + "\"");
            const fs::path prefix = o.out_prefix ? fs::path(*o.out_prefix) : config.reports_dir() / run_id;
            ensure_parent(prefix);
            write_report(report, prefix);
            out << report.render_row() << '\n'
                << "items: " << report.n_items() << " (win " << report.win_count << ", lose "
                << report.lose_count << ", even " << report.even_count << ")\n"
                << "report: " << prefix.string() << ".summary.json\n";
        };

        if (*cmp) {
            Runtime rt(config, seed);
            const auto a = parse_system(cmp_a, rt, cmp_opts.evaluator_a, seed);
            const auto b = parse_system(cmp_b, rt, cmp_opts.evaluator_b, seed);
            const auto test = load_pairs(cmp_opts.test);
            const auto report = run_comparison(a, b, test, *rt.backend, make_judge(cmp_opts.noise, cmp_opts.tau, seed),
                                               seed, {config.generation()});
            finish_report(report, cmp_opts, cmp_a + "-vs-" + cmp_b + "-" + std::to_string(seed));
            return kExitOk;
        }

        if (*ood) {
            Runtime rt(config, seed);
            const auto strategy = parse_strategy(ood_strategy);
            auto evaluator = std::make_shared<const TrainedEvaluator>(TrainedEvaluator::load(ood_evaluator));
            const auto baseline = parse_system(ood_baseline, rt, std::nullopt, seed);
            const auto test = load_pairs(ood_opts.test);
            const auto report = run_ood_experiment(strategy, evaluator, baseline, test, *rt.backend,
                                                   make_judge(ood_opts.noise, ood_opts.tau, seed), seed,
                                                   {config.generation()});
            finish_report(report, ood_opts,
                          ood_strategy + "-ood-vs-" + ood_baseline + "-" + std::to_string(seed));
            out << "evaluator provenance " << to_string(*report.evaluator_provenance) << ", native "
                << to_string(*report.native_provenance) << '\n';
            return kExitOk;
        }

        if (*ana) {
            Runtime rt(config, seed);
            const auto strategy = parse_strategy(ana_strategy);
            std::shared_ptr<const Scorer> scorer;
            if (ana_scorer == "evaluator") scorer = rt.scorer_for(strategy, ana_evaluator);
            Rng rng(derive_seed(seed, "uniform"));
            std::vector<ScoredSelection> log;
            for (const auto& u : load_utterances(ana_test)) {
                auto cands = generate_candidates(*rt.backend, u.text, strategy, derive_seed(seed, u.id),
                                                 config.generation(), {true});
                if (scorer) {
                    log.push_back(select_best(std::move(cands), *scorer, u.text));
                } else {
                    for (auto& c : cands) c.score = 1.0 + 4.0 * rng.uniform();
                    const int sel = argmax_ordinal(cands);
                    log.push_back({std::move(cands), sel});
                }
            }
            const auto dist = selection_distribution(log);
            out << dist.render();
            if (ana_out) {
                ensure_parent(*ana_out);
                write_text_file(*ana_out, dist.to_json().dump(2) + "\n");
            }
            return kExitOk;
        }

        if (*srv) {
            auto rt = std::make_shared<Runtime>(config, seed);
            auto chat = std::make_shared<ChatService>(config.sessions_dir(), rt->backend, rt->scorers,
                                                      config.generation());
            auto reports = std::make_shared<ReportStore>(config.reports_dir());
            std::shared_ptr<JudgingBoard> board;
            const auto items = srv_items ? std::optional<fs::path>(*srv_items) : config.judging_items;
            if (items) {
                std::string run_id = srv_run_id.value_or(items->filename().string());
                if (const auto pos = run_id.find(".items.jsonl"); pos != std::string::npos) run_id.resize(pos);
                board = JudgingBoard::from_items_file(*items, run_id,
                                                      config.judging_dir() / (run_id + ".judgments.jsonl"));
                reports->attach(board);
            }
            HttpApi api(chat, board, reports);
            out << "listening on " << srv_host << ":" << srv_port << std::endl;
            api.listen(srv_host, srv_port);
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace overgen::app
