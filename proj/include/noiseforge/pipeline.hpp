// SPDX-License-Identifier: Apache-2.0
#pragma once
// Subcommand implementations behind the noiseforge CLI. Each command reads a
// dataset manifest, writes its artifacts into RunConfig::out and returns the
// JSON report it also writes to disk.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noiseforge/analytics.hpp"
#include "noiseforge/classifier.hpp"
#include "noiseforge/corruption.hpp"
#include "noiseforge/dataset.hpp"
#include "noiseforge/detection.hpp"
#include "noiseforge/io.hpp"
#include "noiseforge/llm.hpp"
#include "noiseforge/noise_models.hpp"
#include "noiseforge/ppr.hpp"
#include "noiseforge/svg.hpp"

namespace noiseforge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "0.1.0";

struct ClassifierOptions {
    int hops = 2;
    double step_size = 0.1;
    int max_epochs = 200;
    int patience = 20;
    double l2 = 1e-4;
    int runs = 10;   // confidence protocol
    int folds = 5;
};

struct RunConfig {
    fs::path manifest;
    fs::path out = "noiseforge_out";
    std::uint64_t seed = 0;
    bool plot = false;

    // corrupt
    std::string noise = "uniform";
    double rate = 0.0;
    std::size_t realizations = 10;
    double alpha = 0.9;
    double epsilon = 1e-6;
    std::optional<fs::path> predictions;  // external prediction matrix for confidence noise
    std::optional<fs::path> refined;      // refined LLM labels for llm noise

    // detect / analyze / classify
    std::optional<fs::path> noisy_labels;
    std::optional<fs::path> trajectory;
    std::optional<fs::path> frequency;
    bool builtin_classifier = false;
    std::string protocol = "all";  // average | maximum | supervised | all
    bool fit_all = false;
    std::vector<int> ks = {1, 2, 3};
    bool exact_distance = false;
    bool confidence_protocol = false;
    ClassifierOptions classifier;

    // llm
    llm::LLMConfig llm;
    llm::PromptTemplate prompt;
};

namespace detail {

inline std::string hex(std::uint64_t v) { return hex64(v); }

/// Seeds used by components other than corruption realizations.
enum SeedSlot : std::uint64_t { kCorruptionSlot = 0, kClassifierSlot = 1, kDetectorSlot = 2, kSplitSlot = 3 };

inline std::uint64_t slot_seed(std::uint64_t master, SeedSlot s) { return derive_seed(master, s); }

inline TrainConfig train_config(const ClassifierOptions& o, std::uint64_t seed) {
    TrainConfig c;
    c.step_size = o.step_size;
    c.max_epochs = o.max_epochs;
    c.patience = o.patience;
    c.l2 = o.l2;
    c.seed = seed;
    return c;
}

inline json classifier_json(const ClassifierOptions& o) {
    return {{"hops", o.hops}, {"step_size", o.step_size}, {"max_epochs", o.max_epochs},
            {"patience", o.patience}, {"l2", o.l2}, {"runs", o.runs}, {"folds", o.folds}};
}

inline std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

inline void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

inline json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (double x : m.row(r)) row.push_back(double_or_null(x));
        rows.push_back(row);
    }
    return rows;
}

inline std::string realization_csv(const LabelSet& clean, const CorruptionResult& res) {
    std::string out = "node_id,clean_label,noisy_label,corrupted\n";
    for (std::size_t i = 0; i < clean.size(); ++i)
        out += std::to_string(i + 1) + "," + std::to_string(clean[i] + 1) + "," + std::to_string(res.noisy[i] + 1) + "," +
               (res.corrupted[i] ? "1" : "0") + "\n";
    return out;
}

inline std::string scores_csv(std::span<const double> scores) {
    std::string out = "node_id,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) out += std::to_string(i + 1) + "," + format_double(scores[i]) + "\n";
    return out;
}

inline std::string histogram_csv(const Histogram& h) {
    std::string out = "bin_left,bin_right,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
        out += format_double(h.edges[b]) + "," + format_double(h.edges[b + 1]) + "," + std::to_string(h.counts[b]) + "\n";
    return out;
}

inline std::vector<char> disagreement(const LabelSet& clean, const LabelSet& noisy) {
    std::vector<char> m(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) m[i] = clean[i] != noisy[i];
    return m;
}

inline LabelSet clean_labels(const Graph& g) { return g.label_set(); }

inline LabelSet read_noisy(const fs::path& path, const Graph& g) {
    return io::read_labels(path, g.num_nodes(), g.num_classes());
}

inline PropagatedFeatures features_for(const Graph& g, const ClassifierOptions& o) { return propagate(g, o.hops); }

}  // namespace detail

// --- stats -----------------------------------------------------------------

inline json cmd_stats(const RunConfig& cfg) {
    const auto g = load_dataset(cfg.manifest);
    json r;
    r["command"] = "stats";
    r["dataset"] = g.name();
    r["num_nodes"] = g.num_nodes();
    r["num_edges"] = g.num_edges();
    r["num_classes"] = g.num_classes();
    r["directed"] = g.directed();
    r["average_degree"] = g.num_nodes() ? static_cast<double>(g.num_arcs()) / static_cast<double>(g.num_nodes()) : 0.0;
    r["node_homophily"] = node_homophily(g);
    r["has_features"] = g.has_features();
    r["has_texts"] = g.has_texts();
    if (!cfg.out.empty()) detail::write_json(cfg.out / "stats.json", r);
    return r;
}

// --- corrupt ---------------------------------------------------------------

inline constexpr std::string_view kPairwiseWarning =
    "pairwise noise above rate 0.5 relabels most of each class to its successor class, "
    "so the noisy majority no longer identifies the true class";

/// Builds T_D for the requested noise type. `meta` receives how it was built.
inline TransitionProbabilities build_transition(const Graph& g, const RunConfig& cfg, NoiseType type, json& meta) {
    const auto labels = g.label_set();
    switch (type) {
        case NoiseType::uniform: return build_uniform(labels, g.num_classes());
        case NoiseType::pairwise: return build_pairwise(labels, g.num_classes());
        case NoiseType::topology: return build_topology(g, labels, PPRConfig{cfg.alpha, cfg.epsilon});
        case NoiseType::feature: return build_feature(g, labels);
        case NoiseType::confidence: {
            PredictionMatrix pred;
            if (cfg.predictions) {
                pred.probs = io::read_matrix(*cfg.predictions);
                pred.source = "external-file";
                meta["predictions"] = cfg.predictions->string();
            } else {
                const auto seed = detail::slot_seed(cfg.seed, detail::kClassifierSlot);
                const auto x = detail::features_for(g, cfg.classifier);
                pred = confidence_protocol(x, labels, g.num_classes(), cfg.classifier.runs, cfg.classifier.folds,
                                           detail::train_config(cfg.classifier, seed), seed)
                           .predictions;
                meta["classifier"] = detail::classifier_json(cfg.classifier);
                meta["classifier_seed"] = detail::hex(seed);
            }
            return build_confidence(pred, g.num_nodes(), g.num_classes());
        }
        case NoiseType::llm: break;
    }
    throw InputError("llm noise is read from refined label files, not built from a transition matrix");
}

inline json cmd_corrupt(const RunConfig& cfg) {
    const auto g = load_dataset(cfg.manifest);
    const auto type = noise_type_from_string(cfg.noise);
    if (!type) throw InputError("unknown noise type '" + cfg.noise + "'");
    const auto clean = g.label_set();
    const std::size_t n = g.num_nodes();

    json config;
    config["manifest"] = cfg.manifest.string();
    config["noise"] = to_string(*type);
    config["rate"] = cfg.rate;
    config["realizations"] = cfg.realizations;
    config["seed"] = cfg.seed;
    if (*type == NoiseType::topology) {
        config["alpha"] = cfg.alpha;
        config["epsilon"] = cfg.epsilon;
    }
    if (*type == NoiseType::confidence) config["classifier"] = detail::classifier_json(cfg.classifier);

    json report;
    report["command"] = "corrupt";
    report["version"] = kVersion;
    report["config"] = config;
    report["config_hash"] = detail::config_hash(config);
    json warnings = json::array();

    std::vector<CorruptionResult> realizations;
    CorruptionFrequency frequency;
    json seed_chain;
    seed_chain["master"] = detail::hex(cfg.seed);
    json build_meta = json::object();

    if (*type == NoiseType::llm) {
        if (!cfg.refined) throw InputError("llm noise requires --refined <labels.csv> from the llm subcommand");
        CorruptionResult res;
        res.noisy = detail::read_noisy(*cfg.refined, g);
        res.noisy.provenance = LabelProvenance::llm_refined;
        res.corrupted = detail::disagreement(clean, res.noisy);
        for (char c : res.corrupted) res.num_corrupted += static_cast<std::size_t>(c);
        res.achieved_rate = n ? static_cast<double>(res.num_corrupted) / static_cast<double>(n) : 0.0;
        realizations.push_back(std::move(res));
        frequency.realizations = 1;
        frequency.counts.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) frequency.counts[i] = static_cast<std::uint32_t>(realizations[0].corrupted[i]);
        config["refined"] = cfg.refined->string();
        report["config"] = config;
        report["config_hash"] = detail::config_hash(config);
    } else {
        NoiseSpec spec{*type, cfg.rate, detail::slot_seed(cfg.seed, detail::kCorruptionSlot), cfg.realizations};
        validate(spec);
        if (*type == NoiseType::pairwise && cfg.rate > 0.5) warnings.push_back(std::string(kPairwiseWarning));
        const auto td = build_transition(g, cfg, *type, build_meta);
        io::write_matrix(cfg.out / "transition_probabilities.csv", td.td);
        auto run = corrupt_many(td.td, spec, clean);
        realizations = std::move(run.realizations);
        frequency = std::move(run.frequency);
        seed_chain["corruption"] = detail::hex(spec.seed);
        json per = json::array();
        for (std::size_t r = 0; r < spec.realizations; ++r) per.push_back(detail::hex(derive_seed(spec.seed, r)));
        seed_chain["realizations"] = per;
        for (const auto& [k, v] : td.metadata) build_meta[k] = v;
    }
    report["seed_chain"] = seed_chain;
    if (!build_meta.empty()) report["transition_build"] = build_meta;

    Matrix pooled(static_cast<std::size_t>(g.num_classes()), static_cast<std::size_t>(g.num_classes()));
    json per_run = json::array();
    for (std::size_t r = 0; r < realizations.size(); ++r) {
        const auto& res = realizations[r];
        io::write_file(cfg.out / ("realization_" + std::to_string(r) + ".csv"), detail::realization_csv(clean, res));
        const auto counts = transition_counts(clean, res.noisy, g.num_classes());
        for (std::size_t k = 0; k < pooled.data().size(); ++k) pooled.data()[k] += counts.data()[k];
        json w = json::array();
        for (const auto& s : res.warnings) w.push_back(s);
        per_run.push_back({{"index", r}, {"seed", detail::hex(res.seed)}, {"num_corrupted", res.num_corrupted},
                           {"achieved_rate", res.achieved_rate}, {"warnings", w}});
    }
    report["num_nodes"] = n;
    report["target_corrupted"] = *type == NoiseType::llm ? realizations[0].num_corrupted : corruption_count(n, cfg.rate);
    report["realizations"] = per_run;

    std::string freq = "node_id,count\n";
    for (std::size_t i = 0; i < n; ++i) freq += std::to_string(i + 1) + "," + std::to_string(frequency.counts[i]) + "\n";
    io::write_file(cfg.out / "frequency.csv", freq);

    const auto tm = normalize_transition(pooled);
    io::write_file(cfg.out / "transition_matrix.csv", io::encode_matrix_csv(tm.values, "to_"));
    report["transition_matrix"] = detail::matrix_json(tm.values);
    report["warnings"] = warnings;
    detail::write_json(cfg.out / "run_report.json", report);

    if (cfg.plot) {
        std::vector<double> nodes_per_count(frequency.realizations + 1, 0.0);
        std::vector<std::string> labels;
        for (auto c : frequency.counts) nodes_per_count[c] += 1.0;
        for (std::size_t c = 0; c <= frequency.realizations; ++c) labels.push_back(std::to_string(c));
        io::write_file(cfg.out / "corruption_frequency.svg",
                       svg::bar_chart("nodes per corruption count", labels, nodes_per_count));
    }
    return report;
}

// --- classify --------------------------------------------------------------

inline json cmd_classify(const RunConfig& cfg) {
    const auto m = load_manifest(cfg.manifest);
    const auto g = load_dataset(m);
    const auto labels = cfg.noisy_labels ? detail::read_noisy(*cfg.noisy_labels, g) : g.label_set();
    const auto x = detail::features_for(g, cfg.classifier);
    const auto seed = detail::slot_seed(cfg.seed, detail::kClassifierSlot);
    json report;
    report["command"] = "classify";
    json config = {{"manifest", cfg.manifest.string()}, {"seed", cfg.seed}, {"classifier", detail::classifier_json(cfg.classifier)},
                   {"labels", cfg.noisy_labels ? cfg.noisy_labels->string() : std::string("clean")},
                   {"confidence_protocol", cfg.confidence_protocol}};
    report["config"] = config;
    report["config_hash"] = detail::config_hash(config);
    if (cfg.confidence_protocol) {
        const auto res = confidence_protocol(x, labels, g.num_classes(), cfg.classifier.runs, cfg.classifier.folds,
                                             detail::train_config(cfg.classifier, seed), seed);
        io::write_matrix(cfg.out / "predictions.csv", res.predictions.probs);
        std::vector<std::size_t> all(g.num_nodes());
        std::iota(all.begin(), all.end(), std::size_t{0});
        report["cross_fitted_accuracy"] = accuracy(res.predictions, g.labels(), all);
        report["mean_prediction_entropy"] = prediction_entropy(res.predictions).aggregate;
    } else {
        const auto split = load_split(m, g.num_nodes());
        const auto fit = train(x, labels, g.num_classes(), split.train, split.val, detail::train_config(cfg.classifier, seed));
        const auto pred = predict_proba(fit.params, x.x);
        io::write_matrix(cfg.out / "predictions.csv", pred.probs);
        io::write_file(cfg.out / "trajectory.csv", io::encode_trajectory_csv(fit.losses));
        report["best_epoch"] = fit.best_epoch;
        report["epochs"] = fit.losses.cols();
        report["train_accuracy"] = accuracy(pred, labels.values, split.train);
        report["val_accuracy"] = accuracy(pred, labels.values, split.val);
        report["test_accuracy_vs_clean"] = accuracy(pred, g.labels(), split.test);
    }
    detail::write_json(cfg.out / "classify_report.json", report);
    return report;
}

// --- detect ----------------------------------------------------------------

inline json gmm_json(const GMM1D& g) {
    json comps = json::array();
    for (const auto& c : g.components) comps.push_back({{"mean", c.mean}, {"variance", c.variance}, {"weight", c.weight}});
    return {{"components", comps}, {"noisy_component", g.high()}, {"iterations", g.iterations}, {"converged", g.converged},
            {"log_likelihood", g.log_likelihood.empty() ? 0.0 : g.log_likelihood.back()}};
}

inline json cmd_detect(const RunConfig& cfg) {
    const auto m = load_manifest(cfg.manifest);
    const auto g = load_dataset(m);
    const auto& p = cfg.protocol;
    if (p != "average" && p != "maximum" && p != "supervised" && p != "all")
        throw InputError("unknown protocol '" + p + "' (expected average, maximum, supervised or all)");
    const bool want_avg = p == "average" || p == "all";
    const bool want_max = p == "maximum" || p == "all";
    const bool want_sup = p == "supervised" || (p == "all" && g.has_features() && cfg.noisy_labels);
    if ((want_avg || want_max) && !cfg.trajectory && !cfg.builtin_classifier)
        throw InputError("detect needs --trajectory <file> or --classifier to train the built-in model");

    const auto clean = g.label_set();
    std::optional<LabelSet> noisy;
    if (cfg.noisy_labels) noisy = detail::read_noisy(*cfg.noisy_labels, g);
    const auto split = load_split(m, g.num_nodes());

    json config = {{"manifest", cfg.manifest.string()}, {"seed", cfg.seed}, {"protocol", p}, {"fit_all", cfg.fit_all},
                   {"noisy_labels", cfg.noisy_labels ? cfg.noisy_labels->string() : std::string()},
                   {"trajectory", cfg.trajectory ? cfg.trajectory->string() : std::string("builtin")},
                   {"classifier", detail::classifier_json(cfg.classifier)}};
    json report;
    report["command"] = "detect";
    report["config"] = config;
    report["config_hash"] = detail::config_hash(config);

    std::optional<std::vector<char>> truth;
    if (noisy) {
        truth = detail::disagreement(clean, *noisy);
        report["num_corrupted"] = std::count(truth->begin(), truth->end(), 1);
    }

    if (want_avg || want_max) {
        Matrix losses;
        if (cfg.trajectory) {
            losses = io::read_trajectory_csv(*cfg.trajectory);
            if (losses.rows() != g.num_nodes())
                throw InputError(cfg.trajectory->string() + ": trajectory has " + std::to_string(losses.rows()) +
                                 " rows, dataset has " + std::to_string(g.num_nodes()) + " nodes");
        } else {
            const auto training = noisy ? *noisy : clean;
            const auto seed = detail::slot_seed(cfg.seed, detail::kClassifierSlot);
            const auto fit = train(detail::features_for(g, cfg.classifier), training, g.num_classes(), split.train, split.val,
                                   detail::train_config(cfg.classifier, seed));
            losses = fit.losses;
            io::write_file(cfg.out / "trajectory.csv", io::encode_trajectory_csv(losses));
        }
        std::vector<std::size_t> subset = cfg.fit_all ? resolve_subset(g.num_nodes(), {}) : split.train;
        report["fit_subset"] = cfg.fit_all ? "all" : "train";
        report["fit_subset_size"] = subset.size();

        std::vector<char> sub_truth;
        bool auc_defined = false;
        if (truth) {
            for (auto i : subset) sub_truth.push_back((*truth)[i]);
            const auto pos = std::count(sub_truth.begin(), sub_truth.end(), 1);
            auc_defined = pos > 0 && static_cast<std::size_t>(pos) < sub_truth.size();
        }
        if (want_avg) {
            const auto det = detect_average(losses, subset);
            io::write_file(cfg.out / "scores_average.csv", detail::scores_csv(det.scores.scores));
            json a = {{"gmm", gmm_json(det.gmm)}};
            if (auc_defined) {
                std::vector<double> s;
                for (auto i : subset) s.push_back(det.scores.scores[i]);
                a["auc"] = roc_auc(s, sub_truth);
            }
            report["average"] = a;
        }
        if (want_max) {
            if (!auc_defined) throw InputError("maximum protocol needs --labels with both clean and corrupted nodes in the fit subset");
            const auto det = detect_maximum(losses, *truth, subset);
            json series = json::array();
            double sum = 0.0;
            std::size_t ok = 0;
            for (double v : det.auc_series) {
                series.push_back(detail::double_or_null(v));
                if (std::isfinite(v)) sum += v, ++ok;
            }
            json fails = json::array();
            for (const auto& f : det.failures) fails.push_back(f);
            report["maximum"] = {{"auc", det.best_auc}, {"best_epoch", det.best_epoch},
                                 {"mean_epoch_auc", ok ? sum / static_cast<double>(ok) : 0.0},
                                 {"auc_series", series}, {"failures", fails}};
            if (cfg.plot)
                io::write_file(cfg.out / "auc_per_epoch.svg", svg::line_chart("per-epoch detection AUC", {{"AUC", det.auc_series}}));
        }
    }
    if (want_sup) {
        if (!noisy) throw InputError("supervised protocol needs --labels");
        const auto seed = detail::slot_seed(cfg.seed, detail::kDetectorSlot);
        const auto det = supervised_detector(detail::features_for(g, cfg.classifier), clean, *noisy,
                                             detail::train_config(cfg.classifier, seed), seed);
        io::write_file(cfg.out / "scores_supervised.csv", detail::scores_csv(det.scores));
        report["supervised"] = {{"test_auc", det.test_auc}, {"best_epoch", det.best_epoch}, {"test_size", det.split.test.size()}};
    }
    detail::write_json(cfg.out / "detection_report.json", report);
    return report;
}

// --- llm -------------------------------------------------------------------

inline json cmd_llm(const RunConfig& cfg) {
    const auto g = load_dataset(cfg.manifest);
    auto lcfg = cfg.llm;
    if (lcfg.cache_dir.empty()) lcfg.cache_dir = cfg.out / "llm_cache";
    llm::ChatClient client(lcfg);
    llm::AnnotationCache cache(lcfg.cache_dir);
    const auto truth = g.label_set();

    json report;
    report["command"] = "llm";
    json config = {{"manifest", cfg.manifest.string()}, {"endpoint", lcfg.endpoint}, {"model", lcfg.model},
                   {"temperature", lcfg.temperature}, {"domain", cfg.prompt.domain},
                   {"label_noun", cfg.prompt.label_noun}, {"item_noun", cfg.prompt.item_noun}};
    report["config"] = config;
    report["config_hash"] = detail::config_hash(config);

    std::array<LabelSet, 2> sets;
    json modes = json::object();
    for (auto mode : {llm::Mode::naive, llm::Mode::reasoned}) {
        const auto run = llm::annotate(g, client, cache, cfg.prompt, mode);
        std::string lines;
        for (const auto& r : run.records) lines += llm::to_json(r).dump() + "\n";
        io::write_file(cfg.out / ("annotations_" + llm::to_string(mode) + ".jsonl"), lines);
        std::size_t substituted = 0;
        const auto prov = mode == llm::Mode::naive ? LabelProvenance::llm_naive : LabelProvenance::llm_reasoned;
        auto& set = sets[mode == llm::Mode::naive ? 0 : 1];
        set = llm::labels_from_records(run.records, truth, prov, &substituted);
        io::write_labels(cfg.out / ("labels_" + llm::to_string(mode) + ".csv"), set);
        modes[llm::to_string(mode)] = {{"unparsed_substituted", substituted}, {"failed", run.stats.failed},
                                       {"cache_hits", run.stats.cache_hits}, {"network_calls", run.stats.network_calls}};
    }
    const auto refined = llm::refine(sets[0], sets[1], truth);
    io::write_labels(cfg.out / "labels_refined.csv", refined);
    const auto rates = llm::noise_rate_report(sets[0], sets[1], refined, truth);
    report["annotation"] = modes;
    report["noise_rate"] = {{"naive", rates.naive}, {"reasoned", rates.reasoned}, {"refined", rates.refined}};
    report["refined_within_reasoned"] = rates.refined_within_reasoned;
    report["network_calls"] = client.requests();
    detail::write_json(cfg.out / "llm_report.json", report);
    return report;
}

// --- analyze ---------------------------------------------------------------

inline json cmd_analyze(const RunConfig& cfg) {
    const auto g = load_dataset(cfg.manifest);
    if (!cfg.noisy_labels) throw InputError("analyze needs --labels <noisy labels or realization file>");
    const auto clean = g.label_set();
    const auto noisy = detail::read_noisy(*cfg.noisy_labels, g);
    const auto mask = detail::disagreement(clean, noisy);

    json report;
    report["command"] = "analyze";
    json config = {{"manifest", cfg.manifest.string()}, {"labels", cfg.noisy_labels->string()}, {"ks", cfg.ks},
                   {"exact_distance", cfg.exact_distance}};
    report["config"] = config;
    report["config_hash"] = detail::config_hash(config);
    report["noise_rate"] = llm::noise_rate(noisy, clean);

    const auto tm = class_transition_matrix(clean, noisy, g.num_classes());
    report["transition_matrix"] = detail::matrix_json(tm.values);
    try {
        report["offdiag_entropy"] = {{"row_mean", offdiag_entropy(tm, OffdiagAggregation::row_mean).aggregate},
                                     {"global", offdiag_entropy(tm, OffdiagAggregation::global).aggregate}};
    } catch (const InputError& e) {
        report["offdiag_entropy"] = {{"error", e.what()}};
    }

    if (g.num_edges() > 0) {
        const auto cons = consistency_scores(g, noisy.values, cfg.ks, cfg.exact_distance);
        try {
            const auto gap = consistency_gap(cons, mask);
            report["consistency"] = {{"ks", gap.ks}, {"clean_mean", gap.clean_mean}, {"corrupted_mean", gap.corrupted_mean},
                                     {"gap", gap.gap}};
            if (cfg.plot) {
                std::vector<std::string> labels;
                for (int k : gap.ks) labels.push_back("k=" + std::to_string(k));
                io::write_file(cfg.out / "consistency_gap.svg", svg::bar_chart("consistency gap (clean - corrupted)", labels, gap.gap));
            }
        } catch (const InputError& e) {
            report["consistency"] = {{"error", e.what()}};
        }
    }

    if (g.has_features()) {
        const auto fs_split = feature_similarity_split(g, noisy.values, mask);
        io::write_file(cfg.out / "similarity_clean_hist.csv", detail::histogram_csv(fs_split.clean_hist));
        io::write_file(cfg.out / "similarity_corrupted_hist.csv", detail::histogram_csv(fs_split.corrupted_hist));
        report["feature_similarity"] = {
            {"clean", {{"count", fs_split.clean_summary.count}, {"mean", detail::double_or_null(fs_split.clean_summary.mean)},
                       {"variance", detail::double_or_null(fs_split.clean_summary.variance)}}},
            {"corrupted", {{"count", fs_split.corrupted_summary.count}, {"mean", detail::double_or_null(fs_split.corrupted_summary.mean)},
                           {"variance", detail::double_or_null(fs_split.corrupted_summary.variance)}}}};
        if (cfg.plot) {
            std::vector<double> a(fs_split.clean_hist.counts.begin(), fs_split.clean_hist.counts.end());
            std::vector<double> b(fs_split.corrupted_hist.counts.begin(), fs_split.corrupted_hist.counts.end());
            io::write_file(cfg.out / "feature_similarity.svg",
                           svg::line_chart("similarity to observed-class centroid", {{"clean", a}, {"corrupted", b}}));
        }
    }

    if (cfg.predictions) {
        PredictionMatrix pred{io::read_matrix(*cfg.predictions), "external-file"};
        if (pred.probs.rows() != g.num_nodes()) throw InputError(cfg.predictions->string() + ": row count does not match the dataset");
        const auto ent = prediction_entropy(pred);
        report["prediction_entropy"] = {{"mean", ent.aggregate}};
        if (cfg.frequency) {
            const auto freq = io::read_matrix(*cfg.frequency);
            if (freq.rows() != g.num_nodes() || freq.cols() < 1) throw InputError(cfg.frequency->string() + ": expected node_id,count rows");
            std::vector<double> counts(freq.rows());
            for (std::size_t i = 0; i < freq.rows(); ++i) counts[i] = freq(i, 0);
            json corr;
            for (auto [name, method] : {std::pair{"pearson", CorrelationMethod::pearson}, std::pair{"spearman", CorrelationMethod::spearman}}) {
                try {
                    corr[name] = correlation(ent.values, counts, method);
                } catch (const Error& e) {
                    corr[name] = nullptr;
                }
            }
            report["entropy_frequency_correlation"] = corr;
        }
    }
    detail::write_json(cfg.out / "analysis_report.json", report);
    return report;
}

}  // namespace noiseforge::pipeline
