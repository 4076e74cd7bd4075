// SPDX-License-Identifier: Apache-2.0
#pragma once
// Built-in node classifier: symmetric-normalized feature propagation followed
// by multinomial logistic regression trained with full-batch gradient descent.
//
// This is a lightweight deterministic stand-in for a trained GNN. It supplies
// prediction matrices for confidence noise, per-node loss trajectories for
// detection, and the supervised corruption detector. Its accuracy is not
// meant to match a GCN.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "noiseforge/core.hpp"
#include "noiseforge/detection.hpp"
#include "noiseforge/graph.hpp"
#include "noiseforge/noise_models.hpp"

namespace noiseforge {

struct PropagatedFeatures {
    Matrix x;
    int depth = 0;
    std::string normalization = "sym";
};

/// X <- (D~^{-1/2} (A + I) D~^{-1/2})^k X.
inline PropagatedFeatures propagate(const Graph& g, int k) {
    if (k < 0) throw InputError("propagation depth must be >= 0");
    if (!g.has_features()) throw InputError("propagation requires node features");
    const std::size_t n = g.num_nodes();
    const std::size_t d = g.features().cols();
    std::vector<double> inv_sqrt(n);
    for (std::size_t v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
    PropagatedFeatures out{g.features(), k, "sym"};
    Matrix next(n, d);
    for (int step = 0; step < k; ++step) {
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t v = begin; v < end; ++v) {
                auto dst = next.row(v);
                const auto self = out.x.row(v);
                const double sv = inv_sqrt[v];
                for (std::size_t c = 0; c < d; ++c) dst[c] = sv * sv * self[c];
                for (auto u : g.neighbors(v)) {
                    const double w = sv * inv_sqrt[u];
                    const auto src = out.x.row(u);
                    for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
                }
            }
        });
        std::swap(out.x, next);
    }
    return out;
}

enum class ValidationMetric { accuracy, binary_auc };

struct TrainConfig {
    double step_size = 0.1;
    int max_epochs = 200;
    int patience = 20;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
    double init_scale = 0.01;
    ValidationMetric metric = ValidationMetric::accuracy;
};

struct ClassifierParams {
    Matrix weights;             // d x C
    std::vector<double> bias;   // C
    TrainConfig config;
};

struct TrainResult {
    ClassifierParams params;          // parameters at the best validation epoch
    Matrix losses;                    // N x E per-node cross-entropy per epoch
    std::vector<double> train_loss;   // regularized objective per epoch
    std::vector<double> val_metric;   // per epoch
    std::size_t best_epoch = 0;
};

namespace detail {

/// Softmax of x_i W + b into `out`; returns log-sum-exp of the logits.
inline double softmax_row(std::span<const double> x, const Matrix& w, std::span<const double> b, std::span<double> out) {
    const std::size_t C = b.size();
    for (std::size_t c = 0; c < C; ++c) out[c] = b[c];
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const auto wk = w.row(k);
        for (std::size_t c = 0; c < C; ++c) out[c] += xk * wk[c];
    }
    double m = out[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, out[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(out[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < C; ++c) out[c] = std::exp(out[c] - lse);
    return lse;
}

inline std::size_t argmax(std::span<const double> p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace detail

struct LossAndGradient {
    double loss = 0.0;
    Matrix grad_weights;
    std::vector<double> grad_bias;
};

/// Mean softmax cross-entropy over `rows` plus (l2 / 2) * ||W||^2, and its
/// gradient. `rows` may repeat indices.
inline LossAndGradient loss_and_gradient(const Matrix& weights, std::span<const double> bias, const Matrix& x,
                                         std::span<const int> labels, std::span<const std::size_t> rows, double l2) {
    const std::size_t C = bias.size();
    LossAndGradient out{0.0, Matrix(weights.rows(), C, 0.0), std::vector<double>(C, 0.0)};
    std::vector<double> p(C);
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (auto i : rows) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const double lse = detail::softmax_row(x.row(i), weights, bias, p);
        double logit_y = bias[y];
        const auto xi = x.row(i);
        for (std::size_t k = 0; k < xi.size(); ++k) logit_y += xi[k] * weights(k, y);
        out.loss += (lse - logit_y) * inv;
        p[y] -= 1.0;
        for (std::size_t k = 0; k < xi.size(); ++k) {
            const double xk = xi[k] * inv;
            if (xk == 0.0) continue;
            auto gk = out.grad_weights.row(k);
            for (std::size_t c = 0; c < C; ++c) gk[c] += xk * p[c];
        }
        for (std::size_t c = 0; c < C; ++c) out.grad_bias[c] += p[c] * inv;
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < weights.data().size(); ++k) {
        sq += weights.data()[k] * weights.data()[k];
        out.grad_weights.data()[k] += l2 * weights.data()[k];
    }
    out.loss += 0.5 * l2 * sq;
    return out;
}

inline PredictionMatrix predict_proba(const ClassifierParams& params, const Matrix& x) {
    if (x.cols() != params.weights.rows())
        throw InputError("predict_proba: features have " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(params.weights.rows()));
    const std::size_t C = params.bias.size();
    PredictionMatrix out{Matrix(x.rows(), C), "builtin-classifier"};
    for (std::size_t i = 0; i < x.rows(); ++i) detail::softmax_row(x.row(i), params.weights, params.bias, out.probs.row(i));
    return out;
}

namespace detail {

inline double validation_score(const PredictionMatrix& pred, std::span<const int> labels, std::span<const std::size_t> val,
                               ValidationMetric metric) {
    if (metric == ValidationMetric::binary_auc && pred.probs.cols() == 2) {
        std::vector<double> s;
        std::vector<char> t;
        for (auto i : val) {
            s.push_back(pred.probs(i, 1));
            t.push_back(static_cast<char>(labels[i] == 1));
        }
        const auto pos = std::count(t.begin(), t.end(), 1);
        if (pos > 0 && static_cast<std::size_t>(pos) < t.size()) return roc_auc(s, t);
    }
    std::size_t correct = 0;
    for (auto i : val) correct += argmax(pred.probs.row(i)) == static_cast<std::size_t>(labels[i]);
    return static_cast<double>(correct) / static_cast<double>(val.size());
}

}  // namespace detail

/// Full-batch gradient descent with early stopping on validation performance.
/// Losses are recorded every epoch for every node before that epoch's update.
/// Training stops `patience` epochs after the first best validation epoch and
/// the parameters from that epoch are returned. With an empty validation set
/// training runs for max_epochs and returns the final parameters.
inline TrainResult train(const PropagatedFeatures& features, const LabelSet& labels, int num_classes,
                         std::span<const std::size_t> train_rows, std::span<const std::size_t> val_rows,
                         const TrainConfig& cfg = {}) {
    const Matrix& x = features.x;
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const auto C = static_cast<std::size_t>(num_classes);
    if (labels.size() != n) throw InputError("train: labels length does not match features");
    if (train_rows.empty()) throw InputError("train: empty training set");
    if (cfg.max_epochs < 1) throw InputError("train: max_epochs must be >= 1");
    {
        std::vector<char> present(C, 0);
        for (auto i : train_rows) present[static_cast<std::size_t>(labels[i])] = 1;
        for (std::size_t c = 0; c < C; ++c)
            if (!present[c]) throw InputError("training set has no node of class " + std::to_string(c + 1));
    }

    ClassifierParams params{Matrix(d, C), std::vector<double>(C, 0.0), cfg};
    Pcg32 rng(cfg.seed);
    for (double& w : params.weights.data()) w = cfg.init_scale * rng.normal();

    TrainResult res;
    std::vector<std::vector<double>> per_epoch;
    ClassifierParams best = params;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto pred = predict_proba(params, x);
        std::vector<double> node_loss(n);
        for (std::size_t i = 0; i < n; ++i)
            node_loss[i] = -std::log(std::max(pred.probs(i, static_cast<std::size_t>(labels[i])), 1e-300));
        const auto lg = loss_and_gradient(params.weights, params.bias, x, labels.values, train_rows, cfg.l2);
        if (!std::isfinite(lg.loss))
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + "; try a smaller step size");
        per_epoch.push_back(std::move(node_loss));
        res.train_loss.push_back(lg.loss);

        if (!val_rows.empty()) {
            const double score = detail::validation_score(pred, labels.values, val_rows, cfg.metric);
            res.val_metric.push_back(score);
            if (score > best_score) {
                best_score = score;
                best = params;
                res.best_epoch = static_cast<std::size_t>(epoch);
            }
            if (static_cast<std::size_t>(epoch) - res.best_epoch >= static_cast<std::size_t>(cfg.patience)) break;
        } else {
            best = params;
            res.best_epoch = static_cast<std::size_t>(epoch);
        }

        for (std::size_t k = 0; k < params.weights.data().size(); ++k)
            params.weights.data()[k] -= cfg.step_size * lg.grad_weights.data()[k];
        for (std::size_t c = 0; c < C; ++c) params.bias[c] -= cfg.step_size * lg.grad_bias[c];
    }
    res.params = std::move(best);
    res.losses = Matrix(n, per_epoch.size());
    for (std::size_t e = 0; e < per_epoch.size(); ++e)
        for (std::size_t i = 0; i < n; ++i) res.losses(i, e) = per_epoch[e][i];
    return res;
}

inline double accuracy(const PredictionMatrix& pred, std::span<const int> labels, std::span<const std::size_t> rows) {
    std::size_t correct = 0;
    for (auto i : rows) correct += detail::argmax(pred.probs.row(i)) == static_cast<std::size_t>(labels[i]);
    return rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(rows.size());
}

struct ConfidenceProtocolResult {
    PredictionMatrix predictions;
    std::vector<std::vector<int>> test_fold;  // [run][node] -> fold that tested the node
};

/// Cross-fitted predictions: each run deals nodes into `folds` stratified
/// folds; fold f is tested by a model trained on the next floor((folds-1)/2)
/// folds and validated on the rest. Test-fold probabilities are stitched per
/// run, averaged over runs and renormalized.
inline ConfidenceProtocolResult confidence_protocol(const PropagatedFeatures& features, const LabelSet& labels,
                                                    int num_classes, int runs = 10, int folds = 5,
                                                    const TrainConfig& cfg = {}, std::uint64_t seed = 0) {
    const std::size_t n = features.x.rows();
    if (folds < 3) throw InputError("confidence protocol needs at least 3 folds");
    if (runs < 1) throw InputError("confidence protocol needs at least 1 run");
    if (n < static_cast<std::size_t>(folds)) throw InputError("confidence protocol needs N >= folds");
    const auto C = static_cast<std::size_t>(num_classes);
    const auto F = static_cast<std::size_t>(folds);
    const std::size_t train_folds = (F - 1) / 2;

    ConfidenceProtocolResult out;
    out.test_fold.assign(static_cast<std::size_t>(runs), std::vector<int>(n, -1));
    for (std::size_t r = 0; r < static_cast<std::size_t>(runs); ++r) {
        Pcg32 rng(derive_seed(seed, r));
        std::vector<std::vector<std::size_t>> by_class(C);
        for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
        std::size_t dealt = 0;
        for (auto& members : by_class) {
            shuffle(members, rng);
            for (auto i : members) out.test_fold[r][i] = static_cast<int>(dealt++ % F);
        }
    }

    std::vector<Matrix> run_preds(static_cast<std::size_t>(runs), Matrix(n, C));
    const std::size_t jobs = static_cast<std::size_t>(runs) * F;
    parallel_for(
        jobs,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t job = begin; job < end; ++job) {
                const std::size_t r = job / F, f = job % F;
                std::vector<std::size_t> tr, va, te;
                for (std::size_t i = 0; i < n; ++i) {
                    const auto fi = static_cast<std::size_t>(out.test_fold[r][i]);
                    const std::size_t offset = (fi + F - f) % F;  // 0 = test fold
                    if (offset == 0)
                        te.push_back(i);
                    else if (offset <= train_folds)
                        tr.push_back(i);
                    else
                        va.push_back(i);
                }
                TrainConfig job_cfg = cfg;
                job_cfg.seed = derive_seed(cfg.seed, job);
                try {
                    const auto fit = train(features, labels, num_classes, tr, va, job_cfg);
                    const auto pred = predict_proba(fit.params, features.x);
                    for (auto i : te) std::copy(pred.probs.row(i).begin(), pred.probs.row(i).end(), run_preds[r].row(i).begin());
                } catch (const Error& e) {
                    rethrow_with_context(e, "confidence protocol run " + std::to_string(r) + " fold " + std::to_string(f) + ": ");
                }
            }
        },
        0, 2);

    out.predictions.probs = Matrix(n, C);
    for (const auto& m : run_preds)
        for (std::size_t k = 0; k < m.data().size(); ++k) out.predictions.probs.data()[k] += m.data()[k];
    detail::normalize_rows(out.predictions.probs);
    out.predictions.source = "builtin-classifier:confidence-protocol";
    return out;
}

struct SupervisedDetection {
    std::vector<double> scores;  // P(corrupted) for every node
    NodeSplit split;
    double test_auc = 0.0;
    std::size_t best_epoch = 0;
};

/// Binary detector trained on 1[clean != noisy] with a stratified 8:1:1
/// split; early stopping on validation AUC.
inline SupervisedDetection supervised_detector(const PropagatedFeatures& features, const LabelSet& clean,
                                               const LabelSet& noisy, const TrainConfig& cfg = {},
                                               std::uint64_t seed = 0) {
    if (clean.size() != noisy.size() || clean.size() != features.x.rows())
        throw InputError("supervised detector: clean, noisy and features must have the same length");
    LabelSet target;
    target.values.resize(clean.size());
    std::size_t positives = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) positives += target.values[i] = clean[i] != noisy[i];
    if (positives == 0) throw InputError("supervised detector: no positive class (no corrupted nodes)");
    if (positives == clean.size()) throw InputError("supervised detector: no negative class (every node corrupted)");

    SupervisedDetection out;
    out.split = split_nodes_stratified(target.values, 2, SplitRatios{0.8, 0.1, 0.1}, seed);
    TrainConfig det_cfg = cfg;
    det_cfg.metric = ValidationMetric::binary_auc;
    const auto fit = train(features, target, 2, out.split.train, out.split.val, det_cfg);
    const auto pred = predict_proba(fit.params, features.x);
    out.scores.resize(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) out.scores[i] = pred.probs(i, 1);
    std::vector<double> s;
    std::vector<char> t;
    for (auto i : out.split.test) {
        s.push_back(out.scores[i]);
        t.push_back(static_cast<char>(target.values[i]));
    }
    out.test_auc = roc_auc(s, t);
    out.best_epoch = fit.best_epoch;
    return out;
}

}  // namespace noiseforge
