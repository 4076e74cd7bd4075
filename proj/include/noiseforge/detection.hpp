// SPDX-License-Identifier: Apache-2.0
#pragma once
// Noisy-label detection from per-node training losses: a two-component 1-D
// Gaussian mixture fit by EM, posterior scoring of the high-loss component,
// and rank-based ROC-AUC.

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "noiseforge/core.hpp"

namespace noiseforge {

/// Mann-Whitney AUC with midranks for ties. truth[i] != 0 marks a positive.
inline double roc_auc(std::span<const double> scores, std::span<const char> truth) {
    if (scores.size() != truth.size()) throw InputError("roc_auc: scores and truth differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (truth[order[k]]) {
                pos_rank_sum += midrank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InputError("roc_auc undefined: truth contains a single class");
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct GaussianComponent {
    double mean = 0.0;
    double variance = 1.0;
    double weight = 0.5;
};

struct GMMConfig {
    int max_iterations = 100;
    double tolerance = 1e-6;           // stop when the log-likelihood gains less
    double variance_floor_scale = 1e-8;  // floor = scale * (range^2 + 1e-12)
};

struct GMM1D {
    std::array<GaussianComponent, 2> components;
    std::vector<double> log_likelihood;  // one entry per evaluated parameter set
    int iterations = 0;
    bool converged = false;
    double variance_floor = 0.0;

    /// Index of the component with the higher mean (the "noisy" one).
    std::size_t high() const noexcept { return components[1].mean >= components[0].mean ? 1 : 0; }
};

namespace detail {

inline double log_normal_pdf(double x, const GaussianComponent& c) {
    constexpr double kLog2Pi = 1.8378770664093453;
    const double d = x - c.mean;
    return -0.5 * (kLog2Pi + std::log(c.variance) + d * d / c.variance);
}

/// Type-7 (linear interpolation) percentile of sorted data.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// E-step: fills resp with the posterior of component 1, returns the total
/// log-likelihood.
inline double e_step(std::span<const double> x, const GMM1D& g, std::vector<double>& resp) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::log(g.components[0].weight) + log_normal_pdf(x[i], g.components[0]);
        const double b = std::log(g.components[1].weight) + log_normal_pdf(x[i], g.components[1]);
        const double m = std::max(a, b);
        const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
        resp[i] = std::exp(b - lse);
        ll += lse;
    }
    return ll;
}

}  // namespace detail

/// EM for a two-component 1-D mixture with deterministic initialization:
/// means at the 25th/75th percentiles (min/max if those coincide), equal
/// weights, and the pooled variance for both components.
inline GMM1D fit_gmm_em(std::span<const double> values, const GMMConfig& cfg = {}) {
    const std::size_t m = values.size();
    if (m < 4) throw InputError("GMM fit needs at least 4 values, got " + std::to_string(m));
    for (double v : values)
        if (!std::isfinite(v)) throw InputError("GMM fit: non-finite value");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front(), hi = sorted.back();
    if (lo == hi) throw NumericError("GMM fit: degenerate input, all values are identical");

    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(m);
    double var = 0.0;
    for (double v : sorted) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m);

    GMM1D g;
    g.variance_floor = cfg.variance_floor_scale * ((hi - lo) * (hi - lo) + 1e-12);
    double m0 = detail::percentile_sorted(sorted, 0.25);
    double m1 = detail::percentile_sorted(sorted, 0.75);
    if (m0 == m1) {
        m0 = lo;
        m1 = hi;
    }
    g.components[0] = {m0, std::max(var, g.variance_floor), 0.5};
    g.components[1] = {m1, std::max(var, g.variance_floor), 0.5};

    std::vector<double> resp(m);
    double ll = detail::e_step(values, g, resp);
    g.log_likelihood.push_back(ll);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        double n1 = 0.0, s1 = 0.0, s0 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            n1 += resp[i];
            s1 += resp[i] * values[i];
            s0 += (1.0 - resp[i]) * values[i];
        }
        const double n0 = static_cast<double>(m) - n1;
        std::array<double, 2> nk{n0, n1};
        std::array<double, 2> mu{n0 > 0 ? s0 / n0 : g.components[0].mean, n1 > 0 ? s1 / n1 : g.components[1].mean};
        std::array<double, 2> v{0.0, 0.0};
        for (std::size_t i = 0; i < m; ++i) {
            const double d0 = values[i] - mu[0], d1 = values[i] - mu[1];
            v[0] += (1.0 - resp[i]) * d0 * d0;
            v[1] += resp[i] * d1 * d1;
        }
        for (std::size_t k = 0; k < 2; ++k) {
            auto& c = g.components[k];
            if (nk[k] <= 0.0) continue;  // empty component keeps its parameters
            c.mean = mu[k];
            c.variance = std::max(v[k] / nk[k], g.variance_floor);
            c.weight = std::max(nk[k] / static_cast<double>(m), 1e-300);
        }
        const double wsum = g.components[0].weight + g.components[1].weight;
        g.components[0].weight /= wsum;
        g.components[1].weight /= wsum;

        const double next = detail::e_step(values, g, resp);
        g.log_likelihood.push_back(next);
        g.iterations = it + 1;
        if (next - ll < cfg.tolerance) {
            g.converged = true;
            break;
        }
        ll = next;
    }
    return g;
}

enum class DetectionProtocol { average, per_epoch };

struct DetectionScores {
    std::vector<double> scores;  // posterior probability of being corrupted
    DetectionProtocol protocol = DetectionProtocol::average;
};

/// Posterior probability of the higher-mean component for each value.
inline std::vector<double> score_corrupted(std::span<const double> values, const GMM1D& g) {
    const std::size_t hi = g.high();
    const auto& a = g.components[1 - hi];
    const auto& b = g.components[hi];
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double la = std::log(a.weight) + detail::log_normal_pdf(values[i], a);
        const double lb = std::log(b.weight) + detail::log_normal_pdf(values[i], b);
        // logistic of the log-odds, written to avoid overflow on either side
        const double d = la - lb;
        out[i] = d > 0 ? std::exp(-d) / (1.0 + std::exp(-d)) : 1.0 / (1.0 + std::exp(d));
    }
    return out;
}

/// Rows of `m` restricted to `subset` (all rows when subset is empty).
inline std::vector<std::size_t> resolve_subset(std::size_t n, std::span<const std::size_t> subset) {
    if (!subset.empty()) return {subset.begin(), subset.end()};
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

/// Per-node mean loss over epochs. Rows of `losses` are nodes.
inline std::vector<double> mean_loss(const Matrix& losses) {
    if (losses.cols() < 1) throw InputError("loss trajectory needs at least one epoch");
    std::vector<double> out(losses.rows());
    for (std::size_t i = 0; i < losses.rows(); ++i) {
        const auto r = losses.row(i);
        out[i] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    }
    return out;
}

struct AverageDetection {
    DetectionScores scores;  // one score per trajectory row
    GMM1D gmm;
};

/// Average protocol: fit the mixture on the mean losses of `fit_subset`
/// (all nodes if empty) and score every node.
inline AverageDetection detect_average(const Matrix& losses, std::span<const std::size_t> fit_subset = {},
                                       const GMMConfig& cfg = {}) {
    const auto avg = mean_loss(losses);
    const auto rows = resolve_subset(losses.rows(), fit_subset);
    std::vector<double> fit_values;
    fit_values.reserve(rows.size());
    for (auto r : rows) fit_values.push_back(avg[r]);
    AverageDetection out;
    out.gmm = fit_gmm_em(fit_values, cfg);
    out.scores = {score_corrupted(avg, out.gmm), DetectionProtocol::average};
    return out;
}

struct MaximumDetection {
    std::size_t best_epoch = 0;
    double best_auc = 0.0;
    std::vector<double> auc_series;  // NaN where the epoch's fit failed
    std::vector<std::string> failures;
};

/// Maximum protocol: per epoch, fit on `subset` (all nodes if empty), score
/// the same nodes and compute AUC against truth. Needs ground truth, so it is
/// an evaluation ceiling rather than a deployable detector. Ties keep the
/// first epoch.
inline MaximumDetection detect_maximum(const Matrix& losses, std::span<const char> truth,
                                       std::span<const std::size_t> subset = {}, const GMMConfig& cfg = {}) {
    if (truth.size() != losses.rows()) throw InputError("detect_maximum: truth mask length does not match trajectory");
    if (losses.cols() < 1) throw InputError("loss trajectory needs at least one epoch");
    const auto rows = resolve_subset(losses.rows(), subset);
    std::vector<char> sub_truth;
    for (auto r : rows) sub_truth.push_back(truth[r]);
    const auto positives = std::count_if(sub_truth.begin(), sub_truth.end(), [](char t) { return t != 0; });
    if (positives == 0 || static_cast<std::size_t>(positives) == sub_truth.size())
        throw InputError("roc_auc undefined: truth contains a single class");
    MaximumDetection out;
    out.auc_series.assign(losses.cols(), std::numeric_limits<double>::quiet_NaN());
    bool any = false;
    std::vector<double> vals(rows.size());
    for (std::size_t e = 0; e < losses.cols(); ++e) {
        for (std::size_t k = 0; k < rows.size(); ++k) vals[k] = losses(rows[k], e);
        try {
            const auto g = fit_gmm_em(vals, cfg);
            const double auc = roc_auc(score_corrupted(vals, g), sub_truth);
            out.auc_series[e] = auc;
            if (!any || auc > out.best_auc) {
                out.best_auc = auc;
                out.best_epoch = e;
            }
            any = true;
        } catch (const Error& err) {
            out.failures.push_back("epoch " + std::to_string(e) + ": " + err.what());
        }
    }
    if (!any) throw NumericError("detect_maximum: mixture fit failed on every epoch");
    return out;
}

}  // namespace noiseforge
