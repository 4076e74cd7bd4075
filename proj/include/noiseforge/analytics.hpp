// SPDX-License-Identifier: Apache-2.0
#pragma once
// Diagnostics over noisy label sets: prediction entropy, off-diagonal
// transition entropy, k-hop label consistency, feature-to-centroid
// similarity and correlation coefficients.

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "noiseforge/core.hpp"
#include "noiseforge/graph.hpp"
#include "noiseforge/noise_models.hpp"

namespace noiseforge {

struct EntropyReport {
    std::vector<double> values;  // nats; NaN where undefined
    std::vector<char> defined;
    double aggregate = 0.0;
    std::string unit;  // node-prediction | transition-row | global-offdiag
};

/// Shannon entropy in nats with 0 log 0 = 0. Input need not be normalized.
inline double entropy(std::span<const double> p) {
    double total = 0.0;
    for (double x : p) total += x;
    if (!(total > 0.0)) return 0.0;
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) {
            const double q = x / total;
            h -= q * std::log(q);
        }
    return h;
}

inline EntropyReport prediction_entropy(const PredictionMatrix& pred) {
    EntropyReport r;
    r.unit = "node-prediction";
    r.values.resize(pred.probs.rows());
    r.defined.assign(pred.probs.rows(), 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.probs.rows(); ++i) sum += r.values[i] = entropy(pred.probs.row(i));
    r.aggregate = pred.probs.rows() ? sum / static_cast<double>(pred.probs.rows()) : 0.0;
    return r;
}

enum class OffdiagAggregation { row_mean, global };

/// Entropy of each row's off-diagonal entries after normalizing them. Rows
/// with no off-diagonal mass are flagged and excluded from the aggregate,
/// which is their unweighted mean (row_mean) or the entropy of all
/// off-diagonal entries pooled into one distribution (global).
inline EntropyReport offdiag_entropy(const TransitionMatrix& t, OffdiagAggregation agg = OffdiagAggregation::row_mean) {
    const std::size_t C = t.values.rows();
    if (C < 2 || t.values.cols() != C) throw InputError("offdiag_entropy needs a square matrix with C >= 2");
    EntropyReport r;
    r.unit = agg == OffdiagAggregation::row_mean ? "transition-row" : "global-offdiag";
    r.values.assign(C, std::numeric_limits<double>::quiet_NaN());
    r.defined.assign(C, 0);
    std::vector<double> pooled;
    std::vector<double> off;
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < C; ++i) {
        off.clear();
        double mass = 0.0;
        for (std::size_t j = 0; j < C; ++j)
            if (j != i) {
                off.push_back(t.values(i, j));
                mass += t.values(i, j);
            }
        if ((!t.defined.empty() && !t.defined[i]) || !(mass > 0.0)) continue;
        r.defined[i] = 1;
        sum += r.values[i] = entropy(off);
        ++counted;
        pooled.insert(pooled.end(), off.begin(), off.end());
    }
    if (counted == 0) throw InputError("offdiag_entropy: no corruption mass in any row");
    r.aggregate = agg == OffdiagAggregation::row_mean ? sum / static_cast<double>(counted) : entropy(pooled);
    return r;
}

struct ConsistencyReport {
    std::vector<int> ks;
    std::vector<std::vector<double>> scores;  // [k index][node], NaN if undefined
    std::vector<std::vector<char>> defined;
    bool exact_distance = false;
};

/// S_k(v): fraction of nodes within shortest-path distance k of v (or at
/// exactly distance k when exact_distance is set), excluding v, whose label
/// equals v's. Nodes with an empty neighborhood are flagged undefined.
inline ConsistencyReport consistency_scores(const Graph& g, std::span<const int> labels, const std::vector<int>& ks,
                                            bool exact_distance = false) {
    if (labels.size() != g.num_nodes()) throw InputError("consistency_scores: labels length does not match graph");
    int kmax = 0;
    for (int k : ks) {
        if (k < 1) throw InputError("consistency_scores: hop counts must be >= 1");
        kmax = std::max(kmax, k);
    }
    const std::size_t n = g.num_nodes();
    ConsistencyReport rep;
    rep.ks = ks;
    rep.exact_distance = exact_distance;
    rep.scores.assign(ks.size(), std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
    rep.defined.assign(ks.size(), std::vector<char>(n, 0));
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<int> dist(n, -1);
        std::vector<std::uint32_t> frontier, next, visited;
        std::vector<std::size_t> total(static_cast<std::size_t>(kmax) + 1), same(static_cast<std::size_t>(kmax) + 1);
        for (std::size_t v = begin; v < end; ++v) {
            std::fill(total.begin(), total.end(), 0);
            std::fill(same.begin(), same.end(), 0);
            frontier.assign(1, static_cast<std::uint32_t>(v));
            visited.assign(1, static_cast<std::uint32_t>(v));
            dist[v] = 0;
            for (int depth = 1; depth <= kmax && !frontier.empty(); ++depth) {
                next.clear();
                for (auto u : frontier)
                    for (auto w : g.neighbors(u))
                        if (dist[w] < 0) {
                            dist[w] = depth;
                            visited.push_back(w);
                            next.push_back(w);
                            ++total[static_cast<std::size_t>(depth)];
                            same[static_cast<std::size_t>(depth)] += labels[w] == labels[v];
                        }
                std::swap(frontier, next);
            }
            for (auto u : visited) dist[u] = -1;
            for (std::size_t ki = 0; ki < ks.size(); ++ki) {
                const auto k = static_cast<std::size_t>(ks[ki]);
                std::size_t t = 0, s = 0;
                for (std::size_t d = exact_distance ? k : 1; d <= k; ++d) {
                    t += total[d];
                    s += same[d];
                }
                if (t == 0) continue;
                rep.defined[ki][v] = 1;
                rep.scores[ki][v] = static_cast<double>(s) / static_cast<double>(t);
            }
        }
    });
    return rep;
}

struct ConsistencyGap {
    std::vector<int> ks;
    std::vector<double> clean_mean;
    std::vector<double> corrupted_mean;
    std::vector<double> gap;  // clean_mean - corrupted_mean
};

/// Group means of S_k over defined nodes, split by the corruption mask.
inline ConsistencyGap consistency_gap(const ConsistencyReport& rep, std::span<const char> corrupted) {
    ConsistencyGap out;
    out.ks = rep.ks;
    for (std::size_t ki = 0; ki < rep.ks.size(); ++ki) {
        double sc = 0, sn = 0;
        std::size_t nc = 0, nn = 0;
        for (std::size_t v = 0; v < corrupted.size(); ++v) {
            if (!rep.defined[ki][v]) continue;
            if (corrupted[v]) {
                sn += rep.scores[ki][v];
                ++nn;
            } else {
                sc += rep.scores[ki][v];
                ++nc;
            }
        }
        if (nc == 0 || nn == 0)
            throw InputError("consistency_gap: empty " + std::string(nc == 0 ? "clean" : "corrupted") + " group for k=" +
                             std::to_string(rep.ks[ki]));
        out.clean_mean.push_back(sc / static_cast<double>(nc));
        out.corrupted_mean.push_back(sn / static_cast<double>(nn));
        out.gap.push_back(out.clean_mean.back() - out.corrupted_mean.back());
    }
    return out;
}

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> counts;
};

/// Fixed-width histogram over [lo, hi]; values outside are clamped into the
/// end bins.
inline Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
    Histogram h;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
    for (double v : values) {
        auto b = static_cast<long long>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
        b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

struct SampleSummary {
    std::size_t count = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
};

inline SampleSummary summarize(std::span<const double> v) {
    SampleSummary s;
    s.count = v.size();
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(v.size());
    return s;
}

struct FeatureSimilaritySplit {
    std::vector<double> clean;
    std::vector<double> corrupted;
    Histogram clean_hist;
    Histogram corrupted_hist;
    SampleSummary clean_summary;
    SampleSummary corrupted_summary;
};

/// Rectified cosine between each node's features and the centroid of its
/// (observed) class, computed as in feature-based noise, split by mask.
inline FeatureSimilaritySplit feature_similarity_split(const Graph& g, std::span<const int> labels,
                                                       std::span<const char> corrupted, std::size_t bins = 20) {
    check_feature_rows(g);
    if (labels.size() != g.num_nodes() || corrupted.size() != g.num_nodes())
        throw InputError("feature_similarity_split: length mismatch");
    const Matrix z = class_centroids(g.features(), labels, g.num_classes());
    FeatureSimilaritySplit out;
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        const double s = rectified_cosine(g.features().row(i), z.row(static_cast<std::size_t>(labels[i])));
        (corrupted[i] ? out.corrupted : out.clean).push_back(s);
    }
    out.clean_hist = histogram(out.clean, 0.0, 1.0, bins);
    out.corrupted_hist = histogram(out.corrupted, 0.0, 1.0, bins);
    out.clean_summary = summarize(out.clean);
    out.corrupted_summary = summarize(out.corrupted);
    return out;
}

/// Ranks 1..n with ties replaced by their average rank.
inline std::vector<double> midranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[order[j]] == v[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) r[order[k]] = 0.5 * static_cast<double>(i + 1 + j);
        i = j;
    }
    return r;
}

enum class CorrelationMethod { pearson, spearman };

inline double correlation(std::span<const double> xs, std::span<const double> ys,
                          CorrelationMethod method = CorrelationMethod::pearson) {
    if (xs.size() != ys.size()) throw InputError("correlation: inputs differ in length");
    if (xs.size() < 3) throw InputError("correlation needs at least 3 points");
    if (method == CorrelationMethod::spearman) {
        const auto rx = midranks(xs), ry = midranks(ys);
        return correlation(rx, ry, CorrelationMethod::pearson);
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw InputError("correlation undefined: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace noiseforge
