// SPDX-License-Identifier: Apache-2.0
#pragma once
// Per-node transition probabilities T_D (N x C) for every noise family, and
// empirical class-level transition matrices.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noiseforge/core.hpp"
#include "noiseforge/graph.hpp"
#include "noiseforge/ppr.hpp"

namespace noiseforge {

enum class NoiseType { uniform, pairwise, topology, feature, confidence, llm };

inline std::string to_string(NoiseType t) {
    switch (t) {
        case NoiseType::uniform: return "uniform";
        case NoiseType::pairwise: return "pairwise";
        case NoiseType::topology: return "topology";
        case NoiseType::feature: return "feature";
        case NoiseType::confidence: return "confidence";
        case NoiseType::llm: return "llm";
    }
    return "uniform";
}

inline std::optional<NoiseType> noise_type_from_string(std::string_view s) {
    if (s == "llm-refined") return NoiseType::llm;
    for (auto t : {NoiseType::uniform, NoiseType::pairwise, NoiseType::topology, NoiseType::feature,
                   NoiseType::confidence, NoiseType::llm})
        if (to_string(t) == s) return t;
    return std::nullopt;
}

inline LabelProvenance provenance_of(NoiseType t) {
    switch (t) {
        case NoiseType::uniform: return LabelProvenance::uniform;
        case NoiseType::pairwise: return LabelProvenance::pairwise;
        case NoiseType::topology: return LabelProvenance::topology;
        case NoiseType::feature: return LabelProvenance::feature;
        case NoiseType::confidence: return LabelProvenance::confidence;
        case NoiseType::llm: return LabelProvenance::llm_refined;
    }
    return LabelProvenance::clean;
}

struct TransitionProbabilities {
    Matrix td;  // N x C, row-stochastic
    NoiseType type = NoiseType::uniform;
    std::map<std::string, std::string> metadata;

    std::size_t num_nodes() const noexcept { return td.rows(); }
    int num_classes() const noexcept { return static_cast<int>(td.cols()); }
};

struct PredictionMatrix {
    Matrix probs;  // N x C, row-stochastic
    std::string source = "builtin-classifier";
};

/// C x C class transition matrix; row i describes nodes whose clean label is i.
struct TransitionMatrix {
    Matrix values;
    bool counts = false;
    std::vector<bool> defined;  // false for classes without clean nodes
};

namespace detail {

inline void require_classes(int num_classes) {
    if (num_classes < 2) throw InputError("noise models need at least 2 classes");
}

inline void normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double x : m.row(i)) s += x;
        if (!(s > 0.0)) throw NumericError("row " + std::to_string(i + 1) + " has no probability mass");
        for (double& x : m.row(i)) x /= s;
    }
}

}  // namespace detail

/// Every row uniform over all C classes.
inline TransitionProbabilities build_uniform(const LabelSet& labels, int num_classes) {
    detail::require_classes(num_classes);
    validate_labels(labels, labels.size(), num_classes);
    const auto C = static_cast<std::size_t>(num_classes);
    return {Matrix(labels.size(), C, 1.0 / static_cast<double>(C)), NoiseType::uniform, {}};
}

/// Half the mass on the node's class y, half on (y mod C) + 1 (1-based),
/// i.e. (y + 1) mod C in 0-based ids.
inline TransitionProbabilities build_pairwise(const LabelSet& labels, int num_classes) {
    detail::require_classes(num_classes);
    validate_labels(labels, labels.size(), num_classes);
    const auto C = static_cast<std::size_t>(num_classes);
    Matrix td(labels.size(), C, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        td(i, y) = 0.5;
        td(i, (y + 1) % C) = 0.5;
    }
    return {std::move(td), NoiseType::pairwise, {}};
}

inline TransitionProbabilities build_topology(const Graph& g, const LabelSet& labels, const PPRConfig& cfg = {}) {
    detail::require_classes(g.num_classes());
    validate_labels(labels, g.num_nodes(), g.num_classes());
    TransitionProbabilities tp{ppr_class_mass(g, labels.values, cfg), NoiseType::topology, {}};
    tp.metadata["alpha"] = format_double(cfg.alpha);
    tp.metadata["epsilon"] = format_double(cfg.epsilon);
    return tp;
}

/// Mean feature vector per class. Throws on an empty class.
inline Matrix class_centroids(const Matrix& features, std::span<const int> labels, int num_classes) {
    const auto C = static_cast<std::size_t>(num_classes);
    Matrix z(C, features.cols(), 0.0);
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++counts[c];
        for (std::size_t k = 0; k < features.cols(); ++k) z(c, k) += features(i, k);
    }
    for (std::size_t c = 0; c < C; ++c) {
        if (counts[c] == 0) throw InputError("feature noise: class " + std::to_string(c + 1) + " has no nodes");
        for (double& x : z.row(c)) x /= static_cast<double>(counts[c]);
    }
    return z;
}

inline constexpr double kSimilarityFloor = 1e-12;

/// Cosine similarity clamped below at 0, plus kSimilarityFloor. A zero
/// centroid is treated as orthogonal to everything.
inline double rectified_cosine(std::span<const double> x, std::span<const double> z) {
    double dot = 0.0, nx = 0.0, nz = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        dot += x[k] * z[k];
        nx += x[k] * x[k];
        nz += z[k] * z[k];
    }
    const double cos = (nx > 0.0 && nz > 0.0) ? dot / (std::sqrt(nx) * std::sqrt(nz)) : 0.0;
    return std::max(cos, 0.0) + kSimilarityFloor;
}

inline void check_feature_rows(const Graph& g) {
    if (!g.has_features()) throw InputError("feature-based computation requires node features");
    const auto& x = g.features();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        bool nonzero = false;
        for (double v : x.row(i)) {
            if (!std::isfinite(v)) throw InputError("non-finite feature at node " + std::to_string(i + 1));
            nonzero |= v != 0.0;
        }
        if (!nonzero) throw InputError("all-zero feature vector at node " + std::to_string(i + 1));
    }
}

/// T_D(v, c) proportional to the rectified cosine between x_v and the class-c
/// centroid.
inline TransitionProbabilities build_feature(const Graph& g, const LabelSet& labels) {
    detail::require_classes(g.num_classes());
    validate_labels(labels, g.num_nodes(), g.num_classes());
    check_feature_rows(g);
    const auto& x = g.features();
    const Matrix z = class_centroids(x, labels.values, g.num_classes());
    const auto C = static_cast<std::size_t>(g.num_classes());
    Matrix td(g.num_nodes(), C);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) s += td(i, c) = rectified_cosine(x.row(i), z.row(c));
        for (std::size_t c = 0; c < C; ++c) td(i, c) /= s;
    }
    return {std::move(td), NoiseType::feature, {}};
}

/// T_D = P, renormalized row by row.
inline TransitionProbabilities build_confidence(const PredictionMatrix& pred, std::size_t num_nodes, int num_classes) {
    detail::require_classes(num_classes);
    if (pred.probs.rows() != num_nodes || pred.probs.cols() != static_cast<std::size_t>(num_classes))
        throw InputError("prediction matrix is " + std::to_string(pred.probs.rows()) + "x" +
                         std::to_string(pred.probs.cols()) + ", expected " + std::to_string(num_nodes) + "x" +
                         std::to_string(num_classes));
    Matrix td = pred.probs;
    for (double x : td.data())
        if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("prediction matrix has negative or non-finite entries");
    detail::normalize_rows(td);
    TransitionProbabilities tp{std::move(td), NoiseType::confidence, {}};
    tp.metadata["source"] = pred.source;
    return tp;
}

/// Raw counts: entry (i, j) counts nodes with clean label i and noisy label j.
inline Matrix transition_counts(const LabelSet& clean, const LabelSet& noisy, int num_classes) {
    if (clean.size() != noisy.size()) throw InputError("clean and noisy label sets differ in length");
    const auto C = static_cast<std::size_t>(num_classes);
    Matrix counts(C, C, 0.0);
    for (std::size_t i = 0; i < clean.size(); ++i)
        counts(static_cast<std::size_t>(clean[i]), static_cast<std::size_t>(noisy[i])) += 1.0;
    return counts;
}

inline TransitionMatrix normalize_transition(const Matrix& counts) {
    TransitionMatrix t{counts, false, std::vector<bool>(counts.rows(), true)};
    for (std::size_t i = 0; i < counts.rows(); ++i) {
        double s = 0.0;
        for (double x : counts.row(i)) s += x;
        if (s == 0.0) {
            t.defined[i] = false;
            continue;
        }
        for (double& x : t.values.row(i)) x /= s;
    }
    return t;
}

inline TransitionMatrix class_transition_matrix(const LabelSet& clean, const LabelSet& noisy, int num_classes) {
    return normalize_transition(transition_counts(clean, noisy, num_classes));
}

}  // namespace noiseforge
