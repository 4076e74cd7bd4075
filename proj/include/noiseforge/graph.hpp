// SPDX-License-Identifier: Apache-2.0
#pragma once
// Immutable node-classification graph in CSR form, label sets, node
// homophily and seeded train/val/test splits.
//
// Node and class ids are 0-based in memory; every file format is 1-based.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noiseforge/core.hpp"

namespace noiseforge {

enum class LabelProvenance {
    clean,
    uniform,
    pairwise,
    topology,
    feature,
    confidence,
    llm_naive,
    llm_reasoned,
    llm_refined,
};

inline std::string to_string(LabelProvenance p) {
    switch (p) {
        case LabelProvenance::clean: return "clean";
        case LabelProvenance::uniform: return "uniform";
        case LabelProvenance::pairwise: return "pairwise";
        case LabelProvenance::topology: return "topology";
        case LabelProvenance::feature: return "feature";
        case LabelProvenance::confidence: return "confidence";
        case LabelProvenance::llm_naive: return "llm-naive";
        case LabelProvenance::llm_reasoned: return "llm-reasoned";
        case LabelProvenance::llm_refined: return "llm-refined";
    }
    return "clean";
}

inline std::optional<LabelProvenance> provenance_from_string(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(LabelProvenance::llm_refined); ++i) {
        const auto p = static_cast<LabelProvenance>(i);
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

struct LabelSet {
    std::vector<int> values;  // 0-based class ids
    LabelProvenance provenance = LabelProvenance::clean;

    std::size_t size() const noexcept { return values.size(); }
    int operator[](std::size_t i) const { return values[i]; }
};

inline void validate_labels(const LabelSet& labels, std::size_t n, int num_classes) {
    if (labels.size() != n)
        throw InputError("label set has " + std::to_string(labels.size()) + " entries, expected " +
                         std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
        if (labels.values[i] < 0 || labels.values[i] >= num_classes)
            throw InputError("label out of range at node " + std::to_string(i + 1));
}

struct NodeText {
    std::string title;
    std::string description;
};

/// Plain construction input for Graph. Edges are 0-based (src, dst) pairs.
struct GraphData {
    std::size_t num_nodes = 0;
    int num_classes = 0;
    bool directed = false;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::vector<int> labels;
    Matrix node_features;  // empty when absent
    Matrix edge_features;  // carried through, unused by the algorithms
    std::vector<NodeText> texts;
    std::vector<std::string> class_names;
    std::string name;
};

class Graph {
public:
    Graph() = default;

    /// Builds the CSR form. Self-loops are dropped, undirected graphs are
    /// symmetrized and duplicate arcs collapse to one.
    explicit Graph(GraphData d)
        : num_nodes_(d.num_nodes),
          num_classes_(d.num_classes),
          directed_(d.directed),
          labels_(std::move(d.labels)),
          features_(std::move(d.node_features)),
          edge_features_(std::move(d.edge_features)),
          texts_(std::move(d.texts)),
          class_names_(std::move(d.class_names)),
          name_(std::move(d.name)) {
        if (num_classes_ < 1) throw InputError("num_classes must be >= 1");
        validate_labels(LabelSet{labels_, LabelProvenance::clean}, num_nodes_, num_classes_);
        if (!features_.empty() && features_.rows() != num_nodes_)
            throw InputError("feature matrix has " + std::to_string(features_.rows()) + " rows, expected " +
                             std::to_string(num_nodes_));
        if (!texts_.empty() && texts_.size() != num_nodes_)
            throw InputError("text attributes cover " + std::to_string(texts_.size()) + " nodes, expected " +
                             std::to_string(num_nodes_));
        if (!class_names_.empty() && class_names_.size() != static_cast<std::size_t>(num_classes_))
            throw InputError("class_names has " + std::to_string(class_names_.size()) + " entries, expected " +
                             std::to_string(num_classes_));

        std::vector<std::pair<std::uint32_t, std::uint32_t>> arcs;
        arcs.reserve(d.edges.size() * (directed_ ? 1 : 2));
        for (auto [s, t] : d.edges) {
            if (s >= num_nodes_ || t >= num_nodes_)
                throw InputError("edge endpoint out of range: (" + std::to_string(s + 1) + ", " +
                                 std::to_string(t + 1) + ")");
            if (s == t) continue;
            arcs.emplace_back(s, t);
            if (!directed_) arcs.emplace_back(t, s);
        }
        std::sort(arcs.begin(), arcs.end());
        arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

        offsets_.assign(num_nodes_ + 1, 0);
        for (auto [s, t] : arcs) ++offsets_[s + 1];
        for (std::size_t i = 0; i < num_nodes_; ++i) offsets_[i + 1] += offsets_[i];
        targets_.resize(arcs.size());
        for (std::size_t k = 0; k < arcs.size(); ++k) targets_[k] = arcs[k].second;
    }

    std::size_t num_nodes() const noexcept { return num_nodes_; }
    int num_classes() const noexcept { return num_classes_; }
    bool directed() const noexcept { return directed_; }

    /// Stored (directed) arcs; twice the edge count for undirected graphs.
    std::size_t num_arcs() const noexcept { return targets_.size(); }
    /// Undirected edges for undirected graphs, arcs otherwise.
    std::size_t num_edges() const noexcept { return directed_ ? targets_.size() : targets_.size() / 2; }

    std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }
    std::span<const std::uint32_t> neighbors(std::size_t v) const {
        return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
    const std::vector<std::uint32_t>& targets() const noexcept { return targets_; }

    const std::vector<int>& labels() const noexcept { return labels_; }
    LabelSet label_set() const { return LabelSet{labels_, LabelProvenance::clean}; }

    bool has_features() const noexcept { return !features_.empty(); }
    const Matrix& features() const noexcept { return features_; }
    const Matrix& edge_features() const noexcept { return edge_features_; }

    bool has_texts() const noexcept { return !texts_.empty(); }
    const std::vector<NodeText>& texts() const noexcept { return texts_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    const std::string& name() const noexcept { return name_; }

    /// Arc list (0-based), one entry per stored arc for directed graphs and
    /// one per undirected edge (src < dst) otherwise.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list() const {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        for (std::size_t v = 0; v < num_nodes_; ++v)
            for (auto t : neighbors(v))
                if (directed_ || v < t) out.emplace_back(static_cast<std::uint32_t>(v), t);
        return out;
    }

    /// Copy with the same topology and metadata but different labels.
    Graph with_labels(std::vector<int> labels) const {
        Graph g = *this;
        g.labels_ = std::move(labels);
        validate_labels(g.label_set(), num_nodes_, num_classes_);
        return g;
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.num_nodes_ == b.num_nodes_ && a.num_classes_ == b.num_classes_ && a.directed_ == b.directed_ &&
               a.offsets_ == b.offsets_ && a.targets_ == b.targets_ && a.labels_ == b.labels_ &&
               a.features_ == b.features_ && a.class_names_ == b.class_names_;
    }

private:
    std::size_t num_nodes_ = 0;
    int num_classes_ = 0;
    bool directed_ = false;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> targets_;
    std::vector<int> labels_;
    Matrix features_;
    Matrix edge_features_;
    std::vector<NodeText> texts_;
    std::vector<std::string> class_names_;
    std::string name_;
};

/// Mean over non-isolated nodes of the fraction of neighbors sharing the
/// node's label.
inline double node_homophily(const Graph& g, std::span<const int> labels) {
    if (g.num_arcs() == 0) throw InputError("homophily undefined: graph has no edges");
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        const auto nbrs = g.neighbors(v);
        if (nbrs.empty()) continue;
        std::size_t same = 0;
        for (auto u : nbrs) same += labels[u] == labels[v];
        total += static_cast<double>(same) / static_cast<double>(nbrs.size());
        ++counted;
    }
    return total / static_cast<double>(counted);
}

inline double node_homophily(const Graph& g) { return node_homophily(g, g.labels()); }

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct NodeSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

namespace detail {

inline std::size_t ratio_count(std::size_t n, double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
}

inline void check_ratios(const SplitRatios& r) {
    if (r.train < 0 || r.val < 0 || r.test < 0) throw InputError("split ratios must be nonnegative");
    if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) throw InputError("split ratios must sum to 1");
}

}  // namespace detail

/// Seeded partition of [0, n). Validation and test sizes are floor(n * ratio);
/// the remainder goes to train. Each index list is sorted ascending.
inline NodeSplit split_nodes(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
    detail::check_ratios(ratios);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Pcg32 rng(seed);
    shuffle(order, rng);
    const std::size_t n_val = detail::ratio_count(n, ratios.val);
    const std::size_t n_test = detail::ratio_count(n, ratios.test);
    NodeSplit s;
    s.val.assign(order.begin(), order.begin() + n_val);
    s.test.assign(order.begin() + n_val, order.begin() + n_val + n_test);
    s.train.assign(order.begin() + n_val + n_test, order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

/// Stratified variant: the ratio rule is applied inside every class.
inline NodeSplit split_nodes_stratified(std::span<const int> labels, int num_classes, const SplitRatios& ratios,
                                        std::uint64_t seed) {
    detail::check_ratios(ratios);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    NodeSplit s;
    for (int c = 0; c < num_classes; ++c) {
        auto& members = by_class[static_cast<std::size_t>(c)];
        if (members.empty()) throw InputError("stratified split: class " + std::to_string(c + 1) + " is empty");
        Pcg32 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        shuffle(members, rng);
        const std::size_t n_val = detail::ratio_count(members.size(), ratios.val);
        const std::size_t n_test = detail::ratio_count(members.size(), ratios.test);
        s.val.insert(s.val.end(), members.begin(), members.begin() + n_val);
        s.test.insert(s.test.end(), members.begin() + n_val, members.begin() + n_val + n_test);
        s.train.insert(s.train.end(), members.begin() + n_val + n_test, members.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

}  // namespace noiseforge
