// SPDX-License-Identifier: Apache-2.0
#pragma once
// Personalized PageRank by forward (residual) push, and per-node class mass
// aggregation used by topology-based noise.
//
// The vector for source v solves  pi = alpha * e_v + (1 - alpha) * W^T pi,
// with W = D^{-1} A the random-walk matrix over out-arcs. Nodes without
// out-arcs carry an implicit self-loop, so a walk reaching them stays put.

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "noiseforge/core.hpp"
#include "noiseforge/graph.hpp"

namespace noiseforge {

struct PPRConfig {
    double alpha = 0.9;     // restart probability
    double epsilon = 1e-6;  // push threshold on residual entries (per unit source mass)
    std::uint64_t max_push_steps = 200'000'000;
    int final_sweeps = 2;  // unthresholded rounds over leftover residuals once the queue drains
};

inline void validate(const PPRConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InputError("PPR alpha must lie in (0, 1)");
    if (!(cfg.epsilon > 0.0)) throw InputError("PPR epsilon must be positive");
    if (cfg.final_sweeps < 0) throw InputError("PPR final_sweeps must be >= 0");
}

struct PPRVector {
    std::size_t source = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by node id
    double residual = 0.0;                                  // unpushed mass left behind

    double total() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.second;
        return s;
    }

    std::vector<double> dense(std::size_t n) const {
        std::vector<double> out(n, 0.0);
        for (auto [v, m] : entries) out[v] = m;
        return out;
    }
};

/// Reusable forward-push state for one source at a time. Scratch arrays are
/// sized once per graph and reset through the touched list.
class ForwardPush {
public:
    ForwardPush(const Graph& g, PPRConfig cfg)
        : g_(&g), cfg_(cfg), estimate_(g.num_nodes(), 0.0), residual_(g.num_nodes(), 0.0),
          queued_(g.num_nodes(), 0), seen_(g.num_nodes(), 0) {
        validate(cfg_);
    }

    void reset(std::size_t source) {
        for (auto v : touched_) {
            estimate_[v] = 0.0;
            residual_[v] = 0.0;
            queued_[v] = 0;
            seen_[v] = 0;
        }
        touched_.clear();
        queue_.clear();
        steps_ = 0;
        source_ = source;
        touch(static_cast<std::uint32_t>(source));
        residual_[source] = 1.0;
        enqueue(static_cast<std::uint32_t>(source));
    }

    /// Performs one push. Returns false once every residual is below epsilon.
    bool step() {
        while (!queue_.empty()) {
            const std::uint32_t u = queue_.front();
            queue_.pop_front();
            queued_[u] = 0;
            if (residual_[u] < cfg_.epsilon) continue;
            push(u, true);
            return true;
        }
        return false;
    }

    /// One synchronous push of every nonzero residual, ignoring the
    /// threshold. Each sweep scales the leftover residual by (1 - alpha).
    void sweep() {
        std::vector<std::pair<std::uint32_t, double>> pending;
        for (auto v : touched_)
            if (residual_[v] > 0.0) pending.emplace_back(v, residual_[v]);
        for (auto [v, r] : pending) residual_[v] -= r;
        for (auto [v, r] : pending) spread(v, r, false);
    }

    PPRVector run(std::size_t source) {
        if (source >= g_->num_nodes()) throw InputError("PPR source node " + std::to_string(source + 1) + " out of range");
        reset(source);
        while (step()) {
            if (steps_ > cfg_.max_push_steps)
                throw NumericError("PPR from node " + std::to_string(source + 1) + " did not converge within " +
                                   std::to_string(cfg_.max_push_steps) + " pushes; remaining residual " +
                                   format_double(residual_mass()));
        }
        for (int s = 0; s < cfg_.final_sweeps; ++s) sweep();
        return result();
    }

    PPRVector result() const {
        PPRVector out;
        out.source = source_;
        for (auto v : touched_)
            if (estimate_[v] > 0.0) out.entries.emplace_back(v, estimate_[v]);
        std::sort(out.entries.begin(), out.entries.end());
        out.residual = residual_mass();
        return out;
    }

    double estimated_mass() const {
        double s = 0.0;
        for (auto v : touched_) s += estimate_[v];
        return s;
    }

    double residual_mass() const {
        double s = 0.0;
        for (auto v : touched_) s += residual_[v];
        return s;
    }

    double max_residual() const {
        double m = 0.0;
        for (auto v : touched_) m = std::max(m, residual_[v]);
        return m;
    }

    std::uint64_t steps() const noexcept { return steps_; }

private:
    void push(std::uint32_t u, bool requeue) {
        const double ru = residual_[u];
        residual_[u] = 0.0;
        spread(u, ru, requeue);
    }

    void spread(std::uint32_t u, double ru, bool requeue) {
        ++steps_;
        const auto nbrs = g_->neighbors(u);
        if (nbrs.empty()) {
            // self-loop only: the geometric series returns all of ru to u
            estimate_[u] += ru;
            return;
        }
        estimate_[u] += cfg_.alpha * ru;
        const double share = (1.0 - cfg_.alpha) * ru / static_cast<double>(nbrs.size());
        for (auto w : nbrs) {
            touch(w);
            residual_[w] += share;
            if (requeue && residual_[w] >= cfg_.epsilon) enqueue(w);
        }
    }

    void touch(std::uint32_t v) {
        if (!seen_[v]) {
            seen_[v] = 1;
            touched_.push_back(v);
        }
    }

    void enqueue(std::uint32_t v) {
        if (!queued_[v]) {
            queued_[v] = 1;
            queue_.push_back(v);
        }
    }

    const Graph* g_;
    PPRConfig cfg_;
    std::vector<double> estimate_;
    std::vector<double> residual_;
    std::vector<char> queued_;
    std::vector<char> seen_;
    std::vector<std::uint32_t> touched_;
    std::deque<std::uint32_t> queue_;
    std::uint64_t steps_ = 0;
    std::size_t source_ = 0;
};

inline PPRVector ppr_single(const Graph& g, std::size_t source, const PPRConfig& cfg = {}) {
    ForwardPush push(g, cfg);
    return push.run(source);
}

/// Q(i, c) = sum of pi_i over nodes labelled c, divided by ||pi_i||_1.
inline Matrix ppr_class_mass(const Graph& g, std::span<const int> labels, const PPRConfig& cfg = {}) {
    validate(cfg);
    if (labels.size() != g.num_nodes()) throw InputError("ppr_class_mass: labels length does not match graph");
    const auto C = static_cast<std::size_t>(g.num_classes());
    Matrix q(g.num_nodes(), C);
    parallel_for(g.num_nodes(), [&](std::size_t begin, std::size_t end) {
        ForwardPush push(g, cfg);
        for (std::size_t i = begin; i < end; ++i) {
            const auto vec = push.run(i);
            double total = 0.0;
            for (auto [v, m] : vec.entries) {
                q(i, static_cast<std::size_t>(labels[v])) += m;
                total += m;
            }
            for (std::size_t c = 0; c < C; ++c) q(i, c) /= total;
        }
    });
    return q;
}

}  // namespace noiseforge
