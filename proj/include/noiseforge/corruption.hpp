// SPDX-License-Identifier: Apache-2.0
#pragma once
// Instance-dependent label corruption driven by per-node transition
// probabilities, and multi-realization corruption frequencies.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "noiseforge/core.hpp"
#include "noiseforge/graph.hpp"
#include "noiseforge/noise_models.hpp"

namespace noiseforge {

struct NoiseSpec {
    NoiseType type = NoiseType::uniform;
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::size_t realizations = 10;
};

inline void validate(const NoiseSpec& spec) {
    if (!(spec.rate >= 0.0 && spec.rate <= 1.0)) throw InputError("noise rate must lie in [0, 1]");
    if (spec.realizations < 1) throw InputError("realization count must be >= 1");
}

struct CorruptionResult {
    LabelSet noisy;
    std::vector<char> corrupted;  // 1 where noisy differs from clean
    std::size_t num_corrupted = 0;
    double achieved_rate = 0.0;  // floor(N * rate) / N
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

struct CorruptionFrequency {
    std::vector<std::uint32_t> counts;
    std::size_t realizations = 0;
};

/// Number of nodes to corrupt: floor(N * rate).
inline std::size_t corruption_count(std::size_t n, double rate) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate));
}

/// Draws k distinct indices with probability proportional to weight, using
/// exponential keys: every index i receives key u_i^(1/w_i) (computed as
/// log(u_i) / w_i), and the k largest keys win. Exactly one uniform is drawn
/// per index, in index order, so the draw does not depend on how the caller
/// orders its work. Zero-weight indices are never selected. Output sorted.
inline std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights, std::size_t k,
                                                                    Pcg32& rng) {
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double u = rng.uniform_pos();
        const double w = weights[i];
        if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("sampling weights must be finite and nonnegative");
        if (w > 0.0) keyed.emplace_back(std::log(u) / w, i);
    }
    if (k > keyed.size())
        throw InputError("cannot draw " + std::to_string(k) + " indices from " + std::to_string(keyed.size()) +
                         " positive weights");
    const auto better = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k), keyed.end(), better);
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) out.push_back(keyed[j].second);
    std::sort(out.begin(), out.end());
    return out;
}

/// Corruption weight of each node: total transition mass off its label.
inline std::vector<double> corruption_weights(const Matrix& td, std::span<const int> labels) {
    std::vector<double> w(td.rows(), 0.0);
    for (std::size_t i = 0; i < td.rows(); ++i) {
        const auto row = td.row(i);
        double off = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c)
            if (static_cast<int>(c) != labels[i]) off += row[c];
        w[i] = off;
    }
    return w;
}

/// One corruption realization.
///
/// floor(N * rate) nodes are drawn without replacement, weighted by their
/// corruption weight. Each drawn node gets a new label sampled from its
/// T_D row with the true class zeroed and the rest renormalized. If fewer
/// nodes than required have positive weight, the remainder is drawn
/// uniformly from the untouched nodes; a row whose off-label mass is zero
/// falls back to uniform over the other classes. Both cases add a warning.
inline CorruptionResult corrupt(const Matrix& td, double rate, const LabelSet& clean, std::uint64_t seed) {
    const std::size_t n = clean.size();
    if (!(rate >= 0.0 && rate <= 1.0)) throw InputError("noise rate must lie in [0, 1]");
    if (td.rows() != n) throw InputError("transition probabilities have " + std::to_string(td.rows()) + " rows, expected " + std::to_string(n));
    const auto C = td.cols();
    if (C < 2) throw InputError("corruption needs at least 2 classes");
    validate_labels(clean, n, static_cast<int>(C));
    if (!rows_stochastic(td, 1e-6)) throw InputError("transition probabilities are not row-stochastic");

    CorruptionResult res;
    res.seed = seed;
    res.noisy = clean;
    res.corrupted.assign(n, 0);
    const std::size_t target = corruption_count(n, rate);
    res.achieved_rate = n ? static_cast<double>(target) / static_cast<double>(n) : 0.0;
    if (target == 0) return res;

    Pcg32 rng(seed);
    const auto weights = corruption_weights(td, clean.values);
    const auto positive = static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
    std::vector<std::size_t> picks;
    if (target <= positive) {
        picks = weighted_sample_without_replacement(weights, target, rng);
    } else {
        picks = weighted_sample_without_replacement(weights, positive, rng);
        std::vector<double> rest(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) rest[i] = weights[i] > 0.0 ? 0.0 : 1.0;
        const auto extra = weighted_sample_without_replacement(rest, target - positive, rng);
        picks.insert(picks.end(), extra.begin(), extra.end());
        std::sort(picks.begin(), picks.end());
        res.warnings.push_back("only " + std::to_string(positive) + " nodes have positive corruption weight; " +
                               std::to_string(target - positive) + " drawn uniformly from the rest");
    }

    std::vector<double> row(C);
    for (const std::size_t i : picks) {
        const auto y = static_cast<std::size_t>(clean[i]);
        const auto src = td.row(i);
        std::copy(src.begin(), src.end(), row.begin());
        row[y] = 0.0;
        double total = std::accumulate(row.begin(), row.end(), 0.0);
        if (!(total > 0.0)) {
            std::fill(row.begin(), row.end(), 1.0);
            row[y] = 0.0;
            total = static_cast<double>(C - 1);
            res.warnings.push_back("node " + std::to_string(i + 1) +
                                   ": no off-label transition mass, new label drawn uniformly");
        }
        const double target_mass = rng.uniform() * total;
        std::size_t chosen = C;
        double cum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            if (row[c] <= 0.0) continue;
            cum += row[c];
            chosen = c;
            if (cum > target_mass) break;
        }
        res.noisy.values[i] = static_cast<int>(chosen);
        res.corrupted[i] = 1;
    }
    res.num_corrupted = picks.size();
    return res;
}

struct CorruptionRun {
    std::vector<CorruptionResult> realizations;
    CorruptionFrequency frequency;
};

/// R independent realizations; realization r uses derive_seed(spec.seed, r).
inline CorruptionRun corrupt_many(const Matrix& td, const NoiseSpec& spec, const LabelSet& clean) {
    validate(spec);
    CorruptionRun run;
    run.realizations.resize(spec.realizations);
    parallel_for(spec.realizations, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            try {
                run.realizations[r] = corrupt(td, spec.rate, clean, derive_seed(spec.seed, r));
            } catch (const Error& e) {
                rethrow_with_context(e, "realization " + std::to_string(r) + ": ");
            }
            run.realizations[r].noisy.provenance = provenance_of(spec.type);
        }
    });
    run.frequency.realizations = spec.realizations;
    run.frequency.counts.assign(clean.size(), 0);
    for (const auto& res : run.realizations)
        for (std::size_t i = 0; i < clean.size(); ++i) run.frequency.counts[i] += static_cast<std::uint32_t>(res.corrupted[i]);
    return run;
}

}  // namespace noiseforge
