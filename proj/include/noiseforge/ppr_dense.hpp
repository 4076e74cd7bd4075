// SPDX-License-Identifier: Apache-2.0
#pragma once
// Exact PPR by a dense linear solve. Reference for the push solver; refuses
// graphs above kDenseOracleMaxNodes.

#include <Eigen/Dense>

#include "noiseforge/graph.hpp"

namespace noiseforge {

inline constexpr std::size_t kDenseOracleMaxNodes = 2000;

/// Solves (I - (1 - alpha) W^T) pi = alpha e_v with W = D^{-1} A and a
/// self-loop on every node without out-arcs.
inline std::vector<double> dense_ppr_oracle(const Graph& g, std::size_t source, double alpha) {
    const std::size_t n = g.num_nodes();
    if (n > kDenseOracleMaxNodes)
        throw InputError("dense PPR oracle refuses N=" + std::to_string(n) + " (limit " +
                         std::to_string(kDenseOracleMaxNodes) + ")");
    if (source >= n) throw InputError("dense PPR oracle: source out of range");
    Eigen::MatrixXd walk_t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t u = 0; u < n; ++u) {
        const auto nbrs = g.neighbors(u);
        const auto iu = static_cast<Eigen::Index>(u);
        if (nbrs.empty()) {
            walk_t(iu, iu) = 1.0;
            continue;
        }
        for (auto w : nbrs) walk_t(static_cast<Eigen::Index>(w), iu) += 1.0 / static_cast<double>(nbrs.size());
    }
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) - (1.0 - alpha) * walk_t;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    rhs(static_cast<Eigen::Index>(source)) = alpha;
    const Eigen::VectorXd pi = system.partialPivLu().solve(rhs);
    return {pi.data(), pi.data() + pi.size()};
}

}  // namespace noiseforge
