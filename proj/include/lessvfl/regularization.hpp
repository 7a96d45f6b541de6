#pragma once

#include "lessvfl/nn.hpp"

#include <vector>

namespace lessvfl {

// Group j = column j of the first-layer weight matrix: every weight fed by
// input feature j. Biases and deeper layers belong to no group.

inline Vector group_norms(const DenseNetwork& net) {
    const Matrix& w = net.layers.front().weights;
    Vector norms(w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) norms(j) = w.col(j).norm();
    return norms;
}

/// L2,1 penalty: sum of per-group Euclidean norms.
inline double group_lasso_penalty(const DenseNetwork& net) {
    return group_norms(net).sum();
}

/// Closed-form proximal operator of lambda*eta*||.||_2, applied per group.
/// Groups at or below the threshold become exact zeros; others shrink by
/// exactly lambda*eta along their own direction.
inline void prox_group_lasso(DenseNetwork& net, double lambda, double eta) {
    const double t = lambda * eta;
    if (!std::isfinite(t) || t < 0.0)
        throw std::invalid_argument("prox_group_lasso: lambda*eta must be finite and non-negative");
    if (t == 0.0) return;
    Matrix& w = net.layers.front().weights;
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double n = w.col(j).norm();
        if (n > t)
            w.col(j) *= (1.0 - t / n);
        else
            w.col(j).setZero();
    }
}

/// Indices whose group norm is strictly positive. prox writes exact zeros,
/// so the comparison is against literal zero.
inline std::vector<int> surviving_groups(const DenseNetwork& net) {
    const Matrix& w = net.layers.front().weights;
    std::vector<int> alive;
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        if (w.col(j).norm() > 0.0) alive.push_back(static_cast<int>(j));
    return alive;
}

}  // namespace lessvfl
