#pragma once

#include "lessvfl/selectors.hpp"

#include <nlohmann/json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lessvfl {

struct MetricsPoint {
    long step = 0;
    double cumulative_mb = 0.0;
    std::string phase;
    double train_loss = 0.0;
    double test_loss = 0.0;
    std::optional<double> test_accuracy;
    double spurious_removed_fraction = 0.0;
    std::vector<int> surviving_features;  // per party
    std::vector<int> k_sizes;             // |K_m| per party, once known
};

struct MetricsRecord {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<MetricsPoint> series;
    FeatureMask final_mask;
    SignificantComponentSet components;
    std::vector<std::uint64_t> phase_bytes_up, phase_bytes_down;  // indexed by Phase
    nlohmann::json config_echo;
};

struct TargetSpec {
    double accuracy_target_fraction = 0.9;  // of a baseline's best test accuracy
    double removal_target = 0.8;
};

/// Fraction of known-spurious features removed; 1.0 by convention when no
/// features are flagged.
inline double spurious_removed_fraction(const std::vector<bool>& global_mask,
                                        const std::vector<bool>& flags) {
    if (global_mask.size() != flags.size())
        throw std::invalid_argument("spurious_removed_fraction: length mismatch");
    int flagged = 0, removed = 0;
    for (size_t j = 0; j < flags.size(); ++j) {
        if (!flags[j]) continue;
        ++flagged;
        if (!global_mask[j]) ++removed;
    }
    if (flagged == 0) return 1.0;
    return static_cast<double>(removed) / static_cast<double>(flagged);
}

/// Flattens a per-party mask to global feature order via the partition's
/// shard-local -> global column maps.
inline std::vector<bool> global_feature_mask(const FeatureMask& mask,
                                             const std::vector<std::vector<int>>& global_columns,
                                             int d) {
    std::vector<bool> global(static_cast<size_t>(d), false);
    for (size_t m = 0; m < mask.per_party.size(); ++m)
        for (size_t j = 0; j < mask.per_party[m].size(); ++j)
            global[static_cast<size_t>(global_columns[m][j])] = mask.per_party[m][j];
    return global;
}

/// Smallest cumulative MB at which the accuracy and removal targets hold
/// simultaneously; nullopt if they never do.
inline std::optional<double> cost_to_targets(const MetricsRecord& record,
                                             double baseline_best_accuracy,
                                             const TargetSpec& targets) {
    const double acc_bar = targets.accuracy_target_fraction * baseline_best_accuracy;
    for (const MetricsPoint& p : record.series) {
        if (!p.test_accuracy) continue;
        if (*p.test_accuracy >= acc_bar && p.spurious_removed_fraction >= targets.removal_target)
            return p.cumulative_mb;
    }
    return std::nullopt;
}

enum class Significance { Significant, NonSignificant };

/// Empirical approximation of input significance: feature j is reported
/// non-significant iff replacing it by every grid value, at every probe
/// sample, changes no network output by more than tol. A finite grid stands
/// in for the universal quantifier; tol = 0 covers exact zero-column nets.
inline Significance check_significance(const DenseNetwork& net, int input_index,
                                       const Matrix& probe_samples,
                                       std::vector<double> replacement_grid, double tol) {
    if (replacement_grid.empty())
        throw std::invalid_argument("check_significance: empty replacement grid");
    if (probe_samples.rows() == 0)
        throw std::invalid_argument("check_significance: no probe samples");
    if (input_index < 0 || input_index >= net.input_dim())
        throw std::invalid_argument("check_significance: input index out of range");
    replacement_grid.push_back(probe_samples.col(input_index).minCoeff());
    replacement_grid.push_back(probe_samples.col(input_index).maxCoeff());

    Matrix base = forward(net, probe_samples);
    Matrix probe = probe_samples;
    for (double s : replacement_grid) {
        probe.col(input_index).setConstant(s);
        Matrix out = forward(net, probe);
        if (((out - base).array().abs() > tol).any()) return Significance::Significant;
    }
    return Significance::NonSignificant;
}

/// Default grid for significance probing: 11 evenly spaced values in [-3, 3].
inline std::vector<double> default_replacement_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 10; ++i) g.push_back(-3.0 + 0.6 * i);
    return g;
}

}  // namespace lessvfl
