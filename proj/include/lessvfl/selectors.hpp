#pragma once

#include "lessvfl/vfl.hpp"

#include <functional>
#include <vector>

namespace lessvfl {

/// Per party: sorted indices of surviving embedding components (K_m).
struct SignificantComponentSet {
    std::vector<std::vector<int>> per_party;

    static SignificantComponentSet all_components(const VflSystem& system) {
        SignificantComponentSet k;
        for (const Party& p : system.parties) {
            std::vector<int> full(p.embedding_dim());
            std::iota(full.begin(), full.end(), 0);
            k.per_party.push_back(std::move(full));
        }
        return k;
    }
};

/// Full-dataset embeddings computed once from the pre-trained party nets;
/// immutable for the rest of the pipeline.
struct FrozenEmbeddings {
    std::vector<Matrix> per_party;  // each N x d_e_m
};

/// Per party: survival flag per input feature (false = first-layer column
/// is exactly zero).
struct FeatureMask {
    std::vector<std::vector<bool>> per_party;
};

using EpochCallback = std::function<void(int epoch, double train_loss)>;

/// Stage 1: unregularized VFL empirical risk minimization.
inline void pretrain(VflSystem& system, const BatchPlan& plan, int epochs, LossKind loss_kind,
                     const EpochCallback& on_epoch = {}) {
    if (epochs < 1) throw std::invalid_argument("pretrain: epochs must be >= 1");
    system.phase = Phase::Pretrain;
    const int spe = plan.steps_per_epoch();
    long step = 0;
    for (int e = 0; e < epochs; ++e) {
        double loss_sum = 0.0;
        for (int s = 0; s < spe; ++s) loss_sum += vfl_train_step(system, plan, step++, loss_kind);
        if (on_epoch) on_epoch(e, loss_sum / spe);
    }
}

/// The single extra communication round of stages 2-3: every party uploads
/// its full-dataset pre-trained embeddings.
inline FrozenEmbeddings freeze_embeddings(VflSystem& system) {
    if (system.phase != Phase::Pretrain)
        throw std::logic_error("freeze_embeddings: embeddings are frozen once, after pre-training");
    system.phase = Phase::Stage2Upload;
    std::vector<int> all(static_cast<size_t>(system.num_samples()));
    std::iota(all.begin(), all.end(), 0);
    FrozenEmbeddings frozen;
    for (int m = 0; m < static_cast<int>(system.parties.size()); ++m)
        frozen.per_party.push_back(party_embed(system, m, all, /*record=*/true));
    system.ledger.add_round(Phase::Stage2Upload);
    system.phase = Phase::Stage3;
    return frozen;
}

/// Stage 2: server-local group lasso over the frozen concatenated
/// embeddings. P-SGD on the server model; adds nothing to the ledger.
/// K_m is read off the surviving server input groups, partitioned by party.
inline SignificantComponentSet select_components(VflSystem& system, const FrozenEmbeddings& frozen,
                                                 double lambda_s, double eta_s, int t1_epochs,
                                                 int batch_size, LossKind loss_kind,
                                                 std::uint64_t seed,
                                                 const EpochCallback& on_epoch = {}) {
    if (lambda_s < 0.0) throw std::invalid_argument("select_components: lambda_s must be >= 0");
    if (eta_s <= 0.0) throw std::invalid_argument("select_components: eta_s must be > 0");
    const int n = system.num_samples();
    Matrix inputs(n, system.server.input_dim());
    for (size_t m = 0; m < frozen.per_party.size(); ++m)
        inputs.middleCols(system.embedding_offset(static_cast<int>(m)),
                          system.parties[m].embedding_dim()) = frozen.per_party[m];

    BatchPlan plan{n, batch_size, seed};
    const int spe = plan.steps_per_epoch();
    long step = 0;
    for (int e = 0; e < t1_epochs; ++e) {
        double loss_sum = 0.0;
        for (int s = 0; s < spe; ++s) {
            const auto idx = plan.indices_for_step(step++);
            ForwardTrace trace;
            Matrix outputs = forward(system.server, detail::select_rows(inputs, idx), &trace);
            auto [loss, output_grad] =
                loss_and_grad(loss_kind, outputs, detail::select_rows(system.labels, idx));
            sgd_step(system.server, backward(system.server, trace, output_grad), eta_s);
            prox_group_lasso(system.server, lambda_s, eta_s);
            loss_sum += loss;
        }
        if (on_epoch) on_epoch(e, loss_sum / spe);
    }

    SignificantComponentSet k;
    const std::vector<int> alive = surviving_groups(system.server);
    size_t at = 0;
    for (int m = 0; m < static_cast<int>(system.parties.size()); ++m) {
        const int off = system.embedding_offset(m);
        const int dim = system.parties[m].embedding_dim();
        std::vector<int> k_m;
        while (at < alive.size() && alive[at] < off + dim) k_m.push_back(alive[at++] - off);
        k.per_party.push_back(std::move(k_m));
    }
    return k;
}

/// Squared distance to the frozen embeddings over the significant components,
/// averaged over the batch. The gradient is zero outside K_m.
inline std::pair<double, Matrix> proxy_loss(const DenseNetwork& party_net, const Matrix& party_data,
                                            const Matrix& frozen_m, const std::vector<int>& k_m,
                                            const std::vector<int>& batch_indices,
                                            ForwardTrace* trace = nullptr) {
    Matrix embed = forward(party_net, detail::select_rows(party_data, batch_indices), trace);
    Matrix target = detail::select_rows(frozen_m, batch_indices);
    const auto b = static_cast<double>(batch_indices.size());
    double loss = 0.0;
    Matrix grad = Matrix::Zero(embed.rows(), embed.cols());
    if (b == 0.0) return {0.0, grad};
    for (int k : k_m) {
        if (k < 0 || k >= embed.cols())
            throw std::out_of_range("proxy_loss: component index out of range");
        Vector diff = embed.col(k) - target.col(k);
        loss += diff.squaredNorm();
        grad.col(k) = (2.0 / b) * diff;
    }
    return {loss / b, grad};
}

/// Stage 3: party-local P-SGD on the proxy loss; communication-free.
inline void local_feature_selection(Party& party, const Matrix& frozen_m,
                                    const std::vector<int>& k_m, double lambda_m, double eta_m,
                                    int t2_epochs, int batch_size, std::uint64_t seed,
                                    const EpochCallback& on_epoch = {}) {
    if (lambda_m < 0.0) throw std::invalid_argument("local_feature_selection: lambda_m must be >= 0");
    if (eta_m <= 0.0) throw std::invalid_argument("local_feature_selection: eta_m must be > 0");
    BatchPlan plan{static_cast<int>(party.data.rows()), batch_size, seed};
    const int spe = plan.steps_per_epoch();
    long step = 0;
    for (int e = 0; e < t2_epochs; ++e) {
        double loss_sum = 0.0;
        for (int s = 0; s < spe; ++s) {
            const auto idx = plan.indices_for_step(step++);
            ForwardTrace trace;
            auto [loss, grad] = proxy_loss(party.net, party.data, frozen_m, k_m, idx, &trace);
            sgd_step(party.net, backward(party.net, trace, grad), eta_m);
            prox_group_lasso(party.net, lambda_m, eta_m);
            loss_sum += loss;
        }
        if (on_epoch) on_epoch(e, loss_sum / spe);
    }
}

/// Survival mask per party: feature j survives iff its first-layer column
/// has strictly positive norm.
inline FeatureMask extract_mask(const VflSystem& system) {
    FeatureMask mask;
    for (const Party& p : system.parties) {
        Vector norms = group_norms(p.net);
        std::vector<bool> alive(static_cast<size_t>(norms.size()));
        for (Eigen::Index j = 0; j < norms.size(); ++j) alive[static_cast<size_t>(j)] = norms(j) > 0.0;
        mask.per_party.push_back(std::move(alive));
    }
    return mask;
}

/// Physically removes embedding components outside K_m: drops the matching
/// party output rows and server input columns, shrinking d_e_m on the wire.
inline void prune_components(VflSystem& system, const SignificantComponentSet& components) {
    std::vector<Eigen::Index> server_keep;
    for (int m = 0; m < static_cast<int>(system.parties.size()); ++m) {
        const int off = system.embedding_offset(m);
        for (int k : components.per_party[static_cast<size_t>(m)])
            server_keep.push_back(off + k);
    }
    for (int m = 0; m < static_cast<int>(system.parties.size()); ++m) {
        const auto& keep = components.per_party[static_cast<size_t>(m)];
        Layer& last = system.parties[static_cast<size_t>(m)].net.layers.back();
        Matrix w(static_cast<Eigen::Index>(keep.size()), last.weights.cols());
        Vector b(static_cast<Eigen::Index>(keep.size()));
        for (size_t r = 0; r < keep.size(); ++r) {
            w.row(static_cast<Eigen::Index>(r)) = last.weights.row(keep[r]);
            b(static_cast<Eigen::Index>(r)) = last.bias(keep[r]);
        }
        last.weights = std::move(w);
        last.bias = std::move(b);
    }
    Layer& first = system.server.layers.front();
    Matrix w(first.weights.rows(), static_cast<Eigen::Index>(server_keep.size()));
    for (size_t c = 0; c < server_keep.size(); ++c)
        w.col(static_cast<Eigen::Index>(c)) = first.weights.col(server_keep[c]);
    first.weights = std::move(w);
    system.validate();
}

/// Post-FS refinement: standard VFL training with dead feature columns
/// pinned to zero. Optimizers are expected to be freshly initialized.
inline void refine(VflSystem& system, const FeatureMask& mask, const BatchPlan& plan, int epochs,
                   LossKind loss_kind, const EpochCallback& on_epoch = {}) {
    for (size_t m = 0; m < system.parties.size(); ++m) {
        Vector norms = group_norms(system.parties[m].net);
        for (Eigen::Index j = 0; j < norms.size(); ++j)
            if (!mask.per_party[m][static_cast<size_t>(j)] && norms(j) != 0.0)
                throw std::invalid_argument("refine: mask says feature is dead but its column is nonzero");
    }
    system.phase = Phase::PostFS;
    const int spe = plan.steps_per_epoch();
    long step = 0;
    for (int e = 0; e < epochs; ++e) {
        double loss_sum = 0.0;
        for (int s = 0; s < spe; ++s)
            loss_sum += vfl_train_step(system, plan, step++, loss_kind, std::nullopt, &mask.per_party);
        if (on_epoch) on_epoch(e, loss_sum / spe);
    }
}

}  // namespace lessvfl
