#pragma once

#include "lessvfl/ledger.hpp"
#include "lessvfl/nn.hpp"
#include "lessvfl/regularization.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace lessvfl {

struct Party {
    DenseNetwork net;
    Matrix data;  // N x d_m, rows aligned across parties
    OptimizerState optimizer;

    int embedding_dim() const { return net.output_dim(); }
};

/// Server fusion model plus M parties. Labels live on the server only;
/// party data never crosses the boundary except as embeddings.
struct VflSystem {
    DenseNetwork server;
    OptimizerState server_optimizer;
    std::vector<Party> parties;
    Matrix labels;  // N x out (regression) or N x 1 class indices
    CommLedger ledger;
    Phase phase = Phase::Pretrain;
    std::uint64_t rng_seed = 0;

    int num_samples() const { return static_cast<int>(labels.rows()); }

    void validate() const {
        if (parties.empty()) throw std::invalid_argument("VflSystem: no parties");
        int embed_total = 0;
        for (size_t m = 0; m < parties.size(); ++m) {
            if (parties[m].data.rows() != labels.rows())
                throw std::invalid_argument("VflSystem: party " + std::to_string(m) +
                                            " row count does not match labels");
            if (parties[m].data.cols() != parties[m].net.input_dim())
                throw std::invalid_argument("VflSystem: party " + std::to_string(m) +
                                            " data/network dim mismatch");
            embed_total += parties[m].embedding_dim();
        }
        if (server.input_dim() != embed_total)
            throw std::invalid_argument("VflSystem: server input dim != sum of embedding dims");
    }

    /// Column offset of party m's embedding block in the server input.
    int embedding_offset(int m) const {
        int off = 0;
        for (int i = 0; i < m; ++i) off += parties[i].embedding_dim();
        return off;
    }
};

/// Seeded without-replacement mini-batch schedule; a fresh shuffle per epoch.
/// Deterministic function of (seed, step).
struct BatchPlan {
    int n = 0;
    int batch_size = 128;
    std::uint64_t seed = 0;

    int steps_per_epoch() const { return (n + batch_size - 1) / batch_size; }

    std::vector<int> indices_for_step(long step) const {
        if (n <= 0 || batch_size <= 0)
            throw std::invalid_argument("BatchPlan: n and batch_size must be positive");
        const long spe = steps_per_epoch();
        const long epoch = step / spe;
        const long pos = step % spe;
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1)));
        std::shuffle(perm.begin(), perm.end(), rng);
        const long begin = pos * batch_size;
        const long end = std::min<long>(begin + batch_size, n);
        return {perm.begin() + begin, perm.begin() + end};
    }
};

namespace detail {

inline Matrix select_rows(const Matrix& x, const std::vector<int>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= x.rows())
            throw std::out_of_range("row index " + std::to_string(idx[i]) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    }
    return out;
}

}  // namespace detail

/// Party m's embedding on a mini-batch. When record is set the upload is
/// priced on the ledger under the system's current phase.
inline Matrix party_embed(VflSystem& system, int m, const std::vector<int>& batch_indices,
                          bool record, ForwardTrace* trace = nullptr) {
    Party& party = system.parties.at(static_cast<size_t>(m));
    Matrix embed = forward(party.net, detail::select_rows(party.data, batch_indices), trace);
    if (record)
        system.ledger.add_up(system.phase,
                             static_cast<std::uint64_t>(embed.size()) * kWireBytesPerScalar);
    return embed;
}

/// Per-party group-lasso coefficients; presence switches party updates to
/// P-SGD (plain gradient step, then prox). The direct group lasso baseline.
struct RegularizedSpec {
    std::vector<double> lambda_per_party;
};

/// One full VFL exchange: embeddings up, server update, embedding gradients
/// down, party updates. Returns the mini-batch training loss.
/// `pinned_columns`, when set, zeroes the gradient on masked-out first-layer
/// columns of each party so removed features never revive.
inline double vfl_train_step(VflSystem& system, const BatchPlan& plan, long step, LossKind loss_kind,
                             const std::optional<RegularizedSpec>& regularized = std::nullopt,
                             const std::vector<std::vector<bool>>* pinned_columns = nullptr) {
    const std::vector<int> idx = plan.indices_for_step(step);
    const auto batch_rows = static_cast<Eigen::Index>(idx.size());
    const int num_parties = static_cast<int>(system.parties.size());

    std::vector<ForwardTrace> party_traces(num_parties);
    Matrix server_input(batch_rows, system.server.input_dim());
    for (int m = 0; m < num_parties; ++m) {
        Matrix embed = party_embed(system, m, idx, /*record=*/true, &party_traces[m]);
        server_input.middleCols(system.embedding_offset(m), system.parties[m].embedding_dim()) = embed;
    }

    ForwardTrace server_trace;
    Matrix outputs = forward(system.server, server_input, &server_trace);
    auto [loss, output_grad] = loss_and_grad(loss_kind, outputs, detail::select_rows(system.labels, idx));

    // Server weight grads and embedding grads come from the same backward
    // pass, both evaluated at the pre-update server parameters.
    GradientSet server_grads = backward(system.server, server_trace, output_grad);
    optimizer_step(system.server_optimizer, system.server, server_grads);

    for (int m = 0; m < num_parties; ++m) {
        Party& party = system.parties[m];
        Matrix embed_grad =
            server_grads.input_grad.middleCols(system.embedding_offset(m), party.embedding_dim());
        system.ledger.add_down(system.phase,
                               static_cast<std::uint64_t>(embed_grad.size()) * kWireBytesPerScalar);
        GradientSet party_grads = backward(party.net, party_traces[m], embed_grad);
        if (pinned_columns) {
            const auto& alive = (*pinned_columns)[static_cast<size_t>(m)];
            for (size_t j = 0; j < alive.size(); ++j)
                if (!alive[j]) party_grads.weight_grads.front().col(static_cast<Eigen::Index>(j)).setZero();
        }
        if (regularized) {
            const double eta = party.optimizer.learning_rate;
            sgd_step(party.net, party_grads, eta);
            prox_group_lasso(party.net, regularized->lambda_per_party.at(static_cast<size_t>(m)), eta);
        } else {
            optimizer_step(party.optimizer, party.net, party_grads);
        }
    }
    system.ledger.add_round(system.phase);
    return loss;
}

struct EvalResult {
    double loss = 0.0;
    std::optional<double> accuracy;
};

/// Out-of-band evaluation on an aligned split; never touches the ledger.
inline EvalResult evaluate(const VflSystem& system, const std::vector<Matrix>& party_data,
                           const Matrix& labels, LossKind loss_kind) {
    if (party_data.size() != system.parties.size())
        throw std::invalid_argument("evaluate: split party count mismatch");
    const Eigen::Index rows = labels.rows();
    Matrix server_input(rows, system.server.input_dim());
    for (size_t m = 0; m < party_data.size(); ++m) {
        if (party_data[m].rows() != rows)
            throw std::invalid_argument("evaluate: split rows not aligned");
        server_input.middleCols(system.embedding_offset(static_cast<int>(m)),
                                system.parties[m].embedding_dim()) =
            forward(system.parties[m].net, party_data[m]);
    }
    Matrix outputs = forward(system.server, server_input);
    EvalResult result;
    result.loss = loss_and_grad(loss_kind, outputs, labels).first;
    if (loss_kind == LossKind::SoftmaxCrossEntropy) {
        long correct = 0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            Eigen::Index pred;
            outputs.row(i).maxCoeff(&pred);
            if (pred == static_cast<Eigen::Index>(labels(i, 0))) ++correct;
        }
        result.accuracy = rows > 0 ? static_cast<double>(correct) / static_cast<double>(rows) : 0.0;
    }
    return result;
}

}  // namespace lessvfl
