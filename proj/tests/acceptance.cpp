// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances and runtime budgets are pinned here, next to the checks
// they govern. Criteria 5-7 use frozen synthetic configurations; the tuned
// constants are recorded inline where they are set.

#include "lessvfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace lessvfl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_rel_err(const GradientSet& a, const GradientSet& b) {
    double worst = 0.0;
    auto cmp = [&](double x, double y) {
        const double err = std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)});
        worst = std::max(worst, err);
    };
    for (size_t i = 0; i < a.weight_grads.size(); ++i) {
        for (Eigen::Index k = 0; k < a.weight_grads[i].size(); ++k)
            cmp(a.weight_grads[i].data()[k], b.weight_grads[i].data()[k]);
        for (Eigen::Index k = 0; k < a.bias_grads[i].size(); ++k)
            cmp(a.bias_grads[i](k), b.bias_grads[i](k));
    }
    for (Eigen::Index k = 0; k < a.input_grad.size(); ++k)
        cmp(a.input_grad.data()[k], b.input_grad.data()[k]);
    return worst;
}

/// Tiny VFL system with uniform random data/labels, Tanh nets, linear server.
VflSystem tiny_system(int parties, int n, int in_dim, int d_e, OptimizerKind opt, double lr,
                      std::uint64_t seed, const std::vector<int>& party_hidden = {}) {
    std::mt19937_64 rng(seed);
    VflSystem sys;
    for (int m = 0; m < parties; ++m) {
        Party p;
        p.net = make_network(in_dim, party_hidden, d_e, Activation::Tanh, rng);
        p.data = Matrix::NullaryExpr(n, in_dim, [&]() {
            return std::uniform_real_distribution<double>(-1, 1)(rng);
        });
        p.optimizer = make_optimizer(opt, p.net, lr);
        sys.parties.push_back(std::move(p));
    }
    sys.server = make_network(parties * d_e, {}, 1, Activation::Tanh, rng);
    sys.server_optimizer = make_optimizer(opt, sys.server, lr);
    sys.labels = Matrix::NullaryExpr(n, 1, [&]() {
        return std::uniform_real_distribution<double>(-1, 1)(rng);
    });
    sys.validate();
    return sys;
}

std::vector<double> flatten_params(const DenseNetwork& net) {
    std::vector<double> out;
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
        out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
}

/// 1D numerical oracle for the group lasso prox: the prox of a group is
/// colinear with it, so minimizing 0.5*(r - |p|)^2 + t*r over r >= 0 by
/// ternary search recovers the prox'd norm.
double prox_norm_oracle(double p_norm, double t) {
    double lo = 0.0, hi = p_norm + t + 1.0;
    auto obj = [&](double r) { return 0.5 * (r - p_norm) * (r - p_norm) + t * r; };
    for (int i = 0; i < 200; ++i) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (obj(m1) < obj(m2))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[2];
}

double best_accuracy(const MetricsRecord& rec) {
    double best = 0.0;
    for (const MetricsPoint& p : rec.series)
        if (p.test_accuracy) best = std::max(best, *p.test_accuracy);
    return best;
}

// ---------------------------------------------------------------------------
// Frozen end-to-end configurations. All constants were tuned once on the
// synthetic task and are pinned here; the runs are fully deterministic.
// ---------------------------------------------------------------------------

/// Regression task: 2 parties, 10 significant + 5 spurious features each.
/// lambda_m follows the N^(-1/4) rate with tuned constant c, i.e.
/// lambda_m = c * N^(-1/4) with c chosen so lambda_m = 0.55 at N = 2000.
ExperimentConfig regression_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    SyntheticSpec spec;
    spec.parties = 2;
    spec.significant_per_party = 10;
    spec.spurious_per_party = 5;
    spec.hidden_sizes = {8};
    spec.embedding_dim = 4;
    spec.n = 2000;
    spec.noise_sigma = 0.1;
    spec.seed = 10 + seed;
    spec.classification = false;
    cfg.data.synthetic = spec;
    cfg.parties = 2;
    cfg.loss = LossKind::SquaredError;
    cfg.hyper.pretrain_epochs = 400;
    cfg.hyper.stage2_epochs = 400;
    cfg.hyper.stage3_epochs = 400;
    cfg.hyper.refine_epochs = 800;
    cfg.hyper.batch_size = 1600;  // full train set: deterministic dynamics
    cfg.hyper.adam_lr = 0.01;
    cfg.hyper.psgd_lr = 0.01;
    cfg.hyper.lambda_s = 0.02;
    const double c = 0.55 * std::pow(2000.0, 0.25);
    cfg.hyper.lambda_m = c * std::pow(static_cast<double>(spec.n), -0.25);
    return cfg;
}

/// Classification task shared by the cost-ordering and degradation checks:
/// 2 parties, 10 significant + 20 spurious features each, 5% label flips.
ExperimentConfig classification_base(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    SyntheticSpec spec;
    spec.parties = 2;
    spec.significant_per_party = 10;
    spec.spurious_per_party = 20;
    spec.hidden_sizes = {8};
    spec.embedding_dim = 4;
    spec.n = 2000;
    spec.noise_sigma = 0.05;
    spec.seed = 10 + seed;
    spec.classification = true;
    cfg.data.synthetic = spec;
    cfg.parties = 2;
    cfg.loss = LossKind::SoftmaxCrossEntropy;
    cfg.hyper.batch_size = 1600;
    cfg.hyper.adam_lr = 0.01;
    return cfg;
}

/// Hyperparameters for the plain-VFL and group lasso baselines.
ExperimentConfig classification_baseline_config(std::uint64_t seed) {
    ExperimentConfig cfg = classification_base(seed);
    cfg.hyper.vfl_epochs = 800;
    cfg.hyper.lambda_m = 0.1;
    cfg.hyper.psgd_lr = 0.05;
    return cfg;
}

/// Hyperparameters for LESS-VFL and the local lasso ablation. Stage 3 stops
/// at 100 epochs: longer runs let spurious columns regrow toward their
/// pretrained contribution inside the frozen embeddings.
ExperimentConfig classification_less_config(std::uint64_t seed) {
    ExperimentConfig cfg = classification_base(seed);
    cfg.hyper.pretrain_epochs = 50;
    cfg.hyper.stage2_epochs = 200;
    cfg.hyper.stage3_epochs = 100;
    cfg.hyper.refine_epochs = 300;
    cfg.hyper.lambda_s = 0.02;
    cfg.hyper.lambda_m = 2.5;
    cfg.hyper.psgd_lr = 0.01;
    return cfg;
}

/// Shared runs for criteria 6 and 7: per seed, all five methods on the same
/// classification data.
struct ClassificationOutcome {
    double best_original = 0.0;
    double best_spurious = 0.0;
    double best_less = 0.0;
    std::optional<double> cost_less, cost_local, cost_group;
};

ClassificationOutcome run_classification_seed(std::uint64_t seed) {
    ClassificationOutcome out;
    const ExperimentConfig base = classification_baseline_config(seed);
    const ExperimentConfig less = classification_less_config(seed);
    PreparedData with_spurious = prepare_data(base, /*drop_spurious=*/false);
    PreparedData clean = prepare_data(base, /*drop_spurious=*/true);

    MetricsRecord original = run_method(Method::VflOriginal, base, clean, seed);
    MetricsRecord spurious = run_method(Method::VflSpurious, base, with_spurious, seed);
    MetricsRecord group = run_method(Method::GroupLasso, base, with_spurious, seed);
    MetricsRecord local = run_method(Method::LocalLasso, less, with_spurious, seed);
    MetricsRecord lessr = run_method(Method::LessVfl, less, with_spurious, seed);

    out.best_original = best_accuracy(original);
    out.best_spurious = best_accuracy(spurious);
    out.best_less = best_accuracy(lessr);
    TargetSpec targets;  // 90% of VFL-Original's best accuracy, 80% removal
    out.cost_group = cost_to_targets(group, out.best_original, targets);
    out.cost_local = cost_to_targets(local, out.best_original, targets);
    out.cost_less = cost_to_targets(lessr, out.best_original, targets);
    return out;
}

std::vector<ClassificationOutcome>& classification_outcomes() {
    static std::vector<ClassificationOutcome> runs = [] {
        std::vector<ClassificationOutcome> r;
        for (std::uint64_t s = 1; s <= 5; ++s) r.push_back(run_classification_seed(s));
        return r;
    }();
    return runs;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// 1. Analytic gradients vs central finite differences over >= 100 random
/// (net, batch, loss) cases; max relative error <= 1e-5; < 30 s.
bool criterion_gradients(std::string& detail) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    auto dim = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    double worst = 0.0;
    const int cases = 120;
    for (int c = 0; c < cases; ++c) {
        const int in_dim = dim(1, 16);
        const int out_dim = (c % 2 == 1) ? dim(2, 8) : dim(1, 8);  // softmax needs >= 2 classes
        std::vector<int> hidden;
        for (int l = 0, depth = dim(0, 2); l < depth; ++l) hidden.push_back(dim(1, 16));
        const Activation act = (c % 4 < 2) ? Activation::Tanh : Activation::ReLU;
        const LossKind loss = (c % 2 == 0) ? LossKind::SquaredError : LossKind::SoftmaxCrossEntropy;
        const int n = dim(2, 8);
        // resample (net, inputs) pairs that land a ReLU pre-activation near
        // its kink, where central differences are invalid for any step size;
        // a unit can be structurally stuck there, so the net is resampled too
        DenseNetwork net;
        Matrix x;
        for (int attempt = 0; attempt < 200; ++attempt) {
            if (attempt % 20 == 0) net = make_network(in_dim, hidden, out_dim, act, rng);
            x = Matrix::NullaryExpr(n, in_dim, [&]() {
                return std::uniform_real_distribution<double>(-1, 1)(rng);
            });
            if (act == Activation::Tanh) break;
            ForwardTrace probe;
            forward(net, x, &probe);
            bool near_kink = false;
            for (size_t l = 0; l < net.layers.size(); ++l)
                if (net.layers[l].activation == Activation::ReLU &&
                    (probe.pre_activations[l].array().abs() < 1e-3).any())
                    near_kink = true;
            if (!near_kink) break;
        }
        Matrix labels;
        if (loss == LossKind::SquaredError) {
            labels = Matrix::NullaryExpr(n, out_dim, [&]() {
                return std::uniform_real_distribution<double>(-1, 1)(rng);
            });
        } else {
            labels.resize(n, 1);
            for (int i = 0; i < n; ++i) labels(i, 0) = static_cast<double>(dim(0, out_dim - 1));
        }
        ForwardTrace trace;
        Matrix out = forward(net, x, &trace);
        auto [l, og] = loss_and_grad(loss, out, labels);
        (void)l;
        GradientSet analytic = backward(net, trace, og);
        GradientSet fd = finite_diff_grad(net, x, [&](const Matrix& o) {
            return loss_and_grad(loss, o, labels).first;
        });
        worst = std::max(worst, max_rel_err(analytic, fd));
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << cases << " cases, max rel err " << worst << ", " << elapsed << " s";
    detail = os.str();
    return worst <= 1e-5 && elapsed < 30.0;
}

/// 2. Closed-form prox vs numerical 1D minimizer over >= 1000 random groups;
/// <= 1e-6; shrink-to-zero branch exact; < 30 s.
bool criterion_prox(std::string& detail) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    auto unif = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    double worst = 0.0;
    int groups = 0;
    bool zero_branch_exact = true;
    for (int trial = 0; trial < 300; ++trial) {
        const int rows = std::uniform_int_distribution<int>(1, 6)(rng);
        const int cols = std::uniform_int_distribution<int>(1, 8)(rng);
        Matrix w = Matrix::NullaryExpr(rows, cols, [&]() { return unif(-2.0, 2.0); });
        const double lambda = unif(0.01, 2.0);
        const double eta = unif(0.01, 1.0);
        // force some columns onto (and below) the shrink-to-zero branch
        for (int j = 0; j < cols; j += 3) {
            const double n = w.col(j).norm();
            if (n > 0.0) w.col(j) *= unif(0.0, 1.0) * lambda * eta / n;
        }
        DenseNetwork net;
        net.layers.push_back({w, Vector::Zero(rows), Activation::Identity});
        prox_group_lasso(net, lambda, eta);
        const Matrix& shrunk = net.layers.front().weights;
        for (int j = 0; j < cols; ++j, ++groups) {
            const double p_norm = w.col(j).norm();
            const double want = prox_norm_oracle(p_norm, lambda * eta);
            worst = std::max(worst, std::abs(shrunk.col(j).norm() - want));
            if (p_norm <= lambda * eta && !shrunk.col(j).isZero(0.0)) zero_branch_exact = false;
        }
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << groups << " groups, max norm err " << worst << ", zero branch "
       << (zero_branch_exact ? "exact" : "INEXACT") << ", " << elapsed << " s";
    detail = os.str();
    return groups >= 1000 && worst <= 1e-6 && zero_branch_exact && elapsed < 30.0;
}

/// 3. M=1, SGD, no regularization: 50 protocol steps equal 50 centralized
/// steps on the composed network to <= 1e-10; < 10 s.
bool criterion_centralized(std::string& detail) {
    const auto t0 = Clock::now();
    auto sys = tiny_system(1, 40, 3, 4, OptimizerKind::Sgd, 0.05, 11, {6});
    DenseNetwork composed;
    composed.layers = sys.parties[0].net.layers;
    for (const auto& l : sys.server.layers) composed.layers.push_back(l);
    Matrix data = sys.parties[0].data;
    Matrix labels = sys.labels;

    BatchPlan plan{40, 16, 21};
    for (long s = 0; s < 50; ++s) {
        vfl_train_step(sys, plan, s, LossKind::SquaredError);
        auto idx = plan.indices_for_step(s);
        ForwardTrace trace;
        Matrix x = detail::select_rows(data, idx);
        Matrix out = forward(composed, x, &trace);
        auto [loss, og] = loss_and_grad(LossKind::SquaredError, out, detail::select_rows(labels, idx));
        (void)loss;
        sgd_step(composed, backward(composed, trace, og), 0.05);
    }
    DenseNetwork vfl_composed;
    vfl_composed.layers = sys.parties[0].net.layers;
    for (const auto& l : sys.server.layers) vfl_composed.layers.push_back(l);
    auto a = flatten_params(vfl_composed);
    auto b = flatten_params(composed);
    double dist = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dist = std::max(dist, std::abs(a[i] - b[i]));
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "param distance " << dist << " after 50 steps, " << elapsed << " s";
    detail = os.str();
    return dist <= 1e-10 && elapsed < 10.0;
}

/// 4. Ledger exactness for N=1000, B=128, M=2, d_e=4, 3 pre-train epochs:
/// pre-train bytes = 3 * 2 parties * (up + down) * 1000 * 4 * 4 = 192000,
/// freeze upload = 2 * 1000 * 4 * 4 = 32000, stages 2-3 zero.
bool criterion_ledger(std::string& detail) {
    ExperimentConfig cfg;
    cfg.seed = 3;
    SyntheticSpec spec;
    spec.parties = 2;
    spec.n = 1250;  // 80% train split -> N = 1000
    spec.seed = 5;
    cfg.data.synthetic = spec;
    cfg.parties = 2;
    cfg.hyper.pretrain_epochs = 3;
    cfg.hyper.stage2_epochs = 5;
    cfg.hyper.stage3_epochs = 5;
    cfg.hyper.refine_epochs = 0;
    cfg.hyper.batch_size = 128;

    PreparedData prep = prepare_data(cfg, false);
    if (prep.train.features.rows() != 1000) {
        detail = "train split is not 1000 rows";
        return false;
    }
    MetricsRecord rec = run_method(Method::LessVfl, cfg, prep, cfg.seed);
    const auto up = [&](Phase p) { return rec.phase_bytes_up[static_cast<size_t>(p)]; };
    const auto down = [&](Phase p) { return rec.phase_bytes_down[static_cast<size_t>(p)]; };
    const std::uint64_t pretrain = up(Phase::Pretrain) + down(Phase::Pretrain);
    const std::uint64_t freeze = up(Phase::Stage2Upload);
    const std::uint64_t rest = down(Phase::Stage2Upload) + up(Phase::Stage3) + down(Phase::Stage3);
    std::ostringstream os;
    os << "pretrain " << pretrain << " B (want 192000), freeze " << freeze
       << " B (want 32000), stages 2-3 extra " << rest << " B (want 0)";
    detail = os.str();
    return pretrain == 192000 && freeze == 32000 && rest == 0;
}

/// 5. End-to-end regression oracle: >= 80% spurious removal with final test
/// MSE <= 1.25x the pre-trained model's, in >= 4 of 5 seeds; < 3 min.
bool criterion_end_to_end(std::string& detail) {
    const auto t0 = Clock::now();
    int passed = 0;
    std::ostringstream os;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExperimentConfig cfg = regression_config(seed);
        PreparedData prep = prepare_data(cfg, false);
        MetricsRecord rec = run_method(Method::LessVfl, cfg, prep, seed);
        double pretrain_mse = 0.0;
        for (const MetricsPoint& p : rec.series)
            if (p.phase == "pretrain") pretrain_mse = p.test_loss;
        const MetricsPoint& last = rec.series.back();
        const bool ok = last.spurious_removed_fraction >= 0.8 &&
                        last.test_loss <= 1.25 * pretrain_mse;
        if (ok) ++passed;
        os << " s" << seed << (ok ? "+" : "-") << "(rm " << last.spurious_removed_fraction
           << ", mse ratio " << (last.test_loss / pretrain_mse) << ")";
    }
    const double elapsed = seconds_since(t0);
    os << ", " << elapsed << " s";
    detail = std::to_string(passed) + "/5 seeds:" + os.str();
    return passed >= 4 && elapsed < 180.0;
}

/// 6. Median cost-to-targets over 5 seeds: LESS-VFL <= LocalLasso <=
/// GroupLasso and LESS-VFL <= 0.5x GroupLasso; < 10 min (shared runs with
/// criterion 7 are timed here).
bool criterion_cost_ordering(std::string& detail) {
    const auto t0 = Clock::now();
    const auto& runs = classification_outcomes();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> less, local, group;
    for (const auto& r : runs) {
        less.push_back(r.cost_less.value_or(inf));
        local.push_back(r.cost_local.value_or(inf));
        group.push_back(r.cost_group.value_or(inf));
    }
    const double m_less = median5(less), m_local = median5(local), m_group = median5(group);
    const double elapsed = seconds_since(t0);
    std::ostringstream os;
    os << "median MB: less " << m_less << " <= local " << m_local << " <= group " << m_group
       << ", halving " << (m_less <= 0.5 * m_group ? "ok" : "VIOLATED") << ", " << elapsed << " s";
    detail = os.str();
    return std::isfinite(m_group) && m_less <= m_local && m_local <= m_group &&
           m_less <= 0.5 * m_group && elapsed < 600.0;
}

/// 7. Spurious degradation: VFL-Spurious's best accuracy trails VFL-Original
/// by >= 2 points (median over 5 seeds) and LESS-VFL recovers >= half the gap.
bool criterion_degradation(std::string& detail) {
    const auto& runs = classification_outcomes();
    std::vector<double> gaps, recoveries;
    for (const auto& r : runs) {
        gaps.push_back(r.best_original - r.best_spurious);
        recoveries.push_back(r.best_less - r.best_spurious);
    }
    const double gap = median5(gaps), recovery = median5(recoveries);
    std::ostringstream os;
    os << "median gap " << 100.0 * gap << " pp, median recovery " << 100.0 * recovery << " pp";
    detail = os.str();
    return gap >= 0.02 && recovery >= 0.5 * gap;
}

/// 8. check_significance at tol=0 flags exactly the zeroed input columns:
/// 0 false positives/negatives over 100 random constructions.
bool criterion_significance(std::string& detail) {
    std::mt19937_64 rng(99);
    int false_pos = 0, false_neg = 0, columns = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = std::uniform_int_distribution<int>(2, 10)(rng);
        const int h = std::uniform_int_distribution<int>(2, 8)(rng);
        DenseNetwork net = make_network(d, {h}, 2, Activation::Tanh, rng);
        std::vector<bool> zeroed(d, false);
        for (int j = 0; j < d; ++j)
            if (std::bernoulli_distribution(0.4)(rng)) {
                net.layers.front().weights.col(j).setZero();
                zeroed[j] = true;
            }
        Matrix probes = Matrix::NullaryExpr(20, d, [&]() {
            return std::uniform_real_distribution<double>(-2, 2)(rng);
        });
        for (int j = 0; j < d; ++j, ++columns) {
            const Significance s =
                check_significance(net, j, probes, default_replacement_grid(), 0.0);
            if (zeroed[j] && s == Significance::Significant) ++false_pos;
            if (!zeroed[j] && s == Significance::NonSignificant) ++false_neg;
        }
    }
    std::ostringstream os;
    os << columns << " columns over 100 nets, " << false_pos << " false positives, " << false_neg
       << " false negatives";
    detail = os.str();
    return false_pos == 0 && false_neg == 0;
}

/// 9. Proxy loss at the pre-trained point is exactly zero for any K_m.
bool criterion_proxy_optimum(std::string& detail) {
    std::mt19937_64 rng(7);
    int checks = 0;
    bool all_zero = true;
    for (int trial = 0; trial < 20; ++trial) {
        const int parties = std::uniform_int_distribution<int>(1, 3)(rng);
        const int n = std::uniform_int_distribution<int>(16, 48)(rng);
        const int d_e = std::uniform_int_distribution<int>(2, 5)(rng);
        auto sys = tiny_system(parties, n, 4, d_e, OptimizerKind::Adam, 0.01, 1000 + trial, {5});
        BatchPlan plan{n, 16, 2000 + static_cast<std::uint64_t>(trial)};
        pretrain(sys, plan, 2, LossKind::SquaredError);
        FrozenEmbeddings frozen = freeze_embeddings(sys);

        std::vector<int> all_rows(n);
        std::iota(all_rows.begin(), all_rows.end(), 0);
        for (size_t m = 0; m < sys.parties.size(); ++m) {
            std::vector<int> k_m;
            for (int k = 0; k < d_e; ++k)
                if (std::bernoulli_distribution(0.6)(rng)) k_m.push_back(k);
            auto [loss, grad] = proxy_loss(sys.parties[m].net, sys.parties[m].data,
                                           frozen.per_party[m], k_m, all_rows);
            ++checks;
            if (loss != 0.0 || !grad.isZero(0.0)) all_zero = false;
        }
    }
    std::ostringstream os;
    os << checks << " (party, K_m) checks over 20 systems, all exactly zero: "
       << (all_zero ? "yes" : "NO");
    detail = os.str();
    return all_zero;
}

/// 10. Two executions of criterion 5's seed-1 config produce byte-identical
/// report.json files.
bool criterion_determinism(std::string& detail) {
    auto read_file = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::filesystem::path base =
        std::filesystem::temp_directory_path() / "lessvfl_acceptance_determinism";
    std::filesystem::remove_all(base);
    std::vector<std::string> reports;
    for (int run = 0; run < 2; ++run) {
        ExperimentConfig cfg = regression_config(1);
        cfg.methods = {Method::LessVfl};
        cfg.out_dir = (base / ("run" + std::to_string(run))).string();
        run_experiment(cfg);
        reports.push_back(read_file(std::filesystem::path(cfg.out_dir) / "less_vfl" / "report.json"));
    }
    const bool identical = !reports[0].empty() && reports[0] == reports[1];
    std::ostringstream os;
    os << reports[0].size() << " bytes vs " << reports[1].size() << " bytes, "
       << (identical ? "byte-identical" : "DIFFER");
    detail = os.str();
    return identical;
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        bool (*run)(std::string&);
    };
    const Criterion criteria[] = {
        {1, "gradient correctness vs finite differences", criterion_gradients},
        {2, "prox oracle equivalence", criterion_prox},
        {3, "centralized equivalence (M=1, SGD)", criterion_centralized},
        {4, "communication ledger exactness", criterion_ledger},
        {5, "end-to-end synthetic feature selection", criterion_end_to_end},
        {6, "communication-cost ordering", criterion_cost_ordering},
        {7, "spurious degradation and recovery", criterion_degradation},
        {8, "significance structural check", criterion_significance},
        {9, "proxy loss zero at the pre-trained point", criterion_proxy_optimum},
        {10, "byte-identical reports across re-runs", criterion_determinism},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        std::printf("%s criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", c.number, c.name,
                    detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
