#pragma once

#include "lessvfl/data.hpp"
#include "lessvfl/metrics.hpp"
#include "lessvfl/selectors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace lessvfl {

enum class Method { VflOriginal, VflSpurious, GroupLasso, LocalLasso, LessVfl };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::VflOriginal: return "vfl_original";
        case Method::VflSpurious: return "vfl_spurious";
        case Method::GroupLasso: return "group_lasso";
        case Method::LocalLasso: return "local_lasso";
        case Method::LessVfl: return "less_vfl";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::VflOriginal, Method::VflSpurious, Method::GroupLasso,
                     Method::LocalLasso, Method::LessVfl})
        if (s == method_name(m)) return m;
    throw std::invalid_argument("unknown method '" + s + "'");
}

struct ModelConfig {
    std::vector<int> party_hidden = {8, 8};
    int embedding_dim = 4;
    std::vector<int> server_hidden = {};  // empty = linear fusion model
    Activation activation = Activation::Tanh;
};

struct HyperConfig {
    int pretrain_epochs = 5;
    int stage2_epochs = 150;
    int stage3_epochs = 150;
    int refine_epochs = 20;
    int vfl_epochs = 40;  // budget for the plain VFL and group lasso baselines
    int batch_size = 128;
    double adam_lr = 0.01;
    double psgd_lr = 0.01;
    double lambda_s = 0.1;
    double lambda_m = 0.1;
    bool prune_components = false;

    void validate() const {
        if (pretrain_epochs < 1 || stage2_epochs < 1 || stage3_epochs < 1 || refine_epochs < 0 ||
            vfl_epochs < 1)
            throw std::invalid_argument("hyper: epoch counts out of range");
        if (batch_size < 1) throw std::invalid_argument("hyper: batch_size must be positive");
        if (adam_lr <= 0.0 || psgd_lr <= 0.0) throw std::invalid_argument("hyper: learning rates must be positive");
        if (lambda_s < 0.0) throw std::invalid_argument("hyper: lambda_s must be >= 0");
        if (lambda_m < 0.0) throw std::invalid_argument("hyper: lambda_m must be >= 0");
    }
};

struct DataConfig {
    // exactly one of the two sources
    std::optional<SyntheticSpec> synthetic;
    struct Csv {
        std::string path;
        std::string label_column;
        bool has_header = true;
        bool classification = false;
        double spurious_ratio = 0.5;
        std::uint64_t spurious_seed = 1;
    };
    std::optional<Csv> csv;
    double train_fraction = 0.8;
    bool standardize_features = true;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/out";
    DataConfig data;
    int parties = 2;                      // EvenContiguous unless explicit lists given
    std::vector<std::vector<int>> explicit_partition;
    ModelConfig model;
    LossKind loss = LossKind::SquaredError;
    std::vector<Method> methods = {Method::LessVfl};
    HyperConfig hyper;
    TargetSpec targets;
};

/// Deterministic sub-seed derivation from the master seed (FNV-1a over the
/// component name, mixed into the master).
inline std::uint64_t sub_seed(std::uint64_t master, const std::string& component) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : component) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return master ^ h;
}

struct PreparedData {
    TabularDataset train, test;
    Partitioned train_parts, test_parts;
    std::vector<bool> flags;  // global spurious ground truth
    int output_dim = 1;
    bool with_spurious = true;  // false for the vfl_original variant
};

namespace detail {

inline PartitionSpec partition_spec_for(const ExperimentConfig& cfg, int d) {
    if (!cfg.explicit_partition.empty()) return PartitionSpec::explicit_lists(cfg.explicit_partition);
    PartitionSpec spec = PartitionSpec::even(cfg.parties);
    (void)spec.columns_for(d);
    return spec;
}

}  // namespace detail

/// Loads or generates the dataset, splits, standardizes, partitions.
/// When drop_spurious is set, flagged columns are removed from every party
/// (the vfl_original variant).
inline PreparedData prepare_data(const ExperimentConfig& cfg, bool drop_spurious) {
    TabularDataset full;
    PartitionSpec spec;
    if (cfg.data.synthetic && cfg.data.csv)
        throw std::invalid_argument("config: choose one data source, not both");
    if (cfg.data.synthetic) {
        SyntheticData synth = synth_generate(*cfg.data.synthetic);
        full = std::move(synth.dataset);
        spec = synth.partition_spec;
    } else if (cfg.data.csv) {
        const auto& c = *cfg.data.csv;
        full = load_csv(c.path, c.label_column, c.has_header, c.classification);
        full = inject_spurious(full, c.spurious_ratio, c.spurious_seed);
        spec = detail::partition_spec_for(cfg, full.d());
    } else {
        throw std::invalid_argument("config: no data source given");
    }

    std::vector<std::vector<int>> lists = spec.columns_for(full.d());
    if (drop_spurious) {
        std::vector<int> keep;
        std::vector<int> remap(full.d(), -1);
        for (int j = 0; j < full.d(); ++j)
            if (!full.spurious_flags[static_cast<size_t>(j)]) {
                remap[j] = static_cast<int>(keep.size());
                keep.push_back(j);
            }
        TabularDataset reduced = full;
        reduced.features.resize(full.n(), static_cast<Eigen::Index>(keep.size()));
        reduced.feature_names.clear();
        reduced.spurious_flags.assign(keep.size(), false);
        for (size_t k = 0; k < keep.size(); ++k) {
            reduced.features.col(static_cast<Eigen::Index>(k)) = full.features.col(keep[k]);
            reduced.feature_names.push_back(full.feature_names[static_cast<size_t>(keep[k])]);
        }
        for (auto& list : lists) {
            std::vector<int> filtered;
            for (int c : list)
                if (remap[c] >= 0) filtered.push_back(remap[c]);
            if (filtered.empty())
                throw std::invalid_argument("config: a party holds only spurious features");
            list = std::move(filtered);
        }
        full = std::move(reduced);
    }

    PreparedData prep;
    prep.with_spurious = !drop_spurious;
    auto [train, test] = split(full, cfg.data.train_fraction, sub_seed(cfg.seed, "split"));
    if (cfg.data.standardize_features) standardize(train, test);
    prep.flags = train.spurious_flags;
    PartitionSpec final_spec = PartitionSpec::explicit_lists(lists);
    prep.train_parts = partition(train.features, final_spec);
    prep.test_parts = partition(test.features, final_spec);
    prep.output_dim = train.classification ? train.num_classes : 1;
    prep.train = std::move(train);
    prep.test = std::move(test);
    return prep;
}

inline VflSystem make_system(const PreparedData& prep, const ModelConfig& model,
                             OptimizerKind opt, double lr, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    VflSystem sys;
    sys.rng_seed = seed;
    for (const Matrix& shard : prep.train_parts.shards) {
        Party p;
        p.net = make_network(static_cast<int>(shard.cols()), model.party_hidden,
                             model.embedding_dim, model.activation, rng);
        p.data = shard;
        p.optimizer = make_optimizer(opt, p.net, lr);
        sys.parties.push_back(std::move(p));
    }
    sys.server = make_network(static_cast<int>(prep.train_parts.shards.size()) * model.embedding_dim,
                              model.server_hidden, prep.output_dim, model.activation, rng);
    sys.server_optimizer = make_optimizer(opt, sys.server, lr);
    sys.labels = prep.train.labels;
    sys.validate();
    return sys;
}

namespace detail {

/// Records one metrics point per logged epoch: ledger state, train loss from
/// the loop, test metrics, current survival mask.
struct RunLogger {
    const VflSystem* sys = nullptr;
    const PreparedData* prep = nullptr;
    LossKind loss = LossKind::SquaredError;
    MetricsRecord* rec = nullptr;
    long step = 0;

    void log(const char* phase, double train_loss, const std::vector<int>* k_sizes = nullptr) {
        MetricsPoint p;
        p.step = step++;
        p.phase = phase;
        p.cumulative_mb = ledger_total_mb(sys->ledger);
        p.train_loss = train_loss;
        EvalResult ev = evaluate(*sys, prep->test_parts.shards, prep->test.labels, loss);
        p.test_loss = ev.loss;
        p.test_accuracy = ev.accuracy;
        FeatureMask mask = extract_mask(*sys);
        p.spurious_removed_fraction = spurious_removed_fraction(
            global_feature_mask(mask, prep->train_parts.global_columns, prep->train.d()), prep->flags);
        for (const auto& pm : mask.per_party)
            p.surviving_features.push_back(static_cast<int>(std::count(pm.begin(), pm.end(), true)));
        if (k_sizes) p.k_sizes = *k_sizes;
        rec->series.push_back(std::move(p));
    }
};

inline std::vector<int> k_sizes_of(const SignificantComponentSet& k) {
    std::vector<int> sizes;
    for (const auto& km : k.per_party) sizes.push_back(static_cast<int>(km.size()));
    return sizes;
}

}  // namespace detail

/// Runs one method end to end and returns its metrics record.
inline MetricsRecord run_method(Method method, const ExperimentConfig& cfg, const PreparedData& prep,
                                std::uint64_t seed) {
    cfg.hyper.validate();
    const HyperConfig& hp = cfg.hyper;
    MetricsRecord rec;
    rec.method = method_name(method);
    rec.seed = seed;

    const bool regularized_baseline = (method == Method::GroupLasso);
    const OptimizerKind opt = regularized_baseline ? OptimizerKind::Sgd : OptimizerKind::Adam;
    const double lr = regularized_baseline ? hp.psgd_lr : hp.adam_lr;
    VflSystem sys = make_system(prep, cfg.model, opt, lr, sub_seed(seed, "init"));

    detail::RunLogger logger{&sys, &prep, cfg.loss, &rec};
    BatchPlan plan{sys.num_samples(), hp.batch_size, sub_seed(seed, "batches")};

    switch (method) {
        case Method::VflOriginal:
        case Method::VflSpurious: {
            pretrain(sys, plan, hp.vfl_epochs, cfg.loss,
                     [&](int, double l) { logger.log("pretrain", l); });
            break;
        }
        case Method::GroupLasso: {
            RegularizedSpec reg;
            reg.lambda_per_party.assign(sys.parties.size(), hp.lambda_m);
            sys.phase = Phase::Pretrain;
            const int spe = plan.steps_per_epoch();
            long step = 0;
            for (int e = 0; e < hp.vfl_epochs; ++e) {
                double loss_sum = 0.0;
                for (int s = 0; s < spe; ++s)
                    loss_sum += vfl_train_step(sys, plan, step++, cfg.loss, reg);
                logger.log("pretrain", loss_sum / spe);
            }
            break;
        }
        case Method::LocalLasso:
        case Method::LessVfl: {
            pretrain(sys, plan, hp.pretrain_epochs, cfg.loss,
                     [&](int, double l) { logger.log("pretrain", l); });
            FrozenEmbeddings frozen = freeze_embeddings(sys);
            logger.log("stage2_upload", rec.series.back().train_loss);

            SignificantComponentSet k;
            if (method == Method::LessVfl) {
                k = select_components(sys, frozen, hp.lambda_s, hp.psgd_lr, hp.stage2_epochs,
                                      hp.batch_size, cfg.loss, sub_seed(seed, "stage2"),
                                      [&](int, double l) { logger.log("stage2", l); });
            } else {
                k = SignificantComponentSet::all_components(sys);
            }
            rec.components = k;
            const std::vector<int> ks = detail::k_sizes_of(k);

            // Stage 3, epoch-synchronized across parties. Each party has its
            // own plan/step counter, so results are party-order independent.
            std::vector<BatchPlan> plans;
            std::vector<long> steps(sys.parties.size(), 0);
            for (size_t m = 0; m < sys.parties.size(); ++m)
                plans.push_back(BatchPlan{sys.num_samples(), hp.batch_size,
                                          sub_seed(seed, "stage3/" + std::to_string(m))});
            for (int e = 0; e < hp.stage3_epochs; ++e) {
                double loss_sum = 0.0;
                int count = 0;
                for (size_t m = 0; m < sys.parties.size(); ++m) {
                    Party& party = sys.parties[m];
                    const int spe = plans[m].steps_per_epoch();
                    for (int s = 0; s < spe; ++s) {
                        const auto idx = plans[m].indices_for_step(steps[m]++);
                        ForwardTrace trace;
                        auto [l, g] = proxy_loss(party.net, party.data, frozen.per_party[m],
                                                 k.per_party[m], idx, &trace);
                        sgd_step(party.net, backward(party.net, trace, g), hp.psgd_lr);
                        prox_group_lasso(party.net, hp.lambda_m, hp.psgd_lr);
                        loss_sum += l;
                        ++count;
                    }
                }
                logger.log("stage3", loss_sum / std::max(count, 1), &ks);
            }

            FeatureMask mask = extract_mask(sys);
            if (hp.prune_components && method == Method::LessVfl) prune_components(sys, k);
            // post-FS optimizers start fresh
            for (Party& p : sys.parties) p.optimizer = make_optimizer(OptimizerKind::Adam, p.net, hp.adam_lr);
            sys.server_optimizer = make_optimizer(OptimizerKind::Adam, sys.server, hp.adam_lr);
            if (hp.refine_epochs > 0)
                refine(sys, mask, plan, hp.refine_epochs, cfg.loss,
                       [&](int, double l) { logger.log("post_fs", l, &ks); });
            break;
        }
    }

    rec.final_mask = extract_mask(sys);
    for (const auto& pc : sys.ledger.phases) {
        rec.phase_bytes_up.push_back(pc.bytes_up);
        rec.phase_bytes_down.push_back(pc.bytes_down);
    }
    return rec;
}

inline nlohmann::json record_to_json(const MetricsRecord& rec) {
    nlohmann::json j;
    j["method"] = rec.method;
    j["seed"] = rec.seed;
    j["config"] = rec.config_echo;
    j["phase_bytes_up"] = rec.phase_bytes_up;
    j["phase_bytes_down"] = rec.phase_bytes_down;
    j["components"] = rec.components.per_party;
    nlohmann::json mask = nlohmann::json::array();
    for (const auto& pm : rec.final_mask.per_party) mask.push_back(pm);
    j["final_mask"] = mask;
    nlohmann::json series = nlohmann::json::array();
    for (const MetricsPoint& p : rec.series) {
        nlohmann::json e;
        e["step"] = p.step;
        e["phase"] = p.phase;
        e["cumulative_mb"] = p.cumulative_mb;
        e["train_loss"] = p.train_loss;
        e["test_loss"] = p.test_loss;
        if (p.test_accuracy) e["test_accuracy"] = *p.test_accuracy;
        e["spurious_removed_fraction"] = p.spurious_removed_fraction;
        e["surviving_features"] = p.surviving_features;
        if (!p.k_sizes.empty()) e["k_sizes"] = p.k_sizes;
        series.push_back(std::move(e));
    }
    j["series"] = std::move(series);
    return j;
}

inline void write_record(const MetricsRecord& rec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        out << record_to_json(rec).dump(2) << '\n';
    }
    std::ofstream csv(dir / "series.csv");
    csv << "step,phase,cumulative_mb,train_loss,test_loss,test_accuracy,spurious_removed_fraction\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        csv << buf;
    };
    for (const MetricsPoint& p : rec.series) {
        csv << p.step << ',' << p.phase << ',';
        put(p.cumulative_mb);
        csv << ',';
        put(p.train_loss);
        csv << ',';
        put(p.test_loss);
        csv << ',';
        if (p.test_accuracy) put(*p.test_accuracy);
        csv << ',';
        put(p.spurious_removed_fraction);
        csv << '\n';
    }
}

/// Runs every requested method; failures are isolated per method so a
/// partial suite is still reported.
inline std::map<std::string, MetricsRecord> run_experiment(const ExperimentConfig& cfg,
                                                           const nlohmann::json& config_echo = {},
                                                           bool write_reports = true) {
    std::map<std::string, MetricsRecord> out;
    PreparedData with_spurious = prepare_data(cfg, /*drop_spurious=*/false);
    std::optional<PreparedData> original;
    for (Method method : cfg.methods) {
        const PreparedData* prep = &with_spurious;
        if (method == Method::VflOriginal) {
            if (!original) original = prepare_data(cfg, /*drop_spurious=*/true);
            prep = &*original;
        }
        try {
            MetricsRecord rec = run_method(method, cfg, *prep, cfg.seed);
            rec.config_echo = config_echo;
            if (write_reports) write_record(rec, std::filesystem::path(cfg.out_dir) / rec.method);
            out.emplace(rec.method, std::move(rec));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "method %s failed: %s\n", method_name(method), e.what());
        }
    }
    return out;
}

struct GridRow {
    std::string method;
    double lambda_m = 0.0, lambda_s = 0.0;
    int pretrain_epochs = 0;
    double final_train_loss = 0.0, final_test_loss = 0.0;
    std::optional<double> final_train_accuracy, final_test_accuracy;
    double removal = 0.0;
    std::uint64_t seed = 0;
};

/// Cartesian sweep over (lambda_m, lambda_s, pretrain epochs) for the
/// configured lasso methods. Stage 2/3 re-runs reuse nothing across rows but
/// cost no communication, matching the tuning pattern the ledger rewards.
inline std::vector<GridRow> grid_search(const ExperimentConfig& base,
                                        const std::vector<double>& lambda_m_grid,
                                        const std::vector<double>& lambda_s_grid,
                                        const std::vector<int>& pretrain_grid) {
    if (lambda_m_grid.empty() || lambda_s_grid.empty() || pretrain_grid.empty())
        throw std::invalid_argument("grid_search: empty grid");
    std::vector<GridRow> rows;
    PreparedData prep = prepare_data(base, false);
    for (Method method : base.methods) {
        const bool uses_lambda_s = (method == Method::LessVfl);
        for (int t0 : pretrain_grid) {
            for (double lm : lambda_m_grid) {
                for (size_t si = 0; si < (uses_lambda_s ? lambda_s_grid.size() : 1); ++si) {
                    ExperimentConfig cfg = base;
                    cfg.hyper.pretrain_epochs = t0;
                    cfg.hyper.lambda_m = lm;
                    cfg.hyper.lambda_s = lambda_s_grid[si];
                    MetricsRecord rec = run_method(method, cfg, prep, cfg.seed);
                    GridRow row;
                    row.method = method_name(method);
                    row.lambda_m = lm;
                    row.lambda_s = uses_lambda_s ? lambda_s_grid[si] : 0.0;
                    row.pretrain_epochs = t0;
                    row.seed = cfg.seed;
                    const MetricsPoint& last = rec.series.back();
                    row.final_test_loss = last.test_loss;
                    row.final_test_accuracy = last.test_accuracy;
                    row.removal = last.spurious_removed_fraction;
                    row.final_train_loss = last.train_loss;
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

inline void write_grid_csv(const std::vector<GridRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << "method,lambda_m,lambda_s,pretrain_epochs,final_train_loss,final_test_loss,"
           "final_test_accuracy,spurious_removed_fraction,seed\n";
    for (const GridRow& r : rows) {
        out << r.method << ',' << r.lambda_m << ',' << r.lambda_s << ',' << r.pretrain_epochs << ','
            << r.final_train_loss << ',' << r.final_test_loss << ',';
        if (r.final_test_accuracy) out << *r.final_test_accuracy;
        out << ',' << r.removal << ',' << r.seed << '\n';
    }
}

}  // namespace lessvfl
