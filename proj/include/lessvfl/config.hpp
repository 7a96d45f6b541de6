#pragma once

#include "lessvfl/experiment.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace lessvfl {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

inline Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("config: unknown activation '" + s + "'");
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "squared_error") return LossKind::SquaredError;
    if (s == "softmax_cross_entropy") return LossKind::SoftmaxCrossEntropy;
    throw std::invalid_argument("config: unknown loss '" + s + "'");
}

inline SyntheticSpec parse_synthetic(const nlohmann::json& j) {
    reject_unknown_keys(j, {"parties", "significant_per_party", "spurious_per_party", "hidden_sizes",
                            "embedding_dim", "n", "noise_sigma", "seed", "classification"},
                        "data.synthetic");
    SyntheticSpec s;
    s.parties = j.value("parties", s.parties);
    s.significant_per_party = j.value("significant_per_party", s.significant_per_party);
    s.spurious_per_party = j.value("spurious_per_party", s.spurious_per_party);
    if (j.contains("hidden_sizes")) s.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
    s.n = j.value("n", s.n);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    s.classification = j.value("classification", s.classification);
    s.validate();
    return s;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"seed", "out_dir", "data", "parties", "explicit_partition",
                                    "model", "loss", "methods", "hyper", "targets", "grid"},
                                "top level");
    ExperimentConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);

    if (!j.contains("data")) throw std::invalid_argument("config: missing 'data'");
    const auto& jd = j.at("data");
    detail::reject_unknown_keys(jd, {"synthetic", "csv", "train_fraction", "standardize"}, "data");
    if (jd.contains("synthetic")) cfg.data.synthetic = detail::parse_synthetic(jd.at("synthetic"));
    if (jd.contains("csv")) {
        const auto& jc = jd.at("csv");
        detail::reject_unknown_keys(jc, {"path", "label_column", "has_header", "classification",
                                         "spurious_ratio", "spurious_seed"},
                                    "data.csv");
        DataConfig::Csv c;
        c.path = jc.at("path").get<std::string>();
        c.label_column = jc.at("label_column").get<std::string>();
        c.has_header = jc.value("has_header", c.has_header);
        c.classification = jc.value("classification", c.classification);
        c.spurious_ratio = jc.value("spurious_ratio", c.spurious_ratio);
        c.spurious_seed = jc.value("spurious_seed", c.spurious_seed);
        cfg.data.csv = std::move(c);
    }
    cfg.data.train_fraction = jd.value("train_fraction", cfg.data.train_fraction);
    cfg.data.standardize_features = jd.value("standardize", cfg.data.standardize_features);
    if (!cfg.data.synthetic && !cfg.data.csv)
        throw std::invalid_argument("config: data needs 'synthetic' or 'csv'");
    if (cfg.data.synthetic && cfg.data.csv)
        throw std::invalid_argument("config: choose one data source, not both");

    cfg.parties = j.value("parties", cfg.parties);
    if (j.contains("explicit_partition"))
        cfg.explicit_partition = j.at("explicit_partition").get<std::vector<std::vector<int>>>();

    if (j.contains("model")) {
        const auto& jm = j.at("model");
        detail::reject_unknown_keys(jm, {"party_hidden", "embedding_dim", "server_hidden", "activation"},
                                    "model");
        if (jm.contains("party_hidden")) cfg.model.party_hidden = jm.at("party_hidden").get<std::vector<int>>();
        cfg.model.embedding_dim = jm.value("embedding_dim", cfg.model.embedding_dim);
        if (jm.contains("server_hidden")) cfg.model.server_hidden = jm.at("server_hidden").get<std::vector<int>>();
        if (jm.contains("activation")) cfg.model.activation = detail::parse_activation(jm.at("activation"));
    }

    if (j.contains("loss")) cfg.loss = detail::parse_loss(j.at("loss"));
    else if (cfg.data.synthetic && cfg.data.synthetic->classification)
        cfg.loss = LossKind::SoftmaxCrossEntropy;
    else if (cfg.data.csv && cfg.data.csv->classification)
        cfg.loss = LossKind::SoftmaxCrossEntropy;

    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }

    if (j.contains("hyper")) {
        const auto& jh = j.at("hyper");
        detail::reject_unknown_keys(jh, {"pretrain_epochs", "stage2_epochs", "stage3_epochs",
                                         "refine_epochs", "vfl_epochs", "batch_size", "adam_lr",
                                         "psgd_lr", "lambda_s", "lambda_m", "prune_components"},
                                    "hyper");
        HyperConfig& h = cfg.hyper;
        h.pretrain_epochs = jh.value("pretrain_epochs", h.pretrain_epochs);
        h.stage2_epochs = jh.value("stage2_epochs", h.stage2_epochs);
        h.stage3_epochs = jh.value("stage3_epochs", h.stage3_epochs);
        h.refine_epochs = jh.value("refine_epochs", h.refine_epochs);
        h.vfl_epochs = jh.value("vfl_epochs", h.vfl_epochs);
        h.batch_size = jh.value("batch_size", h.batch_size);
        h.adam_lr = jh.value("adam_lr", h.adam_lr);
        h.psgd_lr = jh.value("psgd_lr", h.psgd_lr);
        h.lambda_s = jh.value("lambda_s", h.lambda_s);
        h.lambda_m = jh.value("lambda_m", h.lambda_m);
        h.prune_components = jh.value("prune_components", h.prune_components);
        h.validate();
    }

    if (j.contains("targets")) {
        const auto& jt = j.at("targets");
        detail::reject_unknown_keys(jt, {"accuracy_fraction", "removal"}, "targets");
        cfg.targets.accuracy_target_fraction = jt.value("accuracy_fraction", cfg.targets.accuracy_target_fraction);
        cfg.targets.removal_target = jt.value("removal", cfg.targets.removal_target);
        if (cfg.targets.accuracy_target_fraction <= 0.0 || cfg.targets.accuracy_target_fraction > 1.0 ||
            cfg.targets.removal_target <= 0.0 || cfg.targets.removal_target > 1.0)
            throw std::invalid_argument("config: targets must be in (0, 1]");
    }
    return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    nlohmann::json jd;
    if (cfg.data.synthetic) {
        const SyntheticSpec& s = *cfg.data.synthetic;
        jd["synthetic"] = {{"parties", s.parties},
                           {"significant_per_party", s.significant_per_party},
                           {"spurious_per_party", s.spurious_per_party},
                           {"hidden_sizes", s.hidden_sizes},
                           {"embedding_dim", s.embedding_dim},
                           {"n", s.n},
                           {"noise_sigma", s.noise_sigma},
                           {"seed", s.seed},
                           {"classification", s.classification}};
    }
    if (cfg.data.csv) {
        const auto& c = *cfg.data.csv;
        jd["csv"] = {{"path", c.path},           {"label_column", c.label_column},
                     {"has_header", c.has_header}, {"classification", c.classification},
                     {"spurious_ratio", c.spurious_ratio}, {"spurious_seed", c.spurious_seed}};
    }
    jd["train_fraction"] = cfg.data.train_fraction;
    jd["standardize"] = cfg.data.standardize_features;
    j["data"] = std::move(jd);
    j["parties"] = cfg.parties;
    if (!cfg.explicit_partition.empty()) j["explicit_partition"] = cfg.explicit_partition;
    j["model"] = {{"party_hidden", cfg.model.party_hidden},
                  {"embedding_dim", cfg.model.embedding_dim},
                  {"server_hidden", cfg.model.server_hidden},
                  {"activation", activation_name(cfg.model.activation)}};
    j["loss"] = cfg.loss == LossKind::SquaredError ? "squared_error" : "softmax_cross_entropy";
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : cfg.methods) methods.push_back(method_name(m));
    j["methods"] = std::move(methods);
    j["hyper"] = {{"pretrain_epochs", cfg.hyper.pretrain_epochs},
                  {"stage2_epochs", cfg.hyper.stage2_epochs},
                  {"stage3_epochs", cfg.hyper.stage3_epochs},
                  {"refine_epochs", cfg.hyper.refine_epochs},
                  {"vfl_epochs", cfg.hyper.vfl_epochs},
                  {"batch_size", cfg.hyper.batch_size},
                  {"adam_lr", cfg.hyper.adam_lr},
                  {"psgd_lr", cfg.hyper.psgd_lr},
                  {"lambda_s", cfg.hyper.lambda_s},
                  {"lambda_m", cfg.hyper.lambda_m},
                  {"prune_components", cfg.hyper.prune_components}};
    j["targets"] = {{"accuracy_fraction", cfg.targets.accuracy_target_fraction},
                    {"removal", cfg.targets.removal_target}};
    return j;
}

struct GridSpec {
    std::vector<double> lambda_m = {0.01, 0.1, 1.0};
    std::vector<double> lambda_s = {0.01, 0.1, 1.0};
    std::vector<int> pretrain_epochs = {5};
};

inline GridSpec parse_grid(const nlohmann::json& j) {
    if (!j.contains("grid")) throw std::invalid_argument("config: missing 'grid' section");
    const auto& jg = j.at("grid");
    detail::reject_unknown_keys(jg, {"lambda_m", "lambda_s", "pretrain_epochs"}, "grid");
    GridSpec g;
    if (jg.contains("lambda_m")) g.lambda_m = jg.at("lambda_m").get<std::vector<double>>();
    if (jg.contains("lambda_s")) g.lambda_s = jg.at("lambda_s").get<std::vector<double>>();
    if (jg.contains("pretrain_epochs")) g.pretrain_epochs = jg.at("pretrain_epochs").get<std::vector<int>>();
    if (g.lambda_m.empty() || g.lambda_s.empty() || g.pretrain_epochs.empty())
        throw std::invalid_argument("config: grid lists must be non-empty");
    return g;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return parse_config(j);
}

}  // namespace lessvfl
