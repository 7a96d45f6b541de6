// Command-line front end: dataset synthesis, experiment runs, grid search,
// and report summarization, all driven by a JSON config file.

#include "lessvfl/config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_verbosity() {
    const char* v = std::getenv("LESSVFL_LOG");
    return v ? std::atoi(v) : 1;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    json j;
    in >> j;
    return j;
}

void print_seed_table(const lessvfl::ExperimentConfig& cfg) {
    if (log_verbosity() < 1) return;
    std::printf("master seed: %llu\n", static_cast<unsigned long long>(cfg.seed));
    for (const char* c : {"split", "init", "batches", "stage2", "stage3/0"})
        std::printf("  %-10s -> %llu\n", c,
                    static_cast<unsigned long long>(lessvfl::sub_seed(cfg.seed, c)));
}

int cmd_run(const std::string& config_path) {
    json raw = read_json(config_path);
    lessvfl::ExperimentConfig cfg = lessvfl::parse_config(raw);
    print_seed_table(cfg);
    json echo = lessvfl::config_to_json(cfg);
    // the echo must itself re-validate to an identical config
    (void)lessvfl::parse_config(echo);
    auto records = lessvfl::run_experiment(cfg, echo);
    if (records.size() != cfg.methods.size()) {
        std::fprintf(stderr, "run: %zu of %zu methods completed\n", records.size(), cfg.methods.size());
        return 1;
    }
    for (const auto& [name, rec] : records) {
        const auto& last = rec.series.back();
        std::printf("%-14s points=%zu final_test_loss=%.6g removal=%.2f\n", name.c_str(),
                    rec.series.size(), last.test_loss, last.spurious_removed_fraction);
    }
    std::printf("reports written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    json j = read_json(spec_path);
    lessvfl::SyntheticSpec spec = lessvfl::detail::parse_synthetic(j);
    lessvfl::SyntheticData synth = lessvfl::synth_generate(spec);
    fs::create_directories(out_dir);
    lessvfl::save_csv(synth.dataset, (fs::path(out_dir) / "data.csv").string());
    json sidecar;
    sidecar["spurious_flags"] = synth.dataset.spurious_flags;
    sidecar["feature_names"] = synth.dataset.feature_names;
    sidecar["classification"] = synth.dataset.classification;
    sidecar["partition"] = synth.partition_spec.lists;
    std::ofstream out(fs::path(out_dir) / "ground_truth.json");
    out << sidecar.dump(2) << '\n';
    std::printf("wrote %s/data.csv (%d samples, %d features)\n", out_dir.c_str(),
                synth.dataset.n(), synth.dataset.d());
    return 0;
}

int cmd_grid(const std::string& config_path) {
    json raw = read_json(config_path);
    lessvfl::ExperimentConfig cfg = lessvfl::parse_config(raw);
    lessvfl::GridSpec grid = lessvfl::parse_grid(raw);
    auto rows = lessvfl::grid_search(cfg, grid.lambda_m, grid.lambda_s, grid.pretrain_epochs);
    fs::create_directories(cfg.out_dir);
    const fs::path out = fs::path(cfg.out_dir) / "grid.csv";
    lessvfl::write_grid_csv(rows, out);
    std::printf("%zu grid rows written to %s\n", rows.size(), out.string().c_str());
    return 0;
}

int cmd_report(const std::string& run_dir) {
    if (!fs::is_directory(run_dir)) throw std::invalid_argument("'" + run_dir + "' is not a directory");
    struct Row {
        std::string method;
        double total_mb = 0.0;
        double best_acc = 0.0;
        bool has_acc = false;
        double final_acc = 0.0, final_removal = 0.0;
        lessvfl::MetricsRecord rec;
    };
    std::vector<Row> rows;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const fs::path rp = entry.path() / "report.json";
        if (!fs::exists(rp)) continue;
        json j;
        try {
            j = read_json(rp.string());
        } catch (const std::exception& e) {
            throw std::invalid_argument("malformed JSON in '" + rp.string() + "': " + e.what());
        }
        Row row;
        row.method = j.at("method").get<std::string>();
        for (const auto& p : j.at("series")) {
            lessvfl::MetricsPoint mp;
            mp.cumulative_mb = p.at("cumulative_mb").get<double>();
            mp.spurious_removed_fraction = p.at("spurious_removed_fraction").get<double>();
            if (p.contains("test_accuracy")) {
                mp.test_accuracy = p.at("test_accuracy").get<double>();
                row.has_acc = true;
                row.best_acc = std::max(row.best_acc, *mp.test_accuracy);
                row.final_acc = *mp.test_accuracy;
            }
            row.final_removal = mp.spurious_removed_fraction;
            row.total_mb = mp.cumulative_mb;
            row.rec.series.push_back(std::move(mp));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("no method reports under '" + run_dir + "'");

    double baseline_best = 0.0;
    for (const Row& r : rows)
        if (r.method == "vfl_original") baseline_best = r.best_acc;
    lessvfl::TargetSpec targets;
    std::printf("%-14s %10s %12s %10s %10s\n", "method", "total_mb", "cost_to_tgt", "final_acc",
                "removal");
    for (const Row& r : rows) {
        std::string cost = "-";
        if (baseline_best > 0.0 && r.has_acc) {
            auto c = lessvfl::cost_to_targets(r.rec, baseline_best, targets);
            if (c) cost = std::to_string(*c);
        }
        std::printf("%-14s %10.4f %12s %10.4f %10.2f\n", r.method.c_str(), r.total_mb, cost.c_str(),
                    r.final_acc, r.final_removal);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Communication-efficient feature selection for vertical federated learning"};
    app.require_subcommand(1);

    std::string config_path, spec_path, out_dir, run_dir;

    auto* run = app.add_subcommand("run", "Run the configured method suite");
    run->add_option("config", config_path, "JSON experiment config")->required();

    auto* synth = app.add_subcommand("synth", "Materialize a synthetic dataset to CSV");
    synth->add_option("spec", spec_path, "JSON synthetic spec")->required();
    synth->add_option("out_dir", out_dir, "output directory")->required();

    auto* grid = app.add_subcommand("grid", "Grid search over regularization parameters");
    grid->add_option("config", config_path, "JSON experiment config with a 'grid' section")->required();

    auto* report = app.add_subcommand("report", "Summarize reports in a run directory");
    report->add_option("run_dir", run_dir, "directory holding per-method reports")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (synth->parsed()) return cmd_synth(spec_path, out_dir);
        if (grid->parsed()) return cmd_grid(config_path);
        if (report->parsed()) return cmd_report(run_dir);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
