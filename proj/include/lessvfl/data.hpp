#pragma once

#include "lessvfl/vfl.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace lessvfl {

struct TabularDataset {
    Matrix features;  // N x d
    Matrix labels;    // N x 1 (real target or class index)
    std::vector<std::string> feature_names;
    std::vector<bool> spurious_flags;  // ground truth when known, else all false
    bool classification = false;
    int num_classes = 0;

    int n() const { return static_cast<int>(features.rows()); }
    int d() const { return static_cast<int>(features.cols()); }
};

namespace detail {

inline double parse_cell(const std::string& cell, int line, int col) {
    double value;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw std::runtime_error("csv: non-numeric cell '" + cell + "' at line " +
                                 std::to_string(line) + ", column " + std::to_string(col + 1));
    return value;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace detail

/// Comma-separated numeric table; the label column is extracted by name
/// (header required) or 0-based index.
inline TabularDataset load_csv(const std::string& path, const std::string& label_column,
                               bool has_header, bool classification = false) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");

    std::string line;
    std::vector<std::string> header;
    int line_no = 0;
    if (has_header) {
        if (!std::getline(in, line)) throw std::runtime_error("csv: '" + path + "' is empty");
        ++line_no;
        header = detail::split_line(line);
        for (auto& h : header) {
            while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
        }
    }

    std::vector<std::vector<double>> rows;
    size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_line(line);
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw std::runtime_error("csv: ragged row at line " + std::to_string(line_no) +
                                     " (" + std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(width) + ")");
        std::vector<double> row(width);
        for (size_t c = 0; c < width; ++c) row[c] = detail::parse_cell(cells[c], line_no, static_cast<int>(c));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("csv: '" + path + "' has no data rows");
    if (has_header && header.size() != width)
        throw std::runtime_error("csv: header width does not match data width");

    int label_idx = -1;
    if (has_header) {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == label_column) label_idx = static_cast<int>(i);
    }
    if (label_idx < 0) {
        int parsed = -1;
        auto [ptr, ec] = std::from_chars(label_column.data(), label_column.data() + label_column.size(), parsed);
        if (ec == std::errc{} && ptr == label_column.data() + label_column.size() &&
            parsed >= 0 && parsed < static_cast<int>(width))
            label_idx = parsed;
    }
    if (label_idx < 0)
        throw std::runtime_error("csv: unknown label column '" + label_column + "'");

    TabularDataset ds;
    const int n = static_cast<int>(rows.size());
    const int d = static_cast<int>(width) - 1;
    if (d <= 0) throw std::runtime_error("csv: no feature columns besides the label");
    ds.features.resize(n, d);
    ds.labels.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        int k = 0;
        for (int c = 0; c < static_cast<int>(width); ++c) {
            if (c == label_idx)
                ds.labels(i, 0) = rows[i][c];
            else
                ds.features(i, k++) = rows[i][c];
        }
    }
    for (int c = 0; c < static_cast<int>(width); ++c) {
        if (c == label_idx) continue;
        ds.feature_names.push_back(has_header ? header[c] : "f" + std::to_string(c));
    }
    ds.spurious_flags.assign(d, false);
    ds.classification = classification;
    if (classification)
        ds.num_classes = static_cast<int>(ds.labels.maxCoeff()) + 1;
    return ds;
}

/// Writes values as decimal text with 17 significant digits so that a
/// save/load round trip is exact.
inline void save_csv(const TabularDataset& ds, const std::string& path,
                     const std::string& label_name = "label") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write '" + path + "'");
    for (const auto& name : ds.feature_names) out << name << ',';
    out << label_name << '\n';
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.d(); ++j) {
            put(ds.features(i, j));
            out << ',';
        }
        put(ds.labels(i, 0));
        out << '\n';
    }
}

/// Appends floor(ratio * d) standard-normal noise columns and flags them
/// spurious. Original columns are untouched.
inline TabularDataset inject_spurious(const TabularDataset& ds, double ratio, std::uint64_t seed) {
    if (ratio < 0.0) throw std::invalid_argument("inject_spurious: ratio must be non-negative");
    const int extra = static_cast<int>(ratio * ds.d());
    if (extra == 0) return ds;
    TabularDataset out = ds;
    out.features.conservativeResize(Eigen::NoChange, ds.d() + extra);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int j = 0; j < extra; ++j)
        for (int i = 0; i < ds.n(); ++i) out.features(i, ds.d() + j) = gauss(rng);
    for (int j = 0; j < extra; ++j) {
        out.feature_names.push_back("noise" + std::to_string(j));
        out.spurious_flags.push_back(true);
    }
    return out;
}

struct PartitionSpec {
    enum class Scheme { EvenContiguous, ExplicitLists };
    int parties = 1;
    Scheme scheme = Scheme::EvenContiguous;
    std::vector<std::vector<int>> lists;  // ExplicitLists only

    static PartitionSpec even(int m) {
        PartitionSpec s;
        s.parties = m;
        return s;
    }

    static PartitionSpec explicit_lists(std::vector<std::vector<int>> l) {
        PartitionSpec s;
        s.parties = static_cast<int>(l.size());
        s.scheme = Scheme::ExplicitLists;
        s.lists = std::move(l);
        return s;
    }

    /// Per-party global column indices; validates disjoint exact cover.
    std::vector<std::vector<int>> columns_for(int d) const {
        if (parties < 1) throw std::invalid_argument("partition: need at least one party");
        std::vector<std::vector<int>> cols;
        if (scheme == Scheme::EvenContiguous) {
            if (parties > d) throw std::invalid_argument("partition: more parties than columns");
            const int base = d / parties, rem = d % parties;
            int at = 0;
            for (int m = 0; m < parties; ++m) {
                const int take = base + (m < rem ? 1 : 0);
                std::vector<int> c(take);
                std::iota(c.begin(), c.end(), at);
                at += take;
                cols.push_back(std::move(c));
            }
            return cols;
        }
        std::vector<bool> seen(d, false);
        int covered = 0;
        for (const auto& list : lists) {
            if (list.empty()) throw std::invalid_argument("partition: empty party list");
            for (int c : list) {
                if (c < 0 || c >= d) throw std::invalid_argument("partition: column index out of range");
                if (seen[c]) throw std::invalid_argument("partition: overlapping column lists");
                seen[c] = true;
                ++covered;
            }
        }
        if (covered != d) throw std::invalid_argument("partition: lists do not cover all columns");
        return lists;
    }
};

struct Partitioned {
    std::vector<Matrix> shards;
    std::vector<std::vector<int>> global_columns;  // shard-local -> global column map
};

inline Partitioned partition(const Matrix& features, const PartitionSpec& spec) {
    Partitioned out;
    out.global_columns = spec.columns_for(static_cast<int>(features.cols()));
    for (const auto& cols : out.global_columns) {
        Matrix shard(features.rows(), static_cast<Eigen::Index>(cols.size()));
        for (size_t k = 0; k < cols.size(); ++k) shard.col(static_cast<Eigen::Index>(k)) = features.col(cols[k]);
        out.shards.push_back(std::move(shard));
    }
    return out;
}

struct SyntheticSpec {
    int parties = 2;
    int significant_per_party = 10;
    int spurious_per_party = 5;
    std::vector<int> hidden_sizes = {8};
    int embedding_dim = 4;
    int n = 2000;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
    bool classification = false;

    void validate() const {
        if (parties < 1 || significant_per_party < 1 || spurious_per_party < 0 || n < 1 ||
            embedding_dim < 1 || noise_sigma < 0.0)
            throw std::invalid_argument("synthetic spec: invalid field value");
    }
};

struct SyntheticData {
    TabularDataset dataset;
    VflSystem generator;  // ground-truth generating model, zero columns on spurious features
    PartitionSpec partition_spec;
};

/// Generating model: per-party Tanh nets with the spurious input columns
/// zeroed by construction, a linear fusion model on top, X ~ N(0,1),
/// y = f(X) + N(0, sigma^2). Classification thresholds the scalar output at
/// its median and flips labels with probability min(sigma, 0.49).
inline SyntheticData synth_generate(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    SyntheticData out;
    const int d_m = spec.significant_per_party + spec.spurious_per_party;
    std::vector<std::vector<int>> lists;
    for (int m = 0; m < spec.parties; ++m) {
        Party party;
        party.net = make_network(d_m, spec.hidden_sizes, spec.embedding_dim, Activation::Tanh, rng);
        // spurious features occupy the tail columns of each party; significant
        // columns are rescaled to unit norm so none of them is significant in
        // name only
        for (int j = 0; j < spec.significant_per_party; ++j) {
            const double n = party.net.layers.front().weights.col(j).norm();
            if (n > 0.0) party.net.layers.front().weights.col(j) /= n;
        }
        for (int j = spec.significant_per_party; j < d_m; ++j)
            party.net.layers.front().weights.col(j).setZero();
        out.generator.parties.push_back(std::move(party));
        std::vector<int> cols(d_m);
        std::iota(cols.begin(), cols.end(), m * d_m);
        lists.push_back(std::move(cols));
    }
    out.generator.server =
        make_network(spec.parties * spec.embedding_dim, {}, 1, Activation::Tanh, rng);
    out.partition_spec = PartitionSpec::explicit_lists(lists);

    const int d = spec.parties * d_m;
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x = Matrix::NullaryExpr(spec.n, d, [&]() { return gauss(rng); });

    // evaluate the generating model; standardize each generating embedding
    // component (folded into the output layer) so no party's contribution to
    // the label dwarfs another's by luck of the random init
    Matrix server_input(spec.n, spec.parties * spec.embedding_dim);
    for (int m = 0; m < spec.parties; ++m) {
        out.generator.parties[m].data = x.middleCols(m * d_m, d_m);
        Matrix emb = forward(out.generator.parties[m].net, out.generator.parties[m].data);
        Layer& head = out.generator.parties[m].net.layers.back();
        for (int k = 0; k < spec.embedding_dim; ++k) {
            const double mu = emb.col(k).mean();
            const double sd = std::sqrt((emb.col(k).array() - mu).square().sum() / spec.n);
            if (sd > 0.0) {
                head.weights.row(k) /= sd;
                head.bias(k) = (head.bias(k) - mu) / sd;
            }
        }
        server_input.middleCols(m * spec.embedding_dim, spec.embedding_dim) =
            forward(out.generator.parties[m].net, out.generator.parties[m].data);
    }
    Matrix f = forward(out.generator.server, server_input);

    TabularDataset& ds = out.dataset;
    ds.features = x;
    ds.labels.resize(spec.n, 1);
    ds.classification = spec.classification;
    if (spec.classification) {
        std::vector<double> sorted(f.data(), f.data() + f.size());
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        const double threshold = sorted[sorted.size() / 2];
        const double flip_p = std::min(spec.noise_sigma, 0.49);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < spec.n; ++i) {
            int label = f(i, 0) > threshold ? 1 : 0;
            if (u(rng) < flip_p) label = 1 - label;
            ds.labels(i, 0) = label;
        }
        ds.num_classes = 2;
    } else {
        for (int i = 0; i < spec.n; ++i) ds.labels(i, 0) = f(i, 0) + spec.noise_sigma * gauss(rng);
    }
    for (int m = 0; m < spec.parties; ++m) {
        for (int j = 0; j < d_m; ++j) {
            const bool spurious = j >= spec.significant_per_party;
            ds.feature_names.push_back("p" + std::to_string(m) + (spurious ? "_z" : "_s") +
                                       std::to_string(j));
            ds.spurious_flags.push_back(spurious);
        }
    }
    out.generator.labels = ds.labels;
    out.generator.rng_seed = spec.seed;
    return out;
}

/// Seeded shuffle split; indices are chosen once globally so every party's
/// shard stays row-aligned.
inline std::pair<TabularDataset, TabularDataset> split(const TabularDataset& ds,
                                                       double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw std::invalid_argument("split: train_fraction must be in (0, 1)");
    std::vector<int> idx(ds.n());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n_train = static_cast<int>(train_fraction * ds.n());
    if (n_train == 0 || n_train == ds.n())
        throw std::invalid_argument("split: a side would be empty");

    auto take = [&](int begin, int end) {
        TabularDataset part = ds;
        part.features.resize(end - begin, ds.d());
        part.labels.resize(end - begin, 1);
        for (int i = begin; i < end; ++i) {
            part.features.row(i - begin) = ds.features.row(idx[i]);
            part.labels.row(i - begin) = ds.labels.row(idx[i]);
        }
        return part;
    };
    return {take(0, n_train), take(n_train, ds.n())};
}

/// Z-score both splits using the training split's per-column statistics.
inline void standardize(TabularDataset& train, TabularDataset& test) {
    for (int j = 0; j < train.d(); ++j) {
        const double mean = train.features.col(j).mean();
        const double var = (train.features.col(j).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        const double scale = sd > 0.0 ? 1.0 / sd : 1.0;
        train.features.col(j) = (train.features.col(j).array() - mean) * scale;
        test.features.col(j) = (test.features.col(j).array() - mean) * scale;
    }
}

}  // namespace lessvfl
