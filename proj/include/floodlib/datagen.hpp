#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "floodlib/dataset.hpp"
#include "floodlib/errors.hpp"
#include "floodlib/io.hpp"
#include "floodlib/rng.hpp"

namespace floodlib {

// Azzalini-construction skew-normal: X = scale * (d|Z0| + sqrt(1-d^2) Z1)
// with d = shape / sqrt(1 + shape^2); shape 0 reduces to N(0, scale^2).
class SkewNormalSampler {
  public:
    SkewNormalSampler(double shape, double scale) : scale_(scale) {
        if (!(scale > 0.0)) throw ConfigError("skew noise: scale must be positive");
        delta_ = shape / std::sqrt(1.0 + shape * shape);
        tail_ = std::sqrt(1.0 - delta_ * delta_);
    }

    double operator()(std::mt19937_64& rng) {
        const double z0 = normal_(rng);
        const double z1 = normal_(rng);
        return scale_ * (delta_ * std::abs(z0) + tail_ * z1);
    }

  private:
    double scale_;
    double delta_;
    double tail_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct ToyGaussianConfig {
    int num_classes = 3;
    int dim = 10;
    double delta_mu = 1.0;
    double sigma_regular = 0.3;
    double sigma_irregular = 1.0;
    double frac_regular = 0.7;
    double frac_irregular = 0.15;
    double frac_mislabeled = 0.15;
    int n_samples = 300;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_classes < 2) throw ConfigError("toy gaussian: K must be >= 2");
        if (dim < 1) throw ConfigError("toy gaussian: dim must be positive");
        if (!(delta_mu > 0.0)) throw ConfigError("toy gaussian: delta_mu must be positive");
        if (!(sigma_regular > 0.0) || !(sigma_irregular > 0.0))
            throw ConfigError("toy gaussian: sigmas must be positive");
        if (!(sigma_irregular > sigma_regular))
            throw ConfigError("toy gaussian: sigma_irregular must exceed sigma_regular");
        const double total = frac_regular + frac_irregular + frac_mislabeled;
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("toy gaussian: fractions must sum to 1");
        if (frac_regular < 0.0 || frac_irregular < 0.0 || frac_mislabeled < 0.0)
            throw ConfigError("toy gaussian: fractions must be nonnegative");
        if (n_samples < num_classes) throw ConfigError("toy gaussian: need at least K samples");
    }
};

namespace detail {

inline Dataset draw_toy_dataset(const ToyGaussianConfig& cfg,
                                const std::vector<std::vector<double>>& means,
                                std::mt19937_64& rng) {
    const int K = cfg.num_classes;
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> other(0, K - 2);

    struct Row {
        std::vector<double> x;
        int label;
        Provenance prov;
    };
    std::vector<Row> rows;
    rows.reserve(cfg.n_samples);

    for (int k = 0; k < K; ++k) {
        const int n_k = cfg.n_samples / K + (k < cfg.n_samples % K ? 1 : 0);
        const int n_mis = static_cast<int>(std::lround(cfg.frac_mislabeled * n_k));
        const int n_irr = static_cast<int>(std::lround(cfg.frac_irregular * n_k));
        const int n_reg = n_k - n_mis - n_irr;
        if (n_reg < 0) throw ConfigError("toy gaussian: fractions leave no regular samples");
        for (int i = 0; i < n_k; ++i) {
            const bool irregular = i >= n_reg && i < n_reg + n_irr;
            const bool mislabeled = i >= n_reg + n_irr;
            const double sigma = irregular ? cfg.sigma_irregular : cfg.sigma_regular;
            Row row;
            row.x.resize(cfg.dim);
            for (int j = 0; j < cfg.dim; ++j) row.x[j] = means[k][j] + sigma * unit(rng);
            if (mislabeled) {
                int flipped = other(rng);
                if (flipped >= k) ++flipped;
                row.label = flipped;
                row.prov = Provenance::FlippedLabel;
            } else {
                row.label = k;
                row.prov = irregular ? Provenance::Irregular : Provenance::Clean;
            }
            rows.push_back(std::move(row));
        }
    }
    std::shuffle(rows.begin(), rows.end(), rng);

    Dataset ds;
    ds.task = TaskKind::Classification;
    ds.num_classes = K;
    ds.features = Matrix(rows.size(), cfg.dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < cfg.dim; ++c) ds.features(r, static_cast<std::size_t>(c)) = rows[r].x[c];
        ds.labels.push_back(rows[r].label);
        ds.sample_ids.push_back(static_cast<std::int64_t>(r));
        ds.provenance.push_back(rows[r].prov);
    }
    for (int c = 0; c < cfg.dim; ++c) ds.feature_names.push_back("f" + std::to_string(c));
    ds.target_name = "label";
    return ds;
}

}  // namespace detail

// Two sibling datasets drawn from the same class means: per class, entries of
// mu_k are picked from {-delta_mu, 0, +delta_mu}; regular and mislabeled
// samples use sigma_regular, irregular ones sigma_irregular, and mislabeled
// samples carry a uniformly chosen wrong label.
inline std::pair<Dataset, Dataset> gen_toy_gaussian(const ToyGaussianConfig& cfg) {
    cfg.validate();
    auto rng = make_engine(cfg.seed);
    std::uniform_int_distribution<int> tri(0, 2);
    std::vector<std::vector<double>> means(cfg.num_classes, std::vector<double>(cfg.dim));
    for (auto& mu : means)
        for (double& v : mu) v = (tri(rng) - 1) * cfg.delta_mu;
    Dataset a = detail::draw_toy_dataset(cfg, means, rng);
    Dataset b = detail::draw_toy_dataset(cfg, means, rng);
    return {std::move(a), std::move(b)};
}

// Flips floor(percent * N / 100) uniformly chosen labels to a uniformly
// random different class.
inline Dataset flip_labels(const Dataset& ds, double percent, std::uint64_t seed) {
    if (ds.task != TaskKind::Classification)
        throw ConfigError("flip_labels: dataset is not a classification task");
    if (percent < 0.0 || percent > 100.0) throw ConfigError("flip_labels: percent outside [0, 100]");
    Dataset out = ds;
    const std::size_t n = ds.size();
    const auto n_flip = static_cast<std::size_t>(std::floor(percent * static_cast<double>(n) / 100.0));
    if (n_flip == 0) return out;
    auto rng = make_engine(seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::uniform_int_distribution<int> other(0, ds.num_classes - 2);
    for (std::size_t i = 0; i < n_flip; ++i) {
        const std::size_t r = idx[i];
        int flipped = other(rng);
        if (flipped >= out.labels[r]) ++flipped;
        out.labels[r] = flipped;
        out.provenance[r] = Provenance::FlippedLabel;
    }
    return out;
}

// Adds an independent skew-normal draw to every regression target.
inline Dataset add_skew_noise(const Dataset& ds, double shape, double scale, std::uint64_t seed) {
    if (ds.task != TaskKind::Regression)
        throw ConfigError("add_skew_noise: dataset is not a regression task");
    Dataset out = ds;
    auto rng = make_engine(seed);
    SkewNormalSampler sampler(shape, scale);
    for (std::size_t i = 0; i < out.targets.size(); ++i) {
        out.targets[i] += sampler(rng);
        out.provenance[i] = Provenance::SkewNoise;
    }
    return out;
}

namespace detail {

// Single-line RFC-4180 field splitting (quoted fields, escaped quotes).
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw IoError("csv: unterminated quote at row " + std::to_string(row));
    fields.push_back(std::move(cur));
    return fields;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw IoError("csv: non-numeric cell at row " + std::to_string(row) + ", column '" + col +
                      "': '" + cell + "'");
    }
}

}  // namespace detail

// Header row required. Columns other than the target, `__noise_flag` and
// `__sample_id` are numeric features; ids default to row order.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                        TaskKind task) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError("csv: empty file " + path.string());
    const auto header = detail::split_csv_line(line, 0);

    Dataset ds;
    ds.task = task;
    ds.target_name = target_column;
    std::size_t target_idx = header.size(), flag_idx = header.size(), id_idx = header.size();
    std::vector<std::size_t> feature_idx;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == target_column)
            target_idx = c;
        else if (header[c] == "__noise_flag")
            flag_idx = c;
        else if (header[c] == "__sample_id")
            id_idx = c;
        else {
            feature_idx.push_back(c);
            ds.feature_names.push_back(header[c]);
        }
    }
    if (target_idx == header.size())
        throw IoError("csv: target column '" + target_column + "' not found in " + path.string());
    if (feature_idx.empty()) throw IoError("csv: no feature columns in " + path.string());

    std::vector<std::vector<double>> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line, row_no);
        if (cells.size() != header.size())
            throw IoError("csv: row " + std::to_string(row_no) + " has " +
                          std::to_string(cells.size()) + " cells, header has " +
                          std::to_string(header.size()));
        std::vector<double> feats;
        feats.reserve(feature_idx.size());
        for (std::size_t c : feature_idx)
            feats.push_back(detail::parse_cell(cells[c], row_no, header[c]));
        rows.push_back(std::move(feats));

        const double target = detail::parse_cell(cells[target_idx], row_no, target_column);
        if (task == TaskKind::Classification) {
            const int y = static_cast<int>(std::llround(target));
            if (std::abs(target - y) > 1e-9 || y < 0)
                throw IoError("csv: row " + std::to_string(row_no) +
                              ": classification target must be a nonnegative integer");
            ds.labels.push_back(y);
        } else {
            ds.targets.push_back(target);
        }
        ds.provenance.push_back(flag_idx < header.size() ? provenance_from_name(cells[flag_idx])
                                                         : Provenance::Clean);
        ds.sample_ids.push_back(id_idx < header.size()
                                    ? static_cast<std::int64_t>(
                                          detail::parse_cell(cells[id_idx], row_no, "__sample_id"))
                                    : static_cast<std::int64_t>(rows.size() - 1));
    }
    if (rows.empty()) throw IoError("csv: no data rows in " + path.string());

    ds.features = Matrix::from_rows(rows);
    if (task == TaskKind::Classification) {
        int k = 0;
        for (int y : ds.labels) k = std::max(k, y + 1);
        ds.num_classes = std::max(k, 2);
    }
    ds.validate();
    return ds;
}

inline void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& name : ds.feature_names) out << name << ",";
    out << ds.target_name << ",__noise_flag,__sample_id\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.dim(); ++c) out << format_double(ds.features(r, c)) << ",";
        if (ds.task == TaskKind::Classification)
            out << ds.labels[r];
        else
            out << format_double(ds.targets[r]);
        out << "," << provenance_name(ds.provenance[r]) << "," << ds.sample_ids[r] << "\n";
    }
    write_text_file(path, out.str());
}

// Disjoint train/val split with exactly floor(train_frac * N) training rows;
// stratified by class for classification. train_frac = 1 leaves the
// validation side empty (callers may warn).
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac <= 1.0))
        throw ConfigError("split: train_frac must be in (0, 1]");
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
    auto rng = make_engine(seed);

    std::vector<std::size_t> train_rows;
    if (ds.task == TaskKind::Classification) {
        std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
        for (std::size_t r = 0; r < n; ++r) by_class[ds.labels[r]].push_back(r);
        for (auto& g : by_class) std::shuffle(g.begin(), g.end(), rng);
        // Largest-remainder quota per class so the stratified total is exact.
        std::vector<std::size_t> quota(by_class.size());
        std::vector<std::pair<double, std::size_t>> rem;
        std::size_t assigned = 0;
        for (std::size_t k = 0; k < by_class.size(); ++k) {
            const double exact = train_frac * static_cast<double>(by_class[k].size());
            quota[k] = static_cast<std::size_t>(std::floor(exact));
            quota[k] = std::min(quota[k], by_class[k].size());
            assigned += quota[k];
            rem.emplace_back(exact - std::floor(exact), k);
        }
        std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (const auto& [frac, k] : rem) {
            if (assigned >= n_train) break;
            if (quota[k] < by_class[k].size()) {
                ++quota[k];
                ++assigned;
            }
        }
        for (std::size_t k = 0; k < by_class.size(); ++k)
            for (std::size_t i = 0; i < quota[k]; ++i) train_rows.push_back(by_class[k][i]);
    } else {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        train_rows.assign(idx.begin(), idx.begin() + n_train);
    }

    std::vector<bool> in_train(n, false);
    for (std::size_t r : train_rows) in_train[r] = true;
    std::vector<std::size_t> train_sorted, val_sorted;
    for (std::size_t r = 0; r < n; ++r) (in_train[r] ? train_sorted : val_sorted).push_back(r);
    return {ds.subset(train_sorted), ds.subset(val_sorted)};
}

}  // namespace floodlib
