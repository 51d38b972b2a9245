#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "floodlib/errors.hpp"
#include "floodlib/io.hpp"
#include "floodlib/matrix.hpp"

namespace floodlib {

inline constexpr double kProbClamp = 1e-12;

// Argmax with ties broken toward the lowest class index.
inline int argmax_class(std::span<const double> row) {
    int best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = static_cast<int>(c);
    return best;
}

inline double accuracy(const Matrix& preds, const std::vector<int>& labels) {
    if (preds.rows() != labels.size()) throw ShapeError("accuracy: row/label mismatch");
    if (preds.rows() == 0) throw ConfigError("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.rows(); ++i)
        if (argmax_class(preds.row(i)) == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.rows());
}

struct RegressionMetrics {
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> r2;  // absent when targets are constant
};

inline RegressionMetrics regression_metrics(std::span<const double> preds,
                                            std::span<const double> targets) {
    if (preds.size() != targets.size()) throw ShapeError("regression_metrics: length mismatch");
    if (preds.size() < 2) throw ConfigError("regression_metrics: need at least 2 samples");
    const std::size_t n = preds.size();
    double se = 0.0, ae = 0.0, tsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = preds[i] - targets[i];
        se += d * d;
        ae += std::abs(d);
        tsum += targets[i];
    }
    const double tmean = tsum / static_cast<double>(n);
    double ss_tot = 0.0;
    for (double t : targets) ss_tot += (t - tmean) * (t - tmean);
    RegressionMetrics m;
    m.mse = se / static_cast<double>(n);
    m.mae = ae / static_cast<double>(n);
    if (ss_tot > 0.0) m.r2 = 1.0 - se / ss_tot;
    return m;
}

// Mean -log p_true with probabilities clamped at 1e-12.
inline double nll(const Matrix& preds, const std::vector<int>& labels) {
    if (preds.rows() != labels.size()) throw ShapeError("nll: row/label mismatch");
    if (preds.rows() == 0) throw ConfigError("nll: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.rows(); ++i) {
        const double p = std::max(preds(i, static_cast<std::size_t>(labels[i])), kProbClamp);
        total += -std::log(p);
    }
    return total / static_cast<double>(preds.rows());
}

struct CalibrationReport {
    std::vector<double> bin_edges;  // bins + 1 uniform edges over [0, 1]
    std::vector<std::size_t> counts;
    std::vector<double> mean_confidence;
    std::vector<double> mean_accuracy;
    double ece = 0.0;

    Json to_json() const {
        Json j;
        j["bins"] = counts.size();
        j["bin_edges"] = bin_edges;
        j["counts"] = counts;
        j["mean_confidence"] = mean_confidence;
        j["mean_accuracy"] = mean_accuracy;
        j["ece"] = ece;
        return j;
    }
};

// Confidence = max probability; bins are [e_b, e_{b+1}) with the final bin
// closed at 1. Empty bins report zero means and contribute nothing.
inline CalibrationReport ece(const Matrix& preds, const std::vector<int>& labels, int bins = 10) {
    if (bins < 1) throw ConfigError("ece: bins must be >= 1");
    if (preds.rows() != labels.size()) throw ShapeError("ece: row/label mismatch");
    if (preds.rows() == 0) throw ConfigError("ece: empty input");

    CalibrationReport rep;
    rep.bin_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) rep.bin_edges[b] = static_cast<double>(b) / bins;
    rep.counts.assign(bins, 0);
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);

    const std::size_t n = preds.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const int pred = argmax_class(preds.row(i));
        const double conf = preds(i, static_cast<std::size_t>(pred));
        int b = static_cast<int>(conf * bins);
        if (b >= bins) b = bins - 1;
        if (b < 0) b = 0;
        rep.counts[b] += 1;
        conf_sum[b] += conf;
        acc_sum[b] += (pred == labels[i]) ? 1.0 : 0.0;
    }
    rep.mean_confidence.assign(bins, 0.0);
    rep.mean_accuracy.assign(bins, 0.0);
    double e = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (rep.counts[b] == 0) continue;
        const double cnt = static_cast<double>(rep.counts[b]);
        rep.mean_confidence[b] = conf_sum[b] / cnt;
        rep.mean_accuracy[b] = acc_sum[b] / cnt;
        e += cnt / static_cast<double>(n) * std::abs(rep.mean_accuracy[b] - rep.mean_confidence[b]);
    }
    rep.ece = e;
    return rep;
}

namespace detail {

// Fractional ranks (1-based), ties get the average rank of their run.
inline std::vector<double> fractional_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// Pearson correlation of fractional ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("spearman: length mismatch");
    if (x.size() < 2) throw ConfigError("spearman: need at least 2 points");
    const auto rx = detail::fractional_ranks(x);
    const auto ry = detail::fractional_ranks(y);
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw MetricError("spearman: zero rank variance");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace floodlib
