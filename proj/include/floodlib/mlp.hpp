#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "floodlib/errors.hpp"
#include "floodlib/io.hpp"
#include "floodlib/matrix.hpp"
#include "floodlib/metrics.hpp"
#include "floodlib/rng.hpp"

namespace floodlib {

enum class OutputHead { Softmax, Identity };

inline const char* output_head_name(OutputHead h) {
    return h == OutputHead::Softmax ? "softmax" : "identity";
}

inline OutputHead output_head_from_name(const std::string& s) {
    if (s == "softmax") return OutputHead::Softmax;
    if (s == "identity") return OutputHead::Identity;
    throw IoError("unknown output head: " + s);
}

// Dense feed-forward network: ReLU on hidden layers, softmax or identity on
// the output. weights[l] is (dims[l] x dims[l+1]), biases[l] has dims[l+1].
struct MlpModel {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    OutputHead head = OutputHead::Softmax;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
            n += (layer_dims[l] + 1) * layer_dims[l + 1];
        return n;
    }

    bool operator==(const MlpModel& other) const = default;
};

inline MlpModel make_mlp(std::vector<std::size_t> dims, OutputHead head) {
    if (dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
    for (std::size_t d : dims)
        if (d == 0) throw ConfigError("mlp layer dims must be positive");
    MlpModel m;
    m.layer_dims = std::move(dims);
    m.head = head;
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        m.weights.emplace_back(m.layer_dims[l], m.layer_dims[l + 1]);
        m.biases.emplace_back(m.layer_dims[l + 1], 0.0);
    }
    return m;
}

// He-style uniform fan-in init: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
inline void reinit_layer(MlpModel& m, std::size_t layer, std::mt19937_64& rng) {
    Matrix& w = m.weights[layer];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : w.data()) v = dist(rng);
    std::fill(m.biases[layer].begin(), m.biases[layer].end(), 0.0);
}

inline MlpModel init_mlp(std::vector<std::size_t> dims, OutputHead head, std::uint64_t seed) {
    MlpModel m = make_mlp(std::move(dims), head);
    auto rng = make_engine(seed);
    for (std::size_t l = 0; l < m.num_layers(); ++l) reinit_layer(m, l, rng);
    return m;
}

namespace detail {

inline void softmax_row(std::span<double> row) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : row) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : row) v /= sum;
}

// Hidden activations kept for the backward pass. acts[0] is the input,
// acts[l+1] the post-ReLU output of hidden layer l; `output` is post-head.
struct ForwardTrace {
    std::vector<Matrix> acts;
    Matrix output;
};

inline ForwardTrace forward_trace(const MlpModel& m, const Matrix& x) {
    if (x.cols() != m.input_dim())
        throw ShapeError("forward: batch has " + std::to_string(x.cols()) +
                         " features, model expects " + std::to_string(m.input_dim()));
    ForwardTrace t;
    t.acts.reserve(m.num_layers());
    t.acts.push_back(x);
    const std::size_t L = m.num_layers();
    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& in = t.acts.back();
        const Matrix& w = m.weights[l];
        Matrix out(in.rows(), w.cols());
        for (std::size_t i = 0; i < in.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) = m.biases[l][j];
            for (std::size_t k = 0; k < w.rows(); ++k) {
                const double v = in(i, k);
                if (v == 0.0) continue;
                for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) += v * w(k, j);
            }
        }
        if (l + 1 < L) {
            for (double& v : out.data()) v = std::max(v, 0.0);
            t.acts.push_back(std::move(out));
        } else {
            if (m.head == OutputHead::Softmax)
                for (std::size_t i = 0; i < out.rows(); ++i) softmax_row(out.row(i));
            t.output = std::move(out);
        }
    }
    return t;
}

}  // namespace detail

// Batch evaluation: probabilities (softmax head) or raw outputs (identity).
inline Matrix forward(const MlpModel& m, const Matrix& x) {
    return detail::forward_trace(m, x).output;
}

inline std::vector<double> per_sample_losses(const MlpModel& m, const Matrix& x,
                                             const std::vector<int>& labels) {
    if (m.head != OutputHead::Softmax) throw ConfigError("cross-entropy needs a softmax head");
    if (x.rows() != labels.size()) throw ShapeError("losses: batch/label mismatch");
    const Matrix probs = forward(m, x);
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
            throw ShapeError("losses: label out of range");
        out[i] = -std::log(std::max(probs(i, static_cast<std::size_t>(y)), kProbClamp));
    }
    return out;
}

inline std::vector<double> per_sample_losses(const MlpModel& m, const Matrix& x,
                                             const std::vector<double>& targets) {
    if (m.head != OutputHead::Identity) throw ConfigError("squared error needs an identity head");
    if (m.output_dim() != 1) throw ConfigError("scalar regression expects output dim 1");
    if (x.rows() != targets.size()) throw ShapeError("losses: batch/target mismatch");
    const Matrix preds = forward(m, x);
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double d = preds(i, 0) - targets[i];
        out[i] = d * d;
    }
    return out;
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

namespace detail {

inline void check_upstream(std::span<const double> upstream, std::size_t batch) {
    if (upstream.size() != batch) throw ShapeError("backward: upstream/batch mismatch");
    for (double u : upstream)
        if (!std::isfinite(u)) throw NumericError("backward: non-finite upstream value");
}

// Shared backprop body. `delta` starts as dObjective/d(output preactivation);
// layers below `first_layer` are skipped (their gradients stay zero).
inline Gradients backprop(const MlpModel& m, const ForwardTrace& t, Matrix delta,
                          double l2_weight, std::size_t first_layer) {
    const std::size_t L = m.num_layers();
    Gradients g;
    g.weights.reserve(L);
    g.biases.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        g.weights.emplace_back(m.weights[l].rows(), m.weights[l].cols());
        g.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    for (std::size_t l = L; l-- > first_layer;) {
        const Matrix& in = t.acts[l];
        Matrix& gw = g.weights[l];
        for (std::size_t i = 0; i < in.rows(); ++i) {
            for (std::size_t k = 0; k < in.cols(); ++k) {
                const double v = in(i, k);
                if (v == 0.0) continue;
                for (std::size_t j = 0; j < gw.cols(); ++j) gw(k, j) += v * delta(i, j);
            }
            for (std::size_t j = 0; j < gw.cols(); ++j) g.biases[l][j] += delta(i, j);
        }
        if (l2_weight > 0.0)
            for (std::size_t idx = 0; idx < gw.data().size(); ++idx)
                gw.data()[idx] += l2_weight * m.weights[l].data()[idx];
        if (l > first_layer) {
            // delta_{l-1} = (delta_l W_l^T) .* relu'(act_{l-1})
            Matrix next(delta.rows(), m.weights[l].rows());
            const Matrix& w = m.weights[l];
            for (std::size_t i = 0; i < delta.rows(); ++i)
                for (std::size_t k = 0; k < w.rows(); ++k) {
                    if (in(i, k) <= 0.0) continue;  // ReLU gate
                    double s = 0.0;
                    for (std::size_t j = 0; j < w.cols(); ++j) s += delta(i, j) * w(k, j);
                    next(i, k) = s;
                }
            delta = std::move(next);
        }
    }
    return g;
}

}  // namespace detail

// Gradients of sum_i upstream_i * crossentropy_i (+ 0.5 * l2 * |W|^2 over
// trainable layers) w.r.t. all parameters at or above `first_layer`.
inline Gradients backward(const MlpModel& m, const Matrix& x, const std::vector<int>& labels,
                          std::span<const double> upstream, double l2_weight = 0.0,
                          std::size_t first_layer = 0) {
    if (m.head != OutputHead::Softmax) throw ConfigError("backward: label form needs softmax head");
    if (x.rows() != labels.size()) throw ShapeError("backward: batch/label mismatch");
    detail::check_upstream(upstream, x.rows());
    const auto t = detail::forward_trace(m, x);
    Matrix delta(x.rows(), m.output_dim());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < m.output_dim(); ++j)
            delta(i, j) = upstream[i] * t.output(i, j);
        delta(i, static_cast<std::size_t>(labels[i])) -= upstream[i];
    }
    return detail::backprop(m, t, std::move(delta), l2_weight, first_layer);
}

// Same for squared-error regression: d/dz of upstream_i * (z_i - t_i)^2.
inline Gradients backward(const MlpModel& m, const Matrix& x, const std::vector<double>& targets,
                          std::span<const double> upstream, double l2_weight = 0.0,
                          std::size_t first_layer = 0) {
    if (m.head != OutputHead::Identity) throw ConfigError("backward: target form needs identity head");
    if (x.rows() != targets.size()) throw ShapeError("backward: batch/target mismatch");
    detail::check_upstream(upstream, x.rows());
    const auto t = detail::forward_trace(m, x);
    Matrix delta(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i)
        delta(i, 0) = upstream[i] * 2.0 * (t.output(i, 0) - targets[i]);
    return detail::backprop(m, t, std::move(delta), l2_weight, first_layer);
}

// --- checkpoints -------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "FLOODMLP1";

// JSON checkpoint: magic, layer dims, head, seed, parameters flattened
// row-major (per layer: weight matrix rows then bias vector).
inline void save_checkpoint(const MlpModel& m, const std::filesystem::path& path,
                            std::uint64_t seed = 0) {
    Json j;
    j["magic"] = kCheckpointMagic;
    j["layer_dims"] = m.layer_dims;
    j["head"] = output_head_name(m.head);
    j["seed"] = seed;
    std::vector<double> params;
    params.reserve(m.param_count());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        params.insert(params.end(), m.weights[l].data().begin(), m.weights[l].data().end());
        params.insert(params.end(), m.biases[l].begin(), m.biases[l].end());
    }
    j["params"] = params;
    write_json_file(path, j);
}

inline MlpModel load_checkpoint(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    if (!j.contains("magic") || j["magic"] != kCheckpointMagic)
        throw IoError("not a model checkpoint: " + path.string());
    MlpModel m = make_mlp(j["layer_dims"].get<std::vector<std::size_t>>(),
                          output_head_from_name(j["head"].get<std::string>()));
    const auto params = j["params"].get<std::vector<double>>();
    if (params.size() != m.param_count())
        throw IoError("checkpoint parameter count mismatch in " + path.string());
    std::size_t pos = 0;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        for (double& v : m.weights[l].data()) v = params[pos++];
        for (double& v : m.biases[l]) v = params[pos++];
    }
    return m;
}

}  // namespace floodlib
