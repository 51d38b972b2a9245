#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "floodlib/dataset.hpp"
#include "floodlib/errors.hpp"
#include "floodlib/flood.hpp"
#include "floodlib/mlp.hpp"
#include "floodlib/rng.hpp"

namespace floodlib {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double lr0 = 0.1;
    double lr_decay = 0.2;       // multiplicative step decay, in (0, 1]
    int lr_step_epochs = 60;     // decay applied every this many epochs
    double l2_weight = 0.0;      // weights only, biases excluded
    int early_stop_patience = 0; // 0 disables early stopping
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (batch_size <= 0) throw ConfigError("batch_size must be positive");
        if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
        if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
        if (lr_step_epochs <= 0) throw ConfigError("lr_step_epochs must be positive");
        if (l2_weight < 0.0) throw ConfigError("l2_weight must be nonnegative");
        if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
    }
};

// lr(e) = lr0 * lr_decay^floor(e / lr_step_epochs), epochs counted from 0.
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_step_epochs));
}

// Marks the suffix of layers that fine-tuning re-initializes and trains.
class LayerMask {
  public:
    explicit LayerMask(std::vector<bool> flags) : flags_(std::move(flags)) {
        if (flags_.empty()) throw ConfigError("layer mask: empty");
        std::size_t first = flags_.size();
        for (std::size_t l = 0; l < flags_.size(); ++l)
            if (flags_[l]) {
                first = l;
                break;
            }
        if (first == flags_.size()) throw ConfigError("layer mask: no layer flagged");
        for (std::size_t l = first; l < flags_.size(); ++l)
            if (!flags_[l]) throw ConfigError("layer mask: flagged layers must be a suffix");
        first_ = first;
    }

    static LayerMask last_layers(std::size_t num_layers, std::size_t count) {
        if (count == 0 || count > num_layers)
            throw ConfigError("layer mask: count must be in [1, num_layers]");
        std::vector<bool> flags(num_layers, false);
        for (std::size_t l = num_layers - count; l < num_layers; ++l) flags[l] = true;
        return LayerMask(std::move(flags));
    }

    std::size_t size() const { return flags_.size(); }
    bool trainable(std::size_t layer) const { return flags_.at(layer); }
    std::size_t first_trainable() const { return first_; }

  private:
    std::vector<bool> flags_;
    std::size_t first_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_objective = 0.0;  // flood objective, batch-size weighted
    double train_loss = 0.0;       // plain mean loss, end of epoch
    double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;   // epoch whose parameters were returned
    bool early_stopped = false;
    bool diverged = false;
    std::string failure;
};

struct TrainResult {
    MlpModel model;
    TrainLog log;
};

namespace detail {

inline std::vector<double> dataset_losses(const MlpModel& m, const Dataset& ds) {
    return ds.task == TaskKind::Classification ? per_sample_losses(m, ds.features, ds.labels)
                                               : per_sample_losses(m, ds.features, ds.targets);
}

inline double mean_plain_loss(const MlpModel& m, const Dataset& ds) {
    const auto losses = dataset_losses(m, ds);
    double s = 0.0;
    for (double l : losses) s += l;
    return s / static_cast<double>(losses.size());
}

inline void sgd_step(MlpModel& m, const Gradients& g, double lr, std::size_t first_layer) {
    for (std::size_t l = first_layer; l < m.num_layers(); ++l) {
        auto& w = m.weights[l].data();
        const auto& gw = g.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
        for (std::size_t j = 0; j < m.biases[l].size(); ++j) m.biases[l][j] -= lr * g.biases[l][j];
    }
}

}  // namespace detail

// SGD over shuffled mini-batches with a multi-step LR schedule. Early
// stopping (patience > 0) monitors the plain validation loss, not the flood
// objective, and returns the best-validation-epoch parameters. Layers below
// `first_layer` stay frozen.
inline TrainResult train(MlpModel model, const Dataset& train_set, const TrainConfig& cfg,
                         const FloodObjective& objective, const Dataset* val_set = nullptr,
                         std::size_t first_layer = 0) {
    cfg.validate();
    if (train_set.size() == 0) throw ConfigError("train: empty dataset");
    if (cfg.early_stop_patience > 0 && (val_set == nullptr || val_set->size() == 0))
        throw ConfigError("train: early stopping needs a validation set");

    const std::size_t n = train_set.size();
    auto rng = make_engine(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult res;
    res.model = std::move(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::optional<MlpModel> best_model;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double obj_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bsz = std::min<std::size_t>(cfg.batch_size, n - start);
            Matrix xb(bsz, train_set.dim());
            std::vector<int> yb;
            std::vector<double> tb;
            std::vector<std::int64_t> ids(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t r = order[start + i];
                for (std::size_t c = 0; c < train_set.dim(); ++c)
                    xb(i, c) = train_set.features(r, c);
                ids[i] = train_set.sample_ids[r];
                if (train_set.task == TaskKind::Classification)
                    yb.push_back(train_set.labels[r]);
                else
                    tb.push_back(train_set.targets[r]);
            }
            const std::vector<double> losses =
                train_set.task == TaskKind::Classification ? per_sample_losses(res.model, xb, yb)
                                                           : per_sample_losses(res.model, xb, tb);
            for (double l : losses)
                if (!std::isfinite(l)) {
                    res.log.diverged = true;
                    res.log.failure = "non-finite loss at epoch " + std::to_string(epoch);
                    res.log.best_epoch = epoch - 1;
                    return res;
                }
            const ObjectiveResult obj = objective.evaluate(losses, ids);
            obj_sum += obj.value * static_cast<double>(bsz);
            const Gradients g =
                train_set.task == TaskKind::Classification
                    ? backward(res.model, xb, yb, obj.upstream, cfg.l2_weight, first_layer)
                    : backward(res.model, xb, tb, obj.upstream, cfg.l2_weight, first_layer);
            detail::sgd_step(res.model, g, lr, first_layer);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_objective = obj_sum / static_cast<double>(n);
        rec.train_loss = detail::mean_plain_loss(res.model, train_set);
        if (val_set != nullptr && val_set->size() > 0)
            rec.val_loss = detail::mean_plain_loss(res.model, *val_set);
        res.log.epochs.push_back(rec);

        if (!std::isfinite(rec.train_loss)) {
            res.log.diverged = true;
            res.log.failure = "non-finite train loss at epoch " + std::to_string(epoch);
            res.log.best_epoch = epoch - 1;
            return res;
        }

        if (cfg.early_stop_patience > 0) {
            if (rec.val_loss < best_val) {
                best_val = rec.val_loss;
                best_model = res.model;
                res.log.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_patience) {
                res.log.early_stopped = true;
                break;
            }
        } else {
            res.log.best_epoch = epoch;
        }
    }

    if (cfg.early_stop_patience > 0 && best_model.has_value()) res.model = std::move(*best_model);
    return res;
}

// Copies `base`, re-randomizes the masked suffix, and trains only that
// suffix; unmasked layers come out bit-identical to the base model.
inline TrainResult reinit_and_finetune(const MlpModel& base, const LayerMask& mask,
                                       const Dataset& train_set, const TrainConfig& cfg,
                                       const Dataset* val_set = nullptr) {
    if (mask.size() != base.num_layers())
        throw ConfigError("finetune: mask size does not match model layers");
    MlpModel m = base;
    auto rng = make_engine(derive_seed(cfg.seed, 0x7e1));
    for (std::size_t l = mask.first_trainable(); l < m.num_layers(); ++l) reinit_layer(m, l, rng);
    return train(std::move(m), train_set, cfg, FloodObjective::unregularized(), val_set,
                 mask.first_trainable());
}

}  // namespace floodlib
