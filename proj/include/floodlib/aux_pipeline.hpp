#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "floodlib/dataset.hpp"
#include "floodlib/datagen.hpp"
#include "floodlib/errors.hpp"
#include "floodlib/flood.hpp"
#include "floodlib/metrics.hpp"
#include "floodlib/mlp.hpp"
#include "floodlib/rng.hpp"
#include "floodlib/train.hpp"

namespace floodlib {

enum class AuxMode { Scratch, FineTune };

inline const char* aux_mode_name(AuxMode m) {
    return m == AuxMode::Scratch ? "scratch" : "finetune";
}

inline AuxMode aux_mode_from_name(const std::string& s) {
    if (s == "scratch") return AuxMode::Scratch;
    if (s == "finetune") return AuxMode::FineTune;
    throw ConfigError("unknown aux mode: " + s);
}

struct AuxConfig {
    int n_folds = 5;
    AuxMode mode = AuxMode::Scratch;
    int finetune_layers = 1;  // size of the re-initialized suffix (FineTune)
    double gamma = 0.0;
    TrainConfig train;
    std::optional<TrainConfig> finetune;  // fine-tune stage; defaults to `train`
    double val_frac = 0.2;                // early-stop carve-out from each fold's train side
    std::uint64_t seed = 0;

    void validate() const {
        if (n_folds < 2) throw ConfigError("aux: n_folds must be >= 2");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("aux: gamma must be in [0, 1]");
        if (finetune_layers < 1) throw ConfigError("aux: finetune_layers must be >= 1");
        if (!(val_frac > 0.0 && val_frac < 1.0)) throw ConfigError("aux: val_frac must be in (0, 1)");
        train.validate();
        if (finetune) finetune->validate();
    }
};

// Row -> fold index map; deterministic under seed, sizes differ by at most
// one, stratified by class for classification datasets.
struct FoldAssignment {
    int n_folds = 0;
    std::vector<int> fold_of;  // aligned with dataset rows

    std::vector<std::vector<std::size_t>> fold_rows() const {
        std::vector<std::vector<std::size_t>> out(n_folds);
        for (std::size_t r = 0; r < fold_of.size(); ++r) out[fold_of[r]].push_back(r);
        return out;
    }

    std::vector<std::size_t> rows_excluding(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t r = 0; r < fold_of.size(); ++r)
            if (fold_of[r] != fold) out.push_back(r);
        return out;
    }
};

inline FoldAssignment make_folds(const Dataset& ds, int n, std::uint64_t seed) {
    if (n < 2) throw ConfigError("make_folds: n must be >= 2");
    if (static_cast<std::size_t>(n) > ds.size())
        throw ConfigError("make_folds: more folds than samples");
    auto rng = make_engine(seed);
    FoldAssignment fa;
    fa.n_folds = n;
    fa.fold_of.assign(ds.size(), 0);
    // One round-robin cursor running across (shuffled) class groups keeps
    // both the global and the per-class fold sizes within one of each other.
    int cursor = 0;
    auto deal = [&](std::vector<std::size_t>& rows) {
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t r : rows) {
            fa.fold_of[r] = cursor;
            cursor = (cursor + 1) % n;
        }
    };
    if (ds.task == TaskKind::Classification) {
        std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
        for (std::size_t r = 0; r < ds.size(); ++r) by_class[ds.labels[r]].push_back(r);
        for (auto& g : by_class) deal(g);
    } else {
        std::vector<std::size_t> rows(ds.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        deal(rows);
    }
    return fa;
}

struct AuxModels {
    std::vector<MlpModel> fold_models;
    std::optional<MlpModel> base;  // FineTune mode only
    double wall_clock_sec = 0.0;
};

namespace detail {

// Optional early-stop carve-out. The validation side always comes from the
// fold's own training rows, never from the held-out fold.
inline std::pair<Dataset, std::optional<Dataset>> carve_val(const Dataset& ds,
                                                            const TrainConfig& cfg,
                                                            double val_frac,
                                                            std::uint64_t seed) {
    if (cfg.early_stop_patience <= 0) return {ds, std::nullopt};
    auto [tr, val] = split(ds, 1.0 - val_frac, seed);
    if (val.size() == 0) return {ds, std::nullopt};
    return {std::move(tr), std::move(val)};
}

}  // namespace detail

// Trains one auxiliary model per fold on the complement of that fold,
// either from scratch or by re-initializing the last layers of a base model
// trained on the full set.
inline AuxModels train_aux_models(const Dataset& ds, const FoldAssignment& folds,
                                  const AuxConfig& cfg,
                                  const std::vector<std::size_t>& layer_dims) {
    cfg.validate();
    if (folds.fold_of.size() != ds.size()) throw ConfigError("aux: folds do not match dataset");
    const OutputHead head =
        ds.task == TaskKind::Classification ? OutputHead::Softmax : OutputHead::Identity;
    const auto start = std::chrono::steady_clock::now();

    AuxModels out;
    if (cfg.mode == AuxMode::FineTune) {
        const std::uint64_t base_seed = derive_seed(cfg.seed, 0xba5e);
        auto [tr, val] = detail::carve_val(ds, cfg.train, cfg.val_frac, derive_seed(base_seed, 1));
        TrainConfig base_cfg = cfg.train;
        base_cfg.seed = base_seed;
        auto res = train(init_mlp(layer_dims, head, base_seed), tr, base_cfg,
                         FloodObjective::unregularized(), val ? &*val : nullptr);
        if (res.log.diverged) throw TrainingError("aux base model diverged: " + res.log.failure);
        out.base = std::move(res.model);
    }

    const TrainConfig& stage_cfg =
        cfg.mode == AuxMode::FineTune && cfg.finetune ? *cfg.finetune : cfg.train;
    for (int i = 0; i < folds.n_folds; ++i) {
        const auto rows = folds.rows_excluding(i);
        if (rows.empty()) throw ConfigError("aux: fold " + std::to_string(i) + " covers all samples");
        const Dataset fold_train = ds.subset(rows);
        const std::uint64_t fold_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        auto [tr, val] =
            detail::carve_val(fold_train, stage_cfg, cfg.val_frac, derive_seed(fold_seed, 2));
        TrainConfig run_cfg = stage_cfg;
        run_cfg.seed = fold_seed;

        TrainResult res;
        if (cfg.mode == AuxMode::Scratch) {
            res = train(init_mlp(layer_dims, head, fold_seed), tr, run_cfg,
                        FloodObjective::unregularized(), val ? &*val : nullptr);
        } else {
            const LayerMask mask =
                LayerMask::last_layers(layer_dims.size() - 1,
                                       std::min<std::size_t>(cfg.finetune_layers, layer_dims.size() - 1));
            res = reinit_and_finetune(*out.base, mask, tr, run_cfg, val ? &*val : nullptr);
        }
        if (res.log.diverged)
            throw TrainingError("aux model for fold " + std::to_string(i) +
                                " diverged: " + res.log.failure);
        out.fold_models.push_back(std::move(res.model));
    }

    out.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// theta_i from the model whose held-out fold contains sample i, through the
// gamma correction. gamma = 1 zeroes the whole table.
inline FloodTable compute_flood_table(const Dataset& ds, const FoldAssignment& folds,
                                      const std::vector<MlpModel>& fold_models, double gamma,
                                      FloodTableMeta meta = {}) {
    if (folds.fold_of.size() != ds.size())
        throw ConfigError("flood table: folds do not match dataset");
    if (static_cast<int>(fold_models.size()) != folds.n_folds)
        throw ConfigError("flood table: fold/model count mismatch");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("flood table: gamma must be in [0, 1]");

    std::vector<std::pair<std::int64_t, double>> entries(ds.size());
    const auto per_fold = folds.fold_rows();
    for (int i = 0; i < folds.n_folds; ++i) {
        const auto& rows = per_fold[i];
        if (rows.empty()) continue;
        Matrix xb(rows.size(), ds.dim());
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < ds.dim(); ++c) xb(r, c) = ds.features(rows[r], c);
        const Matrix preds = forward(fold_models[i], xb);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::size_t row = rows[r];
            const double theta =
                ds.task == TaskKind::Classification
                    ? theta_classification(preds.row(r), ds.labels[row], gamma)
                    : theta_regression(preds(r, 0), ds.targets[row], gamma);
            entries[row] = {ds.sample_ids[row], theta};
        }
    }
    meta.n_folds = folds.n_folds;
    meta.gamma = gamma;
    return FloodTable(std::move(entries), std::move(meta));
}

// Spearman rank correlation between two tables over the same sample ids.
inline double validate_finetune(const FloodTable& a, const FloodTable& b) {
    if (a.size() != b.size())
        throw ConfigError("validate_finetune: tables cover different sample counts");
    std::vector<double> ta, tb;
    ta.reserve(a.size());
    tb.reserve(b.size());
    for (const auto& [id, theta] : a.entries()) {
        if (!b.contains(id))
            throw ConfigError("validate_finetune: sample id sets differ (id " + std::to_string(id) +
                              ")");
        ta.push_back(theta);
        tb.push_back(b.theta_for(id));
    }
    return spearman(ta, tb);
}

}  // namespace floodlib
