#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "floodlib/errors.hpp"
#include "floodlib/io.hpp"

namespace floodlib {

enum class FloodVariant { Unregularized, Flood, IFlood, AdaFlood };

inline const char* flood_variant_name(FloodVariant v) {
    switch (v) {
        case FloodVariant::Unregularized: return "unregularized";
        case FloodVariant::Flood: return "flood";
        case FloodVariant::IFlood: return "iflood";
        case FloodVariant::AdaFlood: return "adaflood";
    }
    return "unregularized";
}

inline FloodVariant flood_variant_from_name(const std::string& s) {
    if (s == "unregularized" || s == "none") return FloodVariant::Unregularized;
    if (s == "flood") return FloodVariant::Flood;
    if (s == "iflood") return FloodVariant::IFlood;
    if (s == "adaflood") return FloodVariant::AdaFlood;
    throw ConfigError("unknown flood variant: " + s);
}

struct FloodConfig {
    FloodVariant variant = FloodVariant::Unregularized;
    double b = 0.0;      // flood level for Flood/iFlood; may be negative
    double gamma = 0.0;  // correction strength for AdaFlood, in [0, 1]

    void validate() const {
        if (!std::isfinite(b)) throw ConfigError("flood level b must be finite");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    }
};

// Scalar objective plus dObjective/dloss_i for each sample in the batch.
struct ObjectiveResult {
    double value = 0.0;
    std::vector<double> upstream;
};

namespace detail {

// Subgradient convention at the |.| kink: a sample sitting exactly at its
// flood level exerts no gradient.
inline double sgn(double x) {
    if (x > 0.0) return 1.0;
    if (x < 0.0) return -1.0;
    return 0.0;
}

inline void check_losses(std::span<const double> losses, const char* who) {
    if (losses.empty()) throw ConfigError(std::string(who) + ": empty batch");
    for (double l : losses)
        if (!std::isfinite(l)) throw NumericError(std::string(who) + ": non-finite loss");
}

}  // namespace detail

// |mean(l) - b| + b, one flood level for the whole batch.
inline ObjectiveResult flood_objective(std::span<const double> losses, double b) {
    detail::check_losses(losses, "flood_objective");
    const double inv_b = 1.0 / static_cast<double>(losses.size());
    double mean = 0.0;
    for (double l : losses) mean += l;
    mean *= inv_b;
    const double s = detail::sgn(mean - b);
    ObjectiveResult r;
    r.value = std::abs(mean - b) + b;
    r.upstream.assign(losses.size(), s * inv_b);
    return r;
}

// (1/B) sum_i (|l_i - b| + b), the same level applied per sample.
inline ObjectiveResult iflood_objective(std::span<const double> losses, double b) {
    detail::check_losses(losses, "iflood_objective");
    const double inv_b = 1.0 / static_cast<double>(losses.size());
    ObjectiveResult r;
    r.upstream.resize(losses.size());
    double total = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        total += std::abs(losses[i] - b) + b;
        r.upstream[i] = detail::sgn(losses[i] - b) * inv_b;
    }
    r.value = total * inv_b;
    return r;
}

// (1/B) sum_i (|l_i - theta_i| + theta_i) with per-sample levels.
inline ObjectiveResult adaflood_objective(std::span<const double> losses,
                                          std::span<const double> theta) {
    detail::check_losses(losses, "adaflood_objective");
    if (theta.size() != losses.size())
        throw ShapeError("adaflood_objective: theta/losses length mismatch");
    const double inv_b = 1.0 / static_cast<double>(losses.size());
    ObjectiveResult r;
    r.upstream.resize(losses.size());
    double total = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        total += std::abs(losses[i] - theta[i]) + theta[i];
        r.upstream[i] = detail::sgn(losses[i] - theta[i]) * inv_b;
    }
    r.value = total * inv_b;
    return r;
}

// Plain mean loss; upstream 1/B everywhere.
inline ObjectiveResult unregularized_objective(std::span<const double> losses) {
    detail::check_losses(losses, "unregularized_objective");
    const double inv_b = 1.0 / static_cast<double>(losses.size());
    double mean = 0.0;
    for (double l : losses) mean += l;
    ObjectiveResult r;
    r.value = mean * inv_b;
    r.upstream.assign(losses.size(), inv_b);
    return r;
}

// --- correction functions -------------------------------------------------

// Regression: interpolate the held-out prediction toward the label.
inline double correct_regression(double aux_pred, double label, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!std::isfinite(aux_pred) || !std::isfinite(label))
        throw NumericError("correct_regression: non-finite input");
    return (1.0 - gamma) * aux_pred + gamma * label;
}

// Theta for regression: squared error of the corrected prediction.
inline double theta_regression(double aux_pred, double label, double gamma) {
    const double c = correct_regression(aux_pred, label, gamma) - label;
    return c * c;
}

// Classification: corrected probability of the true class, (1-gamma) p + gamma.
inline double corrected_true_prob(double p_true, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!(p_true >= 0.0 && p_true <= 1.0))
        throw NumericError("corrected_true_prob: p_true outside [0, 1]");
    return (1.0 - gamma) * p_true + gamma;
}

// Theta for classification: -log((1-gamma) p_true + gamma). Rejects the
// degenerate p_true = 0, gamma = 0 corner instead of returning +inf.
inline double theta_classification(double p_true, double gamma) {
    const double corrected = corrected_true_prob(p_true, gamma);
    if (corrected <= 0.0)
        throw NumericError("theta_classification: degenerate probability (p_true = 0 with gamma = 0)");
    return -std::log(corrected);
}

inline double theta_classification(std::span<const double> probs, int label, double gamma) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
        throw ShapeError("theta_classification: label out of range");
    return theta_classification(probs[static_cast<std::size_t>(label)], gamma);
}

// --- flood table ------------------------------------------------------------

struct FloodTableMeta {
    int n_folds = 0;
    std::string mode = "external";  // "scratch" | "finetune" | "external"
    double gamma = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> aux_checkpoint_hashes;
};

// Immutable map sample id -> theta_i. Built once by the aux pipeline and
// shared read-only by any number of training runs.
class FloodTable {
  public:
    FloodTable(std::vector<std::pair<std::int64_t, double>> entries, FloodTableMeta meta)
        : meta_(std::move(meta)) {
        for (const auto& [id, theta] : entries) {
            if (!std::isfinite(theta)) throw NumericError("flood table: non-finite theta");
            if (!theta_.emplace(id, theta).second)
                throw ConfigError("flood table: duplicate sample id " + std::to_string(id));
        }
    }

    static FloodTable constant(std::span<const std::int64_t> ids, double value,
                               FloodTableMeta meta = {}) {
        std::vector<std::pair<std::int64_t, double>> entries;
        entries.reserve(ids.size());
        for (auto id : ids) entries.emplace_back(id, value);
        return FloodTable(std::move(entries), std::move(meta));
    }

    std::size_t size() const { return theta_.size(); }
    const FloodTableMeta& meta() const { return meta_; }
    const std::map<std::int64_t, double>& entries() const { return theta_; }

    bool contains(std::int64_t id) const { return theta_.count(id) != 0; }

    double theta_for(std::int64_t id) const {
        auto it = theta_.find(id);
        if (it == theta_.end())
            throw LookupError("flood table: no theta for sample id " + std::to_string(id));
        return it->second;
    }

    std::vector<double> theta_for(std::span<const std::int64_t> ids) const {
        std::vector<double> out;
        out.reserve(ids.size());
        for (auto id : ids) out.push_back(theta_for(id));
        return out;
    }

    double mean_theta() const {
        double s = 0.0;
        for (const auto& [id, t] : theta_) s += t;
        return theta_.empty() ? 0.0 : s / static_cast<double>(theta_.size());
    }

    // CSV `sample_id,theta` in ascending id order; metadata goes to a
    // `<stem>.meta.json` sidecar next to the CSV.
    void save(const std::filesystem::path& csv_path) const {
        std::ostringstream csv;
        csv << "sample_id,theta\n";
        for (const auto& [id, theta] : theta_)
            csv << id << "," << format_double(theta) << "\n";
        write_text_file(csv_path, csv.str());
        Json j;
        j["n_folds"] = meta_.n_folds;
        j["mode"] = meta_.mode;
        j["gamma"] = meta_.gamma;
        j["seed"] = meta_.seed;
        j["aux_checkpoint_hashes"] = meta_.aux_checkpoint_hashes;
        write_json_file(sidecar_path(csv_path), j);
    }

    static FloodTable load(const std::filesystem::path& csv_path) {
        std::istringstream in(read_text_file(csv_path));
        std::string line;
        if (!std::getline(in, line) || line != "sample_id,theta")
            throw IoError("flood table: bad header in " + csv_path.string());
        std::vector<std::pair<std::int64_t, double>> entries;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw IoError("flood table: malformed row in " + csv_path.string());
            entries.emplace_back(std::stoll(line.substr(0, comma)),
                                 std::stod(line.substr(comma + 1)));
        }
        FloodTableMeta meta;
        const auto side = sidecar_path(csv_path);
        if (std::filesystem::exists(side)) {
            const Json j = read_json_file(side);
            meta.n_folds = j.value("n_folds", 0);
            meta.mode = j.value("mode", "external");
            meta.gamma = j.value("gamma", 0.0);
            meta.seed = j.value("seed", std::uint64_t{0});
            if (j.contains("aux_checkpoint_hashes"))
                meta.aux_checkpoint_hashes =
                    j["aux_checkpoint_hashes"].get<std::vector<std::string>>();
        }
        return FloodTable(std::move(entries), std::move(meta));
    }

    static std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
        std::filesystem::path p = csv_path;
        p.replace_extension();
        p += ".meta.json";
        return p;
    }

  private:
    std::map<std::int64_t, double> theta_;
    FloodTableMeta meta_;
};

// Dispatches a FloodConfig (plus table, for AdaFlood) over a batch of losses.
class FloodObjective {
  public:
    FloodObjective() = default;

    static FloodObjective unregularized() { return FloodObjective(); }

    static FloodObjective flood(double b) {
        FloodObjective o;
        o.cfg_.variant = FloodVariant::Flood;
        o.cfg_.b = b;
        o.cfg_.validate();
        return o;
    }

    static FloodObjective iflood(double b) {
        FloodObjective o;
        o.cfg_.variant = FloodVariant::IFlood;
        o.cfg_.b = b;
        o.cfg_.validate();
        return o;
    }

    static FloodObjective adaflood(std::shared_ptr<const FloodTable> table) {
        if (!table) throw ConfigError("adaflood objective needs a flood table");
        FloodObjective o;
        o.cfg_.variant = FloodVariant::AdaFlood;
        o.table_ = std::move(table);
        return o;
    }

    FloodVariant variant() const { return cfg_.variant; }
    const FloodTable* table() const { return table_.get(); }

    ObjectiveResult evaluate(std::span<const double> losses,
                             std::span<const std::int64_t> ids) const {
        switch (cfg_.variant) {
            case FloodVariant::Unregularized: return unregularized_objective(losses);
            case FloodVariant::Flood: return flood_objective(losses, cfg_.b);
            case FloodVariant::IFlood: return iflood_objective(losses, cfg_.b);
            case FloodVariant::AdaFlood: {
                if (ids.size() != losses.size())
                    throw ShapeError("adaflood: ids/losses length mismatch");
                const std::vector<double> theta = table_->theta_for(ids);
                return adaflood_objective(losses, theta);
            }
        }
        throw ConfigError("unreachable flood variant");
    }

  private:
    FloodConfig cfg_;
    std::shared_ptr<const FloodTable> table_;
};

}  // namespace floodlib
