#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "floodlib/errors.hpp"
#include "floodlib/matrix.hpp"

namespace floodlib {

enum class TaskKind { Classification, Regression };

// Per-sample provenance. Irregular marks the wide-variance draws of the toy
// generator; FlippedLabel and SkewNoise mark actual corruption.
enum class Provenance : std::uint8_t { Clean, Irregular, FlippedLabel, SkewNoise };

inline bool is_corrupted(Provenance p) {
    return p == Provenance::FlippedLabel || p == Provenance::SkewNoise;
}

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Clean: return "clean";
        case Provenance::Irregular: return "irregular";
        case Provenance::FlippedLabel: return "flipped";
        case Provenance::SkewNoise: return "skew";
    }
    return "clean";
}

inline Provenance provenance_from_name(const std::string& s) {
    if (s == "clean") return Provenance::Clean;
    if (s == "irregular") return Provenance::Irregular;
    if (s == "flipped") return Provenance::FlippedLabel;
    if (s == "skew") return Provenance::SkewNoise;
    throw IoError("unknown noise flag: " + s);
}

// Indexed feature/label pairs with stable sample ids. Exactly one of
// `labels` (classification) or `targets` (regression) is populated.
struct Dataset {
    TaskKind task = TaskKind::Classification;
    int num_classes = 0;  // K for classification, 0 for regression
    Matrix features;      // N x d
    std::vector<int> labels;
    std::vector<double> targets;
    std::vector<std::int64_t> sample_ids;
    std::vector<Provenance> provenance;
    std::vector<std::string> feature_names;
    std::string target_name = "target";

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const {
        const std::size_t n = size();
        if (sample_ids.size() != n || provenance.size() != n)
            throw ShapeError("dataset: id/provenance length mismatch");
        if (task == TaskKind::Classification) {
            if (labels.size() != n) throw ShapeError("dataset: label count mismatch");
            if (num_classes < 2) throw ConfigError("dataset: classification needs K >= 2");
            for (int y : labels)
                if (y < 0 || y >= num_classes) throw ConfigError("dataset: label out of range");
        } else {
            if (targets.size() != n) throw ShapeError("dataset: target count mismatch");
        }
    }

    Dataset subset(std::span<const std::size_t> rows) const {
        Dataset out;
        out.task = task;
        out.num_classes = num_classes;
        out.feature_names = feature_names;
        out.target_name = target_name;
        out.features = Matrix(rows.size(), dim());
        out.sample_ids.reserve(rows.size());
        out.provenance.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            for (std::size_t c = 0; c < dim(); ++c) out.features(i, c) = features(r, c);
            out.sample_ids.push_back(sample_ids[r]);
            out.provenance.push_back(provenance[r]);
            if (task == TaskKind::Classification)
                out.labels.push_back(labels[r]);
            else
                out.targets.push_back(targets[r]);
        }
        return out;
    }
};

}  // namespace floodlib
