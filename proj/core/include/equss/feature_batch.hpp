#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace equss {

// N x D matrix of features with optional per-row class labels.
// Values are stored as f32, matching the on-disk format, so serialization
// round-trips are exact. All arithmetic downstream happens in double.
struct FeatureBatch {
    std::size_t dim = 0;
    std::vector<float> data;            // row-major, size() == rows * dim
    std::vector<std::uint32_t> labels;  // empty or size rows()

    std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
    bool has_labels() const { return !labels.empty(); }

    std::span<const float> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }

    std::vector<double> row_double(std::size_t i) const {
        auto r = row(i);
        return std::vector<double>(r.begin(), r.end());
    }

    // Number of distinct label values assuming labels are in [0, C).
    std::uint32_t num_classes() const;

    void validate() const;  // finite values, label alignment
};

// Binary feature file ("EQFT"): see write_features for the exact layout.
FeatureBatch read_features(const std::string& path);
void write_features(const FeatureBatch& batch, const std::string& path);

}  // namespace equss
