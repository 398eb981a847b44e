#pragma once

#include <cstdint>
#include <vector>

#include "equss/feature_batch.hpp"

namespace equss {

struct ClassSpec {
    std::vector<double> mean;  // D-dim
    double stddev = 1.0;       // isotropic
    std::size_t count = 0;
};

struct MixtureSpec {
    std::vector<ClassSpec> classes;
    std::uint64_t seed = 0;

    void validate() const;
};

// Isotropic Gaussian mixture; draws are keyed by (seed, class, sample, coord)
// so the batch is a pure function of the spec. Labels are attached.
FeatureBatch generate(const MixtureSpec& spec);

// Classes with geometrically increasing spread (std = base_std * ratio^c) and
// equidistant means on a scaled simplex. `separation` scales the mean offset
// relative to the largest class spread.
MixtureSpec diversity_ladder(std::size_t num_classes, std::size_t dim, double base_std,
                             double ratio, std::uint64_t seed,
                             std::size_t samples_per_class = 500,
                             double separation = 3.0);

}  // namespace equss
