#include "equss/datagen.hpp"

#include <cmath>

#include "equss/errors.hpp"
#include "equss/rng.hpp"

namespace equss {

void MixtureSpec::validate() const {
    if (classes.empty()) throw InvalidInput("mixture spec: need at least one class");
    std::size_t dim = classes.front().mean.size();
    if (dim == 0) throw InvalidInput("mixture spec: zero-dimensional means");
    for (const auto& c : classes) {
        if (c.mean.size() != dim)
            throw InvalidInput("mixture spec: inconsistent mean dimensions");
        if (!(c.stddev > 0.0)) throw InvalidInput("mixture spec: stddev must be positive");
    }
}

FeatureBatch generate(const MixtureSpec& spec) {
    spec.validate();
    std::size_t dim = spec.classes.front().mean.size();

    FeatureBatch batch;
    batch.dim = dim;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const ClassSpec& cls = spec.classes[c];
        for (std::size_t s = 0; s < cls.count; ++s) {
            for (std::size_t d = 0; d < dim; ++d) {
                double v = cls.mean[d] + cls.stddev * keyed_gaussian(spec.seed, c, s, d);
                batch.data.push_back(static_cast<float>(v));
            }
            batch.labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    return batch;
}

MixtureSpec diversity_ladder(std::size_t num_classes, std::size_t dim, double base_std,
                             double ratio, std::uint64_t seed,
                             std::size_t samples_per_class, double separation) {
    if (num_classes == 0) throw InvalidInput("diversity_ladder: need >= 1 class");
    if (!(ratio > 1.0)) throw InvalidInput("diversity_ladder: ratio must be > 1");
    if (!(base_std > 0.0)) throw InvalidInput("diversity_ladder: base_std must be positive");
    if (dim < num_classes)
        throw InvalidInput("diversity_ladder: dim must be >= num_classes for simplex means");

    double max_std = base_std * std::pow(ratio, static_cast<double>(num_classes - 1));
    double scale = separation * max_std;

    MixtureSpec spec;
    spec.seed = seed;
    for (std::size_t c = 0; c < num_classes; ++c) {
        ClassSpec cls;
        cls.mean.assign(dim, 0.0);
        cls.mean[c] = scale;  // scaled standard-basis simplex: uniform separation
        cls.stddev = base_std * std::pow(ratio, static_cast<double>(c));
        cls.count = samples_per_class;
        spec.classes.push_back(std::move(cls));
    }
    return spec;
}

}  // namespace equss
