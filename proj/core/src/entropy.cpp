#include "equss/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "equss/errors.hpp"

namespace equss {

namespace {

double entropy_from_counts(std::span<const std::uint64_t> counts, std::uint64_t total) {
    double h = 0.0;
    for (std::uint64_t c : counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

// Bin index for x under half-open intervals (edges[i], edges[i+1]], with
// x == edges[0] folded into bin 0.
std::size_t bin_index(double x, const DimensionHistogram& h) {
    if (x < h.min || x > h.max)
        throw InvalidInput("histogram value outside spec range");
    if (h.bins == 1) return 0;
    double width = (h.max - h.min) / static_cast<double>(h.bins);
    double t = (x - h.min) / width;
    auto i = static_cast<std::size_t>(std::ceil(t));
    std::size_t idx = i == 0 ? 0 : i - 1;
    if (idx >= h.bins) idx = h.bins - 1;
    // Exact half-open correction around edge rounding.
    while (idx > 0 && x <= h.edges[idx]) --idx;
    while (idx + 1 < h.bins && x > h.edges[idx + 1]) ++idx;
    return idx;
}

double mean_quantization_error(std::span<const double> values,
                               const DimensionHistogram& h) {
    double total = 0.0;
    for (double x : values) {
        std::size_t i = bin_index(x, h);
        double center = 0.5 * (h.edges[i] + h.edges[i + 1]);
        total += std::abs(x - center);
    }
    return total / static_cast<double>(values.size());
}

DimensionHistogram uniform_bins(double lo, double hi, std::size_t bins, double delta) {
    DimensionHistogram h;
    h.min = lo;
    h.max = hi;
    h.delta = delta;
    h.bins = bins;
    h.edges.resize(bins + 1);
    double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = lo + width * static_cast<double>(i);
    h.edges[bins] = hi;
    return h;
}

}  // namespace

EmpiricalPmf empirical_pmf(const std::vector<CodeCombination>& combinations,
                           const QuantizerConfig& config) {
    config.validate();
    if (combinations.empty()) throw InvalidInput("empirical_pmf: empty input");

    std::vector<std::uint64_t> counts(config.num_codebooks * config.codebook_size, 0);
    for (const auto& comb : combinations) {
        if (comb.size() != config.num_codebooks)
            throw InvalidInput("empirical_pmf: combination length mismatch");
        for (std::size_t m = 0; m < comb.size(); ++m) {
            if (comb[m] >= config.codebook_size)
                throw DataCorruption("empirical_pmf: code index " +
                                     std::to_string(comb[m]) + " out of range [0, " +
                                     std::to_string(config.codebook_size) + ")");
            ++counts[m * config.codebook_size + comb[m]];
        }
    }

    EmpiricalPmf pmf;
    pmf.num_codebooks = config.num_codebooks;
    pmf.codebook_size = config.codebook_size;
    pmf.sample_count = combinations.size();
    pmf.probs.resize(counts.size());
    double inv_n = 1.0 / static_cast<double>(combinations.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        pmf.probs[i] = static_cast<double>(counts[i]) * inv_n;
    return pmf;
}

double sum_entropy(const EmpiricalPmf& pmf) {
    double total = 0.0;
    for (double h : per_codebook_entropy(pmf)) total += h;
    return total;
}

std::vector<double> per_codebook_entropy(const EmpiricalPmf& pmf) {
    std::vector<double> out(pmf.num_codebooks, 0.0);
    for (std::size_t m = 0; m < pmf.num_codebooks; ++m) {
        double h = 0.0;
        for (std::size_t i = 0; i < pmf.codebook_size; ++i) {
            double p = pmf.at(m, i);
            if (p > 0.0) h -= p * std::log2(p);
        }
        out[m] = h;
    }
    return out;
}

std::map<std::uint32_t, double> per_class_entropy(
    const std::vector<CodeCombination>& combinations,
    const std::vector<std::uint32_t>& labels, const QuantizerConfig& config) {
    if (labels.size() != combinations.size())
        throw InvalidInput("per_class_entropy: labels and combinations differ in length");

    std::map<std::uint32_t, std::vector<CodeCombination>> by_class;
    for (std::size_t i = 0; i < combinations.size(); ++i)
        by_class[labels[i]].push_back(combinations[i]);

    std::map<std::uint32_t, double> out;
    for (const auto& [cls, combs] : by_class)
        out[cls] = sum_entropy(empirical_pmf(combs, config));
    return out;
}

DimensionHistogram build_histogram_spec(std::span<const double> values,
                                        double delta_fraction) {
    if (values.empty()) throw InvalidInput("build_histogram_spec: no values");
    for (double v : values)
        if (!std::isfinite(v)) throw InvalidInput("build_histogram_spec: non-finite value");

    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    double delta = delta_fraction * (hi - lo);

    if (hi == lo) return uniform_bins(lo, hi, 1, delta);

    auto feasible = [&](std::size_t bins) {
        return mean_quantization_error(values, uniform_bins(lo, hi, bins, delta)) <= delta;
    };

    std::size_t hi_bins = 1;
    while (!feasible(hi_bins)) hi_bins *= 2;
    std::size_t lo_bins = hi_bins / 2;  // infeasible (or 0 when B=1 works)
    while (hi_bins - lo_bins > 1) {
        std::size_t mid = lo_bins + (hi_bins - lo_bins) / 2;
        if (feasible(mid))
            hi_bins = mid;
        else
            lo_bins = mid;
    }
    return uniform_bins(lo, hi, hi_bins, delta);
}

HistogramSpec build_histogram_specs(const FeatureBatch& features, double delta_fraction) {
    if (features.rows() == 0) throw InvalidInput("build_histogram_specs: empty batch");
    HistogramSpec spec;
    spec.dims.reserve(features.dim);
    std::vector<double> column(features.rows());
    for (std::size_t d = 0; d < features.dim; ++d) {
        for (std::size_t i = 0; i < features.rows(); ++i)
            column[i] = features.data[i * features.dim + d];
        spec.dims.push_back(build_histogram_spec(column, delta_fraction));
    }
    return spec;
}

double histogram_entropy(const FeatureBatch& features, const HistogramSpec& spec) {
    if (spec.dims.size() != features.dim)
        throw InvalidInput("histogram_entropy: spec does not cover all dimensions");
    std::size_t n = features.rows();
    if (n == 0) throw InvalidInput("histogram_entropy: empty batch");

    double total = 0.0;
    std::vector<std::uint64_t> counts;
    for (std::size_t d = 0; d < features.dim; ++d) {
        const auto& h = spec.dims[d];
        counts.assign(h.bins, 0);
        for (std::size_t i = 0; i < n; ++i)
            ++counts[bin_index(features.data[i * features.dim + d], h)];
        total += entropy_from_counts(counts, n);
    }
    return total;
}

}  // namespace equss
