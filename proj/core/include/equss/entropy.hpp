#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "equss/feature_batch.hpp"
#include "equss/quantizer.hpp"

namespace equss {

// M x K matrix of codeword-selection probabilities for a feature population.
struct EmpiricalPmf {
    std::size_t num_codebooks = 0;
    std::size_t codebook_size = 0;
    std::vector<double> probs;  // M * K, rows sum to 1
    std::size_t sample_count = 0;

    double at(std::size_t m, std::size_t i) const { return probs[m * codebook_size + i]; }
};

EmpiricalPmf empirical_pmf(const std::vector<CodeCombination>& combinations,
                           const QuantizerConfig& config);

// Sum over codebooks of the Shannon entropy (bits) of each selection
// distribution, with 0*log2(0) := 0.
double sum_entropy(const EmpiricalPmf& pmf);

// Per-codebook entropies in bits (the terms of sum_entropy).
std::vector<double> per_codebook_entropy(const EmpiricalPmf& pmf);

std::map<std::uint32_t, double> per_class_entropy(
    const std::vector<CodeCombination>& combinations,
    const std::vector<std::uint32_t>& labels, const QuantizerConfig& config);

// Uniform binning of one feature dimension; bins grow until the mean absolute
// quantization error (distance to bin center) drops to delta.
struct DimensionHistogram {
    double min = 0.0;
    double max = 0.0;
    double delta = 0.0;        // error threshold used
    std::size_t bins = 1;      // B
    std::vector<double> edges; // B + 1 strictly nondecreasing values
};

struct HistogramSpec {
    std::vector<DimensionHistogram> dims;
};

// Smallest feasible bin count: doubling to bracket, then binary search.
// Constant input yields B = 1 with zero error.
DimensionHistogram build_histogram_spec(std::span<const double> values,
                                        double delta_fraction = 0.001);

HistogramSpec build_histogram_specs(const FeatureBatch& features,
                                    double delta_fraction = 0.001);

// Histogram entropy in bits over all dimensions. Bins are half-open
// (b_{i-1}, b_i]; a value equal to the left edge b_0 falls into bin 1.
double histogram_entropy(const FeatureBatch& features, const HistogramSpec& spec);

}  // namespace equss
