#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "equss/quantizer.hpp"

namespace equss {

const CodeCombination& combination_of(const QuantizeResult& result);

// Hamming distance between two codeword combinations: count of differing
// positions, symmetric, in [0, M].
std::size_t combination_distance(const CodeCombination& a, const CodeCombination& b);

enum class DistanceMetric {
    combination_hamming,
    quantized_euclidean,
};

struct DistanceMatrix {
    std::vector<std::uint32_t> classes;  // ordered class list
    std::vector<double> values;          // C * C, symmetric
    DistanceMetric metric = DistanceMetric::combination_hamming;
    std::size_t samples_per_class = 0;

    double at(std::size_t i, std::size_t j) const { return values[i * classes.size() + j]; }
};

// Mean pairwise distance between sampled members of each class pair; the
// diagonal averages over distinct unordered within-class pairs. Sampling is
// without replacement, capped at class size, deterministic per seed.
DistanceMatrix class_distance_matrix(const std::vector<QuantizeResult>& results,
                                     const std::vector<std::uint32_t>& labels,
                                     DistanceMetric metric,
                                     std::size_t samples_per_class = 10000,
                                     std::uint64_t seed = 0);

DistanceMatrix quantized_euclidean_matrix(const std::vector<QuantizeResult>& results,
                                          const std::vector<std::uint32_t>& labels,
                                          std::size_t samples_per_class = 10000,
                                          std::uint64_t seed = 0);

// M x K selection counts, optionally restricted to one class.
struct FrequencyTable {
    std::size_t num_codebooks = 0;
    std::size_t codebook_size = 0;
    std::vector<std::uint64_t> counts;  // M * K
    std::uint64_t sample_count = 0;     // samples contributing

    std::uint64_t at(std::size_t m, std::size_t i) const {
        return counts[m * codebook_size + i];
    }
};

FrequencyTable codeword_frequencies(const std::vector<QuantizeResult>& results,
                                    const std::vector<std::uint32_t>& labels,
                                    const QuantizerConfig& config,
                                    std::optional<std::uint32_t> class_filter = {});

struct EntropyAccuracyRow {
    std::uint32_t cls = 0;
    double bits = 0.0;
    double accuracy = 0.0;
};

struct EntropyAccuracyPairs {
    std::vector<EntropyAccuracyRow> rows;  // sorted ascending by bits
    std::optional<double> spearman;        // absent when undefined
};

// Pairs per-class entropy with per-class accuracy and reports the Spearman
// rank correlation (average ranks for ties; absent for degenerate inputs).
EntropyAccuracyPairs entropy_accuracy_pairs(
    const std::map<std::uint32_t, double>& per_class_bits,
    const std::map<std::uint32_t, double>& per_class_accuracy);

// CSV emitters (class-labeled matrices, frequency tables, pairs).
std::string distance_matrix_csv(const DistanceMatrix& matrix);
std::string frequency_table_csv(const FrequencyTable& table);
std::string entropy_accuracy_csv(const EntropyAccuracyPairs& pairs);

}  // namespace equss
