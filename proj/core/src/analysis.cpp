#include "equss/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "equss/errors.hpp"
#include "equss/rng.hpp"

namespace equss {

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

double pair_distance(const QuantizeResult& a, const QuantizeResult& b,
                     DistanceMetric metric) {
    if (metric == DistanceMetric::combination_hamming)
        return static_cast<double>(combination_distance(a.combination, b.combination));
    double s = 0.0;
    for (std::size_t i = 0; i < a.quantized.size(); ++i) {
        double d = a.quantized[i] - b.quantized[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// First `count` elements of a seeded partial Fisher-Yates over `pool`.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t count, Rng& rng) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + rng.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(const std::vector<double>& values) {
    std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

const CodeCombination& combination_of(const QuantizeResult& result) {
    return result.combination;
}

std::size_t combination_distance(const CodeCombination& a, const CodeCombination& b) {
    if (a.size() != b.size())
        throw InvalidInput("combination_distance: lengths differ (" +
                           std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                           ")");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++d;
    return d;
}

DistanceMatrix class_distance_matrix(const std::vector<QuantizeResult>& results,
                                     const std::vector<std::uint32_t>& labels,
                                     DistanceMetric metric, std::size_t samples_per_class,
                                     std::uint64_t seed) {
    if (labels.size() != results.size())
        throw InvalidInput("class_distance_matrix: labels misaligned with results");
    if (results.empty()) throw InvalidInput("class_distance_matrix: empty class list");

    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    DistanceMatrix matrix;
    matrix.metric = metric;
    matrix.samples_per_class = samples_per_class;
    for (const auto& [cls, _] : by_class) matrix.classes.push_back(cls);
    std::size_t c = matrix.classes.size();
    matrix.values.assign(c * c, 0.0);

    // One sampled subset per class, reused for every pair.
    std::vector<std::vector<std::size_t>> sampled(c);
    for (std::size_t ci = 0; ci < c; ++ci) {
        Rng rng(mix_key(seed, matrix.classes[ci]));
        sampled[ci] =
            sample_without_replacement(by_class[matrix.classes[ci]], samples_per_class, rng);
    }

    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t cj = ci; cj < c; ++cj) {
            double total = 0.0;
            std::uint64_t pairs = 0;
            if (ci == cj) {
                const auto& s = sampled[ci];
                for (std::size_t a = 0; a < s.size(); ++a)
                    for (std::size_t b = a + 1; b < s.size(); ++b) {
                        total += pair_distance(results[s[a]], results[s[b]], metric);
                        ++pairs;
                    }
            } else {
                for (std::size_t a : sampled[ci])
                    for (std::size_t b : sampled[cj]) {
                        total += pair_distance(results[a], results[b], metric);
                        ++pairs;
                    }
            }
            double mean = pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
            matrix.values[ci * c + cj] = mean;
            matrix.values[cj * c + ci] = mean;
        }
    }
    return matrix;
}

DistanceMatrix quantized_euclidean_matrix(const std::vector<QuantizeResult>& results,
                                          const std::vector<std::uint32_t>& labels,
                                          std::size_t samples_per_class,
                                          std::uint64_t seed) {
    return class_distance_matrix(results, labels, DistanceMetric::quantized_euclidean,
                                 samples_per_class, seed);
}

FrequencyTable codeword_frequencies(const std::vector<QuantizeResult>& results,
                                    const std::vector<std::uint32_t>& labels,
                                    const QuantizerConfig& config,
                                    std::optional<std::uint32_t> class_filter) {
    config.validate();
    if (!labels.empty() && labels.size() != results.size())
        throw InvalidInput("codeword_frequencies: labels misaligned with results");
    if (class_filter && labels.empty())
        throw InvalidInput("codeword_frequencies: class filter requires labels");

    FrequencyTable table;
    table.num_codebooks = config.num_codebooks;
    table.codebook_size = config.codebook_size;
    table.counts.assign(config.num_codebooks * config.codebook_size, 0);

    for (std::size_t i = 0; i < results.size(); ++i) {
        if (class_filter && labels[i] != *class_filter) continue;
        const auto& comb = results[i].combination;
        if (comb.size() != config.num_codebooks)
            throw InvalidInput("codeword_frequencies: combination length mismatch");
        for (std::size_t m = 0; m < comb.size(); ++m) {
            if (comb[m] >= config.codebook_size)
                throw DataCorruption("codeword_frequencies: index out of range");
            ++table.counts[m * config.codebook_size + comb[m]];
        }
        ++table.sample_count;
    }
    return table;
}

EntropyAccuracyPairs entropy_accuracy_pairs(
    const std::map<std::uint32_t, double>& per_class_bits,
    const std::map<std::uint32_t, double>& per_class_accuracy) {
    if (per_class_bits.size() != per_class_accuracy.size())
        throw InvalidInput("entropy_accuracy_pairs: key sets differ in size");
    for (const auto& [cls, _] : per_class_bits)
        if (!per_class_accuracy.count(cls))
            throw InvalidInput("entropy_accuracy_pairs: class " + std::to_string(cls) +
                               " missing from accuracy map");

    EntropyAccuracyPairs out;
    for (const auto& [cls, bits] : per_class_bits)
        out.rows.push_back({cls, bits, per_class_accuracy.at(cls)});
    std::stable_sort(out.rows.begin(), out.rows.end(),
                     [](const auto& a, const auto& b) { return a.bits < b.bits; });

    std::size_t n = out.rows.size();
    if (n >= 2) {
        std::vector<double> bits(n), acc(n);
        for (std::size_t i = 0; i < n; ++i) {
            bits[i] = out.rows[i].bits;
            acc[i] = out.rows[i].accuracy;
        }
        auto rb = average_ranks(bits);
        auto ra = average_ranks(acc);
        double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(n);
        double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(n);
        double cov = 0.0, vb = 0.0, va = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cov += (rb[i] - mb) * (ra[i] - ma);
            vb += (rb[i] - mb) * (rb[i] - mb);
            va += (ra[i] - ma) * (ra[i] - ma);
        }
        if (vb > 0.0 && va > 0.0) out.spearman = cov / std::sqrt(vb * va);
    }
    return out;
}

std::string distance_matrix_csv(const DistanceMatrix& matrix) {
    std::string out = "class";
    for (std::uint32_t cls : matrix.classes) out += "," + std::to_string(cls);
    out += '\n';
    std::size_t c = matrix.classes.size();
    for (std::size_t i = 0; i < c; ++i) {
        out += std::to_string(matrix.classes[i]);
        for (std::size_t j = 0; j < c; ++j) {
            out += ',';
            append_double(out, matrix.at(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string frequency_table_csv(const FrequencyTable& table) {
    std::string out = "codebook,codeword,count\n";
    for (std::size_t m = 0; m < table.num_codebooks; ++m)
        for (std::size_t k = 0; k < table.codebook_size; ++k)
            out += std::to_string(m) + "," + std::to_string(k) + "," +
                   std::to_string(table.at(m, k)) + "\n";
    return out;
}

std::string entropy_accuracy_csv(const EntropyAccuracyPairs& pairs) {
    std::string out = "class,bits,accuracy\n";
    for (const auto& row : pairs.rows) {
        out += std::to_string(row.cls) + ",";
        append_double(out, row.bits);
        out += ',';
        append_double(out, row.accuracy);
        out += '\n';
    }
    return out;
}

}  // namespace equss
