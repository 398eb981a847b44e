#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "equss/feature_batch.hpp"

namespace equss {

// Length-M sequence of selected codeword indices identifying a quantized vector.
using CodeCombination = std::vector<std::size_t>;

struct QuantizerConfig {
    std::size_t num_codebooks = 0;  // M
    std::size_t codebook_size = 0;  // K
    std::size_t expanded_dim = 0;   // d_E

    std::size_t subvector_dim() const { return expanded_dim / num_codebooks; }
    void validate() const;
};

// M codebooks of K codewords each, stored codebook-major then codeword-major.
struct Codebooks {
    QuantizerConfig config;
    std::vector<double> entries;  // M * K * subvector_dim

    std::span<const double> codeword(std::size_t m, std::size_t k) const {
        std::size_t d = config.subvector_dim();
        return {entries.data() + (m * config.codebook_size + k) * d, d};
    }
    std::span<double> codeword(std::size_t m, std::size_t k) {
        std::size_t d = config.subvector_dim();
        return {entries.data() + (m * config.codebook_size + k) * d, d};
    }

    void validate() const;  // shape + finiteness
};

// Xavier-uniform initialization of every K x (d_E/M) codebook matrix.
Codebooks init_codebooks(const QuantizerConfig& config, std::uint64_t seed);

struct QuantizeResult {
    std::vector<double> quantized;  // d_E, concatenation of the selected codewords
    CodeCombination combination;    // length M, indices in [0, K)
};

// Contiguous-block split of x into M subvectors of d_E/M elements each.
std::vector<std::span<const double>> split(std::span<const double> x,
                                           const QuantizerConfig& config);

// Nearest codeword under unit-normalized squared Euclidean distance.
// Ties break to the smallest index; zero-norm operands normalize to the zero
// vector. Returns the argmin index into the K x dim codebook matrix.
std::size_t assign(std::span<const double> subvector, const double* codebook,
                   std::size_t codebook_size, std::size_t dim);

std::size_t assign(std::span<const double> subvector, const Codebooks& books,
                   std::size_t m);

QuantizeResult quantize(std::span<const double> x, const Codebooks& books);

// Row-wise quantize; output order matches input order and is identical to the
// sequential map.
std::vector<QuantizeResult> quantize_batch(const FeatureBatch& batch,
                                           const Codebooks& books);

struct CodeBits {
    double bits_per_code;  // log2(K)
    double total_bits;     // M * log2(K)
};

CodeBits code_bits(const QuantizerConfig& config);

// Bits needed for a raw float vector (32 bits per element); used as the
// compression-rate reference in reports.
std::uint64_t float_vector_bits(std::size_t dim);

// Binary codebook file ("PQCB"): magic, u32 version=1, u32 M, u32 K,
// u32 subvector_dim, then M*K*subvector_dim f32 little-endian.
Codebooks read_codebooks(const std::string& path);
void write_codebooks(const Codebooks& books, const std::string& path);

}  // namespace equss
