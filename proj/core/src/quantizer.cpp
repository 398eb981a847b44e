#include "equss/quantizer.hpp"

#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "equss/errors.hpp"
#include "equss/rng.hpp"

namespace equss {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'C', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr double kNormFloor = 1e-12;

// x / ||x||, or the zero vector when ||x|| < 1e-12.
void normalize_into(std::span<const double> x, std::vector<double>& out) {
    out.assign(x.begin(), x.end());
    double norm_sq = 0.0;
    for (double v : out) norm_sq += v * v;
    double norm = std::sqrt(norm_sq);
    if (norm < kNormFloor) {
        out.assign(out.size(), 0.0);
    } else {
        for (double& v : out) v /= norm;
    }
}

}  // namespace

void QuantizerConfig::validate() const {
    if (num_codebooks == 0) throw InvalidInput("num_codebooks must be >= 1");
    if (codebook_size == 0) throw InvalidInput("codebook_size must be >= 1");
    if (expanded_dim == 0) throw InvalidInput("expanded_dim must be >= 1");
    if (expanded_dim % num_codebooks != 0)
        throw InvalidInput("expanded_dim " + std::to_string(expanded_dim) +
                           " is not divisible by num_codebooks " +
                           std::to_string(num_codebooks));
}

void Codebooks::validate() const {
    config.validate();
    std::size_t expected =
        config.num_codebooks * config.codebook_size * config.subvector_dim();
    if (entries.size() != expected)
        throw InvalidInput("codebook entry count " + std::to_string(entries.size()) +
                           " does not match config (expected " +
                           std::to_string(expected) + ")");
    for (double v : entries)
        if (!std::isfinite(v)) throw NumericError("codebook contains non-finite value");
}

Codebooks init_codebooks(const QuantizerConfig& config, std::uint64_t seed) {
    config.validate();
    Codebooks books;
    books.config = config;
    std::size_t d = config.subvector_dim();
    books.entries.resize(config.num_codebooks * config.codebook_size * d);
    // Each codebook is a K x d matrix; Xavier bound sqrt(6 / (fan_in + fan_out)).
    double bound = std::sqrt(6.0 / static_cast<double>(config.codebook_size + d));
    Rng rng(seed);
    for (double& v : books.entries) v = rng.uniform(-bound, bound);
    return books;
}

std::vector<std::span<const double>> split(std::span<const double> x,
                                           const QuantizerConfig& config) {
    config.validate();
    if (x.size() != config.expanded_dim)
        throw InvalidInput("split: vector length " + std::to_string(x.size()) +
                           " != expanded_dim " + std::to_string(config.expanded_dim));
    std::size_t d = config.subvector_dim();
    std::vector<std::span<const double>> out;
    out.reserve(config.num_codebooks);
    for (std::size_t m = 0; m < config.num_codebooks; ++m)
        out.push_back(x.subspan(m * d, d));
    return out;
}

std::size_t assign(std::span<const double> subvector, const double* codebook,
                   std::size_t codebook_size, std::size_t dim) {
    if (codebook_size == 0) throw InvalidInput("assign: empty codebook");
    if (subvector.size() != dim)
        throw InvalidInput("assign: subvector length " + std::to_string(subvector.size()) +
                           " != codeword dim " + std::to_string(dim));

    std::vector<double> x_hat, e_hat;
    normalize_into(subvector, x_hat);

    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < codebook_size; ++k) {
        normalize_into({codebook + k * dim, dim}, e_hat);
        double dist = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            double diff = x_hat[i] - e_hat[i];
            dist += diff * diff;
        }
        if (dist < best_dist) {  // strict: smallest index wins ties
            best_dist = dist;
            best = k;
        }
    }
    return best;
}

std::size_t assign(std::span<const double> subvector, const Codebooks& books,
                   std::size_t m) {
    std::size_t d = books.config.subvector_dim();
    const double* base = books.entries.data() + m * books.config.codebook_size * d;
    return assign(subvector, base, books.config.codebook_size, d);
}

QuantizeResult quantize(std::span<const double> x, const Codebooks& books) {
    auto subvectors = split(x, books.config);
    QuantizeResult result;
    result.quantized.reserve(x.size());
    result.combination.reserve(subvectors.size());
    for (std::size_t m = 0; m < subvectors.size(); ++m) {
        std::size_t k = assign(subvectors[m], books, m);
        result.combination.push_back(k);
        auto e = books.codeword(m, k);
        result.quantized.insert(result.quantized.end(), e.begin(), e.end());
    }
    return result;
}

std::vector<QuantizeResult> quantize_batch(const FeatureBatch& batch,
                                           const Codebooks& books) {
    std::vector<QuantizeResult> out;
    out.reserve(batch.rows());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        if (batch.dim != books.config.expanded_dim)
            throw InvalidInput("quantize_batch: row " + std::to_string(i) + " has length " +
                               std::to_string(batch.dim) + ", expected " +
                               std::to_string(books.config.expanded_dim));
        auto row = batch.row_double(i);
        out.push_back(quantize(row, books));
    }
    return out;
}

CodeBits code_bits(const QuantizerConfig& config) {
    config.validate();
    double per = std::log2(static_cast<double>(config.codebook_size));
    return {per, static_cast<double>(config.num_codebooks) * per};
}

std::uint64_t float_vector_bits(std::size_t dim) {
    return static_cast<std::uint64_t>(dim) * 32;
}

Codebooks read_codebooks(const std::string& path) {
    detail::Reader r(path);
    r.expect_magic(kMagic);
    std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("unsupported PQCB version " + std::to_string(version), 4);
    Codebooks books;
    books.config.num_codebooks = r.u32("M");
    books.config.codebook_size = r.u32("K");
    std::uint32_t sub_dim = r.u32("subvector_dim");
    books.config.expanded_dim = books.config.num_codebooks * sub_dim;
    books.config.validate();

    std::size_t count = books.config.num_codebooks * books.config.codebook_size * sub_dim;
    std::vector<float> raw(count);
    if (count > 0) r.raw(raw.data(), count * sizeof(float), "codeword payload");
    books.entries.assign(raw.begin(), raw.end());
    books.validate();
    return books;
}

void write_codebooks(const Codebooks& books, const std::string& path) {
    books.validate();
    detail::Writer w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(books.config.num_codebooks));
    w.u32(static_cast<std::uint32_t>(books.config.codebook_size));
    w.u32(static_cast<std::uint32_t>(books.config.subvector_dim()));
    for (double v : books.entries) w.f32(static_cast<float>(v));
    w.close();
}

}  // namespace equss
