#include "equss/feature_batch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "equss/errors.hpp"

namespace equss {

namespace {
constexpr char kMagic[4] = {'E', 'Q', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::uint32_t FeatureBatch::num_classes() const {
    if (labels.empty()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

void FeatureBatch::validate() const {
    if (dim == 0 && !data.empty())
        throw InvalidInput("feature batch has data but dim == 0");
    if (dim != 0 && data.size() % dim != 0)
        throw InvalidInput("feature data size is not a multiple of dim");
    for (float v : data)
        if (!std::isfinite(v)) throw InvalidInput("feature batch contains non-finite value");
    if (!labels.empty() && labels.size() != rows())
        throw InvalidInput("label count does not match row count");
}

FeatureBatch read_features(const std::string& path) {
    detail::Reader r(path);
    r.expect_magic(kMagic);
    std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("unsupported EQFT version " + std::to_string(version), 4);
    std::uint32_t n = r.u32("row count");
    std::uint32_t d = r.u32("dim");
    std::uint8_t has_labels = r.u8("label flag");
    if (has_labels > 1)
        throw FormatError("label flag must be 0 or 1", r.offset() - 1);

    std::uint64_t count = static_cast<std::uint64_t>(n) * d;
    if (count > std::numeric_limits<std::uint32_t>::max())
        throw FormatError("dimension overflow: N*D too large", 8);

    FeatureBatch batch;
    batch.dim = d;
    batch.data.resize(count);
    if (count > 0) r.raw(batch.data.data(), count * sizeof(float), "feature payload");
    if (has_labels) {
        batch.labels.resize(n);
        if (n > 0) r.raw(batch.labels.data(), n * sizeof(std::uint32_t), "labels");
    }
    batch.validate();
    return batch;
}

void write_features(const FeatureBatch& batch, const std::string& path) {
    batch.validate();
    detail::Writer w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(batch.rows()));
    w.u32(static_cast<std::uint32_t>(batch.dim));
    w.u8(batch.has_labels() ? 1 : 0);
    if (!batch.data.empty()) w.raw(batch.data.data(), batch.data.size() * sizeof(float));
    if (batch.has_labels()) w.raw(batch.labels.data(), batch.labels.size() * sizeof(std::uint32_t));
    w.close();
}

}  // namespace equss
