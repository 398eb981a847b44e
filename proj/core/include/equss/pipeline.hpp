#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "equss/evaluation.hpp"
#include "equss/expansion.hpp"
#include "equss/feature_batch.hpp"
#include "equss/quantizer.hpp"
#include "equss/training.hpp"

namespace equss {

// JSON run configuration; unknown keys are rejected.
struct RunConfig {
    std::size_t d_f = 384;
    std::size_t d_e = 1024;
    std::size_t m = 64;
    std::size_t k = 256;
    double lambda_codebook = 1.0;
    double lambda_commit = 0.25;
    double lr = 3e-4;
    double probe_lr = 3e-3;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::string features_path;
    std::string out_dir;

    static RunConfig from_json_file(const std::string& path);
    TrainConfig train_config() const;
};

// Expansion + quantization of a whole batch; quantized features come back as
// an f32 batch (labels carried over) alongside the per-row code results.
struct QuantizedBatch {
    FeatureBatch features;  // N x d_E
    std::vector<QuantizeResult> results;
};

QuantizedBatch expand_and_quantize(const ExpansionHead& head, const Codebooks& books,
                                   const FeatureBatch& backbone);

struct ModelEvaluation {
    EvalReport clustering;
    std::optional<double> probe_accuracy;
    std::optional<double> probe_miou;
    std::size_t clusters = 0;
};

// k-means on quantized features, Hungarian matching, metrics; optionally a
// linear probe trained on the same quantized features.
ModelEvaluation evaluate_model(const QuantizedBatch& quantized, std::size_t clusters,
                               bool with_probe, double probe_lr, std::size_t probe_epochs,
                               std::uint64_t seed);

// JSON report bodies (deterministic key order via nlohmann ordered dumps).
std::string entropy_report_json(const QuantizerConfig& config,
                                const std::vector<double>& per_codebook_bits,
                                double total_bits, std::size_t sample_count,
                                const std::map<std::uint32_t, double>& per_class_bits);

std::string continuous_entropy_report_json(double total_bits, std::size_t dims,
                                           std::size_t sample_count);

std::string eval_report_json(const ModelEvaluation& eval);

std::string spearman_summary_json(const std::optional<double>& spearman,
                                  std::size_t num_classes);

// Model directory layout used by the CLI: head.pqeh, codebooks.pqcb, loss.csv.
void save_model(const std::string& dir, const ExpansionHead& head, const Codebooks& books,
                const std::vector<StepLosses>& history);

struct LoadedModel {
    ExpansionHead head;
    Codebooks books;
};

LoadedModel load_model(const std::string& dir);

}  // namespace equss
