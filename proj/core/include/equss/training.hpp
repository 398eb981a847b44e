#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "equss/expansion.hpp"
#include "equss/feature_batch.hpp"
#include "equss/quantizer.hpp"

namespace equss {

struct LossWeights {
    double lambda_codebook = 1.0;
    double lambda_commit = 0.25;

    void validate() const;
};

struct TrainConfig {
    double learning_rate = 3e-4;
    std::size_t epochs = 1;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    LossWeights weights;
    QuantizerConfig quantizer;
    std::size_t input_dim = 0;  // d_F

    void validate() const;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(std::size_t param_count)
        : first_moment(param_count, 0.0), second_moment(param_count, 0.0) {}
};

// Value plus per-subvector gradients (M vectors flattened to d_E).
struct SubvectorLoss {
    double value = 0.0;
    std::vector<double> grads;  // d_E; gradient w.r.t. codewords or subvectors
};

// (1/M) sum_m ||x^m - e^m_k||^2 with stop-gradient on the subvectors:
// grads are w.r.t. the selected codewords.
SubvectorLoss codebook_loss(const std::vector<std::span<const double>>& subvectors,
                            const std::vector<std::span<const double>>& selected);

// Same value, stop-gradient on the codewords: grads are w.r.t. the subvectors.
SubvectorLoss commit_loss(const std::vector<std::span<const double>>& subvectors,
                          const std::vector<std::span<const double>>& selected);

// Straight-through estimator: the gradient at q is copied to x unchanged.
std::vector<double> straight_through_grad(std::span<const double> grad_q);

// Gradient reaching x: straight-through task gradient plus the weighted
// commitment gradient. Exact elementwise sum, no other paths.
std::vector<double> compose_input_gradient(std::span<const double> grad_q,
                                           std::span<const double> commit_grad,
                                           double lambda_commit);

double total_loss(double task, double codebook, double commit, const LossWeights& w);

// Task-loss interface standing in for the deferred head loss. Evaluates on the
// quantized batch (N x d_E, doubles) and the backbone batch; returns the loss
// and its gradient w.r.t. every quantized feature.
class TaskLoss {
public:
    struct Result {
        double value = 0.0;
        std::vector<double> grads;  // N * d_E, row-major
    };

    virtual ~TaskLoss() = default;
    virtual Result evaluate(const std::vector<std::vector<double>>& quantized,
                            const FeatureBatch& backbone) const = 0;
};

// Correspondence distillation: squared gap between the cosine-similarity
// matrices of backbone and quantized features, averaged over all N^2 pairs.
class CorrespondenceTaskLoss : public TaskLoss {
public:
    Result evaluate(const std::vector<std::vector<double>>& quantized,
                    const FeatureBatch& backbone) const override;
};

// Constant-zero task loss; useful for isolating the PQ losses.
class ZeroTaskLoss : public TaskLoss {
public:
    Result evaluate(const std::vector<std::vector<double>>& quantized,
                    const FeatureBatch& backbone) const override;
};

// One Adam update with bias correction; increments state.step.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

struct StepLosses {
    std::size_t step = 0;
    double task = 0.0;
    double codebook = 0.0;
    double commit = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ExpansionHead head;
    Codebooks books;
    std::vector<StepLosses> history;
    bool diverged = false;  // NaN loss hit; head/books hold the last good state
};

TrainResult train(const FeatureBatch& features, const TrainConfig& cfg,
                  const TaskLoss& task);

// Loss-history CSV: step, task_loss, codebook_loss, commit_loss, total_loss.
void write_loss_history(const std::vector<StepLosses>& history, const std::string& path);

}  // namespace equss
