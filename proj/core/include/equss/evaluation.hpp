#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "equss/feature_batch.hpp"

namespace equss {

struct KMeansResult {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;      // k * dim
    std::vector<std::size_t> assignments;  // N
    std::size_t iterations = 0;
    double objective = 0.0;  // sum of squared distances to assigned centroids
};

// Lloyd iterations from k-means++ style seeding, deterministic per seed.
// Empty clusters are re-seeded to the point farthest from its centroid.
KMeansResult kmeans(const FeatureBatch& features, std::size_t k, std::size_t max_iters,
                    std::uint64_t seed);

struct HungarianResult {
    std::vector<std::size_t> assignment;  // row i -> column assignment[i]
    double total_cost = 0.0;
};

// Exact minimum-cost perfect matching on a square cost matrix (row-major).
HungarianResult hungarian(const std::vector<double>& cost, std::size_t n);

struct ConfusionMatrix {
    std::size_t num_pred = 0;
    std::size_t num_true = 0;
    std::vector<std::uint64_t> counts;  // num_pred * num_true

    std::uint64_t at(std::size_t p, std::size_t t) const { return counts[p * num_true + t]; }
    std::uint64_t total() const;
};

struct MatchResult {
    std::map<std::size_t, std::size_t> assignment;  // cluster -> class
    ConfusionMatrix matrix;                         // relabeled, square
};

// Hungarian matching of clusters to classes via the co-occurrence matrix
// (cost = max count - count, zero-padded to square).
MatchResult match_clusters(const std::vector<std::size_t>& pred,
                           const std::vector<std::uint32_t>& truth);

struct EvalReport {
    double accuracy = 0.0;
    double miou = 0.0;
    double mean_class_accuracy = 0.0;
    std::map<std::uint32_t, double> per_class_accuracy;  // recall per true class
    std::map<std::size_t, std::size_t> assignment;       // cluster -> class
};

// Acc = trace/total; IoU excludes zero-union classes; per-class accuracy is
// recall; mAcc is the unweighted mean over classes with true samples.
EvalReport metrics(const ConfusionMatrix& cm);

struct LinearProbe {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> weight;  // num_classes * dim
    std::vector<double> bias;    // num_classes
    double train_accuracy = 0.0;
};

// Loss and exact gradients of softmax cross-entropy for a linear classifier.
struct ProbeLossResult {
    double loss = 0.0;
    std::vector<double> grad_weight;
    std::vector<double> grad_bias;
};

ProbeLossResult probe_loss(const std::vector<double>& weight,
                           const std::vector<double>& bias, std::size_t num_classes,
                           const FeatureBatch& features);

// Full-batch Adam training of a single linear softmax layer on the labeled
// batch; the features themselves are never modified.
LinearProbe linear_probe(const FeatureBatch& features, double lr = 3e-3,
                         std::size_t epochs = 500, std::uint64_t seed = 0);

std::vector<std::size_t> probe_predict(const LinearProbe& probe,
                                       const FeatureBatch& features);

std::string confusion_matrix_csv(const ConfusionMatrix& cm);

}  // namespace equss
