#include "equss/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "equss/errors.hpp"
#include "equss/rng.hpp"
#include "equss/training.hpp"

namespace equss {

namespace {

double sq_dist(std::span<const float> p, const double* c, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double d = static_cast<double>(p[i]) - c[i];
        s += d * d;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const FeatureBatch& features, std::size_t k, std::size_t max_iters,
                    std::uint64_t seed) {
    std::size_t n = features.rows();
    std::size_t dim = features.dim;
    if (k == 0) throw InvalidInput("kmeans: k must be >= 1");
    if (max_iters == 0) throw InvalidInput("kmeans: max_iters must be >= 1");
    if (n < k)
        throw InvalidInput("kmeans: N=" + std::to_string(n) + " < k=" + std::to_string(k));

    KMeansResult result;
    result.k = k;
    result.dim = dim;
    result.centroids.assign(k * dim, 0.0);
    result.assignments.assign(n, 0);

    // k-means++ seeding: first center uniform, then D^2-weighted draws.
    Rng rng(seed);
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.index(n);
    for (std::size_t d = 0; d < dim; ++d)
        result.centroids[d] = features.data[first * dim + d];
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        const double* prev = result.centroids.data() + (c - 1) * dim;
        for (std::size_t i = 0; i < n; ++i) {
            min_dist[i] = std::min(min_dist[i], sq_dist(features.row(i), prev, dim));
            total += min_dist[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_dist[i];
                if (acc >= r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = rng.index(n);
        }
        for (std::size_t d = 0; d < dim; ++d)
            result.centroids[c * dim + d] = features.data[chosen * dim + d];
    }

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d = sq_dist(features.row(i), result.centroids.data() + c * dim, dim);
                if (d < best_dist) {
                    best_dist = d;
                    best = c;
                }
            }
            objective += best_dist;
            if (result.assignments[i] != best) {
                result.assignments[i] = best;
                changed = true;
            }
        }
        result.objective = objective;
        result.iterations = iter + 1;
        if (!changed && iter > 0) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t c = result.assignments[i];
            ++counts[c];
            auto row = features.row(i);
            for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += row[d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t d = 0; d < dim; ++d)
                    result.centroids[c * dim + d] =
                        sums[c * dim + d] / static_cast<double>(counts[c]);
            } else {
                // Re-seed to the point farthest from its assigned centroid.
                std::size_t far = 0;
                double far_dist = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = sq_dist(features.row(i),
                                       result.centroids.data() + result.assignments[i] * dim,
                                       dim);
                    if (d > far_dist) {
                        far_dist = d;
                        far = i;
                    }
                }
                for (std::size_t d = 0; d < dim; ++d)
                    result.centroids[c * dim + d] = features.data[far * dim + d];
            }
        }
    }
    return result;
}

HungarianResult hungarian(const std::vector<double>& cost, std::size_t n) {
    if (cost.size() != n * n) throw InvalidInput("hungarian: cost matrix is not square");
    for (double v : cost)
        if (!std::isfinite(v)) throw InvalidInput("hungarian: non-finite cost entry");
    if (n == 0) throw InvalidInput("hungarian: empty matrix");

    // Kuhn-Munkres with potentials, O(n^3).
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    HungarianResult result;
    result.assignment.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) result.assignment[p[j] - 1] = j - 1;
    for (std::size_t i = 0; i < n; ++i)
        result.total_cost += cost[i * n + result.assignment[i]];
    return result;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
}

MatchResult match_clusters(const std::vector<std::size_t>& pred,
                           const std::vector<std::uint32_t>& truth) {
    if (pred.size() != truth.size())
        throw InvalidInput("match_clusters: prediction/truth lengths differ");
    if (pred.empty()) throw InvalidInput("match_clusters: empty input");

    std::size_t num_pred = *std::max_element(pred.begin(), pred.end()) + 1;
    std::size_t num_true = *std::max_element(truth.begin(), truth.end()) + 1;
    std::size_t n = std::max(num_pred, num_true);

    // Co-occurrence counts, zero-padded to n x n.
    std::vector<std::uint64_t> co(n * n, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) ++co[pred[i] * n + truth[i]];
    std::uint64_t max_count = *std::max_element(co.begin(), co.end());

    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n * n; ++i)
        cost[i] = static_cast<double>(max_count - co[i]);
    HungarianResult h = hungarian(cost, n);

    MatchResult result;
    result.matrix.num_pred = n;
    result.matrix.num_true = n;
    result.matrix.counts.assign(n * n, 0);
    for (std::size_t c = 0; c < num_pred; ++c) result.assignment[c] = h.assignment[c];
    for (std::size_t i = 0; i < pred.size(); ++i)
        ++result.matrix.counts[h.assignment[pred[i]] * n + truth[i]];
    return result;
}

EvalReport metrics(const ConfusionMatrix& cm) {
    if (cm.counts.empty() || cm.total() == 0)
        throw InvalidInput("metrics: empty confusion matrix");

    EvalReport report;
    std::uint64_t total = cm.total();
    std::size_t classes = std::max(cm.num_pred, cm.num_true);

    std::uint64_t trace = 0;
    double iou_sum = 0.0;
    std::size_t iou_classes = 0;
    double acc_sum = 0.0;
    std::size_t acc_classes = 0;

    for (std::size_t c = 0; c < classes; ++c) {
        std::uint64_t tp = (c < cm.num_pred && c < cm.num_true) ? cm.at(c, c) : 0;
        std::uint64_t row = 0, col = 0;
        if (c < cm.num_pred)
            for (std::size_t t = 0; t < cm.num_true; ++t) row += cm.at(c, t);
        if (c < cm.num_true)
            for (std::size_t p = 0; p < cm.num_pred; ++p) col += cm.at(p, c);
        trace += tp;

        std::uint64_t uni = row + col - tp;  // TP + FP + FN
        if (uni > 0) {
            iou_sum += static_cast<double>(tp) / static_cast<double>(uni);
            ++iou_classes;
        }
        if (col > 0) {  // class present in ground truth
            double recall = static_cast<double>(tp) / static_cast<double>(col);
            report.per_class_accuracy[static_cast<std::uint32_t>(c)] = recall;
            acc_sum += recall;
            ++acc_classes;
        }
    }

    report.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    report.miou = iou_classes == 0 ? 0.0 : iou_sum / static_cast<double>(iou_classes);
    report.mean_class_accuracy =
        acc_classes == 0 ? 0.0 : acc_sum / static_cast<double>(acc_classes);
    return report;
}

ProbeLossResult probe_loss(const std::vector<double>& weight,
                           const std::vector<double>& bias, std::size_t num_classes,
                           const FeatureBatch& features) {
    std::size_t n = features.rows();
    std::size_t dim = features.dim;
    if (weight.size() != num_classes * dim || bias.size() != num_classes)
        throw InvalidInput("probe_loss: parameter shapes do not match");
    if (!features.has_labels()) throw InvalidInput("probe_loss: labels required");

    ProbeLossResult result;
    result.grad_weight.assign(weight.size(), 0.0);
    result.grad_bias.assign(bias.size(), 0.0);

    std::vector<double> logits(num_classes), probs(num_classes);
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = features.row(i);
        std::uint32_t label = features.labels[i];
        if (label >= num_classes) throw InvalidInput("probe_loss: label out of range");

        for (std::size_t c = 0; c < num_classes; ++c) {
            double acc = bias[c];
            const double* w = weight.data() + c * dim;
            for (std::size_t d = 0; d < dim; ++d) acc += w[d] * row[d];
            logits[c] = acc;
        }
        double max_logit = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            probs[c] = std::exp(logits[c] - max_logit);
            z += probs[c];
        }
        for (double& p : probs) p /= z;

        result.loss -= inv_n * std::log(std::max(probs[label], 1e-300));
        for (std::size_t c = 0; c < num_classes; ++c) {
            double g = inv_n * (probs[c] - (c == label ? 1.0 : 0.0));
            result.grad_bias[c] += g;
            double* gw = result.grad_weight.data() + c * dim;
            for (std::size_t d = 0; d < dim; ++d) gw[d] += g * row[d];
        }
    }
    return result;
}

LinearProbe linear_probe(const FeatureBatch& features, double lr, std::size_t epochs,
                         std::uint64_t seed) {
    (void)seed;  // zero init + full-batch updates; nothing stochastic
    if (!features.has_labels()) throw InvalidInput("linear_probe: labels required");
    std::set<std::uint32_t> distinct(features.labels.begin(), features.labels.end());
    if (distinct.size() < 2) throw InvalidInput("linear_probe: need at least 2 classes");
    if (!(lr > 0.0)) throw InvalidInput("linear_probe: lr must be positive");

    LinearProbe probe;
    probe.dim = features.dim;
    probe.num_classes = features.num_classes();
    probe.weight.assign(probe.num_classes * probe.dim, 0.0);
    probe.bias.assign(probe.num_classes, 0.0);

    AdamState w_state(probe.weight.size());
    AdamState b_state(probe.bias.size());
    for (std::size_t e = 0; e < epochs; ++e) {
        ProbeLossResult g = probe_loss(probe.weight, probe.bias, probe.num_classes, features);
        adam_step(probe.weight, g.grad_weight, w_state, lr);
        adam_step(probe.bias, g.grad_bias, b_state, lr);
    }

    auto pred = probe_predict(probe, features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == features.labels[i]) ++correct;
    probe.train_accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
    return probe;
}

std::vector<std::size_t> probe_predict(const LinearProbe& probe,
                                       const FeatureBatch& features) {
    if (features.dim != probe.dim) throw InvalidInput("probe_predict: dim mismatch");
    std::vector<std::size_t> pred(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto row = features.row(i);
        std::size_t best = 0;
        double best_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < probe.num_classes; ++c) {
            double acc = probe.bias[c];
            const double* w = probe.weight.data() + c * probe.dim;
            for (std::size_t d = 0; d < probe.dim; ++d) acc += w[d] * row[d];
            if (acc > best_logit) {  // ties break to the lowest class index
                best_logit = acc;
                best = c;
            }
        }
        pred[i] = best;
    }
    return pred;
}

std::string confusion_matrix_csv(const ConfusionMatrix& cm) {
    std::string out = "pred\\true";
    for (std::size_t t = 0; t < cm.num_true; ++t) out += "," + std::to_string(t);
    out += '\n';
    for (std::size_t p = 0; p < cm.num_pred; ++p) {
        out += std::to_string(p);
        for (std::size_t t = 0; t < cm.num_true; ++t)
            out += "," + std::to_string(cm.at(p, t));
        out += '\n';
    }
    return out;
}

}  // namespace equss
