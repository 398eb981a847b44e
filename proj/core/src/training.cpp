#include "equss/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "equss/errors.hpp"
#include "equss/rng.hpp"

namespace equss {

namespace {

constexpr double kNormFloor = 1e-12;

void format_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

SubvectorLoss quadratic_loss(const std::vector<std::span<const double>>& subvectors,
                             const std::vector<std::span<const double>>& selected,
                             bool grad_wrt_codewords) {
    if (subvectors.empty() || subvectors.size() != selected.size())
        throw InvalidInput("loss: subvector/codeword counts differ");
    std::size_t m_count = subvectors.size();

    SubvectorLoss out;
    for (std::size_t m = 0; m < m_count; ++m) {
        if (subvectors[m].size() != selected[m].size())
            throw InvalidInput("loss: dimension mismatch in codebook " + std::to_string(m));
        double scale = 2.0 / static_cast<double>(m_count);
        for (std::size_t i = 0; i < subvectors[m].size(); ++i) {
            double diff = subvectors[m][i] - selected[m][i];
            out.value += diff * diff;
            out.grads.push_back(grad_wrt_codewords ? -scale * diff : scale * diff);
        }
    }
    out.value /= static_cast<double>(m_count);
    return out;
}

}  // namespace

void LossWeights::validate() const {
    if (lambda_codebook < 0.0 || lambda_commit < 0.0)
        throw InvalidInput("loss weights must be nonnegative");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
    if (epochs == 0) throw InvalidInput("epochs must be >= 1");
    if (batch_size == 0) throw InvalidInput("batch_size must be >= 1");
    if (input_dim == 0) throw InvalidInput("input_dim must be >= 1");
    weights.validate();
    quantizer.validate();
}

SubvectorLoss codebook_loss(const std::vector<std::span<const double>>& subvectors,
                            const std::vector<std::span<const double>>& selected) {
    return quadratic_loss(subvectors, selected, /*grad_wrt_codewords=*/true);
}

SubvectorLoss commit_loss(const std::vector<std::span<const double>>& subvectors,
                          const std::vector<std::span<const double>>& selected) {
    return quadratic_loss(subvectors, selected, /*grad_wrt_codewords=*/false);
}

std::vector<double> straight_through_grad(std::span<const double> grad_q) {
    return std::vector<double>(grad_q.begin(), grad_q.end());
}

std::vector<double> compose_input_gradient(std::span<const double> grad_q,
                                           std::span<const double> commit_grad,
                                           double lambda_commit) {
    if (grad_q.size() != commit_grad.size())
        throw InvalidInput("compose_input_gradient: gradient sizes differ");
    std::vector<double> grad_x = straight_through_grad(grad_q);
    for (std::size_t i = 0; i < grad_x.size(); ++i)
        grad_x[i] += lambda_commit * commit_grad[i];
    return grad_x;
}

double total_loss(double task, double codebook, double commit, const LossWeights& w) {
    return task + w.lambda_codebook * codebook + w.lambda_commit * commit;
}

TaskLoss::Result CorrespondenceTaskLoss::evaluate(
    const std::vector<std::vector<double>>& quantized, const FeatureBatch& backbone) const {
    std::size_t n = quantized.size();
    if (n != backbone.rows())
        throw InvalidInput("task loss: quantized batch size " + std::to_string(n) +
                           " != backbone batch size " + std::to_string(backbone.rows()));
    if (n < 2) throw InvalidInput("task loss: need at least 2 samples");
    std::size_t d = quantized[0].size();
    for (const auto& q : quantized)
        if (q.size() != d) throw InvalidInput("task loss: ragged quantized batch");

    // Unit-normalize both sets (zero-norm rows normalize to zero).
    auto normalize_rows = [](auto&& row_of, std::size_t count, std::size_t dim) {
        std::vector<std::vector<double>> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = row_of(i);
            double nrm = norm(out[i]);
            if (nrm < kNormFloor)
                out[i].assign(dim, 0.0);
            else
                for (double& v : out[i]) v /= nrm;
        }
        return out;
    };
    auto q_hat = normalize_rows([&](std::size_t i) { return quantized[i]; }, n, d);
    auto f_hat = normalize_rows([&](std::size_t i) { return backbone.row_double(i); }, n,
                                backbone.dim);
    std::vector<double> q_norm(n);
    for (std::size_t i = 0; i < n; ++i) q_norm[i] = norm(quantized[i]);

    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    // err(i,j) = S_Q(i,j) - S_F(i,j); loss = mean over all N^2 ordered pairs.
    std::vector<double> err(n * n);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double e = dot(q_hat[i], q_hat[j]) - dot(f_hat[i], f_hat[j]);
            err[i * n + j] = e;
            value += e * e;
        }
    }
    double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    value *= inv_n2;

    // dS_Q(i,j)/dq_i = (q_hat_j - S_Q(i,j) q_hat_i) / ||q_i||; both (i,j) and
    // (j,i) appear in the sum, hence the factor 4. Diagonal terms are constant.
    TaskLoss::Result result;
    result.value = value;
    result.grads.assign(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (q_norm[i] < kNormFloor) continue;
        double* g = result.grads.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s_q = dot(q_hat[i], q_hat[j]);
            double coeff = 4.0 * inv_n2 * err[i * n + j] / q_norm[i];
            for (std::size_t t = 0; t < d; ++t)
                g[t] += coeff * (q_hat[j][t] - s_q * q_hat[i][t]);
        }
    }
    return result;
}

TaskLoss::Result ZeroTaskLoss::evaluate(const std::vector<std::vector<double>>& quantized,
                                        const FeatureBatch&) const {
    TaskLoss::Result r;
    r.grads.assign(quantized.size() * (quantized.empty() ? 0 : quantized[0].size()), 0.0);
    return r;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw InvalidInput("adam_step: shape mismatch");
    state.step += 1;
    double t = static_cast<double>(state.step);
    double bc1 = 1.0 - std::pow(state.beta1, t);
    double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        double m_hat = m / bc1;
        double v_hat = v / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

TrainResult train(const FeatureBatch& features, const TrainConfig& cfg,
                  const TaskLoss& task) {
    cfg.validate();
    features.validate();
    if (features.rows() == 0) throw InvalidInput("train: empty feature batch");
    if (features.dim != cfg.input_dim)
        throw InvalidInput("train: features have dim " + std::to_string(features.dim) +
                           ", config expects d_F " + std::to_string(cfg.input_dim));

    std::uint64_t head_seed = mix_key(cfg.seed, 1);
    std::uint64_t book_seed = mix_key(cfg.seed, 2);
    Rng shuffle_rng(mix_key(cfg.seed, 3));

    TrainResult result;
    result.head = init_head(cfg.input_dim, cfg.quantizer.expanded_dim, head_seed);
    result.books = init_codebooks(cfg.quantizer, book_seed);

    std::vector<double> head_params = result.head.flatten_params();
    AdamState head_state(head_params.size());
    AdamState book_state(result.books.entries.size());

    std::size_t n = features.rows();
    std::size_t m_count = cfg.quantizer.num_codebooks;
    std::size_t step = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t b = std::min(cfg.batch_size, n - start);
            std::span<const std::size_t> batch_idx(order.data() + start, b);

            // Snapshot so a NaN step can abort with the last good parameters.
            ExpansionHead head_snapshot = result.head;
            std::vector<double> book_snapshot = result.books.entries;

            FeatureBatch backbone;
            backbone.dim = features.dim;
            for (std::size_t idx : batch_idx) {
                auto row = features.row(idx);
                backbone.data.insert(backbone.data.end(), row.begin(), row.end());
            }

            std::vector<std::vector<double>> expanded(b);
            std::vector<ForwardTrace> traces(b);
            std::vector<QuantizeResult> quant(b);
            std::vector<std::vector<double>> quantized(b);
            for (std::size_t i = 0; i < b; ++i) {
                auto f = features.row_double(batch_idx[i]);
                expanded[i] = forward(result.head, f, &traces[i]);
                quant[i] = quantize(expanded[i], result.books);
                quantized[i] = quant[i].quantized;
            }

            TaskLoss::Result task_result =
                b >= 2 ? task.evaluate(quantized, backbone) : TaskLoss::Result{
                             0.0, std::vector<double>(cfg.quantizer.expanded_dim, 0.0)};

            double inv_b = 1.0 / static_cast<double>(b);
            double codebook_value = 0.0;
            double commit_value = 0.0;
            std::vector<double> head_grads(head_params.size(), 0.0);
            std::vector<double> book_grads(result.books.entries.size(), 0.0);

            for (std::size_t i = 0; i < b; ++i) {
                auto subvectors = split(expanded[i], cfg.quantizer);
                std::vector<std::span<const double>> selected;
                selected.reserve(m_count);
                for (std::size_t m = 0; m < m_count; ++m)
                    selected.push_back(result.books.codeword(m, quant[i].combination[m]));

                SubvectorLoss cb = codebook_loss(subvectors, selected);
                SubvectorLoss cm = commit_loss(subvectors, selected);
                codebook_value += cb.value * inv_b;
                commit_value += cm.value * inv_b;

                // Codeword gradients route only through the codebook loss.
                std::size_t sub_dim = cfg.quantizer.subvector_dim();
                for (std::size_t m = 0; m < m_count; ++m) {
                    std::size_t k = quant[i].combination[m];
                    double* dst = book_grads.data() +
                                  (m * cfg.quantizer.codebook_size + k) * sub_dim;
                    const double* src = cb.grads.data() + m * sub_dim;
                    for (std::size_t t = 0; t < sub_dim; ++t)
                        dst[t] += cfg.weights.lambda_codebook * inv_b * src[t];
                }

                // The task gradient reaches x only via the straight-through copy.
                std::span<const double> grad_q(
                    task_result.grads.data() + i * cfg.quantizer.expanded_dim,
                    cfg.quantizer.expanded_dim);
                std::vector<double> grad_x = compose_input_gradient(
                    grad_q, cm.grads, cfg.weights.lambda_commit * inv_b);

                HeadGradients hg = backward(result.head, traces[i], grad_x);
                std::vector<double> flat = hg.params.flatten_params();
                for (std::size_t t = 0; t < flat.size(); ++t) head_grads[t] += flat[t];
            }

            double total = total_loss(task_result.value, codebook_value, commit_value,
                                      cfg.weights);
            if (!std::isfinite(total)) {
                result.head = std::move(head_snapshot);
                result.books.entries = std::move(book_snapshot);
                result.diverged = true;
                return result;
            }

            adam_step(head_params, head_grads, head_state, cfg.learning_rate);
            result.head.unflatten_params(head_params);
            adam_step(result.books.entries, book_grads, book_state, cfg.learning_rate);

            ++step;
            result.history.push_back(
                {step, task_result.value, codebook_value, commit_value, total});
        }
    }
    return result;
}

void write_loss_history(const std::vector<StepLosses>& history, const std::string& path) {
    std::string out = "step,task_loss,codebook_loss,commit_loss,total_loss\n";
    for (const auto& row : history) {
        out += std::to_string(row.step);
        out += ',';
        format_double(out, row.task);
        out += ',';
        format_double(out, row.codebook);
        out += ',';
        format_double(out, row.commit);
        out += ',';
        format_double(out, row.total);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open '" + path + "' for writing", 0);
    f << out;
}

}  // namespace equss
