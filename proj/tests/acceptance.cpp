// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
// The sweep and determinism criteria drive the installed CLI binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "equss/analysis.hpp"
#include "equss/datagen.hpp"
#include "equss/entropy.hpp"
#include "equss/evaluation.hpp"
#include "equss/expansion.hpp"
#include "equss/pipeline.hpp"
#include "equss/quantizer.hpp"
#include "equss/rng.hpp"
#include "equss/training.hpp"

using namespace equss;

namespace {

namespace fs = std::filesystem;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(EQUSS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

// ---------------------------------------------------------------------------
// 1. Assignment oracle

std::size_t brute_force_assign(const std::vector<double>& x, const double* codebook,
                               std::size_t k_count, std::size_t dim) {
    auto normalized = [dim](const double* v) {
        std::vector<double> out(v, v + dim);
        double n = 0.0;
        for (double t : out) n += t * t;
        n = std::sqrt(n);
        if (n < 1e-12)
            out.assign(dim, 0.0);
        else
            for (double& t : out) t /= n;
        return out;
    };
    auto x_hat = normalized(x.data());
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
        auto e_hat = normalized(codebook + k * dim);
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i)
            d += (x_hat[i] - e_hat[i]) * (x_hat[i] - e_hat[i]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

bool criterion_assignment_oracle() {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t dim = 1 + rng.index(8);
        std::size_t k_count = 1 + rng.index(16);
        std::vector<double> codebook(k_count * dim);
        for (double& v : codebook) v = rng.uniform(-2, 2);
        // occasionally duplicate a codeword to force ties
        if (k_count > 1 && trial % 5 == 0)
            std::copy_n(codebook.begin(), dim, codebook.begin() + (k_count - 1) * dim);
        std::vector<double> sub(dim);
        for (double& v : sub) v = rng.uniform(-2, 2);
        if (trial % 7 == 0) sub.assign(dim, 0.0);
        if (assign(sub, codebook.data(), k_count, dim) !=
            brute_force_assign(sub, codebook.data(), k_count, dim))
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 2. Gradient suite

bool fd_close(double fd, double analytic) {
    double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
    return std::abs(fd - analytic) / scale < 1e-5;
}

bool check_pq_loss_grads(bool toward_codewords) {
    Rng rng(toward_codewords ? 202 : 203);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t m_count = 1 + rng.index(4);
        std::size_t dim = 1 + rng.index(4);
        std::vector<double> subs(m_count * dim), sel(m_count * dim);
        for (double& v : subs) v = rng.uniform(-1, 1);
        for (double& v : sel) v = rng.uniform(-1, 1);
        auto make_spans = [&](std::vector<double>& flat) {
            std::vector<std::span<const double>> spans;
            for (std::size_t m = 0; m < m_count; ++m)
                spans.push_back({flat.data() + m * dim, dim});
            return spans;
        };
        auto eval = [&]() {
            return toward_codewords
                       ? codebook_loss(make_spans(subs), make_spans(sel))
                       : commit_loss(make_spans(subs), make_spans(sel));
        };
        auto base = eval();
        std::vector<double>& target = toward_codewords ? sel : subs;
        const double h = 1e-6;
        for (std::size_t p = 0; p < target.size(); ++p) {
            double saved = target[p];
            target[p] = saved + h;
            double up = eval().value;
            target[p] = saved - h;
            double down = eval().value;
            target[p] = saved;
            if (!fd_close((up - down) / (2 * h), base.grads[p])) return false;
        }
    }
    return true;
}

bool check_task_loss_grads() {
    Rng rng(204);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 2 + rng.index(4);
        std::size_t d_e = 2 + rng.index(4);
        std::size_t d_f = 2 + rng.index(3);
        FeatureBatch backbone;
        backbone.dim = d_f;
        for (std::size_t i = 0; i < n * d_f; ++i)
            backbone.data.push_back(static_cast<float>(rng.uniform(-1, 1)));
        std::vector<std::vector<double>> q(n, std::vector<double>(d_e));
        for (auto& row : q)
            for (double& v : row) v = rng.uniform(-1, 1);

        CorrespondenceTaskLoss loss;
        auto base = loss.evaluate(q, backbone);
        const double h = 1e-6;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < d_e; ++d) {
                double saved = q[i][d];
                q[i][d] = saved + h;
                double up = loss.evaluate(q, backbone).value;
                q[i][d] = saved - h;
                double down = loss.evaluate(q, backbone).value;
                q[i][d] = saved;
                if (!fd_close((up - down) / (2 * h), base.grads[i * d_e + d])) return false;
            }
        }
    }
    return true;
}

bool check_head_grads() {
    Rng rng(205);
    for (int trial = 0; trial < 20; ++trial) {
        auto head = init_head(3, 5, 300 + trial);
        for (Linear* l : {&head.a1, &head.a2, &head.b})
            for (double& b : l->bias) b = rng.uniform(-0.5, 0.5);
        std::vector<double> f(3), grad_x(5);
        for (double& v : f) v = rng.uniform(-1, 1);
        for (double& v : grad_x) v = rng.uniform(-1, 1);

        auto objective = [&](const ExpansionHead& hd, const std::vector<double>& in) {
            auto x = forward(hd, in);
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) s += grad_x[i] * x[i];
            return s;
        };

        ForwardTrace trace;
        forward(head, f, &trace);
        auto analytic = backward(head, trace, grad_x);
        auto flat_grad = analytic.params.flatten_params();
        auto flat = head.flatten_params();
        const double h = 1e-5;
        for (std::size_t p = 0; p < flat.size(); ++p) {
            auto plus = head, minus = head;
            auto fp = flat, fm = flat;
            fp[p] += h;
            fm[p] -= h;
            plus.unflatten_params(fp);
            minus.unflatten_params(fm);
            if (!fd_close((objective(plus, f) - objective(minus, f)) / (2 * h), flat_grad[p]))
                return false;
        }
        for (std::size_t p = 0; p < f.size(); ++p) {
            auto fp = f, fm = f;
            fp[p] += h;
            fm[p] -= h;
            if (!fd_close((objective(head, fp) - objective(head, fm)) / (2 * h),
                          analytic.input[p]))
                return false;
        }
    }
    return true;
}

bool check_probe_grads() {
    Rng rng(206);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t dim = 2 + rng.index(3);
        std::size_t classes = 2 + rng.index(3);
        std::size_t n = 4 + rng.index(4);
        FeatureBatch batch;
        batch.dim = dim;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d)
                batch.data.push_back(static_cast<float>(rng.uniform(-1, 1)));
            batch.labels.push_back(static_cast<std::uint32_t>(rng.index(classes)));
        }
        std::vector<double> w(classes * dim), b(classes);
        for (double& v : w) v = rng.uniform(-1, 1);
        for (double& v : b) v = rng.uniform(-1, 1);
        auto base = probe_loss(w, b, classes, batch);
        const double h = 1e-6;
        for (std::size_t p = 0; p < w.size(); ++p) {
            auto wp = w, wm = w;
            wp[p] += h;
            wm[p] -= h;
            double fd = (probe_loss(wp, b, classes, batch).loss -
                         probe_loss(wm, b, classes, batch).loss) /
                        (2 * h);
            if (!fd_close(fd, base.grad_weight[p])) return false;
        }
        for (std::size_t p = 0; p < b.size(); ++p) {
            auto bp = b, bm = b;
            bp[p] += h;
            bm[p] -= h;
            double fd = (probe_loss(w, bp, classes, batch).loss -
                         probe_loss(w, bm, classes, batch).loss) /
                        (2 * h);
            if (!fd_close(fd, base.grad_bias[p])) return false;
        }
    }
    return true;
}

bool criterion_gradient_suite() {
    return check_pq_loss_grads(true) && check_pq_loss_grads(false) &&
           check_task_loss_grads() && check_head_grads() && check_probe_grads();
}

// ---------------------------------------------------------------------------
// 3. Straight-through contract

bool criterion_straight_through() {
    std::vector<double> grad_q = {0.5, -1.25, 2.0, 0.0};
    std::vector<double> commit = {1.0, 0.5, -0.25, 4.0};
    double lambda = 0.25;

    auto st = straight_through_grad(grad_q);
    if (st != grad_q) return false;

    auto composed = compose_input_gradient(grad_q, commit, lambda);
    for (std::size_t i = 0; i < grad_q.size(); ++i)
        if (composed[i] != grad_q[i] + lambda * commit[i]) return false;

    // lambda = 0 leaves only the copied task gradient
    auto pure = compose_input_gradient(grad_q, commit, 0.0);
    return pure == grad_q;
}

// ---------------------------------------------------------------------------
// 4. Entropy closed forms

bool criterion_entropy_closed_forms() {
    EmpiricalPmf uniform;
    uniform.num_codebooks = 16;
    uniform.codebook_size = 64;
    uniform.probs.assign(16 * 64, 1.0 / 64.0);
    uniform.sample_count = 1;
    if (std::abs(sum_entropy(uniform) - 96.0) > 1e-9) return false;

    EmpiricalPmf onehot;
    onehot.num_codebooks = 8;
    onehot.codebook_size = 32;
    onehot.probs.assign(8 * 32, 0.0);
    for (int m = 0; m < 8; ++m) onehot.probs[m * 32] = 1.0;
    onehot.sample_count = 1;
    if (sum_entropy(onehot) != 0.0) return false;

    // histogram entropy on bin-center-aligned data equals the discrete entropy
    FeatureBatch grid;
    grid.dim = 1;
    grid.data = {0.5f, 0.5f, 1.5f, 2.5f, 2.5f, 2.5f, 3.5f, 3.5f};
    HistogramSpec spec;
    DimensionHistogram h;
    h.min = 0;
    h.max = 4;
    h.bins = 4;
    h.edges = {0, 1, 2, 3, 4};
    spec.dims.push_back(h);
    QuantizerConfig cfg{1, 4, 1};
    std::vector<CodeCombination> combs = {{0}, {0}, {1}, {2}, {2}, {2}, {3}, {3}};
    double discrete = sum_entropy(empirical_pmf(combs, cfg));
    return std::abs(histogram_entropy(grid, spec) - discrete) <= 1e-9;
}

// ---------------------------------------------------------------------------
// 5. Bit accounting

bool criterion_bit_accounting() {
    CodeBits bits = code_bits({64, 256, 1024});
    if (bits.total_bits != 512.0) return false;
    if (float_vector_bits(70) != 2240.0) return false;
    std::string report = entropy_report_json({64, 256, 1024}, {}, 0.0, 0, {});
    return report.find("512") != std::string::npos &&
           report.find("2240") != std::string::npos &&
           report.find("\"dim\": 70") != std::string::npos;
}

// ---------------------------------------------------------------------------
// 6. Hungarian optimality

double brute_force_matching(const std::vector<double>& cost, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

bool criterion_hungarian() {
    Rng rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.index(7);
        std::vector<double> cost(n * n);
        for (double& v : cost) v = rng.uniform(0, 10);
        auto result = hungarian(cost, n);
        double recomputed = 0.0;
        for (std::size_t i = 0; i < n; ++i) recomputed += cost[i * n + result.assignment[i]];
        if (std::abs(result.total_cost - recomputed) > 1e-12) return false;
        if (std::abs(result.total_cost - brute_force_matching(cost, n)) > 1e-9) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 7.-9. End-to-end runs

TrainConfig end_to_end_config(std::size_t steps_target, std::size_t n_samples,
                              std::uint64_t seed) {
    TrainConfig cfg;
    cfg.learning_rate = 3e-4;
    cfg.batch_size = 32;
    std::size_t steps_per_epoch = (n_samples + cfg.batch_size - 1) / cfg.batch_size;
    cfg.epochs = (steps_target + steps_per_epoch - 1) / steps_per_epoch;
    cfg.seed = seed;
    cfg.quantizer = {8, 16, 64};
    cfg.input_dim = 16;
    return cfg;
}

bool criterion_code_distance(std::string& detail) {
    // 4 well-separated equal-spread Gaussians
    MixtureSpec spec;
    spec.seed = 11;
    for (std::size_t c = 0; c < 4; ++c) {
        ClassSpec cls;
        cls.mean.assign(16, 0.0);
        cls.mean[c] = 1.0;
        cls.stddev = 0.1;
        cls.count = 128;
        spec.classes.push_back(std::move(cls));
    }
    FeatureBatch features = generate(spec);
    TrainConfig cfg = end_to_end_config(2000, features.rows(), 11);

    CorrespondenceTaskLoss task;
    TrainResult result = train(features, cfg, task);
    if (result.diverged) {
        detail = "training diverged";
        return false;
    }

    QuantizedBatch q = expand_and_quantize(result.head, result.books, features);
    DistanceMatrix m = class_distance_matrix(
        q.results, features.labels, DistanceMetric::combination_hamming, 10000, 0);
    for (std::size_t i = 0; i < m.classes.size(); ++i) {
        for (std::size_t j = 0; j < m.classes.size(); ++j) {
            if (i == j) continue;
            if (!(m.at(i, i) < m.at(i, j))) {
                char buf[128];
                std::snprintf(buf, sizeof buf, "row %zu: diag %.4f !< offdiag %.4f", i,
                              m.at(i, i), m.at(i, j));
                detail = buf;
                return false;
            }
        }
    }
    return true;
}

struct LadderRun {
    bool ok = false;
    std::string detail;
    std::map<std::uint32_t, double> per_class_bits;
    std::optional<double> spearman;
    double accuracy = 0.0;
    std::optional<double> probe_accuracy;
};

LadderRun run_ladder() {
    LadderRun out;
    MixtureSpec spec = diversity_ladder(4, 16, 0.2, 4.0, 13, 250, 4.0);
    FeatureBatch features = generate(spec);
    TrainConfig cfg = end_to_end_config(2000, features.rows(), 13);
    cfg.quantizer = {8, 64, 64};

    CorrespondenceTaskLoss task;
    TrainResult result = train(features, cfg, task);
    if (result.diverged) {
        out.detail = "training diverged";
        return out;
    }

    QuantizedBatch q = expand_and_quantize(result.head, result.books, features);
    std::vector<CodeCombination> combs;
    for (const auto& r : q.results) combs.push_back(r.combination);
    out.per_class_bits = per_class_entropy(combs, features.labels, cfg.quantizer);

    ModelEvaluation eval = evaluate_model(q, 4, /*with_probe=*/true, 3e-3, 500, 13);
    out.accuracy = eval.clustering.accuracy;
    out.probe_accuracy = eval.probe_accuracy;
    auto pairs = entropy_accuracy_pairs(out.per_class_bits,
                                        eval.clustering.per_class_accuracy);
    out.spearman = pairs.spearman;
    out.ok = true;
    return out;
}

bool criterion_entropy_diversity(const LadderRun& run, std::string& detail) {
    if (!run.ok) {
        detail = run.detail;
        return false;
    }
    for (std::uint32_t c = 1; c < 4; ++c) {
        if (!(run.per_class_bits.at(c) > run.per_class_bits.at(c - 1))) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "entropy not increasing at class %u: %.3f vs %.3f",
                          c, run.per_class_bits.at(c - 1), run.per_class_bits.at(c));
            detail = buf;
            return false;
        }
    }
    if (!run.spearman) {
        detail = "spearman undefined";
        return false;
    }
    if (!(*run.spearman <= -0.5)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "spearman %.3f > -0.5", *run.spearman);
        detail = buf;
        return false;
    }
    return true;
}

bool criterion_clustering_sanity(const LadderRun& run, std::string& detail) {
    if (!run.ok) {
        detail = run.detail;
        return false;
    }
    if (run.accuracy < 0.9) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "accuracy %.3f < 0.9", run.accuracy);
        detail = buf;
        return false;
    }
    if (!run.probe_accuracy || *run.probe_accuracy < run.accuracy) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "probe %.3f < unsupervised %.3f",
                      run.probe_accuracy.value_or(-1.0), run.accuracy);
        detail = buf;
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 10. Sweep via the CLI

struct SweepRow {
    std::size_t m = 0;
    std::size_t k = 0;
    double accuracy = 0.0;
};

std::vector<SweepRow> parse_sweep_csv(const fs::path& path) {
    std::vector<SweepRow> rows;
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        SweepRow row;
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        row.m = std::stoul(field);
        std::getline(ss, field, ',');
        row.k = std::stoul(field);
        std::getline(ss, field, ',');
        row.accuracy = std::stod(field);
        rows.push_back(row);
    }
    return rows;
}

bool criterion_sweep(const fs::path& work, const fs::path& features_file,
                     const fs::path& config_file, std::string& detail) {
    fs::path sweep_dir = work / "sweep";
    int rc = run_cli("sweep --config " + config_file.string() + " --M-list 1,8,16,32" +
                     " --K-list 32,64 --features " + features_file.string() + " --out " +
                     sweep_dir.string());
    if (rc != 0) {
        detail = "sweep exit code " + std::to_string(rc);
        return false;
    }
    auto rows = parse_sweep_csv(sweep_dir / "sweep.csv");
    if (rows.size() != 8) {
        detail = "expected 8 rows, got " + std::to_string(rows.size());
        return false;
    }
    double best_vq = 0.0, best_pq = 0.0;
    for (const auto& row : rows)
        (row.m == 1 ? best_vq : best_pq) = std::max(row.m == 1 ? best_vq : best_pq,
                                                    row.accuracy);
    if (!(best_vq <= best_pq)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "M=1 best %.3f > M>1 best %.3f", best_vq, best_pq);
        detail = buf;
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 11. Determinism via the CLI

bool criterion_determinism(const fs::path& work, const fs::path& features_file,
                           const fs::path& config_file, std::string& detail) {
    fs::path a = work / "det_a", b = work / "det_b";
    for (const fs::path& dir : {a, b}) {
        int rc = run_cli("train --config " + config_file.string() + " --features " +
                         features_file.string() + " --out " + dir.string());
        if (rc != 0) {
            detail = "train exit code " + std::to_string(rc);
            return false;
        }
    }
    for (const char* name : {"head.pqeh", "codebooks.pqcb", "loss.csv"}) {
        if (slurp(a / name) != slurp(b / name)) {
            detail = std::string(name) + " differs between runs";
            return false;
        }
    }

    fs::path ra = work / "report_a.json", rb = work / "report_b.json";
    for (const auto& [dir, rep] : {std::pair{a, ra}, std::pair{b, rb}}) {
        int rc = run_cli("eval --model " + a.string() + " --features " +
                         features_file.string() + " --probe --probe-epochs 100 -o " +
                         rep.string());
        if (rc != 0) {
            detail = "eval exit code " + std::to_string(rc);
            return false;
        }
    }
    std::string body_a = slurp(ra);
    if (body_a.empty() || body_a != slurp(rb)) {
        detail = "eval reports differ or are empty";
        return false;
    }
    return true;
}

}  // namespace

int main() {
    report("assignment matches exhaustive oracle", criterion_assignment_oracle());
    report("analytic gradients match finite differences", criterion_gradient_suite());
    report("straight-through gradient composition is exact", criterion_straight_through());
    report("entropy closed forms", criterion_entropy_closed_forms());
    report("bit accounting (512-bit code, 2240-bit float reference)",
           criterion_bit_accounting());
    report("hungarian matching is optimal", criterion_hungarian());

    std::string detail;
    bool code_distance = criterion_code_distance(detail);
    report("within-class code distance below cross-class distance", code_distance, detail);

    LadderRun ladder = run_ladder();
    detail.clear();
    bool diversity = criterion_entropy_diversity(ladder, detail);
    report("entropy rises with diversity and anticorrelates with accuracy", diversity, detail);
    detail.clear();
    bool sanity = criterion_clustering_sanity(ladder, detail);
    report("clustering accuracy and probe ordering", sanity, detail);

    // shared CLI fixtures
    fs::path work = fs::temp_directory_path() / "equss_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    MixtureSpec mix;
    mix.seed = 21;
    for (std::size_t c = 0; c < 4; ++c) {
        ClassSpec cls;
        cls.mean.assign(16, 0.0);
        cls.mean[c] = 1.0;
        cls.stddev = 0.1;
        cls.count = 100;
        mix.classes.push_back(std::move(cls));
    }
    fs::path features_file = work / "features.eqft";
    write_features(generate(mix), features_file.string());

    fs::path config_file = work / "config.json";
    {
        std::ofstream cfg(config_file);
        cfg << "{\n"
               "  \"d_F\": 16,\n"
               "  \"d_E\": 64,\n"
               "  \"M\": 8,\n"
               "  \"K\": 16,\n"
               "  \"epochs\": 20,\n"
               "  \"batch_size\": 32,\n"
               "  \"seed\": 21\n"
               "}\n";
    }

    detail.clear();
    bool sweep = criterion_sweep(work, features_file, config_file, detail);
    report("sweep grid completes and PQ beats VQ", sweep, detail);

    detail.clear();
    bool det = criterion_determinism(work, features_file, config_file, detail);
    report("training and evaluation are byte-identical across re-runs", det, detail);

    fs::remove_all(work);

    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
