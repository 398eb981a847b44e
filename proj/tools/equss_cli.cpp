// Command-line surface for the expand-and-quantize toolkit.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "equss/analysis.hpp"
#include "equss/datagen.hpp"
#include "equss/entropy.hpp"
#include "equss/errors.hpp"
#include "equss/evaluation.hpp"
#include "equss/pipeline.hpp"
#include "equss/training.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw equss::FormatError("cannot open '" + path + "' for writing", 0);
    f << body;
}

equss::FeatureBatch load_features_or_die(const std::string& path) {
    try {
        return equss::read_features(path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(kExitData);
    }
}

equss::LoadedModel load_model_or_die(const std::string& dir) {
    try {
        return equss::load_model(dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(kExitData);
    }
}

equss::RunConfig load_config_or_die(const std::string& path) {
    try {
        return equss::RunConfig::from_json_file(path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(kExitConfig);
    }
}

std::size_t default_clusters(const equss::FeatureBatch& features) {
    return features.num_classes() == 0 ? 1 : features.num_classes();
}

int cmd_generate(std::size_t classes, std::size_t dim, std::size_t per_class, double std_dev,
                 double ratio, double separation, std::uint64_t seed,
                 const std::string& out) {
    try {
        equss::MixtureSpec spec;
        if (ratio > 1.0) {
            spec = equss::diversity_ladder(classes, dim, std_dev, ratio, seed, per_class,
                                           separation);
        } else {
            if (dim < classes) throw equss::InvalidInput("--dim must be >= --classes");
            for (std::size_t c = 0; c < classes; ++c) {
                equss::ClassSpec cls;
                cls.mean.assign(dim, 0.0);
                cls.mean[c] = separation * std_dev;
                cls.stddev = std_dev;
                cls.count = per_class;
                spec.classes.push_back(std::move(cls));
            }
            spec.seed = seed;
        }
        equss::FeatureBatch batch = equss::generate(spec);
        equss::write_features(batch, out);
        std::cout << "N=" << batch.rows() << " D=" << batch.dim << " C="
                  << batch.num_classes() << "\n";
        std::cout << "stds:";
        for (const auto& c : spec.classes) std::cout << " " << c.stddev;
        std::cout << "\n";
        return 0;
    } catch (const equss::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int run_training(const equss::RunConfig& cfg, const equss::FeatureBatch& features,
                 const std::string& out_dir) {
    equss::CorrespondenceTaskLoss task;
    equss::TrainResult result = equss::train(features, cfg.train_config(), task);
    equss::save_model(out_dir, result.head, result.books, result.history);
    if (result.diverged) {
        std::cerr << "error: training loss became non-finite; last-good checkpoint saved to "
                  << out_dir << "\n";
        return kExitNumeric;
    }
    if (!result.history.empty())
        std::cout << "initial_loss=" << result.history.front().total
                  << " final_loss=" << result.history.back().total << "\n";
    std::cout << "model written to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& features_flag,
              const std::string& out_flag) {
    equss::RunConfig cfg = load_config_or_die(config_path);
    if (!features_flag.empty()) cfg.features_path = features_flag;
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (cfg.features_path.empty()) {
        std::cerr << "error: no features path (config 'features' or --features)\n";
        return kExitConfig;
    }
    if (cfg.out_dir.empty()) {
        std::cerr << "error: no output directory (config 'out_dir' or --out)\n";
        return kExitConfig;
    }

    equss::FeatureBatch features = load_features_or_die(cfg.features_path);
    if (features.dim != cfg.d_f) {
        std::cerr << "error: config d_F=" << cfg.d_f << " but feature file has D="
                  << features.dim << "\n";
        return kExitData;
    }
    try {
        return run_training(cfg, features, cfg.out_dir);
    } catch (const equss::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int cmd_quantize(const std::string& model_dir, const std::string& features_path,
                 const std::string& out, const std::string& combinations_path) {
    equss::LoadedModel model = load_model_or_die(model_dir);
    equss::FeatureBatch features = load_features_or_die(features_path);
    try {
        equss::QuantizedBatch q = equss::expand_and_quantize(model.head, model.books, features);
        equss::write_features(q.features, out);
        if (!combinations_path.empty()) {
            std::string csv = "sample";
            for (std::size_t m = 0; m < model.books.config.num_codebooks; ++m)
                csv += ",code_" + std::to_string(m);
            csv += '\n';
            for (std::size_t i = 0; i < q.results.size(); ++i) {
                csv += std::to_string(i);
                for (std::size_t code : q.results[i].combination)
                    csv += "," + std::to_string(code);
                csv += '\n';
            }
            write_text(combinations_path, csv);
        }
        equss::CodeBits bits = equss::code_bits(model.books.config);
        std::cout << "quantized " << q.results.size() << " rows; " << bits.total_bits
                  << " bits per code\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int cmd_entropy(const std::string& model_dir, const std::string& features_path,
                bool per_class, bool continuous, const std::string& out) {
    equss::FeatureBatch features = load_features_or_die(features_path);
    try {
        std::string report;
        if (continuous) {
            equss::HistogramSpec spec = equss::build_histogram_specs(features);
            double bits = equss::histogram_entropy(features, spec);
            report = equss::continuous_entropy_report_json(bits, features.dim,
                                                          features.rows());
        } else {
            equss::LoadedModel model = load_model_or_die(model_dir);
            equss::QuantizedBatch q =
                equss::expand_and_quantize(model.head, model.books, features);
            std::vector<equss::CodeCombination> combinations;
            combinations.reserve(q.results.size());
            for (const auto& r : q.results) combinations.push_back(r.combination);
            equss::EmpiricalPmf pmf =
                equss::empirical_pmf(combinations, model.books.config);
            std::map<std::uint32_t, double> per_class_bits;
            if (per_class && features.has_labels())
                per_class_bits = equss::per_class_entropy(combinations, features.labels,
                                                          model.books.config);
            report = equss::entropy_report_json(
                model.books.config, equss::per_codebook_entropy(pmf),
                equss::sum_entropy(pmf), combinations.size(), per_class_bits);
        }
        std::cout << report;
        if (!out.empty()) write_text(out, report);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int cmd_analyze(const std::string& model_dir, const std::string& features_path,
                std::size_t samples_per_class, std::uint64_t seed, std::size_t clusters,
                const std::string& out_dir) {
    equss::FeatureBatch features = load_features_or_die(features_path);
    if (!features.has_labels()) {
        std::cerr << "error: labels required\n";
        return kExitData;
    }
    equss::LoadedModel model = load_model_or_die(model_dir);
    try {
        std::filesystem::create_directories(out_dir);
        equss::QuantizedBatch q = equss::expand_and_quantize(model.head, model.books, features);

        auto hamming = equss::class_distance_matrix(
            q.results, features.labels, equss::DistanceMetric::combination_hamming,
            samples_per_class, seed);
        write_text(out_dir + "/hamming_matrix.csv", equss::distance_matrix_csv(hamming));

        auto euclid = equss::quantized_euclidean_matrix(q.results, features.labels,
                                                        samples_per_class, seed);
        write_text(out_dir + "/euclidean_matrix.csv", equss::distance_matrix_csv(euclid));

        auto overall = equss::codeword_frequencies(q.results, features.labels,
                                                   model.books.config);
        write_text(out_dir + "/frequencies.csv", equss::frequency_table_csv(overall));
        std::set<std::uint32_t> class_set(features.labels.begin(), features.labels.end());
        for (std::uint32_t cls : class_set) {
            auto table = equss::codeword_frequencies(q.results, features.labels,
                                                     model.books.config, cls);
            write_text(out_dir + "/frequencies_class_" + std::to_string(cls) + ".csv",
                       equss::frequency_table_csv(table));
        }

        std::vector<equss::CodeCombination> combinations;
        for (const auto& r : q.results) combinations.push_back(r.combination);
        auto bits = equss::per_class_entropy(combinations, features.labels,
                                             model.books.config);

        std::size_t k = clusters == 0 ? default_clusters(features) : clusters;
        equss::ModelEvaluation eval =
            equss::evaluate_model(q, k, /*with_probe=*/false, 3e-3, 0, seed);
        auto pairs = equss::entropy_accuracy_pairs(bits, eval.clustering.per_class_accuracy);
        write_text(out_dir + "/entropy_accuracy.csv", equss::entropy_accuracy_csv(pairs));
        write_text(out_dir + "/entropy_accuracy_summary.json",
                   equss::spearman_summary_json(pairs.spearman, pairs.rows.size()));

        std::cout << "analysis written to " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int cmd_eval(const std::string& model_dir, const std::string& features_path,
             std::size_t clusters, bool probe, std::size_t probe_epochs, double probe_lr,
             std::uint64_t seed, const std::string& out) {
    equss::FeatureBatch features = load_features_or_die(features_path);
    if (!features.has_labels()) {
        std::cerr << "error: labels required\n";
        return kExitData;
    }
    equss::LoadedModel model = load_model_or_die(model_dir);
    try {
        equss::QuantizedBatch q = equss::expand_and_quantize(model.head, model.books, features);
        std::size_t k = clusters == 0 ? default_clusters(features) : clusters;
        equss::ModelEvaluation eval =
            equss::evaluate_model(q, k, probe, probe_lr, probe_epochs, seed);
        std::string report = equss::eval_report_json(eval);
        std::cout << report;
        if (!out.empty()) write_text(out, report);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int cmd_sweep(const std::string& config_path, const std::vector<std::size_t>& m_list,
              const std::vector<std::size_t>& k_list, const std::string& features_flag,
              const std::string& out_dir) {
    equss::RunConfig base = load_config_or_die(config_path);
    if (!features_flag.empty()) base.features_path = features_flag;
    if (base.features_path.empty()) {
        std::cerr << "error: no features path (config 'features' or --features)\n";
        return kExitConfig;
    }
    equss::FeatureBatch features = load_features_or_die(base.features_path);
    if (features.dim != base.d_f) {
        std::cerr << "error: config d_F=" << base.d_f << " but feature file has D="
                  << features.dim << "\n";
        return kExitData;
    }
    if (!features.has_labels()) {
        std::cerr << "error: labels required\n";
        return kExitData;
    }

    try {
        std::filesystem::create_directories(out_dir);
        std::string csv = "M,K,accuracy,miou,macc,bits\n";
        for (std::size_t m : m_list) {
            if (base.d_e % m != 0) {
                std::cerr << "warning: skipping M=" << m << " (does not divide d_E="
                          << base.d_e << ")\n";
                continue;
            }
            for (std::size_t k : k_list) {
                equss::RunConfig cfg = base;
                cfg.m = m;
                cfg.k = k;
                std::string run_dir =
                    out_dir + "/M" + std::to_string(m) + "_K" + std::to_string(k);

                equss::CorrespondenceTaskLoss task;
                equss::TrainResult result =
                    equss::train(features, cfg.train_config(), task);
                equss::save_model(run_dir, result.head, result.books, result.history);
                if (result.diverged) {
                    std::cerr << "warning: M=" << m << " K=" << k
                              << " diverged; skipping row\n";
                    continue;
                }
                equss::QuantizedBatch q =
                    equss::expand_and_quantize(result.head, result.books, features);
                equss::ModelEvaluation eval = equss::evaluate_model(
                    q, default_clusters(features), false, cfg.probe_lr, 0, cfg.seed);
                equss::CodeBits bits = equss::code_bits(cfg.train_config().quantizer);

                char row[256];
                std::snprintf(row, sizeof row, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", m, k,
                              eval.clustering.accuracy, eval.clustering.miou,
                              eval.clustering.mean_class_accuracy, bits.total_bits);
                csv += row;
                std::cout << "M=" << m << " K=" << k
                          << " acc=" << eval.clustering.accuracy << "\n";
            }
        }
        write_text(out_dir + "/sweep.csv", csv);
        std::cout << "sweep written to " << out_dir << "/sweep.csv\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Expand-and-quantize feature compression toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic Gaussian-mixture feature file");
    std::size_t gen_classes = 4, gen_dim = 16, gen_per_class = 500;
    double gen_std = 0.1, gen_ratio = 1.0, gen_separation = 10.0;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--classes", gen_classes, "Number of classes");
    gen->add_option("--dim", gen_dim, "Feature dimension (d_F)");
    gen->add_option("--per-class", gen_per_class, "Samples per class");
    gen->add_option("--std", gen_std, "Base isotropic standard deviation");
    gen->add_option("--ratio", gen_ratio, "Diversity ladder ratio (>1 enables the ladder)");
    gen->add_option("--separation", gen_separation, "Mean separation scale");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("-o,--out", gen_out, "Output feature file")->required();

    // train
    auto* train = app.add_subcommand("train", "Train expansion head and codebooks");
    std::string train_config, train_features, train_out;
    train->add_option("--config", train_config, "JSON run config")->required();
    train->add_option("--features", train_features, "Feature file (overrides config)");
    train->add_option("--out", train_out, "Model output directory (overrides config)");

    // quantize
    auto* quant = app.add_subcommand("quantize", "Quantize a feature file with a trained model");
    std::string quant_model, quant_features, quant_out, quant_comb;
    quant->add_option("--model", quant_model, "Model directory")->required();
    quant->add_option("--features", quant_features, "Feature file")->required();
    quant->add_option("-o,--out", quant_out, "Quantized feature file")->required();
    quant->add_option("--combinations", quant_comb, "Optional combinations CSV path");

    // entropy
    auto* ent = app.add_subcommand("entropy", "Entropy report (quantized codes or continuous histogram)");
    std::string ent_model, ent_features, ent_out;
    bool ent_per_class = false, ent_continuous = false;
    ent->add_option("--model", ent_model, "Model directory (quantized mode)");
    ent->add_option("--features", ent_features, "Feature file")->required();
    ent->add_flag("--per-class", ent_per_class, "Include per-class entropy");
    ent->add_flag("--continuous", ent_continuous, "Histogram entropy of raw features");
    ent->add_option("-o,--out", ent_out, "Write the JSON report here too");

    // analyze
    auto* ana = app.add_subcommand("analyze", "Distance matrices, codeword frequencies, entropy-accuracy pairs");
    std::string ana_model, ana_features, ana_out;
    std::size_t ana_samples = 10000, ana_clusters = 0;
    std::uint64_t ana_seed = 0;
    ana->add_option("--model", ana_model, "Model directory")->required();
    ana->add_option("--features", ana_features, "Labeled feature file")->required();
    ana->add_option("--samples-per-class", ana_samples, "Samples drawn per class");
    ana->add_option("--clusters", ana_clusters, "Cluster count (default: #classes)");
    ana->add_option("--seed", ana_seed, "Sampling seed");
    ana->add_option("--out", ana_out, "Output directory")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Unsupervised clustering evaluation (optionally linear probing)");
    std::string ev_model, ev_features, ev_out;
    std::size_t ev_clusters = 0, ev_probe_epochs = 500;
    double ev_probe_lr = 3e-3;
    std::uint64_t ev_seed = 0;
    bool ev_probe = false;
    ev->add_option("--model", ev_model, "Model directory")->required();
    ev->add_option("--features", ev_features, "Labeled feature file")->required();
    ev->add_option("--clusters", ev_clusters, "Cluster count (default: #classes)");
    ev->add_flag("--probe", ev_probe, "Also train a linear probe");
    ev->add_option("--probe-epochs", ev_probe_epochs, "Probe training epochs");
    ev->add_option("--probe-lr", ev_probe_lr, "Probe learning rate");
    ev->add_option("--seed", ev_seed, "k-means seed");
    ev->add_option("-o,--out", ev_out, "Write the JSON report here too");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Train+eval over an (M, K) grid");
    std::string sw_config, sw_features, sw_out;
    std::vector<std::size_t> sw_m, sw_k;
    sw->add_option("--config", sw_config, "JSON run config")->required();
    sw->add_option("--M-list", sw_m, "Codebook counts")->required()->delimiter(',');
    sw->add_option("--K-list", sw_k, "Codebook sizes")->required()->delimiter(',');
    sw->add_option("--features", sw_features, "Feature file (overrides config)");
    sw->add_option("--out", sw_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed())
        return cmd_generate(gen_classes, gen_dim, gen_per_class, gen_std, gen_ratio,
                            gen_separation, gen_seed, gen_out);
    if (train->parsed()) return cmd_train(train_config, train_features, train_out);
    if (quant->parsed()) return cmd_quantize(quant_model, quant_features, quant_out, quant_comb);
    if (ent->parsed())
        return cmd_entropy(ent_model, ent_features, ent_per_class, ent_continuous, ent_out);
    if (ana->parsed())
        return cmd_analyze(ana_model, ana_features, ana_samples, ana_seed, ana_clusters,
                           ana_out);
    if (ev->parsed())
        return cmd_eval(ev_model, ev_features, ev_clusters, ev_probe, ev_probe_epochs,
                        ev_probe_lr, ev_seed, ev_out);
    if (sw->parsed()) return cmd_sweep(sw_config, sw_m, sw_k, sw_features, sw_out);
    return kExitConfig;
}
