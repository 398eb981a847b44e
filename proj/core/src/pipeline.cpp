#include "equss/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "equss/errors.hpp"

namespace equss {

namespace {
using ordered_json = nlohmann::ordered_json;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("config parse error in '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw InvalidInput("config root must be a JSON object");

    static const std::vector<std::string> known = {
        "d_F",    "d_E",        "M",          "K",    "lambda_codebook",
        "lambda_commit", "lr",  "probe_lr",   "epochs", "batch_size",
        "seed",   "features",   "out_dir"};
    for (const auto& [key, _] : doc.items()) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw InvalidInput("unknown config key '" + key + "'");
    }

    RunConfig cfg;
    try {
        if (doc.contains("d_F")) cfg.d_f = doc["d_F"].get<std::size_t>();
        if (doc.contains("d_E")) cfg.d_e = doc["d_E"].get<std::size_t>();
        if (doc.contains("M")) cfg.m = doc["M"].get<std::size_t>();
        if (doc.contains("K")) cfg.k = doc["K"].get<std::size_t>();
        if (doc.contains("lambda_codebook"))
            cfg.lambda_codebook = doc["lambda_codebook"].get<double>();
        if (doc.contains("lambda_commit"))
            cfg.lambda_commit = doc["lambda_commit"].get<double>();
        if (doc.contains("lr")) cfg.lr = doc["lr"].get<double>();
        if (doc.contains("probe_lr")) cfg.probe_lr = doc["probe_lr"].get<double>();
        if (doc.contains("epochs")) cfg.epochs = doc["epochs"].get<std::size_t>();
        if (doc.contains("batch_size")) cfg.batch_size = doc["batch_size"].get<std::size_t>();
        if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("features")) cfg.features_path = doc["features"].get<std::string>();
        if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("config value error: ") + e.what());
    }
    cfg.train_config().validate();
    return cfg;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig tc;
    tc.learning_rate = lr;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.seed = seed;
    tc.weights.lambda_codebook = lambda_codebook;
    tc.weights.lambda_commit = lambda_commit;
    tc.quantizer = {m, k, d_e};
    tc.input_dim = d_f;
    return tc;
}

QuantizedBatch expand_and_quantize(const ExpansionHead& head, const Codebooks& books,
                                   const FeatureBatch& backbone) {
    if (backbone.dim != head.input_dim)
        throw InvalidInput("expand_and_quantize: feature dim " +
                           std::to_string(backbone.dim) + " != head d_F " +
                           std::to_string(head.input_dim));
    QuantizedBatch out;
    out.features.dim = head.expanded_dim;
    out.features.labels = backbone.labels;
    out.results.reserve(backbone.rows());
    for (std::size_t i = 0; i < backbone.rows(); ++i) {
        auto f = backbone.row_double(i);
        auto x = forward(head, f);
        out.results.push_back(quantize(x, books));
        for (double v : out.results.back().quantized)
            out.features.data.push_back(static_cast<float>(v));
    }
    return out;
}

ModelEvaluation evaluate_model(const QuantizedBatch& quantized, std::size_t clusters,
                               bool with_probe, double probe_lr, std::size_t probe_epochs,
                               std::uint64_t seed) {
    if (!quantized.features.has_labels())
        throw InvalidInput("evaluate_model: labels required");

    ModelEvaluation eval;
    eval.clusters = clusters;

    KMeansResult km = kmeans(quantized.features, clusters, 200, seed);
    MatchResult match = match_clusters(km.assignments, quantized.features.labels);
    eval.clustering = metrics(match.matrix);
    eval.clustering.assignment = match.assignment;

    if (with_probe) {
        LinearProbe probe = linear_probe(quantized.features, probe_lr, probe_epochs, seed);
        eval.probe_accuracy = probe.train_accuracy;

        auto pred = probe_predict(probe, quantized.features);
        std::size_t n = std::max<std::size_t>(probe.num_classes, 1);
        ConfusionMatrix cm;
        cm.num_pred = n;
        cm.num_true = n;
        cm.counts.assign(n * n, 0);
        for (std::size_t i = 0; i < pred.size(); ++i)
            ++cm.counts[pred[i] * n + quantized.features.labels[i]];
        eval.probe_miou = metrics(cm).miou;
    }
    return eval;
}

std::string entropy_report_json(const QuantizerConfig& config,
                                const std::vector<double>& per_codebook_bits,
                                double total_bits, std::size_t sample_count,
                                const std::map<std::uint32_t, double>& per_class_bits) {
    CodeBits bits = code_bits(config);
    ordered_json doc;
    doc["total_bits"] = total_bits;
    doc["per_codebook_bits"] = per_codebook_bits;
    ordered_json per_class = ordered_json::object();
    for (const auto& [cls, b] : per_class_bits) per_class[std::to_string(cls)] = b;
    doc["per_class_bits"] = per_class;
    doc["sample_count"] = sample_count;
    doc["code_bits_per_code"] = bits.bits_per_code;
    doc["code_bits_total"] = bits.total_bits;
    doc["max_bits"] = bits.total_bits;  // M * log2(K) upper bound on total_bits
    // Raw-float reference from the compression-rate comparison: a 70-dim
    // float32 vector costs 2240 bits.
    doc["float32_reference"] = {{"dim", 70}, {"bits", float_vector_bits(70)}};
    return doc.dump(2) + "\n";
}

std::string continuous_entropy_report_json(double total_bits, std::size_t dims,
                                           std::size_t sample_count) {
    ordered_json doc;
    doc["total_bits"] = total_bits;
    doc["mode"] = "continuous_histogram";
    doc["dimensions"] = dims;
    doc["sample_count"] = sample_count;
    doc["float32_reference"] = {{"dim", 70}, {"bits", float_vector_bits(70)}};
    return doc.dump(2) + "\n";
}

std::string eval_report_json(const ModelEvaluation& eval) {
    ordered_json doc;
    doc["accuracy"] = eval.clustering.accuracy;
    doc["miou"] = eval.clustering.miou;
    doc["macc"] = eval.clustering.mean_class_accuracy;
    ordered_json per_class = ordered_json::object();
    for (const auto& [cls, acc] : eval.clustering.per_class_accuracy)
        per_class[std::to_string(cls)] = acc;
    doc["per_class_accuracy"] = per_class;
    ordered_json assignment = ordered_json::object();
    for (const auto& [cluster, cls] : eval.clustering.assignment)
        assignment[std::to_string(cluster)] = cls;
    doc["assignment"] = assignment;
    doc["clusters"] = eval.clusters;
    if (eval.probe_accuracy) doc["probe_accuracy"] = *eval.probe_accuracy;
    if (eval.probe_miou) doc["probe_miou"] = *eval.probe_miou;
    return doc.dump(2) + "\n";
}

std::string spearman_summary_json(const std::optional<double>& spearman,
                                  std::size_t num_classes) {
    ordered_json doc;
    if (spearman)
        doc["spearman"] = *spearman;
    else
        doc["spearman"] = nullptr;
    doc["num_classes"] = num_classes;
    return doc.dump(2) + "\n";
}

void save_model(const std::string& dir, const ExpansionHead& head, const Codebooks& books,
                const std::vector<StepLosses>& history) {
    std::filesystem::create_directories(dir);
    write_head(head, dir + "/head.pqeh");
    write_codebooks(books, dir + "/codebooks.pqcb");
    write_loss_history(history, dir + "/loss.csv");
}

LoadedModel load_model(const std::string& dir) {
    LoadedModel model;
    model.head = read_head(dir + "/head.pqeh");
    model.books = read_codebooks(dir + "/codebooks.pqcb");
    return model;
}

}  // namespace equss
