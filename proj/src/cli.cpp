#include "obtree/cli.hpp"

#include "obtree/dataset.hpp"
#include "obtree/errors.hpp"
#include "obtree/knn.hpp"
#include "obtree/model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace obtree::cli {

namespace {

using profiling::Profiler;
using profiling::ReportFormat;

profiling::ReportFormat parse_report_format(const std::string& text) {
    if (text == "table") return ReportFormat::Table;
    if (text == "tsv") return ReportFormat::Tsv;
    throw std::invalid_argument("unknown report format '" + text + "' (expected table or tsv)");
}

// Writes to --out when given, otherwise to the fallback stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (path.empty()) {
            stream_ = &fallback;
            return;
        }
        file_.open(path, std::ios::trunc);
        if (!file_) throw DataError("cannot open " + path + " for writing");
        stream_ = &file_;
    }
    std::ostream& operator*() { return *stream_; }
    void finish() {
        stream_->flush();
        if (!*stream_) throw DataError("write failed");
    }

private:
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

double elapsed_s(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

void write_predictions(const PredictionMatrix& p, std::ostream& out) {
    std::string line;
    for (Eigen::Index c = 0; c < p.n_dims(); ++c) line += (c ? ",raw_" : "raw_") + std::to_string(c);
    if (p.probability) line += ",probability";
    if (p.label) line += ",label";
    out << line << '\n';
    for (Eigen::Index s = 0; s < p.n_samples(); ++s) {
        line.clear();
        for (Eigen::Index c = 0; c < p.n_dims(); ++c) line += (c ? "," : "") + format_number(p.raw(s, c));
        if (p.probability) line += "," + format_number((*p.probability)(s));
        if (p.label) line += "," + std::to_string((*p.label)(s));
        out << line << '\n';
    }
}

bool bitwise_equal(const ScoreMatrix& a, const ScoreMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i])) return false;
    return true;
}

// Label the model itself would assign under `transform`, via the traversal
// path rather than the blocked kernels.
double reference_label(const Ensemble& model, std::span<const float> sample, OutputTransform transform) {
    const Vector<double> raw = predict_oracle(model, sample);
    switch (transform) {
        case OutputTransform::SoftmaxArgmax: return argmax({raw.data(), static_cast<std::size_t>(raw.size())});
        case OutputTransform::Sigmoid: return 1.0 / (1.0 + std::exp(-raw(0))) >= 0.5 ? 1.0 : 0.0;
        case OutputTransform::RawValue: break;
    }
    return raw(0);
}

struct GenModelArgs {
    SyntheticModelParams params;
    std::string out;
};

int cmd_gen_model(const GenModelArgs& args, std::ostream& err) {
    const Ensemble model = gen_synthetic_model(args.params);
    save_model(model, args.out);
    err << "wrote " << args.out << ": " << model.trees.size() << " trees, depth " << args.params.depth << ", "
        << model.n_features << " features, " << model.n_dims << " dims\n";
    return kOk;
}

struct GenDataArgs {
    std::string model;
    std::string out;
    int rows = 1000;
    int features = 90;
    std::uint64_t seed = 1;
    bool labels = false;
    std::string transform;  // empty: pick from the model's n_dims
};

int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err) {
    if (args.rows < 0) throw std::invalid_argument("--rows must be >= 0");
    if (args.labels && args.model.empty()) throw std::invalid_argument("--labels needs --model");

    std::optional<Ensemble> model;
    if (!args.model.empty()) model = load_model(args.model);
    const int n_features = model ? model->n_features : args.features;
    if (n_features < 1) throw std::invalid_argument("--features must be >= 1");

    Dataset data;
    for (int f = 0; f < n_features; ++f) data.feature_names.push_back("f" + std::to_string(f));
    data.values.resize(args.rows, n_features);
    std::mt19937_64 rng(args.seed);
    std::normal_distribution<float> value_dist(0.0f, 1.25f);
    for (Eigen::Index i = 0; i < data.values.size(); ++i) data.values.data()[i] = value_dist(rng);

    if (args.labels) {
        OutputTransform transform = model->n_dims > 1 ? OutputTransform::SoftmaxArgmax : OutputTransform::RawValue;
        if (!args.transform.empty()) transform = parse_transform(args.transform);
        Vector<double> labels(args.rows);
        for (Eigen::Index r = 0; r < args.rows; ++r)
            labels(r) = reference_label(*model, {data.values.row(r).data(), static_cast<std::size_t>(n_features)},
                                        transform);
        data.labels = std::move(labels);
    }

    Sink sink(args.out, out);
    write_csv(data, *sink);
    sink.finish();
    err << "generated " << args.rows << " x " << n_features << (args.labels ? " with labels" : "") << '\n';
    return kOk;
}

struct Quality {
    std::string metric;
    double value = 0.0;
};

std::optional<Quality> score(const PredictionMatrix& p, const std::optional<Vector<double>>& labels) {
    if (!labels || p.n_samples() == 0) return std::nullopt;
    const auto n = static_cast<double>(p.n_samples());
    if (p.label) {
        double hits = 0;
        for (Eigen::Index s = 0; s < p.n_samples(); ++s) hits += (*p.label)(s) == static_cast<int>((*labels)(s));
        return Quality{"accuracy", hits / n};
    }
    if (p.probability) {
        double hits = 0;
        for (Eigen::Index s = 0; s < p.n_samples(); ++s)
            hits += ((*p.probability)(s) >= 0.5 ? 1.0 : 0.0) == (*labels)(s);
        return Quality{"accuracy", hits / n};
    }
    if (p.n_dims() > 1) {
        double hits = 0;
        for (Eigen::Index s = 0; s < p.n_samples(); ++s)
            hits += argmax({p.raw.row(s).data(), static_cast<std::size_t>(p.n_dims())}) ==
                    static_cast<int>((*labels)(s));
        return Quality{"accuracy", hits / n};
    }
    return Quality{"mae", (p.raw.col(0) - *labels).cwiseAbs().mean()};
}

PredictOptions predict_options(const RunConfig& config, Backend backend, int workers, bool profile) {
    PredictOptions options;
    options.backend = backend;
    options.workers = workers;
    options.block_size = config.block_size;
    options.transform = config.transform;
    options.profile = profile;
    return options;
}

int cmd_predict(const RunConfig& config, std::ostream& out, std::ostream& err) {
    config.validate();
    const Ensemble model = load_model(config.model_path);
    const Dataset data = ingest_csv(config.data_path, model.n_features);
    err << config.header("predict") << '\n';
    err << "# data: " << data.n_rows() << " rows x " << data.n_features() << " features, " << data.bytes()
        << " bytes\n";

    // The first run carries the profiler; the mean wall time covers all runs.
    Profiler profiler(config.profile);
    PredictionMatrix result;
    double total_s = 0.0;
    for (int rep = 0; rep < config.repeat; ++rep) {
        const bool profiled = config.profile && rep == 0;
        profiling::Binding bind(profiled ? &profiler : nullptr);
        if (profiled) profiler.start_session();
        const auto t0 = std::chrono::steady_clock::now();
        result = predict_batch(model, data.values, predict_options(config, config.backend, config.workers, profiled));
        total_s += elapsed_s(t0);
        if (profiled) profiler.stop_session();
    }

    Sink sink(config.out_path, out);
    write_predictions(result, *sink);
    sink.finish();

    err << "time_s: " << total_s / config.repeat << " (mean of " << config.repeat << ")\n";
    if (const auto q = score(result, data.labels)) err << q->metric << ": " << q->value << '\n';
    if (config.profile) {
        const auto report = profiler.report();
        if (report.merged) err << "# profile merged from " << config.workers << " workers\n";
        err << render(report, config.report);
    }
    return kOk;
}

int cmd_bench(const RunConfig& config, std::ostream& out) {
    config.validate();
    const Backend optimized = config.backend.is_scalar() ? Backend::vectorized(8) : config.backend;
    const Backend baseline = Backend::scalar();
    const Ensemble model = load_model(config.model_path);
    const Dataset data = ingest_csv(config.data_path, model.n_features);

    auto profiled_run = [&](Backend backend, PredictionMatrix& result) {
        Profiler profiler;
        profiling::Binding bind(&profiler);
        profiler.start_session();
        result = predict_batch(model, data.values, predict_options(config, backend, 1, true));
        profiler.stop_session();
        return profiler.report();
    };

    PredictionMatrix base_out;
    PredictionMatrix opt_out;
    const auto base_report = profiled_run(baseline, base_out);
    const auto opt_report = profiled_run(optimized, opt_out);
    if (!bitwise_equal(base_out.raw, opt_out.raw))
        throw BackendMismatch("backend outputs differ: " + baseline.to_string() + " vs " + optimized.to_string());

    // Unprofiled end-to-end wall time, averaged over --repeat runs.
    auto mean_wall = [&](Backend backend) {
        double total = 0.0;
        profiling::Binding bind(nullptr);
        for (int rep = 0; rep < config.repeat; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            PredictionMatrix p = predict_batch(model, data.values, predict_options(config, backend, config.workers, false));
            total += elapsed_s(t0);
            if (!bitwise_equal(p.raw, base_out.raw))
                throw BackendMismatch("backend output changed between runs for " + backend.to_string());
        }
        return total / config.repeat;
    };
    const double base_wall = mean_wall(baseline);
    const double opt_wall = mean_wall(optimized);

    Sink sink(config.out_path, out);
    *sink << config.header("bench") << " baseline=" << baseline.to_string() << " optimized=" << optimized.to_string()
          << '\n';
    *sink << "# data: " << data.n_rows() << " rows x " << data.n_features() << " features, " << model.trees.size()
          << " trees\n";
    *sink << render_comparison(base_report, opt_report, config.report);
    *sink << "# end-to-end mean of " << config.repeat << " runs with " << config.workers
          << " workers: baseline_s=" << base_wall << " optimized_s=" << opt_wall
          << " speedup=" << (opt_wall > 0 ? base_wall / opt_wall : 0.0) << '\n';
    sink.finish();
    return kOk;
}

struct KnnArgs {
    std::string corpus;
    int k = 5;
    int classes = 0;  // 0: infer from labels
};

EmbeddingCorpus load_corpus(const std::string& path, int classes) {
    const Dataset data = ingest_csv(path);
    if (!data.labels) throw DataError(path + ": corpus needs a label column");
    EmbeddingCorpus corpus;
    corpus.vectors = data.values;
    int max_label = -1;
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        const double l = (*data.labels)(i);
        if (l != std::floor(l) || l < 0) throw DataError(path + ": row " + std::to_string(i + 2) + " has a non-class label");
        corpus.labels.push_back(static_cast<int>(l));
        max_label = std::max(max_label, static_cast<int>(l));
    }
    corpus.n_classes = classes > 0 ? classes : max_label + 1;
    try {
        validate(corpus);
    } catch (const std::invalid_argument& e) {
        throw DataError(path + ": " + e.what());
    }
    return corpus;
}

int cmd_knn_features(const RunConfig& config, const KnnArgs& knn, std::ostream& out, std::ostream& err) {
    config.validate();
    if (knn.corpus.empty()) throw std::invalid_argument("--corpus is required");
    const EmbeddingCorpus corpus = load_corpus(knn.corpus, knn.classes);
    const Dataset queries = ingest_csv(config.data_path, corpus.dim());
    if (knn.k < 1 || knn.k > corpus.n_items())
        throw std::invalid_argument("--k must be in [1, " + std::to_string(corpus.n_items()) + "]");
    err << config.header("knn-features") << " corpus=" << knn.corpus << " k=" << knn.k
        << " classes=" << corpus.n_classes << '\n';

    Profiler profiler(config.profile);
    profiling::Binding bind(config.profile ? &profiler : nullptr);
    profiler.start_session();
    Dataset features;
    for (int c = 0; c < corpus.n_classes; ++c) features.feature_names.push_back("class_" + std::to_string(c));
    features.feature_names.push_back("mean_sqr_distance");
    features.values.resize(queries.n_rows(), corpus.n_classes + 1);
    {
        OBTREE_PROFILE_SCOPE("BinarizeFeatures");
        for (Eigen::Index q = 0; q < queries.n_rows(); ++q) {
            const auto f = embed_features({queries.values.row(q).data(), static_cast<std::size_t>(queries.n_features())},
                                          corpus, knn.k, corpus.n_classes, config.backend);
            features.values.row(q) = f.cast<float>().transpose();
        }
    }
    profiler.stop_session();
    features.labels = queries.labels;

    Sink sink(config.out_path, out);
    write_csv(features, *sink);
    sink.finish();
    if (config.profile) err << render(profiler.report(), config.report);
    return kOk;
}

void add_run_options(CLI::App* cmd, RunConfig& config, std::string& backend, std::string& transform,
                     std::string& report, bool needs_model) {
    if (needs_model) cmd->add_option("--model", config.model_path, "Model file (JSON)")->required();
    cmd->add_option("--data", config.data_path, "Sample CSV with header row")->required();
    cmd->add_option("--backend", backend, "scalar | vec:4 | vec:8 | vec:16 | vec:32");
    cmd->add_option("--workers", config.workers, "Worker threads");
    cmd->add_option("--block-size", config.block_size, "Samples per block");
    cmd->add_option("--transform", transform, "raw | sigmoid | softmax-argmax");
    cmd->add_flag("--profile", config.profile, "Record and print a scope profile");
    cmd->add_option("--repeat", config.repeat, "Timed repetitions");
    cmd->add_option("--seed", config.seed, "Seed recorded in the run header");
    cmd->add_option("--out", config.out_path, "Output path (default stdout)");
    cmd->add_option("--report", report, "table | tsv");
}

}  // namespace

void RunConfig::validate() const {
    if (data_path.empty()) throw std::invalid_argument("--data is required");
    if (workers < 1) throw std::invalid_argument("--workers must be >= 1");
    if (block_size < 1) throw std::invalid_argument("--block-size must be >= 1");
    if (repeat < 1) throw std::invalid_argument("--repeat must be >= 1");
}

std::string RunConfig::header(const std::string& command) const {
    std::ostringstream h;
    h << "# obtree " << command << " model=" << model_path << " data=" << data_path << " backend="
      << backend.to_string() << " workers=" << workers << " block_size=" << block_size
      << " transform=" << to_string(transform) << " profile=" << (profile ? "on" : "off") << " repeat=" << repeat
      << " seed=" << seed << " out=" << (out_path.empty() ? "-" : out_path)
      << " report=" << (report == ReportFormat::Table ? "table" : "tsv");
    return h.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Batch inference for oblivious decision tree ensembles", "obtree"};
    app.require_subcommand(1);

    GenModelArgs gen_model;
    auto* gen_model_cmd = app.add_subcommand("gen-model", "Write a seeded synthetic model");
    gen_model_cmd->add_option("--seed", gen_model.params.seed);
    gen_model_cmd->add_option("--features", gen_model.params.n_features);
    gen_model_cmd->add_option("--trees", gen_model.params.n_trees);
    gen_model_cmd->add_option("--depth", gen_model.params.depth);
    gen_model_cmd->add_option("--dims", gen_model.params.n_dims);
    gen_model_cmd->add_option("--borders", gen_model.params.borders_per_feature, "Borders per feature");
    gen_model_cmd->add_option("--out", gen_model.out)->required();

    GenDataArgs gen_data;
    auto* gen_data_cmd = app.add_subcommand("gen-data", "Write seeded synthetic samples as CSV");
    gen_data_cmd->add_option("--model", gen_data.model, "Take the feature count (and labels) from this model");
    gen_data_cmd->add_option("--rows", gen_data.rows);
    gen_data_cmd->add_option("--features", gen_data.features, "Feature count without --model");
    gen_data_cmd->add_option("--seed", gen_data.seed);
    gen_data_cmd->add_flag("--labels", gen_data.labels, "Add the model's own prediction as a label column");
    gen_data_cmd->add_option("--transform", gen_data.transform, "Label transform (default by n_dims)");
    gen_data_cmd->add_option("--out", gen_data.out, "Output path (default stdout)");

    RunConfig predict_config;
    std::string predict_backend = "scalar", predict_transform = "raw", predict_report = "table";
    auto* predict_cmd = app.add_subcommand("predict", "Predict a CSV with a model");
    add_run_options(predict_cmd, predict_config, predict_backend, predict_transform, predict_report, true);

    RunConfig bench_config;
    std::string bench_backend = "vec:8", bench_transform = "raw", bench_report = "table";
    auto* bench_cmd = app.add_subcommand("bench", "Profile scalar vs vectorized prediction");
    add_run_options(bench_cmd, bench_config, bench_backend, bench_transform, bench_report, true);

    RunConfig knn_config;
    KnnArgs knn;
    std::string knn_backend = "scalar", knn_transform = "raw", knn_report = "table";
    auto* knn_cmd = app.add_subcommand("knn-features", "Nearest-neighbour class features for query embeddings");
    add_run_options(knn_cmd, knn_config, knn_backend, knn_transform, knn_report, false);
    knn_cmd->add_option("--corpus", knn.corpus, "Corpus CSV: label plus embedding columns")->required();
    knn_cmd->add_option("--k", knn.k, "Neighbours per query");
    knn_cmd->add_option("--classes", knn.classes, "Class count (default: max label + 1)");

    std::vector<std::string> argv_storage{"obtree"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    auto finish_config = [](RunConfig& c, const std::string& backend, const std::string& transform,
                            const std::string& report) {
        c.backend = Backend::parse(backend);
        c.transform = parse_transform(transform);
        c.report = parse_report_format(report);
    };

    try {
        if (*gen_model_cmd) return cmd_gen_model(gen_model, err);
        if (*gen_data_cmd) return cmd_gen_data(gen_data, out, err);
        if (*predict_cmd) {
            finish_config(predict_config, predict_backend, predict_transform, predict_report);
            return cmd_predict(predict_config, out, err);
        }
        if (*bench_cmd) {
            finish_config(bench_config, bench_backend, bench_transform, bench_report);
            return cmd_bench(bench_config, out);
        }
        if (*knn_cmd) {
            finish_config(knn_config, knn_backend, knn_transform, knn_report);
            return cmd_knn_features(knn_config, knn, out, err);
        }
    } catch (const BackendMismatch& e) {
        err << "error: " << e.what() << '\n';
        return kBackendMismatch;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace obtree::cli
