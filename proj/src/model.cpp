#include "obtree/model.hpp"

#include "obtree/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace obtree {

namespace {

using nlohmann::json;

std::string tree_context(std::size_t t) { return "tree " + std::to_string(t) + ": "; }
std::string feature_context(int f) { return "feature " + std::to_string(f) + ": "; }

template <typename T>
T require_field(const json& node, const char* key, const std::string& context) {
    auto it = node.find(key);
    if (it == node.end()) {
        throw ModelError(context + "missing field '" + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ModelError(context + "bad field '" + key + "': " + e.what());
    }
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }
bool same_bits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

template <typename Derived>
bool same_bits(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c)
            if (!same_bits(a(r, c), b(r, c))) return false;
    return true;
}

}  // namespace

std::span<const float> Ensemble::borders_of(int feature) const {
    for (const auto& fb : borders) {
        if (fb.feature_index == feature) return fb.borders;
    }
    return {};
}

BorderSchema::BorderSchema(const Ensemble& ensemble) : per_feature_(ensemble.n_features) {
    for (const auto& fb : ensemble.borders) {
        if (fb.feature_index >= 0 && fb.feature_index < ensemble.n_features)
            per_feature_[fb.feature_index] = fb.borders;
    }
}

BorderSchema::BorderSchema(std::vector<std::vector<float>> per_feature) : per_feature_(std::move(per_feature)) {}

void validate(const Ensemble& e) {
    if (e.n_features < 0) throw ModelError("n_features must be non-negative");
    if (e.n_dims < 1) throw ModelError("n_dims must be >= 1");
    if (e.bias.size() != e.n_dims)
        throw ModelError("bias has " + std::to_string(e.bias.size()) + " entries, expected n_dims = " +
                         std::to_string(e.n_dims));
    if (!std::isfinite(e.scale)) throw ModelError("scale must be finite");

    std::vector<int> border_count(e.n_features, 0);
    std::vector<bool> seen(e.n_features, false);
    for (const auto& fb : e.borders) {
        const int f = fb.feature_index;
        if (f < 0 || f >= e.n_features)
            throw ModelError(feature_context(f) + "feature index out of range [0, " + std::to_string(e.n_features) + ")");
        if (seen[f]) throw ModelError(feature_context(f) + "duplicate border entry");
        seen[f] = true;
        if (fb.borders.size() > static_cast<std::size_t>(kMaxBorders))
            throw ModelError(feature_context(f) + "more than 255 borders");
        for (std::size_t i = 0; i < fb.borders.size(); ++i) {
            if (std::isnan(fb.borders[i])) throw ModelError(feature_context(f) + "NaN border");
            if (i > 0 && !(fb.borders[i - 1] < fb.borders[i]))
                throw ModelError(feature_context(f) + "borders not strictly ascending at position " + std::to_string(i));
        }
        border_count[f] = static_cast<int>(fb.borders.size());
    }

    for (std::size_t t = 0; t < e.trees.size(); ++t) {
        const auto& tree = e.trees[t];
        const int depth = tree.depth();
        if (depth < 1 || depth > kMaxDepth)
            throw ModelError(tree_context(t) + "depth " + std::to_string(depth) + " outside [1, 16]");
        if (static_cast<std::size_t>(tree.leaf_values.rows()) != tree.leaf_count())
            throw ModelError(tree_context(t) + "leaf count mismatch: " + std::to_string(tree.leaf_values.rows()) +
                             " rows for depth " + std::to_string(depth) + " (expected " +
                             std::to_string(tree.leaf_count()) + ")");
        if (tree.leaf_values.cols() != e.n_dims)
            throw ModelError(tree_context(t) + "leaf width " + std::to_string(tree.leaf_values.cols()) +
                             " != n_dims " + std::to_string(e.n_dims));
        for (int level = 0; level < depth; ++level) {
            const auto& split = tree.level_splits[level];
            if (split.feature_index < 0 || split.feature_index >= e.n_features)
                throw ModelError(tree_context(t) + "level " + std::to_string(level) + " references " +
                                 feature_context(split.feature_index) + "out of range");
            if (split.border_bin > border_count[split.feature_index])
                throw ModelError(tree_context(t) + "level " + std::to_string(level) + " border_bin " +
                                 std::to_string(split.border_bin) + " exceeds border count " +
                                 std::to_string(border_count[split.feature_index]));
        }
    }
}

bool structurally_equal(const Ensemble& a, const Ensemble& b) {
    if (a.n_features != b.n_features || a.n_dims != b.n_dims) return false;
    if (!same_bits(a.scale, b.scale) || !same_bits(a.bias, b.bias)) return false;
    if (a.borders.size() != b.borders.size() || a.trees.size() != b.trees.size()) return false;
    for (std::size_t i = 0; i < a.borders.size(); ++i) {
        const auto& x = a.borders[i];
        const auto& y = b.borders[i];
        if (x.feature_index != y.feature_index || x.borders.size() != y.borders.size()) return false;
        for (std::size_t j = 0; j < x.borders.size(); ++j)
            if (!same_bits(x.borders[j], y.borders[j])) return false;
    }
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        const auto& x = a.trees[t];
        const auto& y = b.trees[t];
        if (x.level_splits.size() != y.level_splits.size()) return false;
        for (std::size_t l = 0; l < x.level_splits.size(); ++l) {
            if (x.level_splits[l].feature_index != y.level_splits[l].feature_index ||
                x.level_splits[l].border_bin != y.level_splits[l].border_bin)
                return false;
        }
        if (!same_bits(x.leaf_values, y.leaf_values)) return false;
    }
    return true;
}

Ensemble model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string("model parse failure: ") + e.what());
    }
    if (!doc.is_object()) throw ModelError("model parse failure: top level is not an object");

    Ensemble e;
    e.n_features = require_field<int>(doc, "n_features", "");
    e.n_dims = require_field<int>(doc, "n_dims", "");
    e.scale = doc.value("scale", 1.0);
    if (doc.contains("bias")) {
        const auto bias = require_field<std::vector<double>>(doc, "bias", "");
        e.bias = Eigen::Map<const Vector<double>>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    } else {
        e.bias = Vector<double>::Zero(std::max(e.n_dims, 0));
    }

    for (const auto& node : require_field<json>(doc, "borders", "")) {
        FloatFeatureBorders fb;
        fb.feature_index = require_field<int>(node, "feature", "borders: ");
        const auto ctx = feature_context(fb.feature_index);
        for (double v : require_field<std::vector<double>>(node, "values", ctx)) fb.borders.push_back(static_cast<float>(v));
        e.borders.push_back(std::move(fb));
    }

    const auto trees = require_field<json>(doc, "trees", "");
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const auto& node = trees[t];
        const auto ctx = tree_context(t);
        ObliviousTree tree;
        const int depth = require_field<int>(node, "depth", ctx);
        if (depth < 1 || depth > kMaxDepth)
            throw ModelError(ctx + "depth " + std::to_string(depth) + " outside [1, 16]");
        const auto splits = require_field<json>(node, "splits", ctx);
        if (splits.size() != static_cast<std::size_t>(depth))
            throw ModelError(ctx + "split count " + std::to_string(splits.size()) + " != depth " + std::to_string(depth));
        for (const auto& s : splits) {
            const int bin = require_field<int>(s, "border_bin", ctx);
            if (bin < 0 || bin > kMaxBorders) throw ModelError(ctx + "border_bin out of [0, 255]");
            tree.level_splits.push_back({require_field<int>(s, "feature", ctx), static_cast<std::uint8_t>(bin)});
        }
        const auto leaves = require_field<std::vector<double>>(node, "leaf_values", ctx);
        if (e.n_dims < 1 || leaves.size() % static_cast<std::size_t>(e.n_dims) != 0)
            throw ModelError(ctx + "leaf_values length " + std::to_string(leaves.size()) + " not a multiple of n_dims");
        const auto rows = static_cast<Eigen::Index>(leaves.size() / e.n_dims);
        if (static_cast<std::size_t>(rows) != tree.leaf_count())
            throw ModelError(ctx + "leaf count mismatch: " + std::to_string(rows) + " rows for depth " +
                             std::to_string(depth) + " (expected " + std::to_string(tree.leaf_count()) + ")");
        tree.leaf_values = Eigen::Map<const ScoreMatrix>(leaves.data(), rows, e.n_dims);
        e.trees.push_back(std::move(tree));
    }

    validate(e);
    return e;
}

std::string model_to_json(const Ensemble& e) {
    json doc;
    doc["n_features"] = e.n_features;
    doc["n_dims"] = e.n_dims;
    doc["scale"] = e.scale;
    doc["bias"] = std::vector<double>(e.bias.data(), e.bias.data() + e.bias.size());
    doc["borders"] = json::array();
    for (const auto& fb : e.borders) {
        // float -> double is exact, and the writer emits shortest round-trip digits.
        std::vector<double> values(fb.borders.begin(), fb.borders.end());
        doc["borders"].push_back({{"feature", fb.feature_index}, {"values", values}});
    }
    doc["trees"] = json::array();
    for (const auto& tree : e.trees) {
        json splits = json::array();
        for (const auto& s : tree.level_splits) splits.push_back({{"feature", s.feature_index}, {"border_bin", s.border_bin}});
        std::vector<double> leaves(tree.leaf_values.data(), tree.leaf_values.data() + tree.leaf_values.size());
        doc["trees"].push_back({{"depth", tree.depth()}, {"splits", std::move(splits)}, {"leaf_values", std::move(leaves)}});
    }
    return doc.dump();
}

Ensemble load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open model file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

void save_model(const Ensemble& ensemble, const std::filesystem::path& path) {
    validate(ensemble);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    out << model_to_json(ensemble) << '\n';
    out.flush();
    if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

Ensemble gen_synthetic_model(const SyntheticModelParams& p) {
    if (p.n_features < 1) throw std::invalid_argument("n_features must be >= 1");
    if (p.n_trees < 0) throw std::invalid_argument("n_trees must be >= 0");
    if (p.depth < 1 || p.depth > kMaxDepth) throw std::invalid_argument("depth must be in [1, 16]");
    if (p.n_dims < 1) throw std::invalid_argument("n_dims must be >= 1");
    if (p.borders_per_feature < 1 || p.borders_per_feature > kMaxBorders)
        throw std::invalid_argument("borders_per_feature must be in [1, 255]");

    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<float> border_dist(-2.5f, 2.5f);
    std::uniform_real_distribution<double> leaf_dist(-1.0, 1.0);
    std::uniform_int_distribution<int> feature_dist(0, p.n_features - 1);
    std::uniform_int_distribution<int> bin_dist(1, p.borders_per_feature);

    Ensemble e;
    e.n_features = p.n_features;
    e.n_dims = p.n_dims;
    e.bias = Vector<double>::Zero(p.n_dims);
    e.borders.reserve(p.n_features);
    for (int f = 0; f < p.n_features; ++f) {
        std::vector<float> values;
        while (static_cast<int>(values.size()) < p.borders_per_feature) {
            values.push_back(border_dist(rng));
            std::sort(values.begin(), values.end());
            values.erase(std::unique(values.begin(), values.end()), values.end());
        }
        e.borders.push_back({f, std::move(values)});
    }

    e.trees.reserve(p.n_trees);
    for (int t = 0; t < p.n_trees; ++t) {
        ObliviousTree tree;
        for (int level = 0; level < p.depth; ++level)
            tree.level_splits.push_back({feature_dist(rng), static_cast<std::uint8_t>(bin_dist(rng))});
        tree.leaf_values.resize(static_cast<Eigen::Index>(tree.leaf_count()), p.n_dims);
        for (Eigen::Index i = 0; i < tree.leaf_values.size(); ++i) tree.leaf_values.data()[i] = leaf_dist(rng);
        e.trees.push_back(std::move(tree));
    }
    validate(e);
    return e;
}

}  // namespace obtree
