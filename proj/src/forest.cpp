#include "fieldloom/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "fieldloom/csv.hpp"

namespace fieldloom {

using nlohmann::json;

double DecisionTree::predict(const std::array<double, kNumFilterFeatures>& x) const {
    int i = 0;
    while (!nodes[i].is_leaf())
        i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].frac_field;
}

namespace {

constexpr int kMinNodeSamples = 5;

double gini(int64_t n_field, int64_t n_total) {
    if (n_total == 0) return 0.0;
    double p = static_cast<double>(n_field) / n_total;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0;
    double impurity = 1e300; // weighted child Gini
};

int grow_node(DecisionTree& tree, const std::vector<LabeledPolygonSample>& samples,
              std::vector<int>& idx, int begin, int end, int mtry, std::mt19937_64& rng) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    const int n = end - begin;
    int64_t n_field = 0;
    for (int k = begin; k < end; ++k) n_field += samples[idx[k]].is_field ? 1 : 0;

    auto make_leaf = [&]() {
        tree.nodes[node_id].frac_field = n > 0 ? static_cast<double>(n_field) / n : 0.0;
        return node_id;
    };
    if (n <= kMinNodeSamples || n_field == 0 || n_field == n) return make_leaf();

    // mtry features without replacement (partial Fisher-Yates)
    std::array<int, kNumFilterFeatures> order;
    for (int f = 0; f < kNumFilterFeatures; ++f) order[f] = f;
    for (int k = 0; k < mtry; ++k) {
        std::uniform_int_distribution<int> pick(k, kNumFilterFeatures - 1);
        std::swap(order[k], order[pick(rng)]);
    }

    SplitChoice best;
    std::vector<std::pair<double, bool>> vals(n);
    for (int k = 0; k < mtry; ++k) {
        const int f = order[k];
        for (int i = 0; i < n; ++i) {
            const auto& s = samples[idx[begin + i]];
            vals[i] = {s.features[f], s.is_field};
        }
        std::sort(vals.begin(), vals.end());
        int64_t left_field = 0;
        for (int i = 1; i < n; ++i) {
            left_field += vals[i - 1].second ? 1 : 0;
            if (vals[i].first == vals[i - 1].first) continue;
            double impurity = (i * gini(left_field, i) + (n - i) * gini(n_field - left_field, n - i)) / n;
            if (impurity < best.impurity) {
                best.impurity = impurity;
                best.feature = f;
                best.threshold = 0.5 * (vals[i - 1].first + vals[i].first);
            }
        }
    }
    if (best.feature < 0) return make_leaf(); // all candidate features constant

    int mid = static_cast<int>(
        std::partition(idx.begin() + begin, idx.begin() + end,
                       [&](int i) { return samples[i].features[best.feature] < best.threshold; }) -
        idx.begin());
    if (mid == begin || mid == end) return make_leaf();

    // Keep partition halves in a deterministic order: std::partition is not
    // stable, so re-sort each half by original index.
    std::sort(idx.begin() + begin, idx.begin() + mid);
    std::sort(idx.begin() + mid, idx.begin() + end);

    tree.nodes[node_id].feature = best.feature;
    tree.nodes[node_id].threshold = best.threshold;
    int left = grow_node(tree, samples, idx, begin, mid, mtry, rng);
    int right = grow_node(tree, samples, idx, mid, end, mtry, rng);
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
}

} // namespace

ForestModel train_forest(const std::vector<LabeledPolygonSample>& samples, int n_trees, int mtry,
                         uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("train_forest: empty training set");
    if (samples.size() < 2) throw std::invalid_argument("train_forest: need at least 2 samples");
    if (mtry < 1 || mtry > kNumFilterFeatures)
        throw std::invalid_argument("train_forest: mtry out of range");

    ForestModel model;
    model.n_trees = n_trees;
    model.mtry = mtry;
    model.seed = seed;
    model.trees.resize(n_trees);

    const int n = static_cast<int>(samples.size());
    for (int t = 0; t < n_trees; ++t) {
        std::mt19937_64 rng(seed + static_cast<uint64_t>(t));
        std::uniform_int_distribution<int> draw(0, n - 1);
        std::vector<int> boot(n);
        for (int i = 0; i < n; ++i) boot[i] = draw(rng);
        std::sort(boot.begin(), boot.end());
        grow_node(model.trees[t], samples, boot, 0, n, mtry, rng);
    }
    return model;
}

double predict_field_probability(const ForestModel& model,
                                 const std::array<double, kNumFilterFeatures>& features) {
    if (model.trees.empty()) throw std::invalid_argument("predict: model has no trees");
    for (double v : features)
        if (!std::isfinite(v)) throw std::invalid_argument("predict: non-finite feature value");
    double sum = 0;
    for (const auto& tree : model.trees) sum += tree.predict(features);
    return sum / static_cast<double>(model.trees.size());
}

std::vector<FieldPolygon> apply_threshold(const std::vector<FieldPolygon>& polygons,
                                          double threshold) {
    std::vector<FieldPolygon> out;
    for (const auto& p : polygons) {
        if (p.field_prob < 0)
            throw std::invalid_argument("apply_threshold: polygon " + p.uid + " has no field_prob");
        if (p.field_prob >= threshold) out.push_back(p);
    }
    return out;
}

void save_forest_json(const std::string& path, const ForestModel& model) {
    json trees = json::array();
    for (const auto& tree : model.trees) {
        json nodes = json::array();
        for (const auto& nd : tree.nodes)
            nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.frac_field});
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    json j{{"n_trees", model.n_trees},
           {"mtry", model.mtry},
           {"seed", model.seed},
           {"features", FeatureVector::names()},
           {"trees", std::move(trees)}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model " + path);
    out << j.dump() << "\n";
}

ForestModel load_forest_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model " + path);
    json j;
    in >> j;
    ForestModel model;
    model.n_trees = j.at("n_trees").get<int>();
    model.mtry = j.at("mtry").get<int>();
    model.seed = j.at("seed").get<uint64_t>();
    for (const auto& t : j.at("trees")) {
        DecisionTree tree;
        for (const auto& nd : t.at("nodes")) {
            TreeNode node;
            node.feature = nd[0].get<int>();
            node.threshold = nd[1].get<double>();
            node.left = nd[2].get<int>();
            node.right = nd[3].get<int>();
            node.frac_field = nd[4].get<double>();
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::vector<LabeledPolygonSample> load_samples_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_id = t.col_required("polygon_id");
    int c_label = t.col_required("label");
    int c_split = t.col("split");
    std::array<int, kNumFilterFeatures> c_feat;
    for (int f = 0; f < kNumFilterFeatures; ++f)
        c_feat[f] = t.col_required(FeatureVector::names()[f]);

    std::vector<LabeledPolygonSample> out;
    for (const auto& row : t.rows) {
        LabeledPolygonSample s;
        s.polygon_id = row[c_id];
        for (int f = 0; f < kNumFilterFeatures; ++f) s.features[f] = std::stod(row[c_feat[f]]);
        const std::string& label = row[c_label];
        s.is_field = (label == "field" || label == "1");
        s.split = c_split >= 0 ? row[c_split] : "train";
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace fieldloom
