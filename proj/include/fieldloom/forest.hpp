#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fieldloom/features.hpp"
#include "fieldloom/polygonize.hpp"

namespace fieldloom {

struct TreeNode {
    int feature = -1; // -1 for leaves
    double threshold = 0;
    int left = -1;  // feature < threshold
    int right = -1; // feature >= threshold
    double frac_field = 0; // leaf class fraction

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(const std::array<double, kNumFilterFeatures>& x) const;
};

struct ForestModel {
    int n_trees = 250;
    int mtry = 3;
    uint64_t seed = 0;
    std::vector<DecisionTree> trees;
};

struct LabeledPolygonSample {
    std::string polygon_id;
    std::array<double, kNumFilterFeatures> features{};
    bool is_field = false;
    std::string split = "train"; // train | test
};

// Bootstrap-aggregated binary classification trees: mtry features sampled
// without replacement per node, best Gini split, nodes stop at <=5 samples or
// purity. Tree t draws from mt19937-64 seeded with seed + t, so training is
// reproducible and tree-parallel.
ForestModel train_forest(const std::vector<LabeledPolygonSample>& samples, int n_trees = 250,
                         int mtry = 3, uint64_t seed = 0);

double predict_field_probability(const ForestModel& model,
                                 const std::array<double, kNumFilterFeatures>& features);

// Retains polygons with field_prob >= threshold. Inputs keep their scores;
// the unfiltered scored set is what the pipeline persists.
std::vector<FieldPolygon> apply_threshold(const std::vector<FieldPolygon>& polygons,
                                          double threshold);

void save_forest_json(const std::string& path, const ForestModel& model);
ForestModel load_forest_json(const std::string& path);

// CSV: polygon_id, the 8 feature columns, label (field|non-cropland), split.
std::vector<LabeledPolygonSample> load_samples_csv(const std::string& path);

} // namespace fieldloom
