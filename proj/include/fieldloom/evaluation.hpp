#pragma once

#include <array>
#include <string>
#include <vector>

#include "fieldloom/geometry.hpp"

namespace fieldloom {

// Binary map: class 0 = non-crop, class 1 = crop.
enum : int { kNonCrop = 0, kCrop = 1 };

struct SamplePoint {
    std::string point_id;
    double lon = 0, lat = 0;
    int map_class = 0;
    int reference_class = 0;
};

struct StratifiedSample {
    std::vector<SamplePoint> points;
    std::array<double, 2> weights{}; // W_i = map-class area proportions, sum 1
};

using ConfusionCounts = std::array<std::array<long long, 2>, 2>; // n_ij, map i x ref j
using ProbMatrix = std::array<std::array<double, 2>, 2>;         // p_ij = W_i n_ij / n_i

struct ValueWithSe {
    double value = 0;
    double se = 0;
};

struct AccuracyReport {
    ProbMatrix p{};
    std::array<ValueWithSe, 2> user_accuracy;
    std::array<ValueWithSe, 2> producer_accuracy;
    ValueWithSe overall;
    std::array<ValueWithSe, 2> area_proportion; // error-adjusted area estimates
};

ConfusionCounts count_confusion(const StratifiedSample& sample);

// p_ij = W_i * n_ij / n_i; throws if a stratum has zero samples.
ProbMatrix confusion_from_sample(const StratifiedSample& sample);

// Stratified estimators: UA_i = p_ii/row_i, PA_j = p_jj/col_j, OA = trace,
// A_j = column sums; standard errors via the stratified variance estimators
// (UA variance UA(1-UA)/(n_i-1) propagated with weights; area variance
// sum_i W_i^2 a_ij (1-a_ij)/(n_i-1) with a_ij = p_ij/W_i).
AccuracyReport accuracy_estimates(const ProbMatrix& p, const std::array<double, 2>& weights,
                                  const std::array<long long, 2>& stratum_counts);

struct MatchedFieldPair {
    size_t reference_index = 0;
    int predicted_index = -1; // -1 = no prediction overlapped
    double iou = 0;
    double ref_size_ha = 0;
    double pred_size_ha = 0;
};

// Each reference field is matched to the prediction maximizing IoU.
std::vector<MatchedFieldPair> match_fields(const std::vector<PolyGeom>& reference,
                                           const std::vector<PolyGeom>& predictions,
                                           double area_ha_per_unit2);

struct ObjectMetrics {
    double mean_iou = 0;
    double median_iou = 0;
    double frac_iou_above_50 = 0;
    double frac_iou_above_80 = 0;
    double mean_dice = 0;
    double precision = 0;
    double recall = 0;
    long long true_positives = 0;
    long long false_positives = 0;
    long long false_negatives = 0;
};

// A match counts as true positive iff IoU > 0.5.
ObjectMetrics object_metrics(const std::vector<MatchedFieldPair>& pairs, size_t n_predictions);

struct SizeRegressionStats {
    double rmse = 0;
    double mae = 0;
    double me = 0; // mean(pred - obs); positive = overestimation
    double r2 = 0; // squared Pearson correlation
};

SizeRegressionStats size_regression_stats(const std::vector<MatchedFieldPair>& pairs);

// CSV: point_id, lon, lat, map_class, reference_class (crop|non-crop or 1|0).
StratifiedSample load_sample_csv(const std::string& path, const std::array<double, 2>& weights);

void write_accuracy_report_json(const std::string& path, const AccuracyReport& report);

} // namespace fieldloom
