#include "fieldloom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <boost/geometry/index/rtree.hpp>
#include <json.hpp>

#include "fieldloom/csv.hpp"

namespace fieldloom {

ConfusionCounts count_confusion(const StratifiedSample& sample) {
    ConfusionCounts n{};
    for (const auto& pt : sample.points) {
        if (pt.map_class < 0 || pt.map_class > 1 || pt.reference_class < 0 || pt.reference_class > 1)
            throw std::invalid_argument("confusion: classes must be binary");
        ++n[pt.map_class][pt.reference_class];
    }
    return n;
}

ProbMatrix confusion_from_sample(const StratifiedSample& sample) {
    ConfusionCounts n = count_confusion(sample);
    ProbMatrix p{};
    for (int i = 0; i < 2; ++i) {
        long long n_i = n[i][0] + n[i][1];
        if (n_i == 0) throw std::invalid_argument("confusion_from_sample: stratum with zero samples");
        for (int j = 0; j < 2; ++j)
            p[i][j] = sample.weights[i] * static_cast<double>(n[i][j]) / static_cast<double>(n_i);
    }
    return p;
}

AccuracyReport accuracy_estimates(const ProbMatrix& p, const std::array<double, 2>& weights,
                                  const std::array<long long, 2>& stratum_counts) {
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            if (p[i][j] < 0) throw std::invalid_argument("accuracy_estimates: negative probability");

    AccuracyReport r;
    r.p = p;
    double row[2], col[2];
    for (int i = 0; i < 2; ++i) row[i] = p[i][0] + p[i][1];
    for (int j = 0; j < 2; ++j) col[j] = p[0][j] + p[1][j];

    // conditional proportions a_ij = n_ij / n_i
    double a[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) a[i][j] = row[i] > 0 ? p[i][j] / row[i] : 0.0;

    auto inv_nm1 = [&](int i) {
        return stratum_counts[i] > 1 ? 1.0 / static_cast<double>(stratum_counts[i] - 1) : 0.0;
    };

    r.overall.value = p[0][0] + p[1][1];
    double v_oa = 0;
    for (int i = 0; i < 2; ++i) {
        double ua = row[i] > 0 ? p[i][i] / row[i] : 0.0;
        r.user_accuracy[i].value = ua;
        r.user_accuracy[i].se = std::sqrt(ua * (1.0 - ua) * inv_nm1(i));
        v_oa += weights[i] * weights[i] * ua * (1.0 - ua) * inv_nm1(i);
    }
    r.overall.se = std::sqrt(v_oa);

    for (int j = 0; j < 2; ++j) {
        r.area_proportion[j].value = col[j];
        double v_area = 0;
        for (int i = 0; i < 2; ++i)
            v_area += weights[i] * weights[i] * a[i][j] * (1.0 - a[i][j]) * inv_nm1(i);
        r.area_proportion[j].se = std::sqrt(v_area);

        double pa = col[j] > 0 ? p[j][j] / col[j] : 0.0;
        r.producer_accuracy[j].value = pa;
        // stratified PA variance estimator (Olofsson et al. 2014), in proportions
        if (col[j] > 0) {
            double ua_j = r.user_accuracy[j].value;
            double term1 = weights[j] * weights[j] * (1.0 - pa) * (1.0 - pa) * ua_j *
                           (1.0 - ua_j) * inv_nm1(j);
            double term2 = 0;
            for (int i = 0; i < 2; ++i) {
                if (i == j) continue;
                term2 += weights[i] * weights[i] * a[i][j] * (1.0 - a[i][j]) * inv_nm1(i);
            }
            r.producer_accuracy[j].se = std::sqrt((term1 + pa * pa * term2) / (col[j] * col[j]));
        }
    }
    return r;
}

namespace {
using RtreeValue = std::pair<BBox, size_t>;
using Rtree = bg::index::rtree<RtreeValue, bg::index::quadratic<16>>;
} // namespace

std::vector<MatchedFieldPair> match_fields(const std::vector<PolyGeom>& reference,
                                           const std::vector<PolyGeom>& predictions,
                                           double area_ha_per_unit2) {
    std::vector<RtreeValue> values;
    for (size_t i = 0; i < predictions.size(); ++i)
        values.emplace_back(geom_bbox(predictions[i]), i);
    Rtree tree(values.begin(), values.end());

    std::vector<MatchedFieldPair> pairs;
    std::vector<RtreeValue> hits;
    for (size_t ri = 0; ri < reference.size(); ++ri) {
        MatchedFieldPair pair;
        pair.reference_index = ri;
        pair.ref_size_ha = geom_area(reference[ri]) * area_ha_per_unit2;
        hits.clear();
        tree.query(bg::index::intersects(geom_bbox(reference[ri])), std::back_inserter(hits));
        std::sort(hits.begin(), hits.end(),
                  [](const RtreeValue& a, const RtreeValue& b) { return a.second < b.second; });
        for (const auto& [box, pi] : hits) {
            double v = iou(reference[ri], predictions[pi]);
            // strict > keeps the lowest prediction index on exact ties, so the
            // matching is invariant to prediction order
            if (v > pair.iou) {
                pair.iou = v;
                pair.predicted_index = static_cast<int>(pi);
            }
        }
        if (pair.predicted_index >= 0)
            pair.pred_size_ha = geom_area(predictions[pair.predicted_index]) * area_ha_per_unit2;
        pairs.push_back(pair);
    }
    return pairs;
}

ObjectMetrics object_metrics(const std::vector<MatchedFieldPair>& pairs, size_t n_predictions) {
    if (pairs.empty()) throw std::invalid_argument("object_metrics: empty reference set");

    ObjectMetrics m;
    std::vector<double> ious;
    std::vector<bool> pred_matched(n_predictions, false);
    double dice_sum = 0;
    for (const auto& pr : pairs) {
        ious.push_back(pr.iou);
        dice_sum += dice_from_iou(pr.iou);
        if (pr.iou > 0.5) {
            ++m.true_positives;
            if (pr.predicted_index >= 0) pred_matched[pr.predicted_index] = true;
        } else {
            ++m.false_negatives;
        }
    }
    for (bool used : pred_matched)
        if (!used) ++m.false_positives;

    double sum = 0;
    int above50 = 0, above80 = 0;
    for (double v : ious) {
        sum += v;
        if (v > 0.5) ++above50;
        if (v > 0.8) ++above80;
    }
    const double n = static_cast<double>(ious.size());
    m.mean_iou = sum / n;
    m.mean_dice = dice_sum / n;
    m.frac_iou_above_50 = above50 / n;
    m.frac_iou_above_80 = above80 / n;

    std::sort(ious.begin(), ious.end());
    size_t mid = ious.size() / 2;
    m.median_iou = ious.size() % 2 ? ious[mid] : 0.5 * (ious[mid - 1] + ious[mid]);

    double tp_fp = static_cast<double>(m.true_positives + m.false_positives);
    double tp_fn = static_cast<double>(m.true_positives + m.false_negatives);
    m.precision = tp_fp > 0 ? m.true_positives / tp_fp : 0.0;
    m.recall = tp_fn > 0 ? m.true_positives / tp_fn : 0.0;
    return m;
}

SizeRegressionStats size_regression_stats(const std::vector<MatchedFieldPair>& pairs) {
    std::vector<const MatchedFieldPair*> matched;
    for (const auto& p : pairs)
        if (p.predicted_index >= 0) matched.push_back(&p);
    if (matched.size() < 2)
        throw std::invalid_argument("size_regression_stats: need at least 2 matched pairs");

    SizeRegressionStats s;
    const double n = static_cast<double>(matched.size());
    double sum_obs = 0, sum_pred = 0;
    for (const auto* p : matched) {
        double d = p->pred_size_ha - p->ref_size_ha;
        s.rmse += d * d;
        s.mae += std::abs(d);
        s.me += d;
        sum_obs += p->ref_size_ha;
        sum_pred += p->pred_size_ha;
    }
    s.rmse = std::sqrt(s.rmse / n);
    s.mae /= n;
    s.me /= n;

    double mean_obs = sum_obs / n, mean_pred = sum_pred / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto* p : matched) {
        double dx = p->ref_size_ha - mean_obs, dy = p->pred_size_ha - mean_pred;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0)
        throw std::invalid_argument("size_regression_stats: zero variance in observed sizes");
    s.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 0.0;
    return s;
}

StratifiedSample load_sample_csv(const std::string& path, const std::array<double, 2>& weights) {
    CsvTable t = read_csv(path);
    int c_id = t.col_required("point_id");
    int c_lon = t.col_required("lon");
    int c_lat = t.col_required("lat");
    int c_map = t.col_required("map_class");
    int c_ref = t.col_required("reference_class");

    auto parse_class = [](const std::string& v) {
        if (v == "crop" || v == "1") return kCrop;
        if (v == "non-crop" || v == "noncrop" || v == "0") return kNonCrop;
        throw std::invalid_argument("sample csv: unknown class '" + v + "'");
    };

    StratifiedSample s;
    s.weights = weights;
    for (const auto& row : t.rows) {
        SamplePoint pt;
        pt.point_id = row[c_id];
        pt.lon = std::stod(row[c_lon]);
        pt.lat = std::stod(row[c_lat]);
        pt.map_class = parse_class(row[c_map]);
        pt.reference_class = parse_class(row[c_ref]);
        s.points.push_back(std::move(pt));
    }
    return s;
}

void write_accuracy_report_json(const std::string& path, const AccuracyReport& r) {
    using nlohmann::json;
    auto vs = [](const ValueWithSe& v) { return json{{"value", v.value}, {"se", v.se}}; };
    json j;
    j["confusion_matrix"] = {{r.p[0][0], r.p[0][1]}, {r.p[1][0], r.p[1][1]}};
    j["classes"] = {"non-crop", "crop"};
    j["user_accuracy"] = {vs(r.user_accuracy[0]), vs(r.user_accuracy[1])};
    j["producer_accuracy"] = {vs(r.producer_accuracy[0]), vs(r.producer_accuracy[1])};
    j["overall_accuracy"] = vs(r.overall);
    j["area_proportion"] = {vs(r.area_proportion[0]), vs(r.area_proportion[1])};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

} // namespace fieldloom
