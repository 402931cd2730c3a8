#include "fieldloom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fieldloom {

double geom_area(const PolyGeom& p) { return std::abs(bg::area(p)); }

double geom_area(const MultiPoly& mp) { return std::abs(bg::area(mp)); }

GeoPoint geom_centroid(const PolyGeom& p) {
    GeoPoint c;
    bg::centroid(p, c);
    return c;
}

BBox geom_bbox(const PolyGeom& p) {
    BBox b;
    bg::envelope(p, b);
    return b;
}

bool bbox_overlap(const BBox& a, const BBox& b) {
    return !(a.max_corner().x() < b.min_corner().x() || b.max_corner().x() < a.min_corner().x() ||
             a.max_corner().y() < b.min_corner().y() || b.max_corner().y() < a.min_corner().y());
}

double intersection_area(const PolyGeom& a, const PolyGeom& b) {
    if (!bbox_overlap(geom_bbox(a), geom_bbox(b))) return 0.0;
    MultiPoly out;
    bg::intersection(a, b, out);
    return geom_area(out);
}

double union_area(const PolyGeom& a, const PolyGeom& b) {
    MultiPoly out;
    bg::union_(a, b, out);
    return geom_area(out);
}

MultiPoly geom_union(const PolyGeom& a, const PolyGeom& b) {
    MultiPoly out;
    bg::union_(a, b, out);
    return out;
}

MultiPoly geom_difference(const PolyGeom& a, const PolyGeom& b) {
    MultiPoly out;
    bg::difference(a, b, out);
    return out;
}

double iou(const PolyGeom& a, const PolyGeom& b) {
    if (bg::is_empty(a) || bg::is_empty(b)) throw std::invalid_argument("iou: empty geometry");
    double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    double uni = union_area(a, b);
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double dice_from_iou(double iou_value) { return 2.0 * iou_value / (1.0 + iou_value); }

bool point_in_polygon(const GeoPoint& pt, const PolyGeom& p) { return bg::covered_by(pt, p); }

bool polyline_intersects(const Polyline& line, const PolyGeom& p) {
    return bg::intersects(line, p);
}

PolyGeom largest_part(const MultiPoly& mp) {
    PolyGeom best;
    double best_area = -1.0;
    for (const auto& p : mp) {
        double a = geom_area(p);
        if (a > best_area) {
            best_area = a;
            best = p;
        }
    }
    return best;
}

PolyGeom make_box_polygon(double x0, double y0, double x1, double y1) {
    PolyGeom p;
    bg::append(p.outer(), GeoPoint(x0, y0));
    bg::append(p.outer(), GeoPoint(x1, y0));
    bg::append(p.outer(), GeoPoint(x1, y1));
    bg::append(p.outer(), GeoPoint(x0, y1));
    bg::append(p.outer(), GeoPoint(x0, y0));
    bg::correct(p);
    return p;
}

} // namespace fieldloom
