#pragma once

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/geometries.hpp>
#include <boost/geometry/geometries/point_xy.hpp>

#include <vector>

namespace fieldloom {

namespace bg = boost::geometry;

// Planar geometry in the shared global pixel frame (x = column, y = row,
// 1 px = 1.5 m). Exterior rings counterclockwise in (x, y), closed.
using GeoPoint = bg::model::d2::point_xy<double>;
using Ring = bg::model::ring<GeoPoint, false, true>;
using PolyGeom = bg::model::polygon<GeoPoint, false, true>;
using MultiPoly = bg::model::multi_polygon<PolyGeom>;
using Polyline = bg::model::linestring<GeoPoint>;
using BBox = bg::model::box<GeoPoint>;

double geom_area(const PolyGeom& p);
double geom_area(const MultiPoly& mp);
GeoPoint geom_centroid(const PolyGeom& p);
BBox geom_bbox(const PolyGeom& p);
bool bbox_overlap(const BBox& a, const BBox& b);

double intersection_area(const PolyGeom& a, const PolyGeom& b);
double union_area(const PolyGeom& a, const PolyGeom& b);
MultiPoly geom_union(const PolyGeom& a, const PolyGeom& b);
MultiPoly geom_difference(const PolyGeom& a, const PolyGeom& b);

// area(a∩b) / area(a∪b); 0 for disjoint or degenerate inputs.
double iou(const PolyGeom& a, const PolyGeom& b);
double dice_from_iou(double iou_value);

bool point_in_polygon(const GeoPoint& pt, const PolyGeom& p);
bool polyline_intersects(const Polyline& line, const PolyGeom& p); // non-strict

// Largest-area member of a multipolygon (empty polygon if mp is empty).
PolyGeom largest_part(const MultiPoly& mp);

PolyGeom make_box_polygon(double x0, double y0, double x1, double y1);

} // namespace fieldloom
