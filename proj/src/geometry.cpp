#include "p3/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace p3 {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool lex_less(const Point& a, const Point& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
}

double segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) {
        t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
        t = std::clamp(t, 0.0, 1.0);
    }
    const double qx = a.x + t * dx - p.x;
    const double qy = a.y + t * dy - p.y;
    return std::sqrt(qx * qx + qy * qy);
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

std::optional<Polygon> convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), lex_less);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return std::nullopt;

    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);  // last point repeats the first
    if (hull.size() < 3) return std::nullopt;
    // Monotone chain already starts at the lexicographic minimum and runs CCW.
    return Polygon{std::move(hull)};
}

Containment point_in_polygon(Point p, const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) throw std::invalid_argument("point_in_polygon: polygon needs at least 3 vertices");
    for (std::size_t i = 0; i < n; ++i) {
        if (segment_distance(p, v[i], v[(i + 1) % n]) <= kBoundaryTolerance) return Containment::boundary;
    }
    // Ray cast toward +x.
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = v[i];
        const Point& b = v[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside ? Containment::inside : Containment::outside;
}

bool zone_contains(double x, double pitch_length) {
    return zone_contains(x, pitch_length / 3.0, 3.0 * pitch_length / 4.0);
}

bool zone_contains(double x, double lo, double hi) { return x >= lo && x <= hi; }

double polygon_area(const Polygon& poly) {
    const auto& v = poly.vertices;
    double twice = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % v.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) / 2.0;
}

Point polygon_centroid(const Polygon& poly) {
    const auto& v = poly.vertices;
    double a2 = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point& p = v[i];
        const Point& q = v[(i + 1) % v.size()];
        const double c = p.x * q.y - q.x * p.y;
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    if (a2 == 0.0) {
        Point m{};
        for (const auto& p : v) {
            m.x += p.x / static_cast<double>(v.size());
            m.y += p.y / static_cast<double>(v.size());
        }
        return m;
    }
    return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

int PixelMapping::row_of(double x) const {
    return (height - 1) - round_half_up(x / pitch_length * (height - 1));
}

int PixelMapping::col_of(double y) const { return round_half_up(y / pitch_width * (width - 1)); }

Point PixelMapping::pixel_center(int row, int col) const {
    return {static_cast<double>(height - 1 - row) / (height - 1) * pitch_length,
            static_cast<double>(col) / (width - 1) * pitch_width};
}

OwnerGrid voronoi_owner_grid(std::span<const Point> seeds, const PixelMapping& mapping, const Polygon* clip) {
    if (seeds.empty()) throw std::invalid_argument("voronoi_owner_grid: at least one seed required");
    OwnerGrid grid{mapping.width, mapping.height,
                   std::vector<std::int32_t>(static_cast<std::size_t>(mapping.width) * mapping.height, kNoOwner)};
    for (int r = 0; r < mapping.height; ++r) {
        for (int c = 0; c < mapping.width; ++c) {
            const Point centre = mapping.pixel_center(r, c);
            if (clip && point_in_polygon(centre, *clip) == Containment::outside) continue;
            std::int32_t best = 0;
            double best_d2 = 0.0;
            for (std::size_t s = 0; s < seeds.size(); ++s) {
                const double dx = centre.x - seeds[s].x;
                const double dy = centre.y - seeds[s].y;
                const double d2 = dx * dx + dy * dy;
                if (s == 0 || d2 < best_d2) {
                    best = static_cast<std::int32_t>(s);
                    best_d2 = d2;
                }
            }
            grid.owners[static_cast<std::size_t>(r) * mapping.width + c] = best;
        }
    }
    return grid;
}

}  // namespace p3
