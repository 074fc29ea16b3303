#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace p3 {

inline constexpr double kPitchLength = 120.0;
inline constexpr double kPitchWidth = 80.0;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

// Convex polygon: counter-clockwise, starting at the lexicographically
// smallest vertex, no repeated endpoint.
struct Polygon {
    std::vector<Point> vertices;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

enum class Containment { inside, boundary, outside };

/// Andrew's monotone chain. Collinear points are dropped. Returns nullopt
/// when fewer than three distinct non-collinear points remain.
std::optional<Polygon> convex_hull(std::span<const Point> points);

/// Classifies `p` against a simple polygon (convex or not). Points within
/// kBoundaryTolerance of an edge are reported as boundary.
Containment point_in_polygon(Point p, const Polygon& poly);

inline constexpr double kBoundaryTolerance = 1e-9;

/// Inclusive band [lo, hi] on the pass origin's x.
bool zone_contains(double x, double pitch_length = kPitchLength);
bool zone_contains(double x, double lo, double hi);

double polygon_area(const Polygon& poly);

Point polygon_centroid(const Polygon& poly);

/// Maps the pitch onto an image with attack running bottom to top: pitch x
/// runs along rows (bottom row is x = 0), pitch y along columns.
struct PixelMapping {
    int width = 224;
    int height = 224;
    double pitch_length = kPitchLength;
    double pitch_width = kPitchWidth;

    // Round-half-up on both axes.
    int row_of(double x) const;
    int col_of(double y) const;
    Point pixel_center(int row, int col) const;
};

inline constexpr std::int32_t kNoOwner = -1;

struct OwnerGrid {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> owners;  // row-major; kNoOwner when clipped

    std::int32_t at(int row, int col) const { return owners[static_cast<std::size_t>(row) * width + col]; }
};

/// Nearest-seed ownership of every pixel centre. Exact distance ties go to
/// the lowest seed index. Pixels whose centre is outside `clip` are kNoOwner.
OwnerGrid voronoi_owner_grid(std::span<const Point> seeds, const PixelMapping& mapping,
                             const Polygon* clip = nullptr);

}  // namespace p3
