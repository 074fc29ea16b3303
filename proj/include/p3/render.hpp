#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "p3/detect.hpp"
#include "p3/geometry.hpp"

namespace p3 {

using Rgb = std::array<std::uint8_t, 3>;

struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB

    RasterImage() = default;
    RasterImage(int w, int h, Rgb fill = {0, 0, 0});

    Rgb at(int row, int col) const;
    void set(int row, int col, Rgb c);

    friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

struct RenderConfig {
    int width = 224;
    int height = 224;
    Rgb team_possession{0, 0, 255};
    Rgb team_opposition{255, 0, 0};
    Rgb passer{0, 0, 0};
    Rgb hull{0, 255, 0};
    Rgb background{255, 255, 255};
    double hull_alpha = 0.5;
    bool clip_to_visible_area = true;

    void validate() const;
    PixelMapping mapping() const { return {width, height, kPitchLength, kPitchWidth}; }
};

/// Voronoi control colouring by seed class (possession, opposition, passer),
/// background outside the visible area, and an alpha-blended hull overlay.
RasterImage render_moment(const P3Moment& moment, const RenderConfig& cfg = {});

/// Seeds and their colours exactly as render_moment uses them. A frame
/// without an actor gets the pass origin appended as the passer seed.
struct RenderSeeds {
    std::vector<Point> points;
    std::vector<Rgb> colors;
};
RenderSeeds render_seeds(const P3Moment& moment, const RenderConfig& cfg);

/// round-half-up((1 - alpha) * c + alpha * overlay) per channel.
Rgb blend(Rgb base, Rgb overlay, double alpha);

/// Nearest-neighbour resample at pixel centres.
RasterImage resample(const RasterImage& src, int width, int height);

/// 8-bit RGB, non-interlaced. Every row uses filter type 0 and zlib level 9.
std::string encode_png(const RasterImage& image);

/// Decodes 8-bit RGB non-interlaced PNGs (all five filter types).
RasterImage decode_png(std::string_view bytes);

}  // namespace p3
