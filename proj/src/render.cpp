#include "p3/render.hpp"

#include <cmath>
#include <stdexcept>

namespace p3 {

RasterImage::RasterImage(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

Rgb RasterImage::at(int row, int col) const {
    const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RasterImage::set(int row, int col, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
    pixels[i] = c[0];
    pixels[i + 1] = c[1];
    pixels[i + 2] = c[2];
}

void RenderConfig::validate() const {
    if (width < 16 || height < 16) throw std::invalid_argument("render config: width and height must be >= 16");
    if (!(hull_alpha >= 0.0 && hull_alpha <= 1.0)) throw std::invalid_argument("render config: hull_alpha must be in [0,1]");
}

Rgb blend(Rgb base, Rgb overlay, double alpha) {
    Rgb out{};
    for (int k = 0; k < 3; ++k) {
        const double v = (1.0 - alpha) * base[k] + alpha * overlay[k];
        out[k] = static_cast<std::uint8_t>(std::floor(v + 0.5));
    }
    return out;
}

RenderSeeds render_seeds(const P3Moment& moment, const RenderConfig& cfg) {
    RenderSeeds seeds;
    bool has_actor = false;
    for (const auto& p : moment.all_players) {
        seeds.points.push_back(p.location);
        if (p.actor) {
            has_actor = true;
            seeds.colors.push_back(cfg.passer);
        } else {
            seeds.colors.push_back(p.teammate ? cfg.team_possession : cfg.team_opposition);
        }
    }
    if (!has_actor) {
        seeds.points.push_back(moment.origin);
        seeds.colors.push_back(cfg.passer);
    }
    return seeds;
}

RasterImage render_moment(const P3Moment& moment, const RenderConfig& cfg) {
    cfg.validate();
    const PixelMapping mapping = cfg.mapping();
    const RenderSeeds seeds = render_seeds(moment, cfg);
    const Polygon* clip = cfg.clip_to_visible_area && moment.visible_area ? &*moment.visible_area : nullptr;
    const OwnerGrid owners = voronoi_owner_grid(seeds.points, mapping, clip);

    RasterImage img(cfg.width, cfg.height, cfg.background);
    for (int r = 0; r < cfg.height; ++r) {
        for (int c = 0; c < cfg.width; ++c) {
            const auto owner = owners.at(r, c);
            Rgb color = owner == kNoOwner ? cfg.background : seeds.colors[static_cast<std::size_t>(owner)];
            if (point_in_polygon(mapping.pixel_center(r, c), moment.hull) != Containment::outside) {
                color = blend(color, cfg.hull, cfg.hull_alpha);
            }
            img.set(r, c, color);
        }
    }
    return img;
}

RasterImage resample(const RasterImage& src, int width, int height) {
    if (src.width == width && src.height == height) return src;
    RasterImage out(width, height);
    for (int r = 0; r < height; ++r) {
        const int sr = static_cast<int>((static_cast<long long>(2 * r + 1) * src.height) / (2LL * height));
        for (int c = 0; c < width; ++c) {
            const int sc = static_cast<int>((static_cast<long long>(2 * c + 1) * src.width) / (2LL * width));
            out.set(r, c, src.at(sr, sc));
        }
    }
    return out;
}

}  // namespace p3
