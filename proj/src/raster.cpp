#include "archseg/raster.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "archseg/error.hpp"

namespace archseg {

DtmGrid::DtmGrid(GridGeometry geometry, std::vector<double> elevations,
                 std::vector<std::uint8_t> nodata, std::string crs)
    : geometry_(geometry),
      elevations_(std::move(elevations)),
      nodata_(std::move(nodata)),
      crs_(std::move(crs)) {
    if (geometry_.width <= 0 || geometry_.height <= 0) {
        throw InvalidArgument("DtmGrid: width and height must be positive");
    }
    if (!(geometry_.cell_size > 0.0)) {
        throw InvalidArgument("DtmGrid: cell_size must be positive");
    }
    if (elevations_.size() != geometry_.pixel_count()) {
        throw InvalidArgument("DtmGrid: elevation count does not match width*height");
    }
    if (nodata_.empty()) {
        nodata_.assign(elevations_.size(), 0);
    } else if (nodata_.size() != elevations_.size()) {
        throw InvalidArgument("DtmGrid: nodata mask size does not match width*height");
    }
    for (auto& flag : nodata_) {
        flag = flag ? 1 : 0;
        any_nodata_ = any_nodata_ || flag;
    }
}

DtmGrid DtmGrid::window(int col, int row, int w, int h) const {
    if (col < 0 || row < 0 || w <= 0 || h <= 0 || col + w > width() || row + h > height()) {
        throw InvalidArgument("DtmGrid::window: window outside grid");
    }
    GridGeometry g = geometry_;
    g.width = w;
    g.height = h;
    const WorldCoord nw = geometry_.pixel_to_world(col, row);
    g.origin_x = nw.x;
    g.origin_y = nw.y;
    std::vector<double> z;
    std::vector<std::uint8_t> nd;
    z.reserve(g.pixel_count());
    nd.reserve(g.pixel_count());
    for (int r = row; r < row + h; ++r) {
        for (int c = col; c < col + w; ++c) {
            z.push_back(at(c, r));
            nd.push_back(nodata_[index(c, r)]);
        }
    }
    return DtmGrid(g, std::move(z), std::move(nd), crs_);
}

ChannelRaster::ChannelRaster(int w, int h, ChannelUnit u)
    : width(w), height(h), unit(u) {
    if (w <= 0 || h <= 0) throw InvalidArgument("ChannelRaster: dimensions must be positive");
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    values.assign(n, 0.0);
    nodata.assign(n, 0);
}

Image8::Image8(int w, int h, int c, std::uint8_t fill) : width(w), height(h), channels(c) {
    if (w <= 0 || h <= 0) throw InvalidArgument("Image8: dimensions must be positive");
    if (c != 1 && c != 3) throw InvalidArgument("Image8: only 1 or 3 channels are supported");
    data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                    static_cast<std::size_t>(c),
                fill);
}

Image8 Image8::crop(int col, int row, int w, int h) const {
    Image8 out(w, h, channels);
    for (int r = 0; r < h; ++r) {
        const int sr = row + r;
        if (sr < 0 || sr >= height) continue;
        for (int c = 0; c < w; ++c) {
            const int sc = col + c;
            if (sc < 0 || sc >= width) continue;
            for (int ch = 0; ch < channels; ++ch) out.at(c, r, ch) = at(sc, sr, ch);
        }
    }
    return out;
}

BinaryMask::BinaryMask(int w, int h, bool fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw InvalidArgument("BinaryMask: dimensions must be positive");
    bits.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::crop(int col, int row, int w, int h) const {
    BinaryMask out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (in_bounds(col + c, row + r) && get(col + c, row + r)) out.set(c, r);
        }
    }
    out.window = MaskWindow{col, row, width, height};
    return out;
}

BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw InvalidArgument("mask_or: dimension mismatch");
    }
    BinaryMask out = a;
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] |= b.bits[i];
    return out;
}

void or_into(BinaryMask& dst, const BinaryMask& src, int col, int row) {
    for (int r = 0; r < src.height; ++r) {
        const int dr = row + r;
        if (dr < 0 || dr >= dst.height) continue;
        for (int c = 0; c < src.width; ++c) {
            const int dc = col + c;
            if (dc < 0 || dc >= dst.width) continue;
            if (src.get(c, r)) dst.set(dc, dr);
        }
    }
}

Image8 mask_to_image(const BinaryMask& mask) {
    Image8 img(mask.width, mask.height, 1);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) img.data[i] = mask.bits[i] ? 255 : 0;
    return img;
}

BinaryMask image_to_mask(const Image8& image) {
    if (image.channels != 1) throw InvalidArgument("image_to_mask: expected a 1-channel image");
    BinaryMask mask(image.width, image.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) mask.bits[i] = image.data[i] ? 1 : 0;
    return mask;
}

std::string_view to_string(ObjectClass c) noexcept {
    switch (c) {
        case ObjectClass::platform: return "platform";
        case ObjectClass::annular: return "annular";
    }
    return "platform";
}

ObjectClass parse_object_class(std::string_view name) {
    if (name == "platform") return ObjectClass::platform;
    if (name == "annular") return ObjectClass::annular;
    throw ParseError("unknown class '" + std::string(name) +
                     "' (accepted classes: platform, annular)");
}

Ring close_ring(Ring ring) {
    if (!ring.empty() && !(ring.front() == ring.back())) ring.push_back(ring.front());
    return ring;
}

std::size_t distinct_vertex_count(const Ring& ring) {
    std::set<std::pair<double, double>> seen;
    for (const auto& p : ring) seen.emplace(p.x, p.y);
    return seen.size();
}

namespace {

template <typename Fn>
LabelledPolygon transform_polygon(const LabelledPolygon& poly, Fn&& fn) {
    LabelledPolygon out;
    out.cls = poly.cls;
    out.id = poly.id;
    out.outer.reserve(poly.outer.size());
    for (const auto& p : poly.outer) out.outer.push_back(fn(p));
    for (const auto& hole : poly.holes) {
        Ring r;
        r.reserve(hole.size());
        for (const auto& p : hole) r.push_back(fn(p));
        out.holes.push_back(std::move(r));
    }
    return out;
}

}  // namespace

LabelledPolygon to_pixel_space(const LabelledPolygon& poly, const GridGeometry& g) {
    return transform_polygon(poly, [&](const Point& p) {
        const PixelCoord px = g.world_to_pixel(p.x, p.y);
        return Point{px.col, px.row};
    });
}

LabelledPolygon to_world_space(const LabelledPolygon& poly, const GridGeometry& g) {
    return transform_polygon(poly, [&](const Point& p) {
        const WorldCoord w = g.pixel_to_world(p.x, p.y);
        return Point{w.x, w.y};
    });
}

}  // namespace archseg
