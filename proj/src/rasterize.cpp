#include <algorithm>
#include <cmath>

#include "archseg/dataset.hpp"
#include "archseg/geometry.hpp"

namespace archseg {
namespace {

struct Edge {
    double x1, y1, x2, y2;
};

void collect_edges(const Ring& ring, std::vector<Edge>& out) {
    const Ring r = close_ring(ring);
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        if (r[i].y == r[i + 1].y) continue;  // horizontal edges never cross a scanline
        out.push_back({r[i].x, r[i].y, r[i + 1].x, r[i + 1].y});
    }
}

}  // namespace

BinaryMask rasterize_pixel_polygons(std::span<const LabelledPolygon> polys, int width, int height) {
    BinaryMask mask(width, height);
    std::vector<Edge> edges;
    std::vector<double> xs;
    for (const auto& poly : polys) {
        if (poly.outer.size() < 3) continue;
        edges.clear();
        collect_edges(poly.outer, edges);
        for (const auto& h : poly.holes) collect_edges(h, edges);
        const Bbox box = polygon_bbox(poly);
        const int r0 = std::max(0, static_cast<int>(std::floor(box.min_y - 0.5)));
        const int r1 = std::min(height - 1, static_cast<int>(std::ceil(box.max_y)));
        for (int r = r0; r <= r1; ++r) {
            const double yc = r + 0.5;
            xs.clear();
            for (const auto& e : edges) {
                // Half-open in y: an edge spans the scanline iff exactly one
                // endpoint is at or above it.
                if ((e.y1 <= yc) == (e.y2 <= yc)) continue;
                xs.push_back(e.x1 + (yc - e.y1) * (e.x2 - e.x1) / (e.y2 - e.y1));
            }
            std::sort(xs.begin(), xs.end());
            for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
                // Centres in [xs[i], xs[i+1]).
                const int c0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
                const int c1 = std::min(width, static_cast<int>(std::ceil(xs[i + 1] - 0.5)));
                for (int c = c0; c < c1; ++c) mask.set(c, r);
            }
        }
    }
    return mask;
}

BinaryMask rasterize_polygons(std::span<const LabelledPolygon> polys, const GridGeometry& geometry) {
    std::vector<LabelledPolygon> px;
    px.reserve(polys.size());
    for (const auto& p : polys) px.push_back(to_pixel_space(p, geometry));
    return rasterize_pixel_polygons(px, geometry.width, geometry.height);
}

}  // namespace archseg
