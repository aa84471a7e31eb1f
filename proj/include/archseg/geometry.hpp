#pragma once

#include <optional>
#include <vector>

#include "archseg/raster.hpp"

namespace archseg {

struct Bbox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    [[nodiscard]] double width() const noexcept { return max_x - min_x; }
    [[nodiscard]] double height() const noexcept { return max_y - min_y; }
    [[nodiscard]] bool overlaps(const Bbox& o) const noexcept {
        return min_x < o.max_x && o.min_x < max_x && min_y < o.max_y && o.min_y < max_y;
    }
};

[[nodiscard]] Bbox ring_bbox(const Ring& ring);
[[nodiscard]] Bbox polygon_bbox(const LabelledPolygon& poly);

// Shoelace area; positive for counter-clockwise rings in a y-up frame.
[[nodiscard]] double signed_area(const Ring& ring) noexcept;

// True when two non-adjacent edges cross or overlap. Rings that merely touch
// themselves at a vertex are accepted.
[[nodiscard]] bool ring_self_intersects(const Ring& ring);

// |outer| minus the holes, in the polygon's coordinate units squared.
// Throws GeometryError for self-intersecting or degenerate rings.
[[nodiscard]] double polygon_area(const LabelledPolygon& poly);

// Even-odd point containment over the outer ring and all holes.
[[nodiscard]] bool point_in_polygon(const LabelledPolygon& poly, double x, double y) noexcept;

// Sutherland-Hodgman clip of every ring to [min_x,max_x] x [min_y,max_y].
// Returns nullopt when the outer ring degenerates.
[[nodiscard]] std::optional<LabelledPolygon> clip_polygon(const LabelledPolygon& poly,
                                                          const Bbox& rect);

// Area of int(a) ∩ int(b), computed exactly per vertical slab between event
// abscissae (vertices and edge crossings).
[[nodiscard]] double intersection_area(const LabelledPolygon& a, const LabelledPolygon& b);

// True iff the polygons share interior area; touching boundaries do not count.
[[nodiscard]] bool polygons_intersect(const LabelledPolygon& a, const LabelledPolygon& b);

}  // namespace archseg
