#include "archseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "archseg/error.hpp"

namespace archseg {
namespace {

struct Segment {
    Point a;
    Point b;
};

double orient(const Point& a, const Point& b, const Point& c) noexcept {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

int sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

bool segments_conflict(const Segment& s, const Segment& t) noexcept {
    const int o1 = sign(orient(s.a, s.b, t.a));
    const int o2 = sign(orient(s.a, s.b, t.b));
    const int o3 = sign(orient(t.a, t.b, s.a));
    const int o4 = sign(orient(t.a, t.b, s.b));
    if (o1 * o2 < 0 && o3 * o4 < 0) return true;
    if (o1 == 0 && o2 == 0) {
        // Collinear: conflict only if the overlap has positive length.
        const bool use_x = std::abs(s.b.x - s.a.x) >= std::abs(s.b.y - s.a.y);
        auto key = [&](const Point& p) { return use_x ? p.x : p.y; };
        const double s0 = std::min(key(s.a), key(s.b)), s1 = std::max(key(s.a), key(s.b));
        const double t0 = std::min(key(t.a), key(t.b)), t1 = std::max(key(t.a), key(t.b));
        return std::min(s1, t1) - std::max(s0, t0) > 0.0;
    }
    return false;
}

void append_edges(const Ring& ring, std::vector<Segment>& out) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        if (ring[i] == ring[i + 1]) continue;
        out.push_back({ring[i], ring[i + 1]});
    }
}

std::vector<Segment> polygon_edges(const LabelledPolygon& poly) {
    std::vector<Segment> edges;
    append_edges(close_ring(poly.outer), edges);
    for (const auto& h : poly.holes) append_edges(close_ring(h), edges);
    return edges;
}

// Ordinates where edges cross the vertical line x, sorted ascending.
void crossings_at(const std::vector<Segment>& edges, double x, std::vector<double>& ys) {
    ys.clear();
    for (const auto& e : edges) {
        Point p = e.a, q = e.b;
        if (p.x > q.x) std::swap(p, q);
        if (!(p.x < x && x < q.x)) continue;
        ys.push_back(p.y + (x - p.x) * (q.y - p.y) / (q.x - p.x));
    }
    std::sort(ys.begin(), ys.end());
}

// Total length of the intersection of two even-odd interval sets.
double overlap_length(const std::vector<double>& a, const std::vector<double>& b) noexcept {
    double total = 0.0;
    std::size_t i = 0, j = 0;
    while (i + 1 < a.size() && j + 1 < b.size()) {
        const double lo = std::max(a[i], b[j]);
        const double hi = std::min(a[i + 1], b[j + 1]);
        if (hi > lo) total += hi - lo;
        if (a[i + 1] < b[j + 1]) {
            i += 2;
        } else {
            j += 2;
        }
    }
    return total;
}

std::vector<Point> clip_ring(const Ring& ring, const Bbox& rect) {
    std::vector<Point> pts(ring.begin(), ring.end());
    if (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();

    enum class Side { left, right, top, bottom };
    auto inside = [&](const Point& p, Side s) {
        switch (s) {
            case Side::left: return p.x >= rect.min_x;
            case Side::right: return p.x <= rect.max_x;
            case Side::top: return p.y >= rect.min_y;
            case Side::bottom: return p.y <= rect.max_y;
        }
        return true;
    };
    auto cut = [&](const Point& p, const Point& q, Side s) {
        double t = 0.0;
        switch (s) {
            case Side::left: t = (rect.min_x - p.x) / (q.x - p.x); break;
            case Side::right: t = (rect.max_x - p.x) / (q.x - p.x); break;
            case Side::top: t = (rect.min_y - p.y) / (q.y - p.y); break;
            case Side::bottom: t = (rect.max_y - p.y) / (q.y - p.y); break;
        }
        Point r{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
        // Snap the clipped coordinate onto the boundary exactly.
        if (s == Side::left) r.x = rect.min_x;
        if (s == Side::right) r.x = rect.max_x;
        if (s == Side::top) r.y = rect.min_y;
        if (s == Side::bottom) r.y = rect.max_y;
        return r;
    };

    for (Side s : {Side::left, Side::right, Side::top, Side::bottom}) {
        if (pts.empty()) break;
        std::vector<Point> next;
        next.reserve(pts.size() + 4);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const Point& cur = pts[i];
            const Point& prev = pts[(i + pts.size() - 1) % pts.size()];
            const bool cin = inside(cur, s), pin = inside(prev, s);
            if (cin) {
                if (!pin) next.push_back(cut(prev, cur, s));
                next.push_back(cur);
            } else if (pin) {
                next.push_back(cut(prev, cur, s));
            }
        }
        pts = std::move(next);
    }
    // Drop consecutive duplicates.
    std::vector<Point> out;
    for (const auto& p : pts) {
        if (out.empty() || !(out.back() == p)) out.push_back(p);
    }
    while (out.size() > 1 && out.front() == out.back()) out.pop_back();
    return out;
}

}  // namespace

Bbox ring_bbox(const Ring& ring) {
    Bbox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : ring) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

Bbox polygon_bbox(const LabelledPolygon& poly) { return ring_bbox(poly.outer); }

double signed_area(const Ring& ring) noexcept {
    if (ring.size() < 3) return 0.0;
    // Relative to the first vertex to keep large world offsets out of the products.
    const Point o = ring.front();
    double twice = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = ring[i];
        const Point& q = ring[(i + 1) % n];
        twice += (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y);
    }
    return 0.5 * twice;
}

bool ring_self_intersects(const Ring& ring) {
    std::vector<Segment> edges;
    append_edges(close_ring(ring), edges);
    const std::size_t n = edges.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Bbox bi = ring_bbox({edges[i].a, edges[i].b});
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            const Bbox bj = ring_bbox({edges[j].a, edges[j].b});
            if (bi.max_x < bj.min_x || bj.max_x < bi.min_x || bi.max_y < bj.min_y ||
                bj.max_y < bi.min_y) {
                continue;
            }
            if (segments_conflict(edges[i], edges[j])) return true;
        }
    }
    return false;
}

double polygon_area(const LabelledPolygon& poly) {
    auto check = [&](const Ring& r, const char* what) {
        if (distinct_vertex_count(r) < 3) {
            throw GeometryError("polygon '" + poly.id + "': " + what + " has fewer than 3 distinct vertices");
        }
        if (ring_self_intersects(r)) {
            throw GeometryError("polygon '" + poly.id + "': " + what + " is self-intersecting");
        }
    };
    check(poly.outer, "outer ring");
    double area = std::abs(signed_area(close_ring(poly.outer)));
    for (const auto& h : poly.holes) {
        check(h, "inner ring");
        area -= std::abs(signed_area(close_ring(h)));
    }
    return area;
}

bool point_in_polygon(const LabelledPolygon& poly, double x, double y) noexcept {
    bool inside = false;
    auto scan = [&](const Ring& ring) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point& a = ring[i];
            const Point& b = ring[j];
            if ((a.y > y) != (b.y > y)) {
                const double xi = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (x < xi) inside = !inside;
            }
        }
    };
    if (poly.outer.empty()) return false;
    scan(poly.outer);
    for (const auto& h : poly.holes) {
        if (!h.empty()) scan(h);
    }
    return inside;
}

std::optional<LabelledPolygon> clip_polygon(const LabelledPolygon& poly, const Bbox& rect) {
    auto outer = clip_ring(poly.outer, rect);
    Ring closed_outer(outer.begin(), outer.end());
    closed_outer = close_ring(std::move(closed_outer));
    if (distinct_vertex_count(closed_outer) < 3 || signed_area(closed_outer) == 0.0) {
        return std::nullopt;
    }
    LabelledPolygon out;
    out.cls = poly.cls;
    out.id = poly.id;
    out.outer = std::move(closed_outer);
    for (const auto& h : poly.holes) {
        auto pts = clip_ring(h, rect);
        Ring r = close_ring(Ring(pts.begin(), pts.end()));
        if (distinct_vertex_count(r) >= 3 && signed_area(r) != 0.0) out.holes.push_back(std::move(r));
    }
    return out;
}

double intersection_area(const LabelledPolygon& a, const LabelledPolygon& b) {
    const Bbox ba = polygon_bbox(a), bb = polygon_bbox(b);
    const double lo = std::max(ba.min_x, bb.min_x);
    const double hi = std::min(ba.max_x, bb.max_x);
    if (!(hi > lo) || std::min(ba.max_y, bb.max_y) <= std::max(ba.min_y, bb.min_y)) return 0.0;

    const auto ea = polygon_edges(a);
    const auto eb = polygon_edges(b);

    std::vector<double> xs;
    xs.reserve(ea.size() + eb.size() + 2);
    xs.push_back(lo);
    xs.push_back(hi);
    for (const auto* edges : {&ea, &eb}) {
        for (const auto& e : *edges) {
            if (e.a.x > lo && e.a.x < hi) xs.push_back(e.a.x);
        }
    }
    // Abscissae of crossings between edges of a and edges of b.
    for (const auto& s : ea) {
        const double sx0 = std::min(s.a.x, s.b.x), sx1 = std::max(s.a.x, s.b.x);
        if (sx1 <= lo || sx0 >= hi) continue;
        for (const auto& t : eb) {
            const double tx0 = std::min(t.a.x, t.b.x), tx1 = std::max(t.a.x, t.b.x);
            if (tx1 < sx0 || sx1 < tx0) continue;
            const double dx1 = s.b.x - s.a.x, dy1 = s.b.y - s.a.y;
            const double dx2 = t.b.x - t.a.x, dy2 = t.b.y - t.a.y;
            const double den = dx1 * dy2 - dy1 * dx2;
            if (den == 0.0) continue;
            const double u = ((t.a.x - s.a.x) * dy2 - (t.a.y - s.a.y) * dx2) / den;
            const double v = ((t.a.x - s.a.x) * dy1 - (t.a.y - s.a.y) * dx1) / den;
            if (u <= 0.0 || u >= 1.0 || v < 0.0 || v > 1.0) continue;
            const double x = s.a.x + u * dx1;
            if (x > lo && x < hi) xs.push_back(x);
        }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double area = 0.0;
    std::vector<double> ya, yb;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double w = xs[i + 1] - xs[i];
        if (!(w > 0.0)) continue;
        const double xm = 0.5 * (xs[i] + xs[i + 1]);
        crossings_at(ea, xm, ya);
        if (ya.size() < 2) continue;
        crossings_at(eb, xm, yb);
        if (yb.size() < 2) continue;
        area += overlap_length(ya, yb) * w;
    }
    return area;
}

bool polygons_intersect(const LabelledPolygon& a, const LabelledPolygon& b) {
    const Bbox ba = polygon_bbox(a), bb = polygon_bbox(b);
    if (!ba.overlaps(bb)) return false;
    const double area = intersection_area(a, b);
    // Collinear shared edges can leave rounding residue of order ulp * extent^2.
    const double extent = std::max({ba.width(), ba.height(), bb.width(), bb.height()});
    return area > 1e-10 * extent * extent;
}

}  // namespace archseg
