#include "archseg/metrics.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "archseg/error.hpp"
#include "archseg/postproc.hpp"

namespace archseg {

PixelMetrics metrics_from_counts(const EvalCounts& counts) {
    PixelMetrics m;
    m.counts = counts;
    const auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.iou = ratio(counts.tp, counts.tp + counts.fp + counts.fn);
    m.precision = ratio(counts.tp, counts.tp + counts.fp);
    m.recall = ratio(counts.tp, counts.tp + counts.fn);
    return m;
}

PixelMetrics pixel_metrics(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw InvalidArgument("pixel_metrics: prediction and ground truth differ in size");
    }
    EvalCounts counts;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        const bool p = pred.bits[i] != 0;
        const bool g = gt.bits[i] != 0;
        counts.tp += p && g;
        counts.fp += p && !g;
        counts.fn += !p && g;
    }
    return metrics_from_counts(counts);
}

// ---------------------------------------------------------------------------
// Lattice boundary tracing

namespace {

struct LatticeEdge {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    std::uint32_t pixel = 0;
    int dx = 0;
    int dy = 0;
};

struct TracedRing {
    std::vector<Point> vertices;  // open, in pixel units
    std::uint32_t pixel = 0;      // a pixel bordering the ring
    double area = 0.0;            // signed, y-down frame: negative for outer rings
};

std::vector<TracedRing> trace_rings(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    const std::uint32_t stride = static_cast<std::uint32_t>(w) + 1;
    auto vid = [&](int x, int y) { return static_cast<std::uint32_t>(y) * stride + static_cast<std::uint32_t>(x); };
    auto fg = [&](int c, int r) { return mask.in_bounds(c, r) && mask.get(c, r); };

    std::vector<LatticeEdge> edges;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.get(c, r)) continue;
            const auto p = static_cast<std::uint32_t>(mask.index(c, r));
            if (!fg(c, r - 1)) edges.push_back({vid(c + 1, r), vid(c, r), p, -1, 0});
            if (!fg(c - 1, r)) edges.push_back({vid(c, r), vid(c, r + 1), p, 0, 1});
            if (!fg(c, r + 1)) edges.push_back({vid(c, r + 1), vid(c + 1, r + 1), p, 1, 0});
            if (!fg(c + 1, r)) edges.push_back({vid(c + 1, r + 1), vid(c + 1, r), p, 0, -1});
        }
    }

    const std::size_t nverts = static_cast<std::size_t>(stride) * (static_cast<std::size_t>(h) + 1);
    std::vector<std::array<int, 2>> outgoing(nverts, {-1, -1});
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto& slot = outgoing[edges[i].from];
        (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<int>(i);
    }

    std::vector<std::uint8_t> used(edges.size(), 0);
    std::vector<TracedRing> rings;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (used[start]) continue;
        TracedRing ring;
        ring.pixel = edges[start].pixel;
        std::size_t cur = start;
        while (true) {
            used[cur] = 1;
            const LatticeEdge& e = edges[cur];
            const auto& slot = outgoing[e.to];
            int next = slot[0];
            if (slot[1] >= 0) {
                // Saddle vertex: turn so that diagonal foreground pixels stay
                // connected (8-connectivity for the foreground).
                const LatticeEdge& a = edges[static_cast<std::size_t>(slot[0])];
                const int cross = e.dx * a.dy - e.dy * a.dx;
                next = cross > 0 ? slot[0] : slot[1];
            }
            const LatticeEdge& n = edges[static_cast<std::size_t>(next)];
            // Keep only corners.
            if (n.dx != e.dx || n.dy != e.dy) {
                ring.vertices.push_back({static_cast<double>(e.to % stride), static_cast<double>(e.to / stride)});
            }
            if (static_cast<std::size_t>(next) == start) break;
            cur = static_cast<std::size_t>(next);
        }
        // Integer corners: the shoelace sum is exact.
        double twice = 0.0;
        const std::size_t m = ring.vertices.size();
        for (std::size_t i = 0; i < m; ++i) {
            const Point& p = ring.vertices[i];
            const Point& q = ring.vertices[(i + 1) % m];
            twice += p.x * q.y - q.x * p.y;
        }
        ring.area = 0.5 * twice;
        rings.push_back(std::move(ring));
    }
    return rings;
}

Ring closed(const std::vector<Point>& pts) {
    Ring r(pts.begin(), pts.end());
    if (!r.empty()) r.push_back(r.front());
    return r;
}

}  // namespace

std::vector<LabelledPolygon> vectorize_mask(const BinaryMask& mask, ObjectClass cls,
                                            const std::string& id_prefix) {
    const auto labels = label_components(mask, Connectivity::eight);
    std::vector<LabelledPolygon> polys(labels.components.size());
    for (std::size_t i = 0; i < polys.size(); ++i) {
        polys[i].cls = cls;
        polys[i].id = id_prefix + std::to_string(i);
    }
    for (auto& ring : trace_rings(mask)) {
        const int label = labels.labels[ring.pixel];
        auto& poly = polys[static_cast<std::size_t>(label - 1)];
        if (ring.area < 0.0) {
            poly.outer = closed(ring.vertices);
        } else {
            poly.holes.push_back(closed(ring.vertices));
        }
    }
    return polys;
}

std::vector<LabelledPolygon> vectorize_mask(const BinaryMask& mask, const GridGeometry& geometry,
                                            ObjectClass cls, const std::string& id_prefix) {
    auto polys = vectorize_mask(mask, cls, id_prefix);
    for (auto& p : polys) p = to_world_space(p, geometry);
    return polys;
}

// ---------------------------------------------------------------------------
// Object topology

namespace {

struct HitFlags {
    std::vector<std::uint8_t> gt_same, gt_any, pred_same, pred_any;
};

HitFlags compute_hits(const std::vector<LabelledPolygon>& gt,
                      const std::vector<LabelledPolygon>& pred) {
    HitFlags f;
    f.gt_same.assign(gt.size(), 0);
    f.gt_any.assign(gt.size(), 0);
    f.pred_same.assign(pred.size(), 0);
    f.pred_any.assign(pred.size(), 0);
    std::vector<Bbox> pb(pred.size());
    for (std::size_t j = 0; j < pred.size(); ++j) pb[j] = polygon_bbox(pred[j]);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const Bbox gb = polygon_bbox(gt[i]);
        for (std::size_t j = 0; j < pred.size(); ++j) {
            if (!gb.overlaps(pb[j])) continue;
            if (!polygons_intersect(gt[i], pred[j])) continue;
            f.gt_any[i] = f.pred_any[j] = 1;
            if (gt[i].cls == pred[j].cls) f.gt_same[i] = f.pred_same[j] = 1;
        }
    }
    return f;
}

}  // namespace

TopologyReport topology_report(const std::vector<LabelledPolygon>& gt,
                               const std::vector<LabelledPolygon>& pred) {
    const HitFlags hits = compute_hits(gt, pred);
    TopologyReport report;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        auto& row = report.per_class[std::string(to_string(gt[i].cls))].gt;
        ++row.total;
        row.intersecting += hits.gt_same[i];
        ++report.overall.gt.total;
        report.overall.gt.intersecting += hits.gt_any[i];
    }
    for (std::size_t j = 0; j < pred.size(); ++j) {
        auto& row = report.per_class[std::string(to_string(pred[j].cls))].pred;
        ++row.total;
        row.intersecting += hits.pred_same[j];
        ++report.overall.pred.total;
        report.overall.pred.intersecting += hits.pred_any[j];
    }
    return report;
}

QuartileReport quartile_analysis(const std::vector<LabelledPolygon>& gt,
                                 const std::vector<LabelledPolygon>& pred) {
    const std::size_t n = gt.size();
    if (n < 4) throw InvalidArgument("quartile_analysis: need at least 4 ground-truth polygons");
    std::vector<double> area(n);
    for (std::size_t i = 0; i < n; ++i) area[i] = polygon_area(gt[i]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (area[a] != area[b]) return area[a] < area[b];
        return gt[a].id < gt[b].id;
    });

    const HitFlags hits = compute_hits(gt, pred);
    QuartileReport report;
    const std::size_t base = n / 4, extra = n % 4;
    std::size_t pos = 0;
    for (int q = 0; q < 4; ++q) {
        QuartileRow row;
        row.quartile = q + 1;
        row.count = base + (static_cast<std::size_t>(q) < extra ? 1 : 0);
        for (std::size_t k = 0; k < row.count; ++k, ++pos) {
            const std::size_t idx = order[pos];
            row.max_area = std::max(row.max_area, area[idx]);
            row.intersecting += hits.gt_any[idx];
        }
        report.overall.count += row.count;
        report.overall.intersecting += row.intersecting;
        report.overall.max_area = std::max(report.overall.max_area, row.max_area);
        report.quartiles.push_back(row);
    }
    return report;
}

EvalReport evaluate(const std::vector<LabelledPolygon>& gt, const std::vector<LabelledPolygon>& pred,
                    const std::optional<PixelMetrics>& pixel) {
    EvalReport report;
    report.pixel = pixel;
    report.topology = topology_report(gt, pred);
    for (ObjectClass cls : {ObjectClass::platform, ObjectClass::annular}) {
        std::vector<LabelledPolygon> g, p;
        std::copy_if(gt.begin(), gt.end(), std::back_inserter(g), [&](const auto& x) { return x.cls == cls; });
        std::copy_if(pred.begin(), pred.end(), std::back_inserter(p), [&](const auto& x) { return x.cls == cls; });
        if (g.size() >= 4) report.quartiles[std::string(to_string(cls))] = quartile_analysis(g, p);
    }
    if (gt.size() >= 4) report.quartiles["all"] = quartile_analysis(gt, pred);
    return report;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json row_json(const TopologyRow& row) {
    return {{"total", row.total}, {"intersecting", row.intersecting}, {"pct", optional_number(row.pct())}};
}

nlohmann::json class_json(const ClassTopology& t) {
    return {{"gt", row_json(t.gt)}, {"pred", row_json(t.pred)}};
}

nlohmann::json quartile_row_json(const QuartileRow& row) {
    return {{"quartile", row.quartile},
            {"count", row.count},
            {"max_area_m2", row.max_area},
            {"intersecting", row.intersecting},
            {"pct", row.pct()}};
}

}  // namespace

nlohmann::json to_json(const PixelMetrics& m) {
    return {{"iou", optional_number(m.iou)},
            {"precision", optional_number(m.precision)},
            {"recall", optional_number(m.recall)},
            {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn}}}};
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["schema"] = 1;
    const PixelMetrics pm = report.pixel.value_or(PixelMetrics{});
    j["iou"] = optional_number(pm.iou);
    j["precision"] = optional_number(pm.precision);
    j["recall"] = optional_number(pm.recall);
    j["counts"] = report.pixel ? to_json(pm)["counts"] : nlohmann::json(nullptr);

    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [name, t] : report.topology.per_class) per_class[name] = class_json(t);
    j["topology"] = {{"per_class", per_class}, {"overall", class_json(report.topology.overall)}};

    nlohmann::json quartiles = nlohmann::json::object();
    for (const auto& [name, q] : report.quartiles) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : q.quartiles) rows.push_back(quartile_row_json(row));
        quartiles[name] = {{"rows", rows}, {"overall", quartile_row_json(q.overall)}};
    }
    j["quartiles"] = quartiles;
    j["params"] = report.params;
    return j;
}

}  // namespace archseg
