// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archseg/dataset.hpp"
#include "archseg/geometry.hpp"
#include "archseg/inference.hpp"
#include "archseg/metrics.hpp"
#include "archseg/postproc.hpp"
#include "archseg/terrain.hpp"
#include "oracles.hpp"
#include "scene.hpp"
#include "temp_dir.hpp"

using namespace archseg;
namespace at = archseg::testing;

namespace {

// Tolerances and limits.
constexpr double kFlatTol = 1e-6;
constexpr double kPlaneSlopeTol = 0.01;
constexpr double kOracleTol = 1e-9;
constexpr double kAnalyticsBudgetS = 1.0;
constexpr double kOracleBudgetS = 30.0;
constexpr double kEndToEndBudgetS = 60.0;
constexpr double kMinGtPct = 0.8;
constexpr double kMinIou = 0.5;
constexpr int kMinLabelPx = 10;

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && s > budget_s) {
        c.require(false, "runtime " + std::to_string(s) + " s exceeds " + std::to_string(budget_s) + " s");
    }
    if (!c.ok) ++failures;
    std::printf("%s  %-28s %7.3f s  %s\n", c.ok ? "PASS" : "FAIL", name.c_str(), s, c.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

DtmGrid make_grid(int w, int h, double cs, const std::function<double(int, int)>& z) {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) v[static_cast<std::size_t>(r) * w + c] = z(c, r);
    }
    return DtmGrid(GridGeometry{w, h, cs, 0.0, h * cs}, std::move(v));
}

DtmGrid random_grid(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    return make_grid(w, h, 0.5, [&](int, int) { return rng.uniform(0.0, 3.0); });
}

BinaryMask random_mask(int w, int h, double p, std::uint64_t seed) {
    Rng rng(seed);
    BinaryMask m(w, h);
    for (auto& v : m.bits) v = rng.uniform01() < p;
    return m;
}

ChannelRaster rotate_cw(const ChannelRaster& ch) {
    ChannelRaster out(ch.height, ch.width, ch.unit);
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            out.values[out.index(c, r)] = ch.values[ch.index(r, ch.height - 1 - c)];
            out.nodata[out.index(c, r)] = ch.nodata[ch.index(r, ch.height - 1 - c)];
        }
    }
    return out;
}

DtmGrid rotate_cw(const DtmGrid& g) {
    return make_grid(g.height(), g.width(), g.cell_size(), [&](int c, int r) { return g.at(r, g.height() - 1 - c); });
}

bool same(const ChannelRaster& a, const ChannelRaster& b) {
    return a.width == b.width && a.height == b.height && a.values == b.values && a.nodata == b.nodata;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        if (a.bits[i] && !b.bits[i]) return false;
    }
    return true;
}

LabelledPolygon square(double x, double y, double side, std::string id) {
    LabelledPolygon p;
    p.id = std::move(id);
    p.outer = {{x, y}, {x + side, y}, {x + side, y + side}, {x, y + side}, {x, y}};
    return p;
}

LabelledPolygon box(double x0, double y0, double x1, double y1, std::string id) {
    LabelledPolygon p;
    p.id = std::move(id);
    p.outer = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- criteria ---------------------------------------------------------------

void terrain_analytics(Check& c) {
    const DtmGrid flat = make_grid(64, 64, 0.5, [](int, int) { return 10.0; });
    const auto so = compute_svf_and_openness(flat, {});
    const auto slope = compute_slope(flat);
    const auto hs = compute_hillshade(flat, 315, 45);
    double svf_err = 0, po_err = 0, hs_err = 0;
    bool slope_zero = true;
    for (int r = 1; r < 63; ++r) {
        for (int col = 1; col < 63; ++col) {
            svf_err = std::max(svf_err, std::abs(so.svf.at(col, r) - 1.0));
            po_err = std::max(po_err, std::abs(so.openness.at(col, r) - 90.0));
            hs_err = std::max(hs_err, std::abs(hs.at(col, r) - std::sin(std::acos(-1.0) / 4)));
            slope_zero = slope_zero && slope.at(col, r) == 0.0;
        }
    }
    c.require(svf_err <= kFlatTol, "flat SVF error " + fmt("%.3g", svf_err));
    c.require(po_err <= kFlatTol, "flat PO error " + fmt("%.3g", po_err));
    c.require(slope_zero, "flat slope not exactly 0");
    c.require(hs_err <= kFlatTol, "flat hillshade error " + fmt("%.3g", hs_err));
    const DtmGrid plane = make_grid(16, 16, 0.5, [](int col, int) { return col * 0.5; });
    const auto ps = compute_slope(plane);
    double plane_err = 0;
    for (int r = 1; r < 15; ++r) {
        for (int col = 1; col < 15; ++col) plane_err = std::max(plane_err, std::abs(ps.at(col, r) - 45.0));
    }
    c.require(plane_err <= kPlaneSlopeTol, "plane slope error " + fmt("%.3g", plane_err));
    if (c.ok) c.detail = "max |dSVF| " + fmt("%.1e", svf_err) + ", |dPO| " + fmt("%.1e", po_err) + ", plane " + fmt("%.1e", plane_err);
}

void oracle_equivalence(Check& c) {
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const DtmGrid g = random_grid(64, 64, seed);
        const auto so = compute_svf_and_openness(g, {});
        const auto ref = at::oracle_svf_po(g, 16, 10.0, true);
        for (std::size_t i = 0; i < ref.svf.size(); ++i) {
            c.require(static_cast<bool>(so.svf.nodata[i]) == static_cast<bool>(ref.nodata[i]), "nodata mismatch");
            if (ref.nodata[i]) continue;
            worst = std::max({worst, std::abs(so.svf.values[i] - ref.svf[i]), std::abs(so.openness.values[i] - ref.po[i])});
        }
    }
    c.require(worst <= kOracleTol, "max deviation " + fmt("%.3g", worst));
    if (c.ok) c.detail = "10 DTMs, max deviation " + fmt("%.1e", worst);
}

void rotation_invariance(Check& c) {
    const DtmGrid g = random_grid(48, 40, 77);
    const DtmGrid rg = rotate_cw(g);
    const auto a = compute_svf_and_openness(g, {16, 10.0});
    const auto b = compute_svf_and_openness(rg, {16, 10.0});
    c.require(same(rotate_cw(a.svf), b.svf), "SVF does not commute with rotation");
    c.require(same(rotate_cw(a.openness), b.openness), "PO does not commute with rotation");
    c.require(same(rotate_cw(compute_slope(g)), compute_slope(rg)), "slope does not commute with rotation");
    const DtmGrid ramp = make_grid(12, 12, 0.5, [](int col, int) { return 0.4 * col; });
    const ChannelRaster h1 = rotate_cw(compute_hillshade(ramp, 0, 45));
    const ChannelRaster h2 = compute_hillshade(rotate_cw(ramp), 0, 45);
    c.require(!same(h1, h2), "hillshade unexpectedly rotation invariant");
    if (c.ok) c.detail = "bit-exact; hillshade differs by " + fmt("%.3f", std::abs(h1.at(5, 5) - h2.at(5, 5)));
}

void pixel_metric_checks(Check& c) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BinaryMask p = random_mask(128, 128, 0.1 + 0.008 * static_cast<double>(seed), seed);
        const BinaryMask g = random_mask(128, 128, 0.5, seed + 1000);
        const PixelMetrics m = pixel_metrics(p, g);
        const EvalCounts ref = at::oracle_counts(p, g);
        c.require(m.counts == ref, "count mismatch at seed " + std::to_string(seed));
        if (m.iou && m.precision && m.recall) {
            c.require(*m.iou <= *m.precision && *m.iou <= *m.recall, "IoU exceeds P or R");
        }
    }
    BinaryMask a(32, 32), b(32, 32);
    for (int i = 0; i < 100; ++i) {
        a.set(i % 10, i / 10);
        b.set(20 + i % 10, 20 + i / 10);
    }
    const auto perfect = pixel_metrics(a, a);
    c.require(*perfect.iou == 1 && *perfect.precision == 1 && *perfect.recall == 1, "perfect != 1/1/1");
    const auto disjoint = pixel_metrics(a, b);
    c.require(*disjoint.iou == 0 && *disjoint.precision == 0 && *disjoint.recall == 0, "disjoint != 0/0/0");
    if (c.ok) c.detail = "100 pairs exact";
}

void vectorize_lossless(Check& c) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        BinaryMask m = random_mask(48, 40, 0.35, seed + 7);
        // A ring with a hole in every mask.
        for (int i = 0; i < 12; ++i) {
            m.set(20 + i, 14);
            m.set(20 + i, 25);
            m.set(20, 14 + i);
            m.set(31, 14 + i);
        }
        for (int r = 15; r < 25; ++r) {
            for (int col = 21; col < 31; ++col) m.bits[m.index(col, r)] = 0;
        }
        const GridGeometry geo{m.width, m.height, 0.5, 500.0, 900.0};
        const auto world = vectorize_mask(m, geo);
        std::vector<LabelledPolygon> px;
        double area = 0;
        for (const auto& p : world) {
            area += polygon_area(p);
            px.push_back(to_pixel_space(p, geo));
        }
        c.require(rasterize_polygons(world, geo).bits == m.bits, "round trip differs at seed " + std::to_string(seed));
        c.require(at::oracle_rasterize(px, m.width, m.height).bits == m.bits, "oracle raster differs at seed " + std::to_string(seed));
        c.require(area == 0.25 * static_cast<double>(m.count()), "area != count * 0.25 at seed " + std::to_string(seed));
    }
    if (c.ok) c.detail = "50 masks lossless, area exact";
}

void intersection_fixture(Check& c) {
    std::vector<LabelledPolygon> gt, pred;
    for (int i = 0; i < 513; ++i) gt.push_back(square(3.0 * i, 0, 1, "gt-" + std::to_string(i)));
    for (int k = 0; k < 46; ++k) pred.push_back(box(6.0 * k + 0.5, 0.2, 6.0 * k + 3.5, 0.8, "b" + std::to_string(k)));
    for (int i = 92; i < 426; ++i) pred.push_back(box(3.0 * i + 0.25, 0.25, 3.0 * i + 0.75, 0.75, "h" + std::to_string(i)));
    for (int k = 0; k < 98; ++k) pred.push_back(square(3.0 * k, 10, 1, "m" + std::to_string(k)));
    const TopologyReport t = topology_report(gt, pred);
    const double gp = *t.overall.gt.pct(), pp = *t.overall.pred.pct();
    c.require(t.overall.gt.total == 513 && t.overall.pred.total == 478, "fixture totals wrong");
    c.require(gp == 426.0 / 513.0 && pp == 380.0 / 478.0, "pct not exact");
    c.require(std::abs(gp - 0.830) < 5e-4 && std::abs(pp - 0.795) < 5e-4, "rounded pct mismatch");
    if (c.ok) c.detail = "GT " + fmt("%.3f", gp) + ", pred " + fmt("%.3f", pp);
}

void quartile_engine(Check& c) {
    std::vector<LabelledPolygon> gt, pred;
    for (int a = 1; a <= 8; ++a) {
        gt.push_back(square(10.0 * a, 0, std::sqrt(static_cast<double>(a)), "g" + std::to_string(a)));
        if (a % 2 == 0) pred.push_back(square(10.0 * a + 0.1, 0.1, 0.5, "p" + std::to_string(a)));
    }
    const QuartileReport q = quartile_analysis(gt, pred);
    for (std::size_t k = 0; k < 4; ++k) {
        c.require(q.quartiles[k].pct() == 0.5, "quartile pct != 0.5");
        c.require(std::abs(q.quartiles[k].max_area - 2.0 * static_cast<double>(k + 1)) < 1e-9, "quartile max area");
    }
    Rng rng(3);
    for (std::size_t n = 4; n <= 40; ++n) {
        std::vector<LabelledPolygon> g, p;
        for (std::size_t i = 0; i < n; ++i) {
            g.push_back(square(20.0 * static_cast<double>(i), 0, 1.0 + static_cast<double>(rng.uniform_int(0, 6)),
                               "g" + std::to_string(i)));
            if (rng.uniform01() < 0.5) p.push_back(square(20.0 * static_cast<double>(i), 0, 0.5, "p"));
        }
        const QuartileReport r = quartile_analysis(g, p);
        std::size_t total = 0, lo = n, hi = 0;
        double prev = 0;
        for (const auto& row : r.quartiles) {
            total += row.count;
            lo = std::min(lo, row.count);
            hi = std::max(hi, row.count);
            c.require(row.max_area >= prev, "max areas not non-decreasing at n=" + std::to_string(n));
            prev = row.max_area;
        }
        c.require(total == n && hi - lo <= 1, "group sizes wrong at n=" + std::to_string(n));
    }
    if (c.ok) c.detail = "pcts 0.5; invariants for n=4..40";
}

void augmentation_rule(Check& c) {
    at::SceneParams sp;
    sp.size = 640;
    sp.mesas = 4;
    sp.rings = 2;
    const auto scene = at::make_scene(sp);
    DatasetConfig cfg = DatasetConfig::for_class(ObjectClass::platform);
    cfg.variants_per_object = 4;
    cfg.background_tile_count = 3;
    cfg.rng_seed = 2024;
    const HorizonScanParams quick{8, 4.0};
    at::TempDir a, b;
    (void)build_dataset(scene.grid, scene.gt, cfg, quick, default_stretch(), a.path());
    (void)build_dataset(scene.grid, scene.gt, cfg, quick, default_stretch(), b.path());
    const std::string manifest = slurp(a / "manifest.jsonl");
    c.require(!manifest.empty() && manifest == slurp(b / "manifest.jsonl"), "manifests differ between runs");

    const BinaryMask gt = rasterize_polygons(scene.gt, scene.grid.geometry());
    std::istringstream lines(manifest);
    std::string line;
    std::size_t instances = 0, backgrounds = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const auto& inst : j.at("instances")) {
            const auto& bb = inst.at("bbox");
            c.require(bb[2].get<double>() - bb[0].get<double>() >= kMinLabelPx &&
                          bb[3].get<double>() - bb[1].get<double>() >= kMinLabelPx,
                      "instance below 10 px");
            ++instances;
        }
        if (j.at("kind") == "background") {
            ++backgrounds;
            c.require(j.at("scale") == 1, "background drawn off the native scale");
            const int col = j.at("window").at("col"), row = j.at("window").at("row"), size = j.at("window").at("size");
            std::size_t hits = 0;
            for (int r = row; r < row + size; ++r) {
                for (int x = col; x < col + size; ++x) hits += gt.get(x, r);
            }
            c.require(hits == 0, "background tile holds GT pixels");
        }
    }
    c.require(backgrounds == 3, "expected 3 background tiles");
    if (c.ok) c.detail = std::to_string(instances) + " instances, " + std::to_string(backgrounds) + " backgrounds, identical manifests";
}

void multiscale_merge(Check& c) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const BinaryMask fine = random_mask(61 + static_cast<int>(seed), 47, 0.03, seed);
        const BinaryMask coarse = downscale_mask_preserving_positive(fine, 2);
        for (int r = 0; r < fine.height; ++r) {
            for (int col = 0; col < fine.width; ++col) {
                if (fine.get(col, r)) c.require(coarse.get(col / 2, r / 2), "fine positive lost");
            }
        }
        const BinaryMask a = random_mask(40, 30, 0.2, seed + 50), b = random_mask(40, 30, 0.2, seed + 90);
        c.require(mask_or(a, b).bits == mask_or(b, a).bits, "OR not order independent");
        c.require(mask_or(a, a).bits == a.bits, "OR not idempotent");
    }
    at::SceneParams sp;
    sp.size = 512;
    sp.mesas = 4;
    sp.rings = 2;
    const auto scene = at::make_scene(sp);
    const Image8 sps = make_sps(scene.grid, {8, 5.0}, default_stretch()).image;
    BaselineBackend backend;
    std::size_t prev = 0;
    BinaryMask last;
    for (int stride : {256, 128, 64}) {
        InferenceConfig ic;
        ic.stride = stride;
        const BinaryMask m = multiscale_infer(sps, backend, ic);
        if (stride != 256) c.require(subset(last, m), "densifying stride lost positives");
        c.require(m.count() >= prev, "positive count shrank");
        prev = m.count();
        last = m;
    }
    if (c.ok) c.detail = "no loss; OR commutative, idempotent; strides 256>128>64 monotone";
}

void postfilter_boundary(Check& c) {
    BinaryMask m(100, 60);
    for (int r = 5; r < 45; ++r) {
        for (int col = 5; col < 19; ++col) m.set(col, r);
    }
    for (int r = 5; r < 20; ++r) {
        for (int col = 40; col < 55; ++col) m.set(col, r);
    }
    const BinaryMask f = filter_small_regions(m, 15);
    c.require(!f.get(10, 10), "14x40 component kept");
    c.require(f.get(45, 10) && f.count() == 225, "15x15 component removed");
    c.require(filter_small_regions(f, 15).bits == f.bits, "filter not idempotent");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const BinaryMask r = filter_small_regions(random_mask(64, 64, 0.5, seed), 15);
        c.require(filter_small_regions(r, 15).bits == r.bits, "filter not idempotent on random mask");
    }
    if (c.ok) c.detail = "14x40 removed, 15x15 kept, idempotent";
}

void end_to_end(Check& c) {
    const auto scene = at::make_scene({});
    const DtmGrid& grid = scene.grid;
    c.require(grid.width() == 1024 && grid.height() == 1024, "scene is not 1024x1024");
    const SpsImage sps = make_sps(grid, {}, default_stretch(), {1});
    BaselineBackend backend;
    InferenceConfig ic;
    BinaryMask raw = multiscale_infer(sps.image, backend, ic);
    raw = mask_and(raw, valid_pixel_mask(grid));
    const BinaryMask filtered = filter_small_regions(raw, 15);
    const auto pred = vectorize_mask(filtered, grid.geometry());
    const BinaryMask gt = rasterize_polygons(scene.gt, grid.geometry());
    const EvalReport report = evaluate(scene.gt, pred, pixel_metrics(filtered, gt));
    const double gt_pct = report.topology.overall.gt.pct().value_or(0.0);
    const double iou = report.pixel->iou.value_or(0.0);
    c.require(gt_pct >= kMinGtPct, "GT intersection pct " + fmt("%.3f", gt_pct));
    c.require(iou >= kMinIou, "pixel IoU " + fmt("%.3f", iou));
    c.detail = "GT pct " + fmt("%.3f", gt_pct) + ", IoU " + fmt("%.3f", iou) + ", " + std::to_string(pred.size()) +
               " polygons for " + std::to_string(scene.gt.size()) + " GT" + (c.ok ? "" : " | " + c.detail);
}

}  // namespace

int main() {
    criterion("terrain-analytics", kAnalyticsBudgetS, terrain_analytics);
    criterion("oracle-equivalence", kOracleBudgetS, oracle_equivalence);
    criterion("rotation-invariance", 0, rotation_invariance);
    criterion("pixel-metrics", 0, pixel_metric_checks);
    criterion("vectorize-rasterize", 0, vectorize_lossless);
    criterion("intersection-fixture", 0, intersection_fixture);
    criterion("quartile-engine", 0, quartile_engine);
    criterion("augmentation-rule", 0, augmentation_rule);
    criterion("multiscale-merge", 0, multiscale_merge);
    criterion("postfilter-boundary", 0, postfilter_boundary);
    criterion("end-to-end-scene", kEndToEndBudgetS, end_to_end);
    std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
