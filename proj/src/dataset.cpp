#include "archseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "archseg/error.hpp"
#include "archseg/geometry.hpp"
#include "archseg/io.hpp"

namespace archseg {

// ---------------------------------------------------------------------------
// Rng

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw InvalidArgument("Rng::uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return lo + static_cast<std::int64_t>(v % span);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : key) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = splitmix64(base);
    s = splitmix64(s ^ h);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    return s;
}

// ---------------------------------------------------------------------------
// Config

int default_variants(ObjectClass cls) noexcept { return cls == ObjectClass::platform ? 15 : 10; }

DatasetConfig DatasetConfig::for_class(ObjectClass cls) {
    DatasetConfig c;
    c.cls = cls;
    c.variants_per_object = default_variants(cls);
    return c;
}

void DatasetConfig::validate() const {
    if (variants_per_object < 1) throw InvalidArgument("dataset: variants_per_object must be >= 1");
    if (tile_size <= 0) throw InvalidArgument("dataset: tile_size must be positive");
    if (scales.empty()) throw InvalidArgument("dataset: scales must not be empty");
    for (int s : scales) {
        if (s < 1) throw InvalidArgument("dataset: scale factors must be integers >= 1");
    }
    if (background_tile_count < 0) throw InvalidArgument("dataset: background_tile_count must be >= 0");
    if (max_translation_px < 0) throw InvalidArgument("dataset: max_translation_px must be >= 0");
    if (min_label_px < 1) throw InvalidArgument("dataset: min_label_px must be >= 1");
}

// ---------------------------------------------------------------------------
// Tiling

namespace {

Point bbox_center(const LabelledPolygon& poly) {
    const Bbox b = polygon_bbox(poly);
    return {0.5 * (b.min_x + b.max_x), 0.5 * (b.min_y + b.max_y)};
}

LabelledPolygon map_polygon(const LabelledPolygon& poly, const std::function<Point(const Point&)>& fn) {
    LabelledPolygon out;
    out.cls = poly.cls;
    out.id = poly.id;
    for (const auto& p : poly.outer) out.outer.push_back(fn(p));
    for (const auto& h : poly.holes) {
        Ring r;
        for (const auto& p : h) r.push_back(fn(p));
        out.holes.push_back(std::move(r));
    }
    return out;
}

void require_tile_fits(const Image8& image, int tile_size, const char* what) {
    if (image.width < tile_size || image.height < tile_size) {
        throw InvalidArgument(std::string(what) + ": image (" + std::to_string(image.width) + "x" +
                              std::to_string(image.height) + ") is smaller than the tile size " +
                              std::to_string(tile_size));
    }
}

// Bilinear sample at a continuous index position; taps outside the image are 0.
std::uint8_t sample_bilinear(const Image8& img, double x, double y, int ch) {
    const double x0 = std::floor(x), y0 = std::floor(y);
    const double fx = x - x0, fy = y - y0;
    const int ix = static_cast<int>(x0), iy = static_cast<int>(y0);
    auto px = [&](int c, int r) -> double {
        if (c < 0 || r < 0 || c >= img.width || r >= img.height) return 0.0;
        return img.at(c, r, ch);
    };
    const double v = (1 - fx) * (1 - fy) * px(ix, iy) + fx * (1 - fy) * px(ix + 1, iy) +
                     (1 - fx) * fy * px(ix, iy + 1) + fx * fy * px(ix + 1, iy + 1);
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

}  // namespace

std::vector<LabelledPolygon> tile_instances(std::span<const LabelledPolygon> labels,
                                            const std::function<Point(const Point&)>& to_tile,
                                            int tile_size, int min_label_px) {
    const Bbox rect{0.0, 0.0, static_cast<double>(tile_size), static_cast<double>(tile_size)};
    std::vector<LabelledPolygon> out;
    for (const auto& label : labels) {
        const LabelledPolygon moved = map_polygon(label, to_tile);
        if (!polygon_bbox(moved).overlaps(rect)) continue;
        auto clipped = clip_polygon(moved, rect);
        if (!clipped) continue;
        const Bbox b = polygon_bbox(*clipped);
        if (b.width() < min_label_px || b.height() < min_label_px) continue;
        out.push_back(std::move(*clipped));
    }
    return out;
}

std::vector<DatasetSample> extract_object_tiles(const Image8& image,
                                                std::span<const LabelledPolygon> labels,
                                                int tile_size, int min_label_px) {
    require_tile_fits(image, tile_size, "extract_object_tiles");
    std::vector<DatasetSample> out;
    out.reserve(labels.size());
    for (const auto& object : labels) {
        const Point c = bbox_center(object);
        const int col = std::clamp(static_cast<int>(std::lround(c.x)) - tile_size / 2, 0,
                                   image.width - tile_size);
        const int row = std::clamp(static_cast<int>(std::lround(c.y)) - tile_size / 2, 0,
                                   image.height - tile_size);
        DatasetSample s;
        s.image = image.crop(col, row, tile_size, tile_size);
        s.instances = tile_instances(
            labels, [&](const Point& p) { return Point{p.x - col, p.y - row}; }, tile_size,
            min_label_px);
        s.provenance.kind = "tile";
        s.provenance.object_id = object.id;
        s.provenance.window_col = col;
        s.provenance.window_row = row;
        s.provenance.center_col = c.x;
        s.provenance.center_row = c.y;
        out.push_back(std::move(s));
    }
    return out;
}

Augmentation draw_augmentation(Rng& rng, double max_translation_px) {
    Augmentation a;
    a.rotation_deg = rng.uniform(0.0, 360.0);
    a.translate_x = rng.uniform(-max_translation_px, max_translation_px);
    a.translate_y = rng.uniform(-max_translation_px, max_translation_px);
    return a;
}

DatasetSample augment_sample(const Image8& image, std::span<const LabelledPolygon> labels,
                             const LabelledPolygon& object, const Augmentation& aug, int tile_size,
                             int min_label_px) {
    const Point center = bbox_center(object);
    const double theta = aug.rotation_deg * std::numbers::pi / 180.0;
    double cs = std::cos(theta), sn = std::sin(theta);
    // Quarter turns map pixels onto pixels exactly.
    if (std::abs(cs) < 1e-12) cs = 0.0;
    if (std::abs(sn) < 1e-12) sn = 0.0;
    const double half = 0.5 * tile_size;
    const double ox = half + aug.translate_x;
    const double oy = half + aug.translate_y;

    auto forward = [&](const Point& p) {
        const double dx = p.x - center.x, dy = p.y - center.y;
        return Point{cs * dx - sn * dy + ox, sn * dx + cs * dy + oy};
    };

    DatasetSample s;
    s.image = Image8(tile_size, tile_size, image.channels);
    for (int v = 0; v < tile_size; ++v) {
        for (int u = 0; u < tile_size; ++u) {
            const double dx = u + 0.5 - ox, dy = v + 0.5 - oy;
            const double sx = cs * dx + sn * dy + center.x;
            const double sy = -sn * dx + cs * dy + center.y;
            for (int ch = 0; ch < image.channels; ++ch) {
                s.image.at(u, v, ch) = sample_bilinear(image, sx - 0.5, sy - 0.5, ch);
            }
        }
    }
    s.instances = tile_instances(labels, forward, tile_size, min_label_px);
    s.provenance.kind = "augmented";
    s.provenance.object_id = object.id;
    s.provenance.center_col = center.x;
    s.provenance.center_row = center.y;
    s.provenance.augmentation = aug;
    return s;
}

DatasetSample augment_sample(const Image8& image, std::span<const LabelledPolygon> labels,
                             const LabelledPolygon& object, const DatasetConfig& config, Rng& rng) {
    const Augmentation aug = draw_augmentation(rng, config.max_translation_px);
    return augment_sample(image, labels, object, aug, config.tile_size, config.min_label_px);
}

std::vector<DatasetSample> sample_background(const Image8& image,
                                             std::span<const LabelledPolygon> labels, int count,
                                             int tile_size, Rng& rng) {
    if (count < 0) throw InvalidArgument("sample_background: count must be >= 0");
    std::vector<DatasetSample> out;
    if (count == 0) return out;
    require_tile_fits(image, tile_size, "sample_background");

    // Summed-area table of ground-truth pixels.
    const BinaryMask gt = rasterize_pixel_polygons(labels, image.width, image.height);
    const std::size_t sw = static_cast<std::size_t>(image.width) + 1;
    std::vector<std::uint32_t> sat(sw * (static_cast<std::size_t>(image.height) + 1), 0);
    for (int r = 0; r < image.height; ++r) {
        std::uint32_t run = 0;
        for (int c = 0; c < image.width; ++c) {
            run += gt.bits[gt.index(c, r)];
            sat[(r + 1) * sw + c + 1] = sat[r * sw + c + 1] + run;
        }
    }
    auto gt_pixels = [&](int col, int row) {
        const std::size_t c0 = col, r0 = row, c1 = col + tile_size, r1 = row + tile_size;
        return sat[r1 * sw + c1] + sat[r0 * sw + c0] - sat[r0 * sw + c1] - sat[r1 * sw + c0];
    };

    const std::int64_t budget = 1000LL * count;
    std::int64_t rejections = 0;
    while (static_cast<int>(out.size()) < count) {
        const int col = static_cast<int>(rng.uniform_int(0, image.width - tile_size));
        const int row = static_cast<int>(rng.uniform_int(0, image.height - tile_size));
        if (gt_pixels(col, row) != 0) {
            if (++rejections >= budget) {
                throw Error("sample_background: insufficient background (" +
                            std::to_string(out.size()) + " of " + std::to_string(count) +
                            " tiles found after " + std::to_string(rejections) + " rejections)");
            }
            continue;
        }
        DatasetSample s;
        s.image = image.crop(col, row, tile_size, tile_size);
        s.provenance.kind = "background";
        s.provenance.window_col = col;
        s.provenance.window_row = row;
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scaling

namespace {

struct Taps1D {
    int i0 = 0, i1 = 0;
    double f = 0.0;
};

// Pixel-centre aligned source taps for output index u.
Taps1D upsample_taps(int u, int factor, int n) {
    double s = (u + 0.5) / factor - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    Taps1D t;
    t.i0 = static_cast<int>(std::floor(s));
    t.i1 = std::min(t.i0 + 1, n - 1);
    t.f = s - t.i0;
    return t;
}

void check_factor(int factor) {
    if (factor < 1) throw InvalidArgument("scale: factor must be an integer >= 1");
}

}  // namespace

Image8 scale_image_anisotropic(const Image8& image, int factor) {
    check_factor(factor);
    if (factor == 1) return image;
    Image8 out(image.width * factor, image.height * factor, image.channels);
    for (int v = 0; v < out.height; ++v) {
        const Taps1D ty = upsample_taps(v, factor, image.height);
        for (int u = 0; u < out.width; ++u) {
            const Taps1D tx = upsample_taps(u, factor, image.width);
            for (int ch = 0; ch < image.channels; ++ch) {
                const double top = (1 - tx.f) * image.at(tx.i0, ty.i0, ch) + tx.f * image.at(tx.i1, ty.i0, ch);
                const double bot = (1 - tx.f) * image.at(tx.i0, ty.i1, ch) + tx.f * image.at(tx.i1, ty.i1, ch);
                const double val = (1 - ty.f) * top + ty.f * bot;
                out.at(u, v, ch) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(val), 0, 255));
            }
        }
    }
    return out;
}

DtmGrid scale_grid_anisotropic(const DtmGrid& grid, int factor) {
    check_factor(factor);
    if (factor == 1) return grid;
    GridGeometry g = grid.geometry();
    g.width *= factor;
    g.height *= factor;
    g.cell_size /= factor;
    std::vector<double> z(g.pixel_count());
    std::vector<std::uint8_t> nd(g.pixel_count(), 0);
    for (int v = 0; v < g.height; ++v) {
        const Taps1D ty = upsample_taps(v, factor, grid.height());
        for (int u = 0; u < g.width; ++u) {
            const Taps1D tx = upsample_taps(u, factor, grid.width());
            const std::size_t idx = static_cast<std::size_t>(v) * g.width + u;
            const double w00 = (1 - tx.f) * (1 - ty.f), w10 = tx.f * (1 - ty.f);
            const double w01 = (1 - tx.f) * ty.f, w11 = tx.f * ty.f;
            const bool missing = (w00 > 0 && grid.is_nodata(tx.i0, ty.i0)) ||
                                 (w10 > 0 && grid.is_nodata(tx.i1, ty.i0)) ||
                                 (w01 > 0 && grid.is_nodata(tx.i0, ty.i1)) ||
                                 (w11 > 0 && grid.is_nodata(tx.i1, ty.i1));
            if (missing) {
                nd[idx] = 1;
                continue;
            }
            auto tap = [&](double w, int c, int r) { return w > 0 ? w * grid.at(c, r) : 0.0; };
            z[idx] = tap(w00, tx.i0, ty.i0) + tap(w10, tx.i1, ty.i0) + tap(w01, tx.i0, ty.i1) +
                     tap(w11, tx.i1, ty.i1);
        }
    }
    return DtmGrid(g, std::move(z), std::move(nd), grid.crs());
}

BinaryMask scale_mask_nearest(const BinaryMask& mask, int factor) {
    check_factor(factor);
    if (factor == 1) return mask;
    BinaryMask out(mask.width * factor, mask.height * factor);
    for (int v = 0; v < out.height; ++v) {
        for (int u = 0; u < out.width; ++u) out.bits[out.index(u, v)] = mask.bits[mask.index(u / factor, v / factor)];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset generation

DatasetSummary generate_dataset(const DtmGrid& grid, const std::vector<LabelledPolygon>& labels,
                                const DatasetConfig& config, const HorizonScanParams& horizon,
                                const StretchParams& stretch, const SampleSink& sink,
                                ExecutionOptions exec) {
    config.validate();
    DatasetSummary summary;
    bool backgrounds_done = false;
    for (int scale : config.scales) {
        const DtmGrid scaled = scale_grid_anisotropic(grid, scale);
        const SpsImage sps = make_sps(scaled, horizon, stretch, exec);

        std::vector<LabelledPolygon> all_px, class_px;
        for (const auto& l : labels) {
            all_px.push_back(to_pixel_space(l, scaled.geometry()));
            if (l.cls == config.cls) class_px.push_back(all_px.back());
        }

        for (const auto& object : class_px) {
            for (int v = 0; v < config.variants_per_object; ++v) {
                const std::uint64_t seed = derive_seed(config.rng_seed, object.id,
                                                       static_cast<std::uint64_t>(v),
                                                       static_cast<std::uint64_t>(scale));
                Rng rng(seed);
                DatasetSample s = augment_sample(sps.image, class_px, object, config, rng);
                s.provenance.scale = scale;
                s.provenance.variant = v;
                s.provenance.seed = seed;
                sink(s);
                ++summary.augmented;
                ++summary.samples;
            }
        }

        if (!backgrounds_done) {
            backgrounds_done = true;
            const std::uint64_t seed = derive_seed(config.rng_seed, "background", 0,
                                                   static_cast<std::uint64_t>(scale));
            Rng rng(seed);
            auto bg = sample_background(sps.image, all_px, config.background_tile_count,
                                        config.tile_size, rng);
            for (std::size_t i = 0; i < bg.size(); ++i) {
                bg[i].provenance.scale = scale;
                bg[i].provenance.variant = static_cast<int>(i);
                bg[i].provenance.seed = seed;
                sink(bg[i]);
                ++summary.background;
                ++summary.samples;
            }
        }
    }
    return summary;
}

namespace {

nlohmann::json ring_coords(const Ring& ring) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ring) a.push_back({p.x, p.y});
    return a;
}

}  // namespace

nlohmann::json manifest_entry(const DatasetSample& sample, std::size_t index,
                              const std::string& image_path) {
    const SampleProvenance& p = sample.provenance;
    nlohmann::json instances = nlohmann::json::array();
    for (const auto& inst : sample.instances) {
        const Bbox b = polygon_bbox(inst);
        nlohmann::json holes = nlohmann::json::array();
        for (const auto& h : inst.holes) holes.push_back(ring_coords(h));
        instances.push_back({{"class", std::string(to_string(inst.cls))},
                             {"id", inst.id},
                             {"bbox", {b.min_x, b.min_y, b.max_x, b.max_y}},
                             {"outer", ring_coords(inst.outer)},
                             {"holes", std::move(holes)}});
    }
    nlohmann::json j = {{"index", index},
                        {"image", image_path},
                        {"kind", p.kind},
                        {"object_id", p.object_id},
                        {"scale", p.scale},
                        {"variant", p.variant},
                        {"seed", p.seed},
                        {"width", sample.image.width},
                        {"height", sample.image.height},
                        {"instances", std::move(instances)}};
    if (p.augmentation) {
        j["center"] = {p.center_col, p.center_row};
        j["augmentation"] = {{"rotation_deg", p.augmentation->rotation_deg},
                             {"translate_x", p.augmentation->translate_x},
                             {"translate_y", p.augmentation->translate_y}};
    } else {
        j["window"] = {{"col", p.window_col}, {"row", p.window_row}, {"size", sample.image.width}};
    }
    return j;
}

DatasetSummary build_dataset(const DtmGrid& grid, const std::vector<LabelledPolygon>& labels,
                             const DatasetConfig& config, const HorizonScanParams& horizon,
                             const StretchParams& stretch, const std::filesystem::path& out_dir,
                             ExecutionOptions exec) {
    std::filesystem::create_directories(out_dir / "images");
    std::ofstream manifest(out_dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    if (!manifest) throw IoError("build_dataset: cannot write manifest in '" + out_dir.string() + "'");
    std::size_t index = 0;
    auto summary = generate_dataset(
        grid, labels, config, horizon, stretch,
        [&](const DatasetSample& s) {
            char name[32];
            std::snprintf(name, sizeof name, "images/%06zu.png", index);
            write_image(s.image, out_dir / name);
            manifest << manifest_entry(s, index, name).dump() << '\n';
            ++index;
        },
        exec);
    if (!manifest.flush()) throw IoError("build_dataset: manifest write failed");
    return summary;
}

std::vector<int> split_assignments(std::size_t n, std::uint64_t seed, double train_fraction,
                                   double val_fraction) {
    if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0) {
        throw InvalidArgument("split_assignments: fractions must be non-negative and sum to <= 1");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(order[i - 1], order[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * n));
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * n));
    std::vector<int> out(n, 2);
    for (std::size_t k = 0; k < n; ++k) out[order[k]] = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
    return out;
}

}  // namespace archseg
