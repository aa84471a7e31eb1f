#include "archseg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "archseg/geometry.hpp"
#include "archseg/io.hpp"
#include "archseg/metrics.hpp"
#include "archseg/postproc.hpp"

namespace archseg::cli {
namespace fs = std::filesystem;
using nlohmann::json;

DatasetConfig PipelineConfig::dataset_config() const {
    DatasetConfig d = DatasetConfig::for_class(cls);
    if (variants_per_object > 0) d.variants_per_object = variants_per_object;
    d.scales = dataset_scales;
    d.background_tile_count = background_tiles;
    d.rng_seed = seed;
    d.max_translation_px = max_translation_px;
    d.min_label_px = min_label_px;
    return d;
}

InferenceConfig PipelineConfig::inference_config() const {
    InferenceConfig c;
    c.stride = stride;
    c.scales = inference_scales;
    c.cls = cls;
    return c;
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw UsageError("config: '" + display() + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& dst) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            dst = it->template get<T>();
        } catch (const json::exception&) {
            throw UsageError("config: key '" + qualified(key) + "' has the wrong type");
        }
    }

    void get_path(const char* key, fs::path& dst) {
        std::string s = dst.string();
        get(key, s);
        dst = s;
    }

    void get_class(const char* key, ObjectClass& dst) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_string()) throw UsageError("config: key '" + qualified(key) + "' must be a string");
        try {
            dst = parse_object_class(it->get<std::string>());
        } catch (const ParseError& e) {
            throw UsageError("config: key '" + qualified(key) + "': " + e.what());
        }
    }

    void get_stretch(const char* key, ChannelStretch& dst) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        Section s(*it, qualified(key));
        s.get("min", dst.min);
        s.get("max", dst.max);
        s.get("invert", dst.invert);
        s.finish();
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
    [[nodiscard]] Section child(const char* key) {
        seen_.insert(key);
        return Section(j_.at(key), qualified(key));
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw UsageError("config: unknown key '" + qualified(k) + "'");
        }
    }

private:
    [[nodiscard]] std::string display() const { return path_.empty() ? "(root)" : path_; }
    [[nodiscard]] std::string qualified(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json stretch_json(const ChannelStretch& s) { return {{"min", s.min}, {"max", s.max}, {"invert", s.invert}}; }

std::string backend_kind_name(BackendKind k) { return k == BackendKind::subprocess ? "subprocess" : "baseline"; }

BackendKind parse_backend_kind(const std::string& s) {
    if (s == "baseline") return BackendKind::baseline;
    if (s == "subprocess") return BackendKind::subprocess;
    throw UsageError("unknown backend '" + s + "' (accepted: baseline, subprocess)");
}

}  // namespace

void apply_config_json(PipelineConfig& cfg, const json& j) {
    Section root(j, "");
    root.get_path("dtm", cfg.dtm);
    root.get_path("labels", cfg.labels);
    root.get_path("out", cfg.out);
    root.get_class("class", cfg.cls);
    root.get("seed", cfg.seed);
    root.get("threads", cfg.threads);
    root.get("representation", cfg.representation);
    if (root.has("terrain")) {
        Section t = root.child("terrain");
        t.get("n_directions", cfg.horizon.n_directions);
        t.get("radius_m", cfg.horizon.radius_m);
        t.get("clamp_openness", cfg.horizon.clamp_openness);
        t.get("hillshade_azimuth_deg", cfg.hillshade.azimuth_deg);
        t.get("hillshade_altitude_deg", cfg.hillshade.altitude_deg);
        if (t.has("stretch")) {
            Section s = t.child("stretch");
            s.get_stretch("svf", cfg.stretch.svf);
            s.get_stretch("openness", cfg.stretch.openness);
            s.get_stretch("slope", cfg.stretch.slope);
            s.finish();
        }
        t.finish();
    }
    if (root.has("dataset")) {
        Section d = root.child("dataset");
        d.get("variants_per_object", cfg.variants_per_object);
        d.get("scales", cfg.dataset_scales);
        d.get("background_tiles", cfg.background_tiles);
        d.get("max_translation_px", cfg.max_translation_px);
        d.get("min_label_px", cfg.min_label_px);
        d.finish();
    }
    if (root.has("inference")) {
        Section i = root.child("inference");
        i.get("stride", cfg.stride);
        i.get("scales", cfg.inference_scales);
        i.get("rederive_fine", cfg.rederive_fine);
        i.finish();
    }
    if (root.has("backend")) {
        Section b = root.child("backend");
        std::string kind = backend_kind_name(cfg.backend.kind);
        b.get("kind", kind);
        cfg.backend.kind = parse_backend_kind(kind);
        b.get("command", cfg.backend.command);
        b.get("args", cfg.backend.args);
        b.get_path("batch_root", cfg.backend.batch_root);
        b.get("timeout_s", cfg.backend.timeout_s);
        b.get("batch_size", cfg.backend.batch_size);
        b.get("keep_batches", cfg.backend.keep_batches);
        b.get("slope_threshold", cfg.backend.baseline.slope_threshold);
        b.get("close_radius", cfg.backend.baseline.close_radius);
        b.finish();
    }
    if (root.has("postproc")) {
        Section p = root.child("postproc");
        p.get("min_bbox_px", cfg.min_bbox_px);
        p.finish();
    }
    root.finish();
}

json to_json(const PipelineConfig& c) {
    return {
        {"dtm", c.dtm.string()},
        {"labels", c.labels.string()},
        {"out", c.out.string()},
        {"class", std::string(to_string(c.cls))},
        {"seed", c.seed},
        {"threads", c.threads},
        {"representation", c.representation},
        {"terrain",
         {{"n_directions", c.horizon.n_directions},
          {"radius_m", c.horizon.radius_m},
          {"clamp_openness", c.horizon.clamp_openness},
          {"hillshade_azimuth_deg", c.hillshade.azimuth_deg},
          {"hillshade_altitude_deg", c.hillshade.altitude_deg},
          {"stretch",
           {{"svf", stretch_json(c.stretch.svf)},
            {"openness", stretch_json(c.stretch.openness)},
            {"slope", stretch_json(c.stretch.slope)}}}}},
        {"dataset",
         {{"variants_per_object", c.dataset_config().variants_per_object},
          {"scales", c.dataset_scales},
          {"background_tiles", c.background_tiles},
          {"max_translation_px", c.max_translation_px},
          {"min_label_px", c.min_label_px}}},
        {"inference",
         {{"window", kTileSize}, {"stride", c.stride}, {"scales", c.inference_scales}, {"rederive_fine", c.rederive_fine}}},
        {"backend",
         {{"kind", backend_kind_name(c.backend.kind)},
          {"command", c.backend.command},
          {"args", c.backend.args},
          {"batch_root", c.backend.batch_root.string()},
          {"timeout_s", c.backend.timeout_s},
          {"batch_size", c.backend.batch_size},
          {"keep_batches", c.backend.keep_batches},
          {"slope_threshold", c.backend.baseline.slope_threshold},
          {"close_radius", c.backend.baseline.close_radius}}},
        {"postproc", {{"min_bbox_px", c.min_bbox_px}}},
    };
}

// ---------------------------------------------------------------------------
// Representations

const std::vector<std::string>& representation_names() {
    static const std::vector<std::string> names{"sps", "svf", "po", "slope", "hillshade", "elevation"};
    return names;
}

Image8 representation_image(const DtmGrid& grid, const std::string& repr, const PipelineConfig& cfg) {
    const ExecutionOptions exec = cfg.execution();
    if (repr == "sps") return make_sps(grid, cfg.horizon, cfg.stretch, exec).image;
    if (repr == "svf") return replicate_single_channel(compute_svf(grid, cfg.horizon, exec), cfg.stretch.svf);
    if (repr == "po") {
        return replicate_single_channel(compute_positive_openness(grid, cfg.horizon, exec), cfg.stretch.openness);
    }
    if (repr == "slope") return replicate_single_channel(compute_slope(grid, exec), cfg.stretch.slope);
    if (repr == "hillshade") {
        return replicate_single_channel(
            compute_hillshade(grid, cfg.hillshade.azimuth_deg, cfg.hillshade.altitude_deg, exec), unit_stretch());
    }
    if (repr == "elevation") return replicate_single_channel(normalize_elevation(grid), unit_stretch());
    throw UsageError("unknown representation '" + repr + "' (accepted: sps, svf, po, slope, hillshade, elevation)");
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

// Flag values are recorded separately and laid over the config after the
// --config file has been applied.
class Overrides {
public:
    template <class T, class Setter>
    CLI::Option* option(CLI::App* app, const std::string& name, const std::string& desc, T initial,
                        Setter set) {
        auto store = std::make_shared<T>(std::move(initial));
        CLI::Option* opt = app->add_option(name, *store, desc)->capture_default_str();
        apply_.push_back([opt, store, set](PipelineConfig& c) {
            if (opt->count() > 0) set(c, *store);
        });
        return opt;
    }

    template <class Setter>
    CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& desc, Setter set) {
        CLI::Option* opt = app->add_flag(name, desc);
        apply_.push_back([opt, set](PipelineConfig& c) {
            if (opt->count() > 0) set(c);
        });
        return opt;
    }

    void apply(PipelineConfig& c) const {
        for (const auto& f : apply_) f(c);
    }

private:
    std::vector<std::function<void(PipelineConfig&)>> apply_;
};

ObjectClass class_from_flag(const std::string& s) {
    try {
        return parse_object_class(s);
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    }
}

struct Common {
    std::string config_path;
    Overrides overrides;
};

void add_config(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "JSON config file; flags override its values");
}

void add_paths(CLI::App* app, Common& c, bool labels) {
    const PipelineConfig d;
    c.overrides.option(app, "--dtm", "input DTM (ESRI ASCII grid)", std::string(),
                       [](PipelineConfig& p, const std::string& v) { p.dtm = v; });
    if (labels) {
        c.overrides.option(app, "--labels", "ground-truth polygons (GeoJSON)", std::string(),
                           [](PipelineConfig& p, const std::string& v) { p.labels = v; });
    }
    c.overrides.option(app, "--out", "output directory", std::string(),
                       [](PipelineConfig& p, const std::string& v) { p.out = v; });
    c.overrides.option(app, "--threads", "worker threads (0 = all cores)", d.threads,
                       [](PipelineConfig& p, unsigned v) { p.threads = v; });
}

void add_class(CLI::App* app, Common& c) {
    c.overrides.option(app, "--class", "object class: platform or annular", std::string("platform"),
                       [](PipelineConfig& p, const std::string& v) { p.cls = class_from_flag(v); });
}

void add_terrain(CLI::App* app, Common& c) {
    const PipelineConfig d;
    c.overrides.option(app, "--directions", "horizon scan directions", d.horizon.n_directions,
                       [](PipelineConfig& p, int v) { p.horizon.n_directions = v; });
    c.overrides.option(app, "--radius", "horizon scan radius in meters", d.horizon.radius_m,
                       [](PipelineConfig& p, double v) { p.horizon.radius_m = v; });
    c.overrides.flag(app, "--no-clamp-openness", "let negative horizon angles raise openness above 90 degrees",
                     [](PipelineConfig& p) { p.horizon.clamp_openness = false; });
    c.overrides.option(app, "--azimuth", "hillshade sun azimuth in degrees", d.hillshade.azimuth_deg,
                       [](PipelineConfig& p, double v) { p.hillshade.azimuth_deg = v; });
    c.overrides.option(app, "--altitude", "hillshade sun altitude in degrees", d.hillshade.altitude_deg,
                       [](PipelineConfig& p, double v) { p.hillshade.altitude_deg = v; });
    auto stretch_opt = [&](const std::string& name, const std::string& what, ChannelStretch StretchParams::*m) {
        const ChannelStretch s = d.stretch.*m;
        c.overrides.option(app, name, what + " stretch as MIN MAX", std::vector<double>{s.min, s.max},
                           [m, name](PipelineConfig& p, const std::vector<double>& v) {
                               if (v.size() != 2) throw UsageError(name + " takes two values");
                               (p.stretch.*m).min = v[0];
                               (p.stretch.*m).max = v[1];
                           })
            ->expected(2);
    };
    stretch_opt("--svf-stretch", "sky-view factor", &StretchParams::svf);
    stretch_opt("--po-stretch", "positive openness (degrees)", &StretchParams::openness);
    stretch_opt("--slope-stretch", "slope (degrees, inverted)", &StretchParams::slope);
}

void add_inference(CLI::App* app, Common& c) {
    const PipelineConfig d;
    c.overrides.option(app, "--stride", "sliding-window stride in pixels", d.stride,
                       [](PipelineConfig& p, int v) { p.stride = v; });
    c.overrides.option(app, "--scales", "inference scales, subset of {1,2}", d.inference_scales,
                       [](PipelineConfig& p, const std::vector<int>& v) { p.inference_scales = v; });
    c.overrides.flag(app, "--rederive-fine", "derive the 2x input from a 2x DTM instead of upscaling the image",
                     [](PipelineConfig& p) { p.rederive_fine = true; });
    c.overrides.option(app, "--backend", "segmentation backend: baseline or subprocess", std::string("baseline"),
                       [](PipelineConfig& p, const std::string& v) { p.backend.kind = parse_backend_kind(v); });
    c.overrides.option(app, "--backend-command", "subprocess backend executable", std::string(),
                       [](PipelineConfig& p, const std::string& v) { p.backend.command = v; });
    c.overrides.option(app, "--backend-arg", "extra argument passed before --batch (repeatable)",
                       std::vector<std::string>(),
                       [](PipelineConfig& p, const std::vector<std::string>& v) { p.backend.args = v; })
        ->allow_extra_args(false);
    c.overrides.option(app, "--batch-root", "directory for subprocess batch folders", std::string(),
                       [](PipelineConfig& p, const std::string& v) { p.backend.batch_root = v; });
    c.overrides.option(app, "--timeout", "subprocess timeout per batch in seconds", d.backend.timeout_s,
                       [](PipelineConfig& p, double v) { p.backend.timeout_s = v; });
    c.overrides.option(app, "--batch-size", "tiles per subprocess batch", d.backend.batch_size,
                       [](PipelineConfig& p, std::size_t v) { p.backend.batch_size = v; });
    c.overrides.flag(app, "--keep-batches", "keep subprocess batch folders",
                     [](PipelineConfig& p) { p.backend.keep_batches = true; });
    c.overrides.option(app, "--slope-threshold", "baseline steepness threshold on the 8-bit slope channel",
                       d.backend.baseline.slope_threshold,
                       [](PipelineConfig& p, int v) { p.backend.baseline.slope_threshold = v; });
    c.overrides.option(app, "--close-radius", "baseline closing radius in pixels", d.backend.baseline.close_radius,
                       [](PipelineConfig& p, int v) { p.backend.baseline.close_radius = v; });
    c.overrides.option(app, "--min-bbox-px", "drop components narrower or shorter than this", d.min_bbox_px,
                       [](PipelineConfig& p, int v) { p.min_bbox_px = v; });
}

PipelineConfig resolve(const Common& c) {
    PipelineConfig cfg;
    if (!c.config_path.empty()) {
        json j;
        try {
            j = json::parse(read_text_file(c.config_path));
        } catch (const json::parse_error& e) {
            throw UsageError("config '" + c.config_path + "' is not valid JSON: " + e.what());
        } catch (const IoError& e) {
            throw UsageError(e.what());
        }
        apply_config_json(cfg, j);
    }
    c.overrides.apply(cfg);
    if (cfg.min_bbox_px < 1) throw UsageError("--min-bbox-px must be >= 1");
    if (cfg.backend.baseline.slope_threshold < 0 || cfg.backend.baseline.slope_threshold > 256) {
        throw UsageError("--slope-threshold must be in [0, 256]");
    }
    return cfg;
}

void require_input(const fs::path& p, const char* flag) {
    if (p.empty()) throw UsageError(std::string(flag) + " is required");
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw UsageError(std::string(flag) + ": no such file '" + p.string() + "'");
}

void require_out(const fs::path& p) {
    if (p.empty()) throw UsageError("--out is required");
    fs::create_directories(p);
}

Image8 first_channel(const Image8& img) {
    Image8 g(img.width, img.height, 1);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) g.at(c, r) = img.at(c, r, 0);
    }
    return g;
}

void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

void check_representations(const std::vector<std::string>& reprs) {
    const auto& names = representation_names();
    for (const auto& r : reprs) {
        if (std::find(names.begin(), names.end(), r) == names.end()) {
            throw UsageError("unknown representation '" + r + "' (accepted: sps, svf, po, slope, hillshade, elevation)");
        }
    }
}

// --- viz -------------------------------------------------------------------

int cmd_viz(const PipelineConfig& cfg, std::vector<std::string> reprs, std::ostream& out) {
    require_input(cfg.dtm, "--dtm");
    require_out(cfg.out);
    if (std::find(reprs.begin(), reprs.end(), "all") != reprs.end()) reprs = representation_names();
    check_representations(reprs);
    const DtmGrid grid = read_ascii_grid_file(cfg.dtm);
    for (const auto& r : reprs) {
        const Image8 img = representation_image(grid, r, cfg);
        const fs::path p = cfg.out / (r + ".png");
        write_image(r == "sps" ? img : first_channel(img), p);
        out << "wrote " << p.string() << "\n";
    }
    return 0;
}

// --- dataset ---------------------------------------------------------------

int cmd_dataset(const PipelineConfig& cfg, std::ostream& out) {
    require_input(cfg.dtm, "--dtm");
    require_input(cfg.labels, "--labels");
    require_out(cfg.out);
    const DatasetConfig dc = cfg.dataset_config();
    try {
        dc.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const DtmGrid grid = read_ascii_grid_file(cfg.dtm);
    const auto labels = read_geojson_file(cfg.labels);
    const DatasetSummary s = build_dataset(grid, labels, dc, cfg.horizon, cfg.stretch, cfg.out, cfg.execution());
    const json report = {{"schema", 1},
                         {"samples", s.samples},
                         {"augmented", s.augmented},
                         {"background", s.background},
                         {"manifest", "manifest.jsonl"},
                         {"params", to_json(cfg)}};
    write_json(cfg.out / "dataset.json", report);
    out << "wrote " << s.samples << " samples (" << s.augmented << " augmented, " << s.background
        << " background) to " << cfg.out.string() << "\n";
    return 0;
}

// --- infer -----------------------------------------------------------------

struct InferResult {
    Image8 input;
    BinaryMask raw;
    BinaryMask filtered;
    std::vector<LabelledPolygon> polygons;
};

InferResult infer_grid(const DtmGrid& grid, const std::string& repr, const PipelineConfig& cfg) {
    InferResult r;
    r.input = representation_image(grid, repr, cfg);
    const InferenceConfig ic = cfg.inference_config();
    const bool twice = std::find(ic.scales.begin(), ic.scales.end(), 2) != ic.scales.end();
    Image8 fine;
    if (cfg.rederive_fine && twice) fine = representation_image(scale_grid_anisotropic(grid, 2), repr, cfg);
    auto backend = make_backend(cfg.backend);
    r.raw = multiscale_infer(r.input, *backend, ic, fine.data.empty() ? nullptr : &fine);
    // The grid border and nodata neighbourhoods carry no SPS value.
    r.raw = mask_and(r.raw, valid_pixel_mask(grid));
    r.filtered = filter_small_regions(r.raw, cfg.min_bbox_px);
    r.polygons = vectorize_mask(r.filtered, grid.geometry(), cfg.cls, "pred-");
    return r;
}

// Parameter problems found before any work starts are usage errors.
void validate_inference(const PipelineConfig& cfg) {
    try {
        cfg.inference_config().validate();
        cfg.backend.validate();
        if (cfg.min_bbox_px < 1) throw InvalidArgument("--min-bbox-px must be >= 1");
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

int cmd_infer(const PipelineConfig& cfg, std::ostream& out) {
    require_input(cfg.dtm, "--dtm");
    require_out(cfg.out);
    validate_inference(cfg);
    check_representations({cfg.representation});
    const DtmGrid grid = read_ascii_grid_file(cfg.dtm);
    const InferResult r = infer_grid(grid, cfg.representation, cfg);
    write_mask(r.raw, cfg.out / "mask_raw.png");
    write_mask(r.filtered, cfg.out / "mask.png");
    write_geojson_file(cfg.out / "pred.geojson", r.polygons, {.include_area = true});
    write_json(cfg.out / "infer.json", {{"schema", 1},
                                        {"positive_pixels_raw", r.raw.count()},
                                        {"positive_pixels", r.filtered.count()},
                                        {"polygons", r.polygons.size()},
                                        {"params", to_json(cfg)}});
    out << "wrote " << r.polygons.size() << " polygons to " << (cfg.out / "pred.geojson").string() << "\n";
    return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string pred_mask;
    std::string gt;
    std::string report;
    double cell_size = 0.5;
    std::string cls;
};

GridGeometry geometry_from_bounds(const std::vector<LabelledPolygon>& a, const std::vector<LabelledPolygon>& b,
                                  double cs) {
    double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
    for (const auto* set : {&a, &b}) {
        for (const auto& p : *set) {
            const Bbox bb = polygon_bbox(p);
            x0 = std::min(x0, bb.min_x);
            y0 = std::min(y0, bb.min_y);
            x1 = std::max(x1, bb.max_x);
            y1 = std::max(y1, bb.max_y);
        }
    }
    if (!(x0 < x1) || !(y0 < y1)) return GridGeometry{1, 1, cs, 0.0, cs};
    GridGeometry g;
    g.cell_size = cs;
    g.origin_x = std::floor(x0 / cs) * cs;
    g.origin_y = std::ceil(y1 / cs) * cs;
    g.width = std::max(1, static_cast<int>(std::ceil((x1 - g.origin_x) / cs)));
    g.height = std::max(1, static_cast<int>(std::ceil((g.origin_y - y0) / cs)));
    return g;
}

EvalReport evaluate_sets(std::vector<LabelledPolygon> gt, std::vector<LabelledPolygon> pred,
                         const std::optional<BinaryMask>& pred_mask, const GridGeometry& geom) {
    const BinaryMask gt_mask = rasterize_polygons(gt, geom);
    const BinaryMask pm = pred_mask ? *pred_mask : rasterize_polygons(pred, geom);
    return evaluate(gt, pred, pixel_metrics(pm, gt_mask));
}

json geometry_json(const GridGeometry& g) {
    return {{"width", g.width}, {"height", g.height}, {"cell_size", g.cell_size}, {"origin_x", g.origin_x},
            {"origin_y", g.origin_y}};
}

int cmd_eval(const PipelineConfig& cfg, const EvalArgs& a, std::ostream& out) {
    if (a.gt.empty()) throw UsageError("--gt is required");
    if (a.report.empty()) throw UsageError("--report is required");
    if (a.pred.empty() == a.pred_mask.empty()) throw UsageError("exactly one of --pred and --pred-mask is required");
    if (!a.pred_mask.empty() && cfg.dtm.empty()) throw UsageError("--pred-mask needs --dtm for georeferencing");
    if (!(a.cell_size > 0)) throw UsageError("--cell-size must be positive");
    require_input(a.gt, "--gt");
    if (!a.pred.empty()) require_input(a.pred, "--pred");
    if (!a.pred_mask.empty()) require_input(a.pred_mask, "--pred-mask");
    if (!cfg.dtm.empty()) require_input(cfg.dtm, "--dtm");
    std::optional<ObjectClass> only;
    if (!a.cls.empty()) only = class_from_flag(a.cls);

    auto keep = [&](std::vector<LabelledPolygon> v) {
        if (only) std::erase_if(v, [&](const LabelledPolygon& p) { return p.cls != *only; });
        return v;
    };
    const auto gt = keep(read_geojson_file(a.gt));
    std::vector<LabelledPolygon> pred;
    std::optional<BinaryMask> pred_mask;
    std::optional<DtmGrid> grid;
    if (!cfg.dtm.empty()) grid = read_ascii_grid_file(cfg.dtm);
    if (!a.pred.empty()) {
        pred = keep(read_geojson_file(a.pred));
    } else {
        pred_mask = read_mask(a.pred_mask);
        if (pred_mask->width != grid->width() || pred_mask->height != grid->height()) {
            throw InvalidArgument("--pred-mask dimensions do not match the DTM");
        }
        pred = vectorize_mask(*pred_mask, grid->geometry(), only.value_or(ObjectClass::platform), "pred-");
    }
    const GridGeometry geom = grid ? grid->geometry() : geometry_from_bounds(gt, pred, a.cell_size);
    EvalReport report = evaluate_sets(gt, pred, pred_mask, geom);
    report.params = {{"gt", a.gt},
                     {"pred", a.pred.empty() ? a.pred_mask : a.pred},
                     {"pred_kind", a.pred.empty() ? "mask" : "polygons"},
                     {"class", a.cls.empty() ? json(nullptr) : json(a.cls)},
                     {"geometry", geometry_json(geom)},
                     {"geometry_source", grid ? "dtm" : "polygon bounds"}};
    const fs::path rp = a.report;
    if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
    write_json(rp, to_json(report));
    const json j = to_json(report);
    out << "iou " << j["iou"].dump() << " precision " << j["precision"].dump() << " recall "
        << j["recall"].dump() << "\n";
    return 0;
}

// --- ablate ----------------------------------------------------------------

int cmd_ablate(const PipelineConfig& cfg, std::vector<std::string> reprs, std::ostream& out) {
    require_input(cfg.dtm, "--dtm");
    require_input(cfg.labels, "--labels");
    require_out(cfg.out);
    validate_inference(cfg);
    if (reprs.empty() || std::find(reprs.begin(), reprs.end(), "all") != reprs.end()) reprs = representation_names();
    check_representations(reprs);
    const DtmGrid grid = read_ascii_grid_file(cfg.dtm);
    auto gt = read_geojson_file(cfg.labels);
    std::erase_if(gt, [&](const LabelledPolygon& p) { return p.cls != cfg.cls; });

    json results = json::object();
    for (const auto& repr : reprs) {
        const InferResult r = infer_grid(grid, repr, cfg);
        const fs::path dir = cfg.out / repr;
        fs::create_directories(dir);
        write_image(r.input, dir / "input.png");
        write_mask(r.filtered, dir / "mask.png");
        write_geojson_file(dir / "pred.geojson", r.polygons, {.include_area = true});
        EvalReport report = evaluate_sets(gt, r.polygons, r.filtered, grid.geometry());
        report.params = {{"representation", repr}, {"geometry", geometry_json(grid.geometry())}};
        const json j = to_json(report);
        write_json(dir / "report.json", j);
        const json& overall = j["topology"]["overall"];
        results[repr] = {{"iou", j["iou"]},
                         {"precision", j["precision"]},
                         {"recall", j["recall"]},
                         {"gt_intersect_pct", overall["gt"]["pct"]},
                         {"pred_intersect_pct", overall["pred"]["pct"]},
                         {"polygons", r.polygons.size()}};
        out << repr << ": iou " << j["iou"].dump() << " gt_pct " << overall["gt"]["pct"].dump() << "\n";
    }
    write_json(cfg.out / "ablation.json", {{"schema", 1}, {"results", results}, {"params", to_json(cfg)}});
    return 0;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Terrain-derivative segmentation pipeline for archaeological structures in LiDAR DTMs", "archseg"};
    app.require_subcommand(1);
    app.fallthrough(false);

    Common viz_c, ds_c, inf_c, ev_c, ab_c;
    std::vector<std::string> viz_reprs{"sps"};
    std::vector<std::string> ab_reprs;
    EvalArgs ev;

    CLI::App* viz = app.add_subcommand("viz", "DTM to SVF, PO, slope, hillshade, elevation and SPS images");
    add_config(viz, viz_c);
    add_paths(viz, viz_c, false);
    add_terrain(viz, viz_c);
    viz->add_option("--repr", viz_reprs, "representations to write: sps svf po slope hillshade elevation all")
        ->capture_default_str();

    CLI::App* ds = app.add_subcommand("dataset", "build an augmented training set");
    add_config(ds, ds_c);
    add_paths(ds, ds_c, true);
    add_class(ds, ds_c);
    add_terrain(ds, ds_c);
    {
        const PipelineConfig d;
        ds_c.overrides.option(ds, "--seed", "RNG seed", d.seed, [](PipelineConfig& p, std::uint64_t v) { p.seed = v; });
        ds_c.overrides.option(ds, "--variants", "augmented variants per object (0 = class default: 15 or 10)",
                              d.variants_per_object,
                              [](PipelineConfig& p, int v) { p.variants_per_object = v; });
        ds_c.overrides.option(ds, "--dataset-scales", "X/Y scale factors", d.dataset_scales,
                              [](PipelineConfig& p, const std::vector<int>& v) { p.dataset_scales = v; });
        ds_c.overrides.option(ds, "--background", "background tiles without ground truth", d.background_tiles,
                              [](PipelineConfig& p, int v) { p.background_tiles = v; });
        ds_c.overrides.option(ds, "--max-translation", "translation range in pixels (uniform in +-value)",
                              d.max_translation_px, [](PipelineConfig& p, double v) { p.max_translation_px = v; });
        ds_c.overrides.option(ds, "--min-label-px", "drop labels narrower or shorter than this", d.min_label_px,
                              [](PipelineConfig& p, int v) { p.min_label_px = v; });
    }

    CLI::App* inf = app.add_subcommand("infer", "multi-scale sliding-window inference and post-filtering");
    add_config(inf, inf_c);
    add_paths(inf, inf_c, false);
    add_class(inf, inf_c);
    add_terrain(inf, inf_c);
    add_inference(inf, inf_c);
    inf_c.overrides.option(inf, "--repr", "input representation", std::string("sps"),
                           [](PipelineConfig& p, const std::string& v) { p.representation = v; });

    CLI::App* evc = app.add_subcommand("eval", "pixel and object metrics of predictions against ground truth");
    add_config(evc, ev_c);
    evc->add_option("--pred", ev.pred, "predicted polygons (GeoJSON)");
    evc->add_option("--pred-mask", ev.pred_mask, "predicted mask PNG aligned to --dtm");
    evc->add_option("--gt", ev.gt, "ground-truth polygons (GeoJSON)");
    evc->add_option("--report", ev.report, "output report JSON");
    ev_c.overrides.option(evc, "--dtm", "DTM defining the pixel grid for pixel metrics", std::string(),
                          [](PipelineConfig& p, const std::string& v) { p.dtm = v; });
    evc->add_option("--cell-size", ev.cell_size, "pixel size used when no --dtm is given")->capture_default_str();
    evc->add_option("--class", ev.cls, "evaluate only this class");

    CLI::App* ab = app.add_subcommand("ablate", "compare input representations end to end");
    add_config(ab, ab_c);
    add_paths(ab, ab_c, true);
    add_class(ab, ab_c);
    add_terrain(ab, ab_c);
    add_inference(ab, ab_c);
    ab->add_option("--reprs", ab_reprs, "representations to compare (default: all)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        err << app.help();
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (sub == viz) return cmd_viz(resolve(viz_c), viz_reprs, out);
        if (sub == ds) return cmd_dataset(resolve(ds_c), out);
        if (sub == inf) return cmd_infer(resolve(inf_c), out);
        if (sub == evc) return cmd_eval(resolve(ev_c), ev, out);
        return cmd_ablate(resolve(ab_c), ab_reprs, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << sub->help();
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace archseg::cli
