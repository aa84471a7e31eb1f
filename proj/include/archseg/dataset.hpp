#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archseg/raster.hpp"
#include "archseg/terrain.hpp"

namespace archseg {

// ---------------------------------------------------------------------------
// Rasterization

// Pixel (c, r) is set iff its centre (c+0.5, r+0.5) lies inside the outer
// ring and outside every hole (even-odd). Centres exactly on an edge count as
// inside on top/left edges only. Vertices are in pixel units.
[[nodiscard]] BinaryMask rasterize_pixel_polygons(std::span<const LabelledPolygon> polys, int width,
                                                  int height);
// World-coordinate polygons rasterized onto `geometry`.
[[nodiscard]] BinaryMask rasterize_polygons(std::span<const LabelledPolygon> polys,
                                            const GridGeometry& geometry);

// ---------------------------------------------------------------------------
// Deterministic random numbers

// mt19937_64 engine (its output sequence is fixed by the standard) with
// distribution code kept local: std:: distributions differ across vendors.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    [[nodiscard]] std::uint64_t next_u64() { return engine_(); }
    [[nodiscard]] double uniform01();                    // [0, 1)
    [[nodiscard]] double uniform(double lo, double hi);  // [lo, hi)
    [[nodiscard]] std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // [lo, hi]

private:
    std::mt19937_64 engine_;
};

// Stream seed for one (object, variant, scale) triple.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t a,
                                        std::uint64_t b);

// ---------------------------------------------------------------------------
// Samples

struct Augmentation {
    double rotation_deg = 0.0;  // about the object centre
    double translate_x = 0.0;   // pixels
    double translate_y = 0.0;
};

struct SampleProvenance {
    std::string kind;       // "tile", "augmented" or "background"
    std::string object_id;  // empty for background
    int scale = 1;
    int variant = 0;
    int window_col = 0;  // source window origin (tile and background samples)
    int window_row = 0;
    double center_col = 0.0;  // source object centre (augmented samples)
    double center_row = 0.0;
    std::optional<Augmentation> augmentation;
    std::uint64_t seed = 0;
};

struct DatasetSample {
    Image8 image;
    std::vector<LabelledPolygon> instances;  // tile pixel coordinates
    SampleProvenance provenance;
};

inline constexpr int kMinLabelExtentPx = 10;

struct DatasetConfig {
    ObjectClass cls = ObjectClass::platform;
    int variants_per_object = 15;
    std::vector<int> scales{1, 2};
    int background_tile_count = 0;
    int tile_size = 256;
    std::uint64_t rng_seed = 0;
    double max_translation_px = 64.0;
    int min_label_px = kMinLabelExtentPx;

    // Defaults for a class: 15 variants for platforms, 10 for annular structures.
    [[nodiscard]] static DatasetConfig for_class(ObjectClass cls);
    void validate() const;
};

[[nodiscard]] int default_variants(ObjectClass cls) noexcept;

// Transforms labels into a tile frame, clips them to the tile and drops those
// whose clipped bbox is narrower or shorter than min_label_px.
[[nodiscard]] std::vector<LabelledPolygon> tile_instances(
    std::span<const LabelledPolygon> labels, const std::function<Point(const Point&)>& to_tile,
    int tile_size, int min_label_px = kMinLabelExtentPx);

// One tile per label, centred on the label's bbox centre and clamped inside the
// image. Labels are in image pixel coordinates.
[[nodiscard]] std::vector<DatasetSample> extract_object_tiles(const Image8& image,
                                                              std::span<const LabelledPolygon> labels,
                                                              int tile_size = 256,
                                                              int min_label_px = kMinLabelExtentPx);

[[nodiscard]] Augmentation draw_augmentation(Rng& rng, double max_translation_px);

// Rotates the image about the object's centre, translates, and crops a tile
// centred on the result. Pixels are resampled bilinearly; label vertices are
// transformed exactly.
[[nodiscard]] DatasetSample augment_sample(const Image8& image,
                                           std::span<const LabelledPolygon> labels,
                                           const LabelledPolygon& object, const Augmentation& aug,
                                           int tile_size = 256,
                                           int min_label_px = kMinLabelExtentPx);
[[nodiscard]] DatasetSample augment_sample(const Image8& image,
                                           std::span<const LabelledPolygon> labels,
                                           const LabelledPolygon& object,
                                           const DatasetConfig& config, Rng& rng);

// Windows with no ground-truth pixel, drawn by rejection sampling. Throws
// Error after 1000*count rejections.
[[nodiscard]] std::vector<DatasetSample> sample_background(const Image8& image,
                                                           std::span<const LabelledPolygon> labels,
                                                           int count, int tile_size, Rng& rng);

// X/Y-only upscaling by an integer factor.
[[nodiscard]] Image8 scale_image_anisotropic(const Image8& image, int factor);
[[nodiscard]] DtmGrid scale_grid_anisotropic(const DtmGrid& grid, int factor);
[[nodiscard]] BinaryMask scale_mask_nearest(const BinaryMask& mask, int factor);

struct DatasetSummary {
    std::size_t samples = 0;
    std::size_t augmented = 0;
    std::size_t background = 0;
};

using SampleSink = std::function<void(const DatasetSample&)>;

// Streams every sample of the dataset, in a fixed order, to `sink`.
DatasetSummary generate_dataset(const DtmGrid& grid, const std::vector<LabelledPolygon>& labels,
                                const DatasetConfig& config, const HorizonScanParams& horizon,
                                const StretchParams& stretch, const SampleSink& sink,
                                ExecutionOptions exec = {});

[[nodiscard]] nlohmann::json manifest_entry(const DatasetSample& sample, std::size_t index,
                                            const std::string& image_path);

// Writes images/NNNNNN.png and manifest.jsonl under out_dir.
DatasetSummary build_dataset(const DtmGrid& grid, const std::vector<LabelledPolygon>& labels,
                             const DatasetConfig& config, const HorizonScanParams& horizon,
                             const StretchParams& stretch, const std::filesystem::path& out_dir,
                             ExecutionOptions exec = {});

// Seeded train/val/test assignment: 0 = train, 1 = val, 2 = test.
[[nodiscard]] std::vector<int> split_assignments(std::size_t n, std::uint64_t seed,
                                                 double train_fraction = 0.8,
                                                 double val_fraction = 0.1);

}  // namespace archseg
