#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "archseg/raster.hpp"

namespace archseg {

// ---------------------------------------------------------------------------
// ESRI ASCII grid
//
// Header keys (case-insensitive): ncols, nrows, xllcorner|xllcenter,
// yllcorner|yllcenter, cellsize, nodata_value. All are required and may appear
// only once. The body holds nrows lines of ncols values, north row first.

[[nodiscard]] DtmGrid load_ascii_grid(std::string_view text);
[[nodiscard]] std::string save_ascii_grid(const DtmGrid& grid, double nodata_value = -9999.0);

[[nodiscard]] DtmGrid read_ascii_grid_file(const std::filesystem::path& path);
void write_ascii_grid_file(const std::filesystem::path& path, const DtmGrid& grid,
                           double nodata_value = -9999.0);

// ---------------------------------------------------------------------------
// GeoJSON labels
//
// Every feature carries a "class" property ("platform" or "annular") and an
// optional "id" property. Polygon and MultiPolygon geometries are accepted;
// each MultiPolygon part becomes its own LabelledPolygon with id "<id>/<k>".

[[nodiscard]] std::vector<LabelledPolygon> load_geojson_labels(std::string_view text);
[[nodiscard]] std::vector<LabelledPolygon> read_geojson_file(const std::filesystem::path& path);

struct GeoJsonWriteOptions {
    bool include_area = false;  // adds an "area_m2" property
};

[[nodiscard]] std::string save_geojson(const std::vector<LabelledPolygon>& polygons,
                                       const GeoJsonWriteOptions& options = {});
void write_geojson_file(const std::filesystem::path& path,
                        const std::vector<LabelledPolygon>& polygons,
                        const GeoJsonWriteOptions& options = {});

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB only)

void write_image(const Image8& image, const std::filesystem::path& path);
[[nodiscard]] Image8 read_image(const std::filesystem::path& path);

// Masks are stored as gray {0,255}; any nonzero value reads back as positive.
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);
[[nodiscard]] BinaryMask read_mask(const std::filesystem::path& path);

// Whole-file helpers.
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace archseg
