#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace archseg {

// Fractional position in pixel space: col grows east, row grows south.
struct PixelCoord {
    double col = 0.0;
    double row = 0.0;
};

// Planar world position in meters.
struct WorldCoord {
    double x = 0.0;
    double y = 0.0;
};

// Georeferencing of a north-up grid. The origin is the north-west corner of
// pixel (0, 0); row 0 is the northernmost row.
struct GridGeometry {
    int width = 0;
    int height = 0;
    double cell_size = 1.0;
    double origin_x = 0.0;
    double origin_y = 0.0;

    [[nodiscard]] PixelCoord world_to_pixel(double x, double y) const noexcept {
        return {(x - origin_x) / cell_size, (origin_y - y) / cell_size};
    }
    [[nodiscard]] WorldCoord pixel_to_world(double col, double row) const noexcept {
        return {origin_x + col * cell_size, origin_y - row * cell_size};
    }
    [[nodiscard]] std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    [[nodiscard]] bool contains(int col, int row) const noexcept {
        return col >= 0 && row >= 0 && col < width && row < height;
    }

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

// Free-function aliases used throughout the pipeline.
[[nodiscard]] inline PixelCoord world_to_pixel(const GridGeometry& g, double x, double y) noexcept {
    return g.world_to_pixel(x, y);
}
[[nodiscard]] inline WorldCoord pixel_to_world(const GridGeometry& g, double col, double row) noexcept {
    return g.pixel_to_world(col, row);
}

// Single-band elevation raster with a nodata mask.
class DtmGrid {
public:
    DtmGrid() = default;
    // Throws InvalidArgument when the geometry or buffer sizes are inconsistent.
    // An empty nodata vector means every cell is valid.
    DtmGrid(GridGeometry geometry, std::vector<double> elevations,
            std::vector<std::uint8_t> nodata = {}, std::string crs = {});

    [[nodiscard]] const GridGeometry& geometry() const noexcept { return geometry_; }
    [[nodiscard]] int width() const noexcept { return geometry_.width; }
    [[nodiscard]] int height() const noexcept { return geometry_.height; }
    [[nodiscard]] double cell_size() const noexcept { return geometry_.cell_size; }

    [[nodiscard]] std::size_t index(int col, int row) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(geometry_.width) +
               static_cast<std::size_t>(col);
    }
    [[nodiscard]] double at(int col, int row) const noexcept { return elevations_[index(col, row)]; }
    [[nodiscard]] bool is_nodata(int col, int row) const noexcept {
        return nodata_[index(col, row)] != 0;
    }
    [[nodiscard]] bool has_nodata() const noexcept { return any_nodata_; }

    [[nodiscard]] std::span<const double> elevations() const noexcept { return elevations_; }
    [[nodiscard]] std::span<const std::uint8_t> nodata() const noexcept { return nodata_; }

    // Opaque CRS description carried through IO unchanged.
    [[nodiscard]] const std::string& crs() const noexcept { return crs_; }

    // Copies a sub-window. The window must lie inside the grid.
    [[nodiscard]] DtmGrid window(int col, int row, int width, int height) const;

private:
    GridGeometry geometry_{};
    std::vector<double> elevations_;
    std::vector<std::uint8_t> nodata_;
    std::string crs_;
    bool any_nodata_ = false;
};

enum class ChannelUnit { dimensionless, degrees, unit_interval };

// Floating-point derivative raster (SVF, openness, slope, hillshade, ...).
struct ChannelRaster {
    int width = 0;
    int height = 0;
    ChannelUnit unit = ChannelUnit::dimensionless;
    std::vector<double> values;
    std::vector<std::uint8_t> nodata;

    ChannelRaster() = default;
    ChannelRaster(int w, int h, ChannelUnit u);

    [[nodiscard]] std::size_t index(int col, int row) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }
    [[nodiscard]] double at(int col, int row) const noexcept { return values[index(col, row)]; }
    [[nodiscard]] bool is_nodata(int col, int row) const noexcept {
        return nodata[index(col, row)] != 0;
    }
};

// Interleaved 8-bit image with 1 or 3 channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    Image8() = default;
    Image8(int w, int h, int c, std::uint8_t fill = 0);

    [[nodiscard]] std::size_t offset(int col, int row) const noexcept {
        return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels);
    }
    [[nodiscard]] std::uint8_t at(int col, int row, int ch = 0) const noexcept {
        return data[offset(col, row) + static_cast<std::size_t>(ch)];
    }
    std::uint8_t& at(int col, int row, int ch = 0) noexcept {
        return data[offset(col, row) + static_cast<std::size_t>(ch)];
    }
    // Copies a window; pixels outside the source are zero.
    [[nodiscard]] Image8 crop(int col, int row, int w, int h) const;

    friend bool operator==(const Image8&, const Image8&) = default;
};

// Placement of a mask inside a larger raster.
struct MaskWindow {
    int col = 0;
    int row = 0;
    int parent_width = 0;
    int parent_height = 0;

    friend bool operator==(const MaskWindow&, const MaskWindow&) = default;
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1, row-major
    std::optional<MaskWindow> window;

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false);

    [[nodiscard]] std::size_t index(int col, int row) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }
    [[nodiscard]] bool get(int col, int row) const noexcept { return bits[index(col, row)] != 0; }
    void set(int col, int row, bool v = true) noexcept { bits[index(col, row)] = v ? 1 : 0; }
    [[nodiscard]] bool in_bounds(int col, int row) const noexcept {
        return col >= 0 && row >= 0 && col < width && row < height;
    }
    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] bool empty() const noexcept { return count() == 0; }
    [[nodiscard]] BinaryMask crop(int col, int row, int w, int h) const;

    // Pixel equality; the window placement is not compared.
    friend bool operator==(const BinaryMask& a, const BinaryMask& b) noexcept {
        return a.width == b.width && a.height == b.height && a.bits == b.bits;
    }
};

// Pixelwise OR. Throws InvalidArgument on a dimension mismatch.
[[nodiscard]] BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
// ORs `src` into `dst` at offset (col, row); parts outside `dst` are dropped.
void or_into(BinaryMask& dst, const BinaryMask& src, int col, int row);

// {0,1} mask to a single-channel {0,255} image and back (nonzero is positive).
[[nodiscard]] Image8 mask_to_image(const BinaryMask& mask);
[[nodiscard]] BinaryMask image_to_mask(const Image8& image);

// ---------------------------------------------------------------------------
// Label polygons

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Closed ring: the first vertex is repeated as the last one.
using Ring = std::vector<Point>;

enum class ObjectClass { platform, annular };

[[nodiscard]] std::string_view to_string(ObjectClass c) noexcept;
// Throws ParseError listing the accepted class names.
[[nodiscard]] ObjectClass parse_object_class(std::string_view name);

struct LabelledPolygon {
    ObjectClass cls = ObjectClass::platform;
    Ring outer;
    std::vector<Ring> holes;
    std::string id;
};

// Returns the ring with the closing vertex appended if it was missing.
[[nodiscard]] Ring close_ring(Ring ring);
[[nodiscard]] std::size_t distinct_vertex_count(const Ring& ring);

// Convert polygon vertices between world meters and pixel (col, row) units.
[[nodiscard]] LabelledPolygon to_pixel_space(const LabelledPolygon& poly, const GridGeometry& g);
[[nodiscard]] LabelledPolygon to_world_space(const LabelledPolygon& poly, const GridGeometry& g);

}  // namespace archseg
