#pragma once

#include <cstdint>
#include <vector>

#include "archseg/raster.hpp"

namespace archseg {

enum class Connectivity { four = 4, eight = 8 };

// Inclusive pixel bounds.
struct PixelBox {
    int min_col = 0;
    int min_row = 0;
    int max_col = 0;
    int max_row = 0;

    [[nodiscard]] int width() const noexcept { return max_col - min_col + 1; }
    [[nodiscard]] int height() const noexcept { return max_row - min_row + 1; }
    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct Component {
    int label = 0;  // 1-based, in raster order of each component's first pixel
    std::size_t pixel_count = 0;
    PixelBox bbox;
    std::vector<std::uint32_t> pixels;  // row-major indices, ascending

    friend bool operator==(const Component&, const Component&) = default;
};

struct ComponentLabels {
    int width = 0;
    int height = 0;
    std::vector<int> labels;  // 0 = background
    std::vector<Component> components;
};

[[nodiscard]] ComponentLabels label_components(const BinaryMask& mask,
                                               Connectivity connectivity = Connectivity::eight);
[[nodiscard]] std::vector<Component> connected_components(
    const BinaryMask& mask, Connectivity connectivity = Connectivity::eight);

// Paints the given components into an empty width x height mask.
[[nodiscard]] BinaryMask paint_components(int width, int height,
                                          const std::vector<Component>& components);

enum class MorphOp { dilate, erode, open, close };

// Square structuring element of side 2*radius+1. Pixels outside the mask are
// ignored, so erosion does not eat in from the border.
[[nodiscard]] BinaryMask morph(const BinaryMask& mask, MorphOp op, int radius);
[[nodiscard]] BinaryMask dilate(const BinaryMask& mask, int radius);
[[nodiscard]] BinaryMask erode(const BinaryMask& mask, int radius);

// Sets every background pixel not 4-connected to the mask border.
[[nodiscard]] BinaryMask fill_holes(const BinaryMask& mask);

// Components whose bbox is at least min_bbox_px in both dimensions.
[[nodiscard]] std::vector<Component> filter_components(std::vector<Component> components,
                                                       int min_bbox_px);

// Removes components with bbox width < min_bbox_px or height < min_bbox_px.
[[nodiscard]] BinaryMask filter_small_regions(const BinaryMask& mask, int min_bbox_px = 15,
                                              Connectivity connectivity = Connectivity::eight);

}  // namespace archseg
