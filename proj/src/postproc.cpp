#include "archseg/postproc.hpp"

#include <algorithm>
#include <deque>

#include "archseg/error.hpp"

namespace archseg {

ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity) {
    ComponentLabels out;
    out.width = mask.width;
    out.height = mask.height;
    out.labels.assign(mask.bits.size(), 0);
    const int w = mask.width, h = mask.height;
    const bool eight = connectivity == Connectivity::eight;

    std::vector<std::uint32_t> stack;
    for (int r0 = 0; r0 < h; ++r0) {
        for (int c0 = 0; c0 < w; ++c0) {
            const std::size_t start = mask.index(c0, r0);
            if (!mask.bits[start] || out.labels[start]) continue;

            Component comp;
            comp.label = static_cast<int>(out.components.size()) + 1;
            comp.bbox = {c0, r0, c0, r0};
            out.labels[start] = comp.label;
            stack.assign(1, static_cast<std::uint32_t>(start));
            while (!stack.empty()) {
                const std::uint32_t p = stack.back();
                stack.pop_back();
                comp.pixels.push_back(p);
                const int c = static_cast<int>(p % static_cast<std::uint32_t>(w));
                const int r = static_cast<int>(p / static_cast<std::uint32_t>(w));
                comp.bbox.min_col = std::min(comp.bbox.min_col, c);
                comp.bbox.max_col = std::max(comp.bbox.max_col, c);
                comp.bbox.min_row = std::min(comp.bbox.min_row, r);
                comp.bbox.max_row = std::max(comp.bbox.max_row, r);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (!eight && dr != 0 && dc != 0) continue;
                        const int nc = c + dc, nr = r + dr;
                        if (!mask.in_bounds(nc, nr)) continue;
                        const std::size_t q = mask.index(nc, nr);
                        if (mask.bits[q] && !out.labels[q]) {
                            out.labels[q] = comp.label;
                            stack.push_back(static_cast<std::uint32_t>(q));
                        }
                    }
                }
            }
            std::sort(comp.pixels.begin(), comp.pixels.end());
            comp.pixel_count = comp.pixels.size();
            out.components.push_back(std::move(comp));
        }
    }
    return out;
}

std::vector<Component> connected_components(const BinaryMask& mask, Connectivity connectivity) {
    return label_components(mask, connectivity).components;
}

BinaryMask paint_components(int width, int height, const std::vector<Component>& components) {
    BinaryMask out(width, height);
    for (const auto& comp : components) {
        for (auto p : comp.pixels) out.bits[p] = 1;
    }
    return out;
}

namespace {

// Box filter along one axis: `any` implements dilation, otherwise erosion.
// Only in-bounds pixels take part in each window.
void box_pass(const std::vector<std::uint8_t>& in, std::vector<std::uint8_t>& out, int w, int h,
              int radius, bool horizontal, bool any) {
    const int len = horizontal ? w : h;
    const int lines = horizontal ? h : w;
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
    for (int line = 0; line < lines; ++line) {
        auto at = [&](int i) -> std::size_t {
            return horizontal ? static_cast<std::size_t>(line) * w + i
                              : static_cast<std::size_t>(i) * w + line;
        };
        prefix[0] = 0;
        for (int i = 0; i < len; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + in[at(i)];
        for (int i = 0; i < len; ++i) {
            const int lo = std::max(0, i - radius);
            const int hi = std::min(len - 1, i + radius);
            const int count = prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)];
            out[at(i)] = any ? (count > 0) : (count == hi - lo + 1);
        }
    }
}

BinaryMask box_morph(const BinaryMask& mask, int radius, bool any) {
    BinaryMask tmp(mask.width, mask.height);
    BinaryMask out(mask.width, mask.height);
    box_pass(mask.bits, tmp.bits, mask.width, mask.height, radius, true, any);
    box_pass(tmp.bits, out.bits, mask.width, mask.height, radius, false, any);
    out.window = mask.window;
    return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 1) throw InvalidArgument("morph: radius must be at least 1");
    return box_morph(mask, radius, true);
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    if (radius < 1) throw InvalidArgument("morph: radius must be at least 1");
    return box_morph(mask, radius, false);
}

BinaryMask morph(const BinaryMask& mask, MorphOp op, int radius) {
    switch (op) {
        case MorphOp::dilate: return dilate(mask, radius);
        case MorphOp::erode: return erode(mask, radius);
        case MorphOp::open: return dilate(erode(mask, radius), radius);
        case MorphOp::close: return erode(dilate(mask, radius), radius);
    }
    throw InvalidArgument("morph: unknown operation");
}

BinaryMask fill_holes(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<std::uint8_t> outside(mask.bits.size(), 0);
    std::deque<std::size_t> queue;
    auto seed = [&](int c, int r) {
        const std::size_t i = mask.index(c, r);
        if (!mask.bits[i] && !outside[i]) {
            outside[i] = 1;
            queue.push_back(i);
        }
    };
    for (int c = 0; c < w; ++c) {
        seed(c, 0);
        seed(c, h - 1);
    }
    for (int r = 0; r < h; ++r) {
        seed(0, r);
        seed(w - 1, r);
    }
    while (!queue.empty()) {
        const std::size_t p = queue.front();
        queue.pop_front();
        const int c = static_cast<int>(p % static_cast<std::size_t>(w));
        const int r = static_cast<int>(p / static_cast<std::size_t>(w));
        if (c > 0) seed(c - 1, r);
        if (c + 1 < w) seed(c + 1, r);
        if (r > 0) seed(c, r - 1);
        if (r + 1 < h) seed(c, r + 1);
    }
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = outside[i] ? 0 : 1;
    return out;
}

std::vector<Component> filter_components(std::vector<Component> components, int min_bbox_px) {
    if (min_bbox_px < 1) throw InvalidArgument("filter: min_bbox_px must be at least 1");
    std::erase_if(components, [&](const Component& c) {
        return c.bbox.width() < min_bbox_px || c.bbox.height() < min_bbox_px;
    });
    return components;
}

BinaryMask filter_small_regions(const BinaryMask& mask, int min_bbox_px, Connectivity connectivity) {
    if (min_bbox_px < 1) throw InvalidArgument("filter_small_regions: min_bbox_px must be at least 1");
    const auto labels = label_components(mask, connectivity);
    std::vector<std::uint8_t> keep(labels.components.size() + 1, 0);
    for (const auto& c : labels.components) {
        keep[static_cast<std::size_t>(c.label)] =
            c.bbox.width() >= min_bbox_px && c.bbox.height() >= min_bbox_px;
    }
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
        out.bits[i] = keep[static_cast<std::size_t>(labels.labels[i])] ? out.bits[i] : 0;
    }
    return out;
}

}  // namespace archseg
