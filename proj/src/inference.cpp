#include "archseg/inference.hpp"

#include <algorithm>

#include "archseg/dataset.hpp"
#include "archseg/postproc.hpp"

namespace archseg {

BinaryMask baseline_segment(const Image8& tile, const BaselineParams& params) {
    if (tile.channels != 3) throw InvalidArgument("baseline_segment: expected a 3-channel tile");
    BinaryMask steep(tile.width, tile.height);
    for (int r = 0; r < tile.height; ++r) {
        for (int c = 0; c < tile.width; ++c) {
            if (tile.at(c, r, 2) < params.slope_threshold) steep.set(c, r);
        }
    }
    if (params.close_radius > 0) steep = morph(steep, MorphOp::close, params.close_radius);
    return fill_holes(steep);
}

std::vector<BinaryMask> BaselineBackend::segment(std::span<const Image8> tiles, ObjectClass) {
    std::vector<BinaryMask> out;
    out.reserve(tiles.size());
    for (const auto& t : tiles) out.push_back(baseline_segment(t, params_));
    return out;
}

void BackendSpec::validate() const {
    if (kind == BackendKind::subprocess && command.empty()) {
        throw InvalidArgument("backend: subprocess command must not be empty");
    }
    if (!(timeout_s > 0)) throw InvalidArgument("backend: timeout must be positive");
    if (batch_size == 0) throw InvalidArgument("backend: batch size must be >= 1");
}

std::unique_ptr<SegmentationBackend> make_backend(const BackendSpec& spec) {
    spec.validate();
    if (spec.kind == BackendKind::subprocess) return std::make_unique<SubprocessBackend>(spec);
    return std::make_unique<BaselineBackend>(spec.baseline);
}

std::vector<BinaryMask> run_backend_batch(std::span<const Image8> tiles, const BackendSpec& spec,
                                          ObjectClass cls) {
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const Image8& t = tiles[i];
        if (t.width != kTileSize || t.height != kTileSize || t.channels != 3) {
            throw InvalidArgument("run_backend_batch: tile " + std::to_string(i) + " is " +
                                  std::to_string(t.width) + "x" + std::to_string(t.height) + "x" +
                                  std::to_string(t.channels) + ", expected 256x256x3");
        }
    }
    if (tiles.empty()) return {};
    return make_backend(spec)->segment(tiles, cls);
}

void InferenceConfig::validate() const {
    if (window <= 0) throw InvalidArgument("inference: window must be positive");
    if (stride <= 0 || stride > window) throw InvalidArgument("inference: stride must be in (0, window]");
    if (scales.empty()) throw InvalidArgument("inference: scales must not be empty");
    for (int s : scales) {
        if (s != 1 && s != 2) throw InvalidArgument("inference: scales must be a subset of {1, 2}");
    }
    if (windows_per_call == 0) throw InvalidArgument("inference: windows_per_call must be >= 1");
}

std::vector<int> window_origins(int extent, int window, int stride) {
    std::vector<int> out;
    if (extent <= window) {
        out.push_back(0);
        return out;
    }
    for (int o = 0; o + window < extent; o += stride) out.push_back(o);
    out.push_back(extent - window);
    return out;
}

namespace {

// Window copy with coordinates clamped to the image (edge replication).
Image8 extract_window(const Image8& image, int col, int row, int size) {
    if (col >= 0 && row >= 0 && col + size <= image.width && row + size <= image.height) {
        return image.crop(col, row, size, size);
    }
    Image8 out(size, size, image.channels);
    for (int r = 0; r < size; ++r) {
        const int sr = std::clamp(row + r, 0, image.height - 1);
        for (int c = 0; c < size; ++c) {
            const int sc = std::clamp(col + c, 0, image.width - 1);
            for (int ch = 0; ch < image.channels; ++ch) out.at(c, r, ch) = image.at(sc, sr, ch);
        }
    }
    return out;
}

std::string window_name(int col, int row, int size) {
    return "window (col " + std::to_string(col) + ", row " + std::to_string(row) + ", size " +
           std::to_string(size) + ")";
}

}  // namespace

BinaryMask sliding_window_infer(const Image8& image, SegmentationBackend& backend,
                                const InferenceConfig& config) {
    config.validate();
    if (image.width <= 0 || image.height <= 0) throw InvalidArgument("sliding_window_infer: empty image");

    struct Origin {
        int col, row;
    };
    std::vector<Origin> origins;
    for (int r : window_origins(image.height, config.window, config.stride)) {
        for (int c : window_origins(image.width, config.window, config.stride)) origins.push_back({c, r});
    }

    BinaryMask out(image.width, image.height);
    std::vector<Image8> batch;
    for (std::size_t start = 0; start < origins.size(); start += config.windows_per_call) {
        const std::size_t end = std::min(origins.size(), start + config.windows_per_call);
        batch.clear();
        for (std::size_t i = start; i < end; ++i) {
            batch.push_back(extract_window(image, origins[i].col, origins[i].row, config.window));
        }
        std::vector<BinaryMask> masks;
        try {
            masks = backend.segment(batch, config.cls);
        } catch (const TileError& e) {
            const Origin& o = origins[start + std::min(e.tile(), end - start - 1)];
            throw ProtocolError(window_name(o.col, o.row, config.window) + ": " + e.what());
        } catch (const Error& e) {
            const Origin& a = origins[start];
            const Origin& b = origins[end - 1];
            throw Error("backend '" + backend.name() + "' failed on windows " +
                        window_name(a.col, a.row, config.window) + " to " +
                        window_name(b.col, b.row, config.window) + ": " + e.what());
        }
        if (masks.size() != batch.size()) {
            throw ProtocolError("backend '" + backend.name() + "' returned " +
                                std::to_string(masks.size()) + " masks for " +
                                std::to_string(batch.size()) + " windows");
        }
        for (std::size_t i = 0; i < masks.size(); ++i) {
            const Origin& o = origins[start + i];
            if (masks[i].width != config.window || masks[i].height != config.window) {
                throw ProtocolError(window_name(o.col, o.row, config.window) + ": backend mask is " +
                                    std::to_string(masks[i].width) + "x" +
                                    std::to_string(masks[i].height));
            }
            or_into(out, masks[i], o.col, o.row);
        }
    }
    return out;
}

BinaryMask downscale_mask_preserving_positive(const BinaryMask& mask, int factor) {
    if (factor < 1) throw InvalidArgument("downscale: factor must be an integer >= 1");
    if (factor == 1) return mask;
    const int w = (mask.width + factor - 1) / factor;
    const int h = (mask.height + factor - 1) / factor;
    BinaryMask out(w, h);
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (mask.bits[mask.index(c, r)]) out.bits[out.index(c / factor, r / factor)] = 1;
        }
    }
    return out;
}

BinaryMask multiscale_infer(const Image8& image, SegmentationBackend& backend,
                            const InferenceConfig& config, const Image8* fine) {
    config.validate();
    const bool native = std::find(config.scales.begin(), config.scales.end(), 1) != config.scales.end();
    const bool twice = std::find(config.scales.begin(), config.scales.end(), 2) != config.scales.end();

    BinaryMask out(image.width, image.height);
    if (native) out = sliding_window_infer(image, backend, config);
    if (twice) {
        Image8 upscaled;
        if (fine) {
            if (fine->width != 2 * image.width || fine->height != 2 * image.height) {
                throw InvalidArgument("multiscale_infer: fine image must be exactly twice the native size");
            }
        } else {
            upscaled = scale_image_anisotropic(image, 2);
        }
        const Image8& src = fine ? *fine : upscaled;
        const BinaryMask coarse = downscale_mask_preserving_positive(sliding_window_infer(src, backend, config), 2);
        out = mask_or(out, coarse);
    }
    return out;
}

BinaryMask valid_pixel_mask(const DtmGrid& grid) {
    BinaryMask out(grid.width(), grid.height());
    for (int r = 1; r + 1 < grid.height(); ++r) {
        for (int c = 1; c + 1 < grid.width(); ++c) {
            bool ok = true;
            for (int dr = -1; dr <= 1 && ok; ++dr) {
                for (int dc = -1; dc <= 1 && ok; ++dc) ok = !grid.is_nodata(c + dc, r + dr);
            }
            if (ok) out.set(c, r);
        }
    }
    return out;
}

BinaryMask mask_and(const BinaryMask& mask, const BinaryMask& valid) {
    if (mask.width != valid.width || mask.height != valid.height) {
        throw InvalidArgument("mask_and: dimension mismatch");
    }
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] &= valid.bits[i];
    return out;
}

}  // namespace archseg
