#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "archseg/error.hpp"
#include "archseg/raster.hpp"

namespace archseg {

// A protocol failure attributable to one tile of a batch.
class TileError : public ProtocolError {
public:
    TileError(std::size_t tile, const std::string& what) : ProtocolError(what), tile_(tile) {}
    [[nodiscard]] std::size_t tile() const noexcept { return tile_; }

private:
    std::size_t tile_;
};

// Deterministic stand-in model: steep pixels are those whose slope channel
// (inverted stretch, so steep is dark) is below the threshold. The result is
// closed with a square element and bounded holes are filled.
struct BaselineParams {
    int slope_threshold = 128;
    int close_radius = 2;  // 5x5 element
};

[[nodiscard]] BinaryMask baseline_segment(const Image8& tile, const BaselineParams& params = {});

class SegmentationBackend {
public:
    virtual ~SegmentationBackend() = default;
    // One mask per tile, in order, each the size of its tile.
    [[nodiscard]] virtual std::vector<BinaryMask> segment(std::span<const Image8> tiles,
                                                          ObjectClass cls) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class BaselineBackend final : public SegmentationBackend {
public:
    explicit BaselineBackend(BaselineParams params = {}) : params_(params) {}
    std::vector<BinaryMask> segment(std::span<const Image8> tiles, ObjectClass cls) override;
    std::string name() const override { return "baseline"; }

private:
    BaselineParams params_;
};

enum class BackendKind { baseline, subprocess };

struct BackendSpec {
    BackendKind kind = BackendKind::baseline;
    std::string command;            // subprocess executable (PATH lookup applies)
    std::vector<std::string> args;  // placed before "--batch <dir>"
    std::filesystem::path batch_root;  // empty: the system temp directory
    double timeout_s = 600.0;
    std::size_t batch_size = 64;    // tiles per subprocess invocation
    bool keep_batches = false;      // leave batch directories on disk
    BaselineParams baseline;

    void validate() const;
};

// Runs an external process per batch following the directory protocol:
// tiles/<i>.png and batch.json in, masks/<i>.png and done.json out.
class SubprocessBackend final : public SegmentationBackend {
public:
    explicit SubprocessBackend(BackendSpec spec);
    std::vector<BinaryMask> segment(std::span<const Image8> tiles, ObjectClass cls) override;
    std::string name() const override { return "subprocess"; }

    // Directory used by the most recent batch (useful with keep_batches).
    [[nodiscard]] const std::filesystem::path& last_batch_dir() const noexcept { return last_dir_; }

private:
    std::vector<BinaryMask> run_one(std::span<const Image8> tiles, ObjectClass cls);

    BackendSpec spec_;
    std::filesystem::path last_dir_;
};

[[nodiscard]] std::unique_ptr<SegmentationBackend> make_backend(const BackendSpec& spec);

// Requires 256x256 RGB tiles. An empty batch returns immediately.
[[nodiscard]] std::vector<BinaryMask> run_backend_batch(std::span<const Image8> tiles,
                                                        const BackendSpec& spec, ObjectClass cls);

inline constexpr int kTileSize = 256;

struct InferenceConfig {
    int window = kTileSize;
    int stride = 128;
    std::vector<int> scales{1, 2};
    ObjectClass cls = ObjectClass::platform;
    std::size_t windows_per_call = 64;  // windows handed to the backend at once

    void validate() const;
};

// Window origins along one axis: multiples of stride, with the last window
// flush against the far edge. A single origin 0 when extent <= window.
[[nodiscard]] std::vector<int> window_origins(int extent, int window, int stride);

// Per-window masks OR-accumulated into an image-sized mask. Images smaller
// than the window are edge-padded.
[[nodiscard]] BinaryMask sliding_window_infer(const Image8& image, SegmentationBackend& backend,
                                              const InferenceConfig& config);

// A coarse pixel is set iff any pixel of its factor x factor block is set;
// trailing partial blocks are kept.
[[nodiscard]] BinaryMask downscale_mask_preserving_positive(const BinaryMask& mask, int factor = 2);

// Native pass OR the downscaled 2x pass. `fine` overrides the default
// bilinear 2x upscale of `image` (for example an SPS re-derived from a 2x DTM).
[[nodiscard]] BinaryMask multiscale_infer(const Image8& image, SegmentationBackend& backend,
                                          const InferenceConfig& config,
                                          const Image8* fine = nullptr);

// Pixels with a defined SPS value: off the grid border and with no nodata in
// their 3x3 neighbourhood.
[[nodiscard]] BinaryMask valid_pixel_mask(const DtmGrid& grid);
// Clears every pixel of `mask` outside `valid`.
[[nodiscard]] BinaryMask mask_and(const BinaryMask& mask, const BinaryMask& valid);

}  // namespace archseg
