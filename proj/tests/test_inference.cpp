#include <algorithm>
#include <chrono>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "archseg/dataset.hpp"
#include "archseg/inference.hpp"
#include "archseg/io.hpp"
#include "archseg/terrain.hpp"
#include "scene.hpp"
#include "temp_dir.hpp"

using namespace archseg;
using archseg::testing::TempDir;

namespace {

// Records every call and answers with a per-window rule.
class ScriptedBackend final : public SegmentationBackend {
public:
    using Rule = std::function<BinaryMask(const Image8&)>;
    explicit ScriptedBackend(Rule rule) : rule_(std::move(rule)) {}

    std::vector<BinaryMask> segment(std::span<const Image8> tiles, ObjectClass) override {
        ++calls;
        windows += tiles.size();
        std::vector<BinaryMask> out;
        for (const auto& t : tiles) out.push_back(rule_(t));
        return out;
    }
    std::string name() const override { return "scripted"; }

    int calls = 0;
    std::size_t windows = 0;

private:
    Rule rule_;
};

BinaryMask constant(const Image8& t, bool on) { return BinaryMask(t.width, t.height, on ? 1 : 0); }

// Pixelwise rule: green channel at or above 128.
BinaryMask green(const Image8& t) {
    BinaryMask m(t.width, t.height);
    for (int r = 0; r < t.height; ++r) {
        for (int c = 0; c < t.width; ++c) {
            if (t.at(c, r, 1) >= 128) m.set(c, r);
        }
    }
    return m;
}

Image8 noise_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    Image8 img(w, h, 3);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        if (a.bits[i] && !b.bits[i]) return false;
    }
    return true;
}

BackendSpec fake_spec(std::vector<std::string> args = {}) {
    BackendSpec s;
    s.kind = BackendKind::subprocess;
    s.command = ARCHSEG_FAKE_BACKEND;
    s.args = std::move(args);
    s.timeout_s = 30;
    return s;
}

std::vector<Image8> fake_tiles(std::size_t n) {
    std::vector<Image8> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(noise_image(256, 256, 100 + i));
    return out;
}

template <class E>
std::string thrown_message(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const E& e) {
        return e.what();
    }
    return "<no exception>";
}

}  // namespace

// --- window layout -------------------------------------------------------------

TEST(Windows, Origins) {
    EXPECT_EQ(window_origins(1024, 256, 128), (std::vector<int>{0, 128, 256, 384, 512, 640, 768}));
    EXPECT_EQ(window_origins(300, 256, 128), (std::vector<int>{0, 44}));
    EXPECT_EQ(window_origins(256, 256, 128), (std::vector<int>{0}));
    EXPECT_EQ(window_origins(100, 256, 128), (std::vector<int>{0}));
    EXPECT_EQ(window_origins(600, 256, 256), (std::vector<int>{0, 256, 344}));
}

TEST(Windows, EveryPixelCovered) {
    for (int extent : {256, 257, 300, 511, 512, 777, 1024}) {
        for (int stride : {64, 128, 200, 256}) {
            std::vector<int> cover(static_cast<std::size_t>(extent), 0);
            const auto o = window_origins(extent, 256, stride);
            ASSERT_TRUE(std::is_sorted(o.begin(), o.end()));
            for (int s : o) {
                for (int i = s; i < s + 256; ++i) ++cover[static_cast<std::size_t>(i)];
            }
            EXPECT_EQ(std::count(cover.begin(), cover.end(), 0), 0) << extent << " " << stride;
        }
    }
}

TEST(InferenceConfig, Validation) {
    InferenceConfig c;
    EXPECT_NO_THROW(c.validate());
    c.stride = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.stride = 300;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.scales = {3};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.scales = {};
    EXPECT_THROW(c.validate(), InvalidArgument);
}

// --- sliding window -----------------------------------------------------------

TEST(SlidingWindow, AllNegativeAndAllPositive) {
    const Image8 img = noise_image(600, 400, 1);
    ScriptedBackend neg([](const Image8& t) { return constant(t, false); });
    ScriptedBackend pos([](const Image8& t) { return constant(t, true); });
    const InferenceConfig cfg;
    EXPECT_EQ(sliding_window_infer(img, neg, cfg).count(), 0u);
    const BinaryMask full = sliding_window_infer(img, pos, cfg);
    EXPECT_EQ(full.width, 600);
    EXPECT_EQ(full.height, 400);
    EXPECT_EQ(full.count(), 600u * 400u);
    EXPECT_EQ(pos.windows, window_origins(600, 256, 128).size() * window_origins(400, 256, 128).size());
}

TEST(SlidingWindow, SingleWindowImageIsOneCall) {
    const Image8 img = noise_image(256, 256, 2);
    ScriptedBackend b(green);
    const BinaryMask m = sliding_window_infer(img, b, {});
    EXPECT_EQ(b.calls, 1);
    EXPECT_EQ(b.windows, 1u);
    EXPECT_EQ(m.bits, green(img).bits);
}

TEST(SlidingWindow, SmallImageIsPaddedAndCropped) {
    const Image8 img = noise_image(100, 70, 3);
    ScriptedBackend b(green);
    const BinaryMask m = sliding_window_infer(img, b, {});
    EXPECT_EQ(m.width, 100);
    EXPECT_EQ(m.height, 70);
    EXPECT_EQ(m.bits, green(img).bits);
}

TEST(SlidingWindow, PixelwiseBackendIsExactOnLargeImages) {
    const Image8 img = noise_image(700, 530, 4);
    ScriptedBackend b(green);
    EXPECT_EQ(sliding_window_infer(img, b, {}).bits, green(img).bits);
}

TEST(SlidingWindow, OrMergePlacesWindowPixels) {
    // Each window reports only its local pixel (10, 20).
    const Image8 img = noise_image(600, 300, 5);
    ScriptedBackend b([](const Image8& t) {
        BinaryMask m(t.width, t.height);
        m.set(10, 20);
        return m;
    });
    const BinaryMask m = sliding_window_infer(img, b, {});
    BinaryMask expected(600, 300);
    for (int r : window_origins(300, 256, 128)) {
        for (int c : window_origins(600, 256, 128)) expected.set(c + 10, r + 20);
    }
    EXPECT_EQ(m.bits, expected.bits);
}

TEST(SlidingWindow, SmallerStrideOnlyAddsPositives) {
    const auto scene = archseg::testing::make_scene({.size = 512, .mesas = 4, .rings = 2});
    const Image8 sps = make_sps(scene.grid, {8, 5.0}, default_stretch()).image;
    BaselineBackend b;
    InferenceConfig coarse, fine;
    coarse.stride = 128;
    fine.stride = 64;
    const BinaryMask a = sliding_window_infer(sps, b, coarse);
    const BinaryMask c = sliding_window_infer(sps, b, fine);
    EXPECT_GT(a.count(), 0u);
    EXPECT_TRUE(subset(a, c));
}

TEST(SlidingWindow, BatchingDoesNotChangeResult) {
    const Image8 img = noise_image(640, 520, 6);
    auto rule = [](const Image8& t) {
        // Window-dependent: marks a block whose position depends on content.
        BinaryMask m(t.width, t.height);
        const int k = t.at(0, 0, 0) % 200;
        for (int i = 0; i < 30; ++i) m.set(k + i, k);
        return m;
    };
    ScriptedBackend one(rule), many(rule);
    InferenceConfig c1, c64;
    c1.windows_per_call = 1;
    EXPECT_EQ(sliding_window_infer(img, one, c1).bits, sliding_window_infer(img, many, c64).bits);
    EXPECT_EQ(one.calls, static_cast<int>(one.windows));
    EXPECT_EQ(many.calls, 1);
}

TEST(SlidingWindow, TileErrorNamesWindow) {
    const Image8 img = noise_image(400, 256, 7);
    class Failing final : public SegmentationBackend {
    public:
        std::vector<BinaryMask> segment(std::span<const Image8>, ObjectClass) override {
            throw TileError(1, "tile 1 (masks/1.png): mask value 7 is neither 0 nor 255");
        }
        std::string name() const override { return "failing"; }
    } failing;
    const std::string msg = thrown_message<ProtocolError>([&] { (void)sliding_window_infer(img, failing, {}); });
    EXPECT_NE(msg.find("window (col 128, row 0, size 256)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("masks/1.png"), std::string::npos) << msg;
}

TEST(SlidingWindow, WrongMaskCountOrSizeIsProtocolError) {
    const Image8 img = noise_image(300, 300, 8);
    ScriptedBackend small([](const Image8&) { return BinaryMask(128, 256); });
    EXPECT_THROW((void)sliding_window_infer(img, small, {}), ProtocolError);
    class Short final : public SegmentationBackend {
    public:
        std::vector<BinaryMask> segment(std::span<const Image8>, ObjectClass) override { return {}; }
        std::string name() const override { return "short"; }
    } short_backend;
    EXPECT_THROW((void)sliding_window_infer(img, short_backend, {}), ProtocolError);
}

// --- multiscale ------------------------------------------------------------------

TEST(Downscale, Examples) {
    BinaryMask a(2, 2);
    a.set(1, 0);
    const BinaryMask da = downscale_mask_preserving_positive(a, 2);
    ASSERT_EQ(da.width, 1);
    ASSERT_EQ(da.height, 1);
    EXPECT_TRUE(da.get(0, 0));

    BinaryMask b(5, 5);
    b.set(4, 4);
    const BinaryMask db = downscale_mask_preserving_positive(b, 2);
    ASSERT_EQ(db.width, 3);
    ASSERT_EQ(db.height, 3);
    EXPECT_EQ(db.count(), 1u);
    EXPECT_TRUE(db.get(2, 2));
    EXPECT_EQ(downscale_mask_preserving_positive(BinaryMask(4, 4), 2).count(), 0u);
}

TEST(Downscale, BlockAnyProperty) {
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = static_cast<int>(rng.uniform_int(1, 40)), h = static_cast<int>(rng.uniform_int(1, 40));
        BinaryMask m(w, h);
        for (auto& v : m.bits) v = rng.uniform01() < 0.05;
        const BinaryMask d = downscale_mask_preserving_positive(m, 2);
        for (int r = 0; r < d.height; ++r) {
            for (int c = 0; c < d.width; ++c) {
                bool any = false;
                for (int y = 2 * r; y < std::min(h, 2 * r + 2); ++y) {
                    for (int x = 2 * c; x < std::min(w, 2 * c + 2); ++x) any = any || m.get(x, y);
                }
                ASSERT_EQ(d.get(c, r), any);
            }
        }
    }
}

TEST(Multiscale, NativeOnlyEqualsSlidingWindow) {
    const Image8 img = noise_image(400, 300, 10);
    ScriptedBackend a(green), b(green);
    InferenceConfig cfg;
    cfg.scales = {1};
    EXPECT_EQ(multiscale_infer(img, a, cfg).bits, sliding_window_infer(img, b, cfg).bits);
}

TEST(Multiscale, UnionContainsEachScale) {
    const Image8 img = noise_image(300, 280, 11);
    ScriptedBackend b(green);
    InferenceConfig native, twice, both;
    native.scales = {1};
    twice.scales = {2};
    const BinaryMask m1 = multiscale_infer(img, b, native);
    const BinaryMask m2 = multiscale_infer(img, b, twice);
    const BinaryMask m12 = multiscale_infer(img, b, both);
    EXPECT_EQ(m12.width, 300);
    EXPECT_EQ(m12.height, 280);
    EXPECT_EQ(m12.bits, mask_or(m1, m2).bits);
    const Image8 up = scale_image_anisotropic(img, 2);
    EXPECT_EQ(m2.bits, downscale_mask_preserving_positive(green(up), 2).bits);
}

TEST(Multiscale, FineImageMustBeTwice) {
    const Image8 img = noise_image(100, 100, 12);
    const Image8 bad = noise_image(150, 200, 13);
    ScriptedBackend b(green);
    EXPECT_THROW((void)multiscale_infer(img, b, {}, &bad), InvalidArgument);
    const Image8 fine = noise_image(200, 200, 14);
    InferenceConfig cfg;
    cfg.scales = {2};
    EXPECT_EQ(multiscale_infer(img, b, cfg, &fine).bits, downscale_mask_preserving_positive(green(fine), 2).bits);
}

TEST(ValidPixels, BorderAndNodata) {
    std::vector<std::uint8_t> nd(64, 0);
    nd[4 * 8 + 4] = 1;
    const DtmGrid g(GridGeometry{8, 8, 1, 0, 8}, std::vector<double>(64, 0.0), nd);
    const BinaryMask v = valid_pixel_mask(g);
    EXPECT_FALSE(v.get(0, 3));
    EXPECT_FALSE(v.get(7, 3));
    EXPECT_FALSE(v.get(3, 3));
    EXPECT_FALSE(v.get(5, 5));
    EXPECT_TRUE(v.get(1, 1));
    EXPECT_TRUE(v.get(6, 6));
    EXPECT_EQ(v.count(), 36u - 9u);
    const BinaryMask all(8, 8, 1);
    EXPECT_EQ(mask_and(all, v).bits, v.bits);
    EXPECT_THROW((void)mask_and(BinaryMask(3, 3), v), InvalidArgument);
}

// --- baseline ----------------------------------------------------------------------

TEST(Baseline, UniformTileIsEmpty) {
    EXPECT_EQ(baseline_segment(Image8(256, 256, 3, 200)).count(), 0u);
    EXPECT_EQ(baseline_segment(Image8(256, 256, 3, 128)).count(), 0u);
    EXPECT_EQ(baseline_segment(Image8(64, 64, 3, 0)).count(), 64u * 64u);
    EXPECT_THROW((void)baseline_segment(Image8(8, 8, 1)), InvalidArgument);
}

TEST(Baseline, SteepRimIsFilled) {
    Image8 t(256, 256, 3, 255);
    for (int r = 100; r < 140; ++r) {
        for (int c = 90; c < 150; ++c) {
            const bool rim = r < 103 || r >= 137 || c < 93 || c >= 147;
            if (rim) t.at(c, r, 2) = 20;
        }
    }
    const BinaryMask m = baseline_segment(t);
    EXPECT_EQ(m.count(), 40u * 60u);
    EXPECT_TRUE(m.get(120, 120));
    EXPECT_FALSE(m.get(89, 120));
}

TEST(Baseline, ShiftEquivariant) {
    Image8 t(256, 256, 3, 255);
    Rng rng(15);
    for (int r = 60; r < 190; ++r) {
        for (int c = 60; c < 190; ++c) t.at(c, r, 2) = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    Image8 shifted(256, 256, 3, 255);
    for (int r = 0; r + 7 < 256; ++r) {
        for (int c = 0; c + 7 < 256; ++c) {
            for (int ch = 0; ch < 3; ++ch) shifted.at(c + 7, r + 7, ch) = t.at(c, r, ch);
        }
    }
    const BinaryMask a = baseline_segment(t), b = baseline_segment(shifted);
    ASSERT_GT(a.count(), 0u);
    EXPECT_EQ(a.count(), b.count());
    for (int r = 0; r + 7 < 256; ++r) {
        for (int c = 0; c + 7 < 256; ++c) ASSERT_EQ(a.get(c, r), b.get(c + 7, r + 7));
    }
}

// --- subprocess protocol --------------------------------------------------------------

TEST(Subprocess, RoundTrip) {
    const auto tiles = fake_tiles(3);
    const auto masks = run_backend_batch(tiles, fake_spec(), ObjectClass::annular);
    ASSERT_EQ(masks.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(masks[i].bits, green(tiles[i]).bits) << i;
}

TEST(Subprocess, BatchDirectoryLayout) {
    TempDir root;
    BackendSpec spec = fake_spec();
    spec.batch_root = root.path();
    spec.keep_batches = true;
    SubprocessBackend backend(spec);
    const auto tiles = fake_tiles(2);
    (void)backend.segment(tiles, ObjectClass::platform);
    const auto dir = backend.last_batch_dir();
    EXPECT_EQ(dir.parent_path(), root.path());
    EXPECT_EQ(dir.filename().string().rfind("batch-", 0), 0u);
    std::ifstream in(dir / "batch.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("version"), 1);
    EXPECT_EQ(j.at("class"), "platform");
    ASSERT_EQ(j.at("tiles").size(), 2u);
    for (int i = 0; i < 2; ++i) {
        EXPECT_TRUE(std::filesystem::exists(dir / "tiles" / (std::to_string(i) + ".png")));
        EXPECT_TRUE(std::filesystem::exists(dir / "masks" / (std::to_string(i) + ".png")));
    }
    EXPECT_EQ(read_image(dir / "tiles" / "1.png").data, tiles[1].data);
    EXPECT_TRUE(std::filesystem::exists(dir / "done.json"));
}

TEST(Subprocess, BatchDirectoriesRemovedByDefault) {
    TempDir root;
    BackendSpec spec = fake_spec();
    spec.batch_root = root.path();
    (void)run_backend_batch(fake_tiles(1), spec, ObjectClass::platform);
    EXPECT_TRUE(std::filesystem::is_empty(root.path()));
}

TEST(Subprocess, ChunksAndOffsetsTileErrors) {
    BackendSpec spec = fake_spec({"--mode", "missing"});
    spec.batch_size = 2;
    const auto tiles = fake_tiles(3);
    try {
        (void)run_backend_batch(tiles, spec, ObjectClass::platform);
        FAIL() << "expected TileError";
    } catch (const TileError& e) {
        // The first chunk (tiles 0, 1) drops tile 1.
        EXPECT_EQ(e.tile(), 1u);
        EXPECT_NE(std::string(e.what()).find("missing mask"), std::string::npos);
    }
    spec.args.clear();
    const auto ok = run_backend_batch(tiles, spec, ObjectClass::platform);
    ASSERT_EQ(ok.size(), 3u);
    EXPECT_EQ(ok[2].bits, green(tiles[2]).bits);
}

TEST(Subprocess, FailureModes) {
    const auto tiles = fake_tiles(2);
    auto msg = [&](const std::string& mode) {
        return thrown_message<ProtocolError>(
            [&] { (void)run_backend_batch(tiles, fake_spec({"--mode", mode}), ObjectClass::platform); });
    };
    EXPECT_NE(msg("exit").find("exited with code 5"), std::string::npos);
    EXPECT_NE(msg("status-error").find("model exploded"), std::string::npos);
    EXPECT_NE(msg("missing").find("tile 1 (masks/1.png)"), std::string::npos);
    EXPECT_NE(msg("wrong-size").find("mask is 128x256, expected 256x256"), std::string::npos);
    EXPECT_NE(msg("rgb").find("8-bit gray"), std::string::npos);
    EXPECT_NE(msg("bad-values").find("neither 0 nor 255"), std::string::npos);
    EXPECT_NE(msg("no-done").find("done.json"), std::string::npos);
}

TEST(Subprocess, TimeoutKillsProcess) {
    BackendSpec spec = fake_spec({"--sleep", "20"});
    spec.timeout_s = 0.5;
    const auto start = std::chrono::steady_clock::now();
    const std::string m =
        thrown_message<ProtocolError>([&] { (void)run_backend_batch(fake_tiles(1), spec, ObjectClass::platform); });
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_NE(m.find("timed out"), std::string::npos) << m;
    EXPECT_LT(elapsed, 5.0);
}

TEST(Subprocess, LaunchFailure) {
    BackendSpec spec = fake_spec();
    spec.command = "/nonexistent/archseg-model";
    EXPECT_THROW((void)run_backend_batch(fake_tiles(1), spec, ObjectClass::platform), ProtocolError);
}

TEST(Subprocess, EmptyBatchNeverLaunches) {
    BackendSpec spec = fake_spec();
    spec.command = "/nonexistent/archseg-model";
    EXPECT_TRUE(run_backend_batch({}, spec, ObjectClass::platform).empty());
}

TEST(Subprocess, TileShapeCheckedUpFront) {
    std::vector<Image8> tiles = fake_tiles(2);
    tiles.push_back(Image8(256, 128, 3));
    const std::string m = thrown_message<InvalidArgument>(
        [&] { (void)run_backend_batch(tiles, fake_spec(), ObjectClass::platform); });
    EXPECT_NE(m.find("tile 2 is 256x128x3"), std::string::npos) << m;
}

TEST(Subprocess, SpecValidation) {
    BackendSpec s = fake_spec();
    s.command.clear();
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = fake_spec();
    s.batch_size = 0;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = fake_spec();
    s.timeout_s = 0;
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Subprocess, DrivesSlidingWindow) {
    const Image8 img = noise_image(400, 300, 20);
    BackendSpec spec = fake_spec();
    spec.batch_size = 3;
    auto backend = make_backend(spec);
    EXPECT_EQ(backend->name(), "subprocess");
    EXPECT_EQ(sliding_window_infer(img, *backend, {}).bits, green(img).bits);
}
