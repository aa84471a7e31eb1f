#pragma once

#include <cstdint>
#include <vector>

#include "archseg/raster.hpp"

namespace archseg::testing {

struct SceneParams {
    int size = 1024;
    double cell_size = 0.5;
    int mesas = 12;
    int rings = 6;
    double mesa_height = 1.5;
    int mesa_ramp_px = 2;
    int mesa_min_px = 20;
    int mesa_max_px = 60;
    double ring_height = 1.2;
    double ring_crest_px = 8.0;     // crest radius
    double ring_half_width_px = 4.0;
    double noise_m = 0.005;
    std::uint64_t seed = 7;
};

struct Scene {
    DtmGrid grid;
    std::vector<LabelledPolygon> gt;  // world coordinates; mesas are platforms, rings annular
};

// Gently tilted terrain with flat-topped rectangular mesas (GT = footprint)
// and triangular-profile ring mounds (GT = disk of the outer radius), laid out
// on a jittered lattice so objects never touch each other or the border.
[[nodiscard]] Scene make_scene(const SceneParams& params = {});

}  // namespace archseg::testing
