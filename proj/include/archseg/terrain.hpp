#pragma once

#include <array>
#include <span>
#include <vector>

#include "archseg/raster.hpp"

namespace archseg {

struct ExecutionOptions {
    // Worker threads for row-parallel kernels; 0 picks hardware concurrency.
    // Output never depends on this value.
    unsigned threads = 1;
};

struct HorizonScanParams {
    int n_directions = 16;
    double radius_m = 10.0;
    // When set, negative horizon angles contribute 0 to positive openness,
    // keeping it in [0, 90] degrees.
    bool clamp_openness = true;

    // Throws InvalidArgument unless n_directions >= 4, even, and radius >= 2 cells.
    void validate(double cell_size) const;
};

// Linear 8-bit mapping of one channel.
struct ChannelStretch {
    double min = 0.0;
    double max = 1.0;
    bool invert = false;
};

// Per-channel stretches in SPS channel order: SVF, PO, slope.
struct StretchParams {
    ChannelStretch svf{0.65, 1.0, false};
    ChannelStretch openness{60.0, 95.0, false};
    ChannelStretch slope{0.0, 50.0, true};
};

[[nodiscard]] StretchParams default_stretch();
[[nodiscard]] ChannelStretch unit_stretch();  // [0,1], used by hillshade and elevation

struct SpsImage {
    Image8 image;  // 3 channels: SVF, PO, slope
    StretchParams stretch;
};

// Slope in degrees from Horn's 3x3 weighted finite difference. Border pixels
// and pixels whose 3x3 neighbourhood touches nodata are nodata.
[[nodiscard]] ChannelRaster compute_slope(const DtmGrid& grid, ExecutionOptions exec = {});

// Lambertian shading in [0,1]; azimuth is the compass bearing of the sun.
[[nodiscard]] ChannelRaster compute_hillshade(const DtmGrid& grid, double azimuth_deg,
                                              double altitude_deg, ExecutionOptions exec = {});

// Horizon elevation angle (degrees) per direction at one pixel. Direction i
// has compass bearing i*360/n, starting north and turning clockwise.
[[nodiscard]] std::vector<double> compute_horizon_angles(const DtmGrid& grid, int col, int row,
                                                         const HorizonScanParams& params);

// Reductions of one pixel's horizon angles.
[[nodiscard]] double sky_view_factor_from_horizon(std::span<const double> angles_deg);
[[nodiscard]] double openness_from_horizon(std::span<const double> angles_deg, bool clamp);

[[nodiscard]] ChannelRaster compute_svf(const DtmGrid& grid, const HorizonScanParams& params,
                                        ExecutionOptions exec = {});
[[nodiscard]] ChannelRaster compute_positive_openness(const DtmGrid& grid,
                                                      const HorizonScanParams& params,
                                                      ExecutionOptions exec = {});

struct SvfOpenness {
    ChannelRaster svf;
    ChannelRaster openness;
};
// One horizon scan feeding both outputs.
[[nodiscard]] SvfOpenness compute_svf_and_openness(const DtmGrid& grid,
                                                   const HorizonScanParams& params,
                                                   ExecutionOptions exec = {});

// (z - min) / (max - min) over valid cells; a constant grid maps to 0.
[[nodiscard]] ChannelRaster normalize_elevation(const DtmGrid& tile);

[[nodiscard]] std::uint8_t stretch_to_byte(double value, const ChannelStretch& s) noexcept;

[[nodiscard]] SpsImage compose_sps(const ChannelRaster& svf, const ChannelRaster& openness,
                                   const ChannelRaster& slope, const StretchParams& stretch);

// One representation copied into all three channels.
[[nodiscard]] Image8 replicate_single_channel(const ChannelRaster& raster,
                                              const ChannelStretch& stretch);

// Full SPS derivation from a DTM.
[[nodiscard]] SpsImage make_sps(const DtmGrid& grid, const HorizonScanParams& params,
                                const StretchParams& stretch, ExecutionOptions exec = {});

}  // namespace archseg
