#include "archseg/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "archseg/error.hpp"
#include "parallel.hpp"

namespace archseg {
namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;

// ---------------------------------------------------------------------------
// Horizon scan stencils

struct Tap {
    int dx = 0;
    int dy = 0;
    double weight = 0.0;
};

// One bilinear sample along a ray.
struct RayStep {
    double distance = 0.0;
    std::array<Tap, 4> taps{};
    int tap_count = 0;
};

using RayStencil = std::vector<RayStep>;

RayStencil make_ray(double dcol, double drow, int steps, double cell_size) {
    RayStencil ray;
    ray.reserve(static_cast<std::size_t>(steps));
    for (int k = 1; k <= steps; ++k) {
        const double ox = k * dcol;
        const double oy = k * drow;
        const double x0 = std::floor(ox);
        const double y0 = std::floor(oy);
        const double fx = ox - x0;
        const double fy = oy - y0;
        const int ix = static_cast<int>(x0);
        const int iy = static_cast<int>(y0);
        const std::array<Tap, 4> all = {Tap{ix, iy, (1.0 - fx) * (1.0 - fy)},
                                        Tap{ix + 1, iy, fx * (1.0 - fy)},
                                        Tap{ix, iy + 1, (1.0 - fx) * fy},
                                        Tap{ix + 1, iy + 1, fx * fy}};
        RayStep step;
        step.distance = k * cell_size;
        for (const Tap& t : all) {
            if (t.weight != 0.0) step.taps[static_cast<std::size_t>(step.tap_count++)] = t;
        }
        ray.push_back(step);
    }
    return ray;
}

// Quarter turn clockwise in pixel space (bearing + 90 degrees).
RayStencil rotate_quarter(const RayStencil& ray) {
    RayStencil out = ray;
    for (auto& step : out) {
        for (int t = 0; t < step.tap_count; ++t) {
            Tap& tap = step.taps[static_cast<std::size_t>(t)];
            const int x = tap.dx;
            tap.dx = -tap.dy;
            tap.dy = x;
        }
    }
    return out;
}

// When n is a multiple of 4 the last three quadrants are exact integer
// rotations of the first, so a rotated grid reproduces identical samples.
std::vector<RayStencil> build_stencils(const HorizonScanParams& params, double cell_size) {
    const int n = params.n_directions;
    const int steps = static_cast<int>(std::floor(params.radius_m / cell_size + 1e-9));
    std::vector<RayStencil> rays(static_cast<std::size_t>(n));
    auto direct = [&](int i) {
        const double a = 2.0 * std::numbers::pi * i / n;
        double dcol = std::sin(a);
        double drow = -std::cos(a);
        // Snap axis-aligned bearings so they sample exactly one cell column/row.
        if (std::abs(dcol) < 1e-12) dcol = 0.0;
        if (std::abs(drow) < 1e-12) drow = 0.0;
        if (dcol == 0.0) drow = drow < 0.0 ? -1.0 : 1.0;
        if (drow == 0.0) dcol = dcol < 0.0 ? -1.0 : 1.0;
        return make_ray(dcol, drow, steps, cell_size);
    };
    if (n % 4 == 0) {
        const int quarter = n / 4;
        for (int i = 0; i < quarter; ++i) {
            rays[static_cast<std::size_t>(i)] = direct(i);
            for (int q = 1; q < 4; ++q) {
                rays[static_cast<std::size_t>(i + q * quarter)] =
                    rotate_quarter(rays[static_cast<std::size_t>(i + (q - 1) * quarter)]);
            }
        }
    } else {
        for (int i = 0; i < n; ++i) rays[static_cast<std::size_t>(i)] = direct(i);
    }
    return rays;
}

// Horizon angle in degrees along one ray; 0 when the ray has no samples.
template <bool Checked>
double horizon_along(const DtmGrid& grid, int col, int row, double z0, const RayStencil& ray) {
    const int w = grid.width();
    const int h = grid.height();
    const double* z = grid.elevations().data();
    bool any = false;
    double best = 0.0;
    for (const RayStep& step : ray) {
        double sample = 0.0;
        bool ok = true;
        for (int t = 0; t < step.tap_count; ++t) {
            const Tap& tap = step.taps[static_cast<std::size_t>(t)];
            const int c = col + tap.dx;
            const int r = row + tap.dy;
            if constexpr (Checked) {
                if (c < 0 || r < 0 || c >= w || r >= h || grid.is_nodata(c, r)) {
                    ok = false;
                    break;
                }
            }
            sample += tap.weight * z[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                                     static_cast<std::size_t>(c)];
        }
        if (!ok) break;
        const double ratio = (sample - z0) / step.distance;
        if (!any || ratio > best) best = ratio;
        any = true;
    }
    return any ? std::atan(best) * kDeg : 0.0;
}

int stencil_reach(const std::vector<RayStencil>& rays) {
    int reach = 0;
    for (const auto& ray : rays) {
        for (const auto& step : ray) {
            for (int t = 0; t < step.tap_count; ++t) {
                reach = std::max({reach, std::abs(step.taps[static_cast<std::size_t>(t)].dx),
                                  std::abs(step.taps[static_cast<std::size_t>(t)].dy)});
            }
        }
    }
    return reach;
}

void scan_pixel(const DtmGrid& grid, int col, int row, const std::vector<RayStencil>& rays,
                bool checked, std::vector<double>& angles) {
    const double z0 = grid.at(col, row);
    for (std::size_t i = 0; i < rays.size(); ++i) {
        angles[i] = checked ? horizon_along<true>(grid, col, row, z0, rays[i])
                            : horizon_along<false>(grid, col, row, z0, rays[i]);
    }
}

void require_min_size(const DtmGrid& grid, const char* what) {
    if (grid.width() < 3 || grid.height() < 3) {
        throw InvalidArgument(std::string(what) + ": grid must be at least 3x3");
    }
}

struct Gradient {
    double dzdx = 0.0;  // east
    double dzdn = 0.0;  // north
};

// Horn's weighted differences. Pair sums are formed symmetrically so that
// a quarter-turned grid yields bit-identical magnitudes.
bool horn_gradient(const DtmGrid& g, int c, int r, Gradient& out) {
    if (c < 1 || r < 1 || c >= g.width() - 1 || r >= g.height() - 1) return false;
    if (g.has_nodata()) {
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (g.is_nodata(c + dc, r + dr)) return false;
            }
        }
    }
    const double a = g.at(c - 1, r - 1), b = g.at(c, r - 1), cc = g.at(c + 1, r - 1);
    const double d = g.at(c - 1, r), f = g.at(c + 1, r);
    const double gg = g.at(c - 1, r + 1), hh = g.at(c, r + 1), i = g.at(c + 1, r + 1);
    const double denom = 8.0 * g.cell_size();
    out.dzdx = (((cc + i) + 2.0 * f) - ((a + gg) + 2.0 * d)) / denom;
    out.dzdn = (((a + cc) + 2.0 * b) - ((gg + i) + 2.0 * hh)) / denom;
    return true;
}

}  // namespace

void HorizonScanParams::validate(double cell_size) const {
    if (n_directions < 4 || n_directions % 2 != 0) {
        throw InvalidArgument("horizon scan: n_directions must be even and at least 4");
    }
    if (!(radius_m >= 2.0 * cell_size)) {
        throw InvalidArgument("horizon scan: radius must be at least two cells");
    }
}

StretchParams default_stretch() { return StretchParams{}; }

ChannelStretch unit_stretch() { return ChannelStretch{0.0, 1.0, false}; }

ChannelRaster compute_slope(const DtmGrid& grid, ExecutionOptions exec) {
    require_min_size(grid, "compute_slope");
    ChannelRaster out(grid.width(), grid.height(), ChannelUnit::degrees);
    detail::parallel_rows(grid.height(), exec.threads, [&](int r) {
        for (int c = 0; c < grid.width(); ++c) {
            Gradient gr;
            const std::size_t idx = out.index(c, r);
            if (!horn_gradient(grid, c, r, gr)) {
                out.nodata[idx] = 1;
                continue;
            }
            out.values[idx] = std::atan(std::sqrt(gr.dzdx * gr.dzdx + gr.dzdn * gr.dzdn)) * kDeg;
        }
    });
    return out;
}

ChannelRaster compute_hillshade(const DtmGrid& grid, double azimuth_deg, double altitude_deg,
                                ExecutionOptions exec) {
    if (!(altitude_deg > 0.0 && altitude_deg <= 90.0)) {
        throw InvalidArgument("compute_hillshade: altitude must be in (0, 90] degrees");
    }
    require_min_size(grid, "compute_hillshade");
    const double zenith = (90.0 - altitude_deg) * kRad;
    const double azimuth = azimuth_deg * kRad;
    const double cos_zen = std::cos(zenith);
    const double sin_zen = std::sin(zenith);
    ChannelRaster out(grid.width(), grid.height(), ChannelUnit::unit_interval);
    detail::parallel_rows(grid.height(), exec.threads, [&](int r) {
        for (int c = 0; c < grid.width(); ++c) {
            Gradient gr;
            const std::size_t idx = out.index(c, r);
            if (!horn_gradient(grid, c, r, gr)) {
                out.nodata[idx] = 1;
                continue;
            }
            const double slope = std::atan(std::sqrt(gr.dzdx * gr.dzdx + gr.dzdn * gr.dzdn));
            // Bearing of the downslope direction.
            const double aspect = std::atan2(-gr.dzdx, -gr.dzdn);
            const double v = cos_zen * std::cos(slope) +
                             sin_zen * std::sin(slope) * std::cos(azimuth - aspect);
            out.values[idx] = std::clamp(v, 0.0, 1.0);
        }
    });
    return out;
}

std::vector<double> compute_horizon_angles(const DtmGrid& grid, int col, int row,
                                           const HorizonScanParams& params) {
    params.validate(grid.cell_size());
    if (!grid.geometry().contains(col, row)) {
        throw InvalidArgument("compute_horizon_angles: pixel outside grid");
    }
    const auto rays = build_stencils(params, grid.cell_size());
    std::vector<double> angles(rays.size());
    scan_pixel(grid, col, row, rays, true, angles);
    return angles;
}

double sky_view_factor_from_horizon(std::span<const double> angles_deg) {
    if (angles_deg.empty()) return 1.0;
    std::vector<double> terms;
    terms.reserve(angles_deg.size());
    for (double g : angles_deg) terms.push_back(std::sin(std::max(g, 0.0) * kRad));
    // Summing in sorted order makes the result independent of direction order.
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    return 1.0 - sum / static_cast<double>(terms.size());
}

double openness_from_horizon(std::span<const double> angles_deg, bool clamp) {
    if (angles_deg.empty()) return 90.0;
    std::vector<double> terms;
    terms.reserve(angles_deg.size());
    const double floor_deg = clamp ? 0.0 : -90.0;
    for (double g : angles_deg) terms.push_back(90.0 - std::max(g, floor_deg));
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    return sum / static_cast<double>(terms.size());
}

SvfOpenness compute_svf_and_openness(const DtmGrid& grid, const HorizonScanParams& params,
                                     ExecutionOptions exec) {
    require_min_size(grid, "compute_svf_and_openness");
    params.validate(grid.cell_size());
    const auto rays = build_stencils(params, grid.cell_size());
    const int reach = stencil_reach(rays);
    SvfOpenness out{ChannelRaster(grid.width(), grid.height(), ChannelUnit::dimensionless),
                    ChannelRaster(grid.width(), grid.height(), ChannelUnit::degrees)};
    const bool any_nodata = grid.has_nodata();
    detail::parallel_rows(grid.height(), exec.threads, [&](int r) {
        std::vector<double> angles(rays.size());
        const bool row_interior = r >= reach && r < grid.height() - reach;
        for (int c = 0; c < grid.width(); ++c) {
            const std::size_t idx = out.svf.index(c, r);
            if (grid.is_nodata(c, r)) {
                out.svf.nodata[idx] = 1;
                out.openness.nodata[idx] = 1;
                continue;
            }
            const bool checked =
                any_nodata || !row_interior || c < reach || c >= grid.width() - reach;
            scan_pixel(grid, c, r, rays, checked, angles);
            out.svf.values[idx] = sky_view_factor_from_horizon(angles);
            out.openness.values[idx] = openness_from_horizon(angles, params.clamp_openness);
        }
    });
    return out;
}

ChannelRaster compute_svf(const DtmGrid& grid, const HorizonScanParams& params,
                          ExecutionOptions exec) {
    return compute_svf_and_openness(grid, params, exec).svf;
}

ChannelRaster compute_positive_openness(const DtmGrid& grid, const HorizonScanParams& params,
                                        ExecutionOptions exec) {
    return compute_svf_and_openness(grid, params, exec).openness;
}

ChannelRaster normalize_elevation(const DtmGrid& tile) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (int r = 0; r < tile.height(); ++r) {
        for (int c = 0; c < tile.width(); ++c) {
            if (tile.is_nodata(c, r)) continue;
            const double z = tile.at(c, r);
            if (!any) {
                lo = hi = z;
                any = true;
            } else {
                lo = std::min(lo, z);
                hi = std::max(hi, z);
            }
        }
    }
    if (!any) throw InvalidArgument("normalize_elevation: tile has no valid cells");
    ChannelRaster out(tile.width(), tile.height(), ChannelUnit::unit_interval);
    const double span = hi - lo;
    for (int r = 0; r < tile.height(); ++r) {
        for (int c = 0; c < tile.width(); ++c) {
            const std::size_t idx = out.index(c, r);
            if (tile.is_nodata(c, r)) {
                out.nodata[idx] = 1;
                continue;
            }
            out.values[idx] = span > 0.0 ? (tile.at(c, r) - lo) / span : 0.0;
        }
    }
    return out;
}

std::uint8_t stretch_to_byte(double value, const ChannelStretch& s) noexcept {
    double t = (value - s.min) / (s.max - s.min);
    if (std::isnan(t)) t = 0.0;
    t = std::clamp(t, 0.0, 1.0);
    if (s.invert) t = 1.0 - t;
    return static_cast<std::uint8_t>(std::lround(255.0 * t));
}

namespace {

void check_stretch(const ChannelStretch& s, const char* name) {
    if (!(s.max > s.min)) {
        throw InvalidArgument(std::string("stretch for ") + name + ": max must exceed min");
    }
}

}  // namespace

SpsImage compose_sps(const ChannelRaster& svf, const ChannelRaster& openness,
                     const ChannelRaster& slope, const StretchParams& stretch) {
    if (svf.width != openness.width || svf.width != slope.width || svf.height != openness.height ||
        svf.height != slope.height) {
        throw InvalidArgument("compose_sps: channel dimensions differ");
    }
    check_stretch(stretch.svf, "svf");
    check_stretch(stretch.openness, "openness");
    check_stretch(stretch.slope, "slope");
    SpsImage out{Image8(svf.width, svf.height, 3), stretch};
    for (int r = 0; r < svf.height; ++r) {
        for (int c = 0; c < svf.width; ++c) {
            const std::size_t idx = svf.index(c, r);
            if (svf.nodata[idx] || openness.nodata[idx] || slope.nodata[idx]) continue;
            out.image.at(c, r, 0) = stretch_to_byte(svf.values[idx], stretch.svf);
            out.image.at(c, r, 1) = stretch_to_byte(openness.values[idx], stretch.openness);
            out.image.at(c, r, 2) = stretch_to_byte(slope.values[idx], stretch.slope);
        }
    }
    return out;
}

Image8 replicate_single_channel(const ChannelRaster& raster, const ChannelStretch& stretch) {
    check_stretch(stretch, "channel");
    Image8 out(raster.width, raster.height, 3);
    for (int r = 0; r < raster.height; ++r) {
        for (int c = 0; c < raster.width; ++c) {
            const std::size_t idx = raster.index(c, r);
            if (raster.nodata[idx]) continue;
            const std::uint8_t v = stretch_to_byte(raster.values[idx], stretch);
            for (int ch = 0; ch < 3; ++ch) out.at(c, r, ch) = v;
        }
    }
    return out;
}

SpsImage make_sps(const DtmGrid& grid, const HorizonScanParams& params,
                  const StretchParams& stretch, ExecutionOptions exec) {
    const auto horizon = compute_svf_and_openness(grid, params, exec);
    const auto slope = compute_slope(grid, exec);
    return compose_sps(horizon.svf, horizon.openness, slope, stretch);
}

}  // namespace archseg
