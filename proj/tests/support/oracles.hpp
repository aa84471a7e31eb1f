#pragma once

#include <vector>

#include "archseg/metrics.hpp"
#include "archseg/raster.hpp"

namespace archseg::testing {

// Independent reference implementations, written for clarity rather than speed.

// Horizon angles by marching each ray one cell length at a time from the pixel
// centre, interpolating the DTM bilinearly at every step.
std::vector<double> oracle_horizon(const DtmGrid& grid, int col, int row, int n_directions,
                                   double radius_m);

struct OracleSvfPo {
    std::vector<double> svf;
    std::vector<double> po;
    std::vector<bool> nodata;
};
OracleSvfPo oracle_svf_po(const DtmGrid& grid, int n_directions, double radius_m, bool clamp);

// Double-loop TP/FP/FN count.
EvalCounts oracle_counts(const BinaryMask& pred, const BinaryMask& gt);

// Pixel-centre crossing-number test against every polygon.
BinaryMask oracle_rasterize(const std::vector<LabelledPolygon>& pixel_polys, int width, int height);

}  // namespace archseg::testing
