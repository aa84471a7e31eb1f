#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archseg/geometry.hpp"
#include "archseg/raster.hpp"

namespace archseg {

struct EvalCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

// Each ratio is nullopt when its denominator is zero.
struct PixelMetrics {
    std::optional<double> iou;
    std::optional<double> precision;
    std::optional<double> recall;
    EvalCounts counts;
};

[[nodiscard]] PixelMetrics metrics_from_counts(const EvalCounts& counts);
// Throws InvalidArgument on a dimension mismatch.
[[nodiscard]] PixelMetrics pixel_metrics(const BinaryMask& pred, const BinaryMask& gt);

// One polygon per 8-connected component, traced along pixel corners, with
// enclosed background as inner rings. Vertices are in pixel (col, row) units.
[[nodiscard]] std::vector<LabelledPolygon> vectorize_mask(const BinaryMask& mask,
                                                          ObjectClass cls = ObjectClass::platform,
                                                          const std::string& id_prefix = "pred-");
// Same, converted to world coordinates through `geometry`.
[[nodiscard]] std::vector<LabelledPolygon> vectorize_mask(const BinaryMask& mask,
                                                          const GridGeometry& geometry,
                                                          ObjectClass cls = ObjectClass::platform,
                                                          const std::string& id_prefix = "pred-");

struct TopologyRow {
    std::size_t total = 0;
    std::size_t intersecting = 0;
    [[nodiscard]] std::optional<double> pct() const {
        if (total == 0) return std::nullopt;
        return static_cast<double>(intersecting) / static_cast<double>(total);
    }
};

struct ClassTopology {
    TopologyRow gt;    // ground-truth polygons hit by at least one prediction
    TopologyRow pred;  // predictions hitting at least one ground-truth polygon
};

struct TopologyReport {
    std::map<std::string, ClassTopology> per_class;  // same-class pairs only
    ClassTopology overall;                           // class-agnostic
};

[[nodiscard]] TopologyReport topology_report(const std::vector<LabelledPolygon>& gt,
                                             const std::vector<LabelledPolygon>& pred);

struct QuartileRow {
    int quartile = 0;  // 1..4, 0 for the overall row
    std::size_t count = 0;
    double max_area = 0.0;
    std::size_t intersecting = 0;
    [[nodiscard]] double pct() const {
        return count ? static_cast<double>(intersecting) / static_cast<double>(count) : 0.0;
    }
};

struct QuartileReport {
    std::vector<QuartileRow> quartiles;
    QuartileRow overall;
};

// Ground truth sorted by area (ties by id) and split into four groups whose
// sizes differ by at most one, earlier groups taking the remainder.
// Throws InvalidArgument for fewer than four polygons.
[[nodiscard]] QuartileReport quartile_analysis(const std::vector<LabelledPolygon>& gt,
                                               const std::vector<LabelledPolygon>& pred);

struct EvalReport {
    std::optional<PixelMetrics> pixel;
    TopologyReport topology;
    std::map<std::string, QuartileReport> quartiles;  // classes with >= 4 GT, plus "all"
    nlohmann::json params = nlohmann::json::object();
};

[[nodiscard]] EvalReport evaluate(const std::vector<LabelledPolygon>& gt,
                                  const std::vector<LabelledPolygon>& pred,
                                  const std::optional<PixelMetrics>& pixel);

// Versioned JSON form ("schema": 1).
[[nodiscard]] nlohmann::json to_json(const EvalReport& report);
[[nodiscard]] nlohmann::json to_json(const PixelMetrics& metrics);

}  // namespace archseg
