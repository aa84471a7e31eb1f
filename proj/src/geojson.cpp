#include <nlohmann/json.hpp>

#include "archseg/error.hpp"
#include "archseg/geometry.hpp"
#include "archseg/io.hpp"

namespace archseg {
namespace {

using nlohmann::json;

Ring parse_ring(const json& coords, const std::string& feature_id) {
    if (!coords.is_array()) throw ParseError("geojson: ring of '" + feature_id + "' is not an array");
    Ring ring;
    ring.reserve(coords.size());
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw ParseError("geojson: malformed position in '" + feature_id + "'");
        }
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    ring = close_ring(std::move(ring));
    if (distinct_vertex_count(ring) < 3) {
        throw ParseError("geojson: ring of '" + feature_id + "' has fewer than 3 distinct vertices");
    }
    return ring;
}

LabelledPolygon parse_polygon(const json& rings, ObjectClass cls, std::string id) {
    if (!rings.is_array() || rings.empty()) {
        throw ParseError("geojson: polygon '" + id + "' has no rings");
    }
    LabelledPolygon poly;
    poly.cls = cls;
    poly.outer = parse_ring(rings[0], id);
    for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(parse_ring(rings[i], id));
    poly.id = std::move(id);
    return poly;
}

std::string id_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return v.dump();
    throw ParseError("geojson: feature id must be a string or number");
}

json ring_json(const Ring& ring) {
    json out = json::array();
    for (const auto& p : close_ring(ring)) out.push_back({p.x, p.y});
    return out;
}

}  // namespace

std::vector<LabelledPolygon> load_geojson_labels(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("geojson: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array()) {
        throw ParseError("geojson: expected a FeatureCollection with a features array");
    }

    std::vector<LabelledPolygon> out;
    std::size_t index = 0;
    for (const auto& feature : doc["features"]) {
        const std::string fallback_id = "feature-" + std::to_string(index++);
        if (!feature.is_object()) throw ParseError("geojson: feature is not an object");
        const json props = feature.value("properties", json::object());
        std::string id = fallback_id;
        if (props.is_object() && props.contains("id") && !props["id"].is_null()) {
            id = id_string(props["id"]);
        } else if (feature.contains("id") && !feature["id"].is_null()) {
            id = id_string(feature["id"]);
        }
        if (!props.is_object() || !props.contains("class") || !props["class"].is_string()) {
            throw ParseError("geojson: feature '" + id +
                             "' lacks a string \"class\" property (accepted classes: platform, annular)");
        }
        const ObjectClass cls = parse_object_class(props["class"].get<std::string>());

        if (!feature.contains("geometry") || !feature["geometry"].is_object()) {
            throw ParseError("geojson: feature '" + id + "' has no geometry");
        }
        const json& geom = feature["geometry"];
        const std::string type = geom.value("type", "");
        if (!geom.contains("coordinates")) {
            throw ParseError("geojson: geometry of '" + id + "' has no coordinates");
        }
        if (type == "Polygon") {
            out.push_back(parse_polygon(geom["coordinates"], cls, id));
        } else if (type == "MultiPolygon") {
            const json& parts = geom["coordinates"];
            if (!parts.is_array()) throw ParseError("geojson: malformed MultiPolygon '" + id + "'");
            for (std::size_t k = 0; k < parts.size(); ++k) {
                out.push_back(parse_polygon(parts[k], cls, id + "/" + std::to_string(k)));
            }
        } else {
            throw ParseError("geojson: feature '" + id + "' has unsupported geometry type '" +
                             type + "' (expected Polygon or MultiPolygon)");
        }
    }
    return out;
}

std::vector<LabelledPolygon> read_geojson_file(const std::filesystem::path& path) {
    return load_geojson_labels(read_text_file(path));
}

std::string save_geojson(const std::vector<LabelledPolygon>& polygons,
                         const GeoJsonWriteOptions& options) {
    json features = json::array();
    for (const auto& poly : polygons) {
        json rings = json::array();
        rings.push_back(ring_json(poly.outer));
        for (const auto& hole : poly.holes) rings.push_back(ring_json(hole));
        json props = {{"class", std::string(to_string(poly.cls))}, {"id", poly.id}};
        if (options.include_area) props["area_m2"] = polygon_area(poly);
        features.push_back({{"type", "Feature"},
                            {"properties", std::move(props)},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}}});
    }
    json doc = {{"type", "FeatureCollection"}, {"features", std::move(features)}};
    return doc.dump(1) + "\n";
}

void write_geojson_file(const std::filesystem::path& path,
                        const std::vector<LabelledPolygon>& polygons,
                        const GeoJsonWriteOptions& options) {
    write_text_file(path, save_geojson(polygons, options));
}

}  // namespace archseg
