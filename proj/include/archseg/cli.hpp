#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archseg/dataset.hpp"
#include "archseg/inference.hpp"
#include "archseg/terrain.hpp"

namespace archseg::cli {

// Bad command lines and configs; the CLI maps these to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

struct HillshadeParams {
    double azimuth_deg = 315.0;
    double altitude_deg = 45.0;
};

// Everything a subcommand may read. Defaults, then the --config file, then
// flags; the merged value is echoed into every report.
struct PipelineConfig {
    std::filesystem::path dtm;
    std::filesystem::path labels;
    std::filesystem::path out;
    ObjectClass cls = ObjectClass::platform;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string representation = "sps";

    HorizonScanParams horizon;
    StretchParams stretch;
    HillshadeParams hillshade;

    int variants_per_object = 0;  // 0: the class default
    std::vector<int> dataset_scales{1, 2};
    int background_tiles = 0;
    double max_translation_px = 64.0;
    int min_label_px = kMinLabelExtentPx;

    int stride = 128;
    std::vector<int> inference_scales{1, 2};
    bool rederive_fine = false;

    BackendSpec backend;

    int min_bbox_px = 15;

    [[nodiscard]] DatasetConfig dataset_config() const;
    [[nodiscard]] InferenceConfig inference_config() const;
    [[nodiscard]] ExecutionOptions execution() const { return {threads}; }
};

// Overlays the keys present in `j` onto `cfg`. Unknown keys and wrong types
// raise UsageError naming the key.
void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const PipelineConfig& cfg);

// Representation names accepted by viz and ablate.
[[nodiscard]] const std::vector<std::string>& representation_names();
// 3-channel 8-bit image of one representation of the grid.
[[nodiscard]] Image8 representation_image(const DtmGrid& grid, const std::string& repr,
                                          const PipelineConfig& cfg);

// Entry point; `args` excludes the program name. Returns 0 on success,
// 1 on runtime errors and 2 on usage errors.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace archseg::cli
