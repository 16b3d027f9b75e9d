#pragma once

#include "rawburst/model/burst.hpp"
#include "rawburst/model/warp.hpp"
#include "rawburst/synth/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rawburst::io {

using Json = nlohmann::json;

struct FrameRecord {
    std::string file;
    double ev = 0.0;
    double exposure = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    std::optional<Affine> gt_affine;  // high-resolution pixel units, frame -> reference
    Json extra = Json::object();      // unknown keys, preserved on rewrite
};

/// Contents of a burst directory's meta.json.
struct BurstSidecar {
    int frame_count = 0;
    int reference = 0;  // zero-based
    int scale = 1;
    std::uint64_t seed = 0;
    int bit_depth = 12;
    int black_level = 0;
    int white_level = 4095;
    std::string pattern = "RGGB";
    std::string gt_file;
    std::vector<FrameRecord> frames;
    Json extra = Json::object();

    bool operator==(const BurstSidecar& o) const;
};

Json sidecar_to_json(const BurstSidecar& s);
/// Throws ValidationError naming the first missing or malformed key.
BurstSidecar sidecar_from_json(const Json& j);
std::string encode_sidecar(const BurstSidecar& s);
BurstSidecar decode_sidecar(const std::string& text);

struct LoadedBurst {
    Burst burst;
    BurstSidecar sidecar;
    std::optional<Image> gt;
    /// Present when every frame carries a ground-truth affine.
    std::optional<std::vector<AffineWarpField>> gt_fields;
};

void write_burst_dir(const std::filesystem::path& dir, const BurstSample& sample);
LoadedBurst read_burst_dir(const std::filesystem::path& dir);

/// SynthConfig <-> JSON, same dialect as the sidecar (sensor block, noise block).
SynthConfig synth_config_from_json(const Json& j);
Json synth_config_to_json(const SynthConfig& c);

Json affine_to_json(const Affine& a);
Affine affine_from_json(const Json& j, const std::string& what);

/// Per-frame warp fields with tile affines, as written by `register`.
Json fields_to_json(const std::vector<AffineWarpField>& fields);
std::vector<AffineWarpField> fields_from_json(const Json& j);

} // namespace rawburst::io
