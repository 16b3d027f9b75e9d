#include "rawburst/io/burst_io.hpp"

#include "rawburst/io/formats.hpp"
#include "rawburst/util/errors.hpp"

#include <cmath>
#include <cstdio>

namespace rawburst::io {

namespace {

const Json& need(const Json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing required key '" + key + "'");
    return j.at(key);
}

template <typename T>
T get(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = need(j, key, where);
    try {
        return v.get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(where + ": key '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return get<T>(j, key, where);
}

Json without(Json j, std::initializer_list<const char*> keys) {
    for (const char* k : keys) j.erase(k);
    return j;
}

const std::initializer_list<const char*> kFrameKeys{"file", "ev", "exposure", "alpha", "beta", "gt_affine"};
const std::initializer_list<const char*> kTopKeys{"format", "K", "reference", "s", "seed", "sensor", "frames", "gt"};
const std::initializer_list<const char*> kSensorKeys{"q", "black_level", "white_level", "pattern"};

} // namespace

bool BurstSidecar::operator==(const BurstSidecar& o) const {
    return sidecar_to_json(*this) == sidecar_to_json(o);
}

Json affine_to_json(const Affine& a) { return Json(std::vector<double>(a.m.begin(), a.m.end())); }

Affine affine_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 6) throw ValidationError(what + ": affine must be a 6-element array");
    Affine a;
    for (int i = 0; i < 6; ++i) {
        if (!j[i].is_number()) throw ValidationError(what + ": affine entries must be numbers");
        a.m[i] = j[i].get<double>();
    }
    return a;
}

Json sidecar_to_json(const BurstSidecar& s) {
    Json j = s.extra.is_object() ? s.extra : Json::object();
    j["format"] = "rawburst-burst/1";
    j["K"] = s.frame_count;
    j["reference"] = s.reference;
    j["s"] = s.scale;
    j["seed"] = s.seed;
    Json sensor = j.contains("sensor") && j["sensor"].is_object() ? j["sensor"] : Json::object();
    sensor["q"] = s.bit_depth;
    sensor["black_level"] = s.black_level;
    sensor["white_level"] = s.white_level;
    sensor["pattern"] = s.pattern;
    j["sensor"] = sensor;
    if (!s.gt_file.empty()) j["gt"] = s.gt_file;
    Json frames = Json::array();
    for (const FrameRecord& f : s.frames) {
        Json fj = f.extra.is_object() ? f.extra : Json::object();
        fj["file"] = f.file;
        fj["ev"] = f.ev;
        fj["exposure"] = f.exposure;
        fj["alpha"] = f.alpha;
        fj["beta"] = f.beta;
        if (f.gt_affine) fj["gt_affine"] = affine_to_json(*f.gt_affine);
        frames.push_back(fj);
    }
    j["frames"] = frames;
    return j;
}

BurstSidecar sidecar_from_json(const Json& j) {
    const std::string where = "meta.json";
    if (!j.is_object()) throw ValidationError(where + ": top level must be an object");
    BurstSidecar s;
    s.frame_count = get<int>(j, "K", where);
    s.reference = get<int>(j, "reference", where);
    s.scale = get<int>(j, "s", where);
    s.seed = get_or<std::uint64_t>(j, "seed", 0, where);
    const Json& sensor = need(j, "sensor", where);
    s.bit_depth = get<int>(sensor, "q", where + ".sensor");
    s.black_level = get<int>(sensor, "black_level", where + ".sensor");
    s.white_level = get<int>(sensor, "white_level", where + ".sensor");
    s.pattern = get<std::string>(sensor, "pattern", where + ".sensor");
    s.gt_file = get_or<std::string>(j, "gt", "", where);
    const Json& frames = need(j, "frames", where);
    if (!frames.is_array()) throw ValidationError(where + ": 'frames' must be an array");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string fw = where + ".frames[" + std::to_string(i) + "]";
        const Json& fj = frames[i];
        FrameRecord f;
        f.file = get<std::string>(fj, "file", fw);
        const bool has_ev = fj.is_object() && fj.contains("ev");
        const bool has_exposure = fj.is_object() && fj.contains("exposure");
        if (!has_ev && !has_exposure) throw ValidationError(fw + ": missing required key 'ev' (or 'exposure')");
        if (has_exposure) f.exposure = get<double>(fj, "exposure", fw);
        if (has_ev) f.ev = get<double>(fj, "ev", fw);
        if (!has_exposure) f.exposure = std::exp2(f.ev);
        if (!has_ev) f.ev = std::log2(f.exposure);
        f.alpha = get<double>(fj, "alpha", fw);
        f.beta = get<double>(fj, "beta", fw);
        if (fj.contains("gt_affine")) f.gt_affine = affine_from_json(fj.at("gt_affine"), fw + ".gt_affine");
        f.extra = without(fj, kFrameKeys);
        s.frames.push_back(std::move(f));
    }
    if (static_cast<int>(s.frames.size()) != s.frame_count)
        throw ValidationError(where + ": 'K' does not match the number of frames");
    Json extra = without(j, kTopKeys);
    Json sensor_extra = without(sensor, kSensorKeys);
    if (!sensor_extra.empty()) extra["sensor"] = sensor_extra;
    s.extra = extra;
    return s;
}

std::string encode_sidecar(const BurstSidecar& s) { return sidecar_to_json(s).dump(2) + "\n"; }

BurstSidecar decode_sidecar(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ValidationError(std::string("meta.json: ") + e.what());
    }
    return sidecar_from_json(j);
}

namespace {

std::string frame_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%02d.pgm16", k);
    return buf;
}

} // namespace

void write_burst_dir(const std::filesystem::path& dir, const BurstSample& sample) {
    std::filesystem::create_directories(dir);
    const Burst& b = sample.burst;
    const SensorConfig& sensor = b.frames.front().sensor;
    BurstSidecar s;
    s.frame_count = b.meta.frame_count;
    s.reference = b.meta.reference;
    s.scale = b.meta.scale;
    s.seed = sample.seed;
    s.bit_depth = sensor.bit_depth;
    s.black_level = sensor.black_level;
    s.white_level = sensor.white_level;
    s.pattern = sensor.pattern.name();
    s.gt_file = "gt.pfm";
    s.extra["gt_gain_ev"] = sample.gt_gain_ev;
    for (int k = 0; k < b.meta.frame_count; ++k) {
        FrameRecord f;
        f.file = frame_name(k);
        f.ev = sample.evs[k];
        f.exposure = b.meta.exposures[k];
        f.alpha = b.frames[k].sensor.alpha;
        f.beta = b.frames[k].sensor.beta;
        f.gt_affine = sample.gt_fields[k].tile(0, 0);
        s.frames.push_back(f);
        write_pgm16(dir / f.file, sample.raw[k], sensor.bit_depth);
    }
    write_pfm(dir / s.gt_file, sample.gt);
    write_file(dir / "meta.json", encode_sidecar(s));
}

LoadedBurst read_burst_dir(const std::filesystem::path& dir) {
    LoadedBurst out;
    out.sidecar = decode_sidecar(read_file(dir / "meta.json"));
    const BurstSidecar& s = out.sidecar;
    SensorConfig base;
    base.bit_depth = s.bit_depth;
    base.black_level = s.black_level;
    base.white_level = s.white_level;
    base.pattern = BayerPattern::parse(s.pattern);

    out.burst.meta.frame_count = s.frame_count;
    out.burst.meta.reference = s.reference;
    out.burst.meta.scale = s.scale;
    out.burst.meta.exposures.clear();
    bool all_gt = !s.frames.empty();
    for (const FrameRecord& f : s.frames) {
        RawFrame frame;
        frame.sensor = base;
        frame.sensor.alpha = f.alpha;
        frame.sensor.beta = f.beta;
        frame.sensor.validate();
        frame.data = normalize(read_pgm16(dir / f.file, s.bit_depth), frame.sensor);
        frame.exposure = f.exposure;
        out.burst.meta.exposures.push_back(f.exposure);
        out.burst.frames.push_back(std::move(frame));
        all_gt = all_gt && f.gt_affine.has_value();
    }
    out.burst.validate();
    if (!s.gt_file.empty() && std::filesystem::exists(dir / s.gt_file)) out.gt = read_pfm(dir / s.gt_file);
    if (all_gt) {
        std::vector<AffineWarpField> fields;
        for (const FrameRecord& f : s.frames)
            fields.emplace_back(out.burst.hr_height(), out.burst.hr_width(), 200, *f.gt_affine);
        out.gt_fields = std::move(fields);
    }
    return out;
}

SynthConfig synth_config_from_json(const Json& j) {
    const std::string where = "synth config";
    if (!j.is_object()) throw ValidationError(where + ": top level must be an object");
    SynthConfig c;
    c.frames = get_or<int>(j, "K", c.frames, where);
    c.crop = get_or<int>(j, "crop", c.crop, where);
    c.scale = get_or<int>(j, "s", c.scale, where);
    c.max_translation = get_or<double>(j, "max_translation", c.max_translation, where);
    c.max_rotation_deg = get_or<double>(j, "max_rotation", c.max_rotation_deg, where);
    c.tile_size = get_or<int>(j, "tile_size", c.tile_size, where);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, where);
    if (j.contains("frame_ev_range")) {
        const auto r = get<std::vector<double>>(j, "frame_ev_range", where);
        if (r.size() != 2) throw ValidationError(where + ": frame_ev_range must have two entries");
        c.ev_min = r[0];
        c.ev_max = r[1];
    }
    if (j.contains("gt_gain_ev_range")) {
        const auto r = get<std::vector<double>>(j, "gt_gain_ev_range", where);
        if (r.size() != 2) throw ValidationError(where + ": gt_gain_ev_range must have two entries");
        c.gt_gain_ev_min = r[0];
        c.gt_gain_ev_max = r[1];
    }
    if (j.contains("white_balance")) {
        const auto wb = get<std::vector<double>>(j, "white_balance", where);
        if (wb.size() != 3) throw ValidationError(where + ": white_balance must have three entries");
        c.white_balance = {wb[0], wb[1], wb[2]};
    }
    if (j.contains("sensor")) {
        const Json& s = j.at("sensor");
        c.sensor.bit_depth = get_or<int>(s, "q", c.sensor.bit_depth, where + ".sensor");
        c.sensor.black_level = get_or<int>(s, "black_level", c.sensor.black_level, where + ".sensor");
        c.sensor.white_level = get_or<int>(s, "white_level", c.sensor.white_level, where + ".sensor");
        c.sensor.pattern = BayerPattern::parse(get_or<std::string>(s, "pattern", c.sensor.pattern.name(), where + ".sensor"));
    }
    if (j.contains("noise")) {
        const Json& n = j.at("noise");
        c.noise.enabled = get_or<bool>(n, "enabled", c.noise.enabled, where + ".noise");
        c.noise.slope = get_or<double>(n, "slope", c.noise.slope, where + ".noise");
        c.noise.intercept = get_or<double>(n, "intercept", c.noise.intercept, where + ".noise");
        if (n.contains("log_alpha_range")) {
            const auto r = get<std::vector<double>>(n, "log_alpha_range", where + ".noise");
            if (r.size() != 2) throw ValidationError(where + ".noise: log_alpha_range must have two entries");
            c.noise.log_alpha_min = r[0];
            c.noise.log_alpha_max = r[1];
        }
    }
    c.validate();
    return c;
}

Json synth_config_to_json(const SynthConfig& c) {
    return Json{{"K", c.frames},
                {"crop", c.crop},
                {"s", c.scale},
                {"max_translation", c.max_translation},
                {"max_rotation", c.max_rotation_deg},
                {"frame_ev_range", {c.ev_min, c.ev_max}},
                {"gt_gain_ev_range", {c.gt_gain_ev_min, c.gt_gain_ev_max}},
                {"white_balance", {c.white_balance[0], c.white_balance[1], c.white_balance[2]}},
                {"tile_size", c.tile_size},
                {"seed", c.seed},
                {"sensor",
                 {{"q", c.sensor.bit_depth},
                  {"black_level", c.sensor.black_level},
                  {"white_level", c.sensor.white_level},
                  {"pattern", c.sensor.pattern.name()}}},
                {"noise",
                 {{"enabled", c.noise.enabled},
                  {"slope", c.noise.slope},
                  {"intercept", c.noise.intercept},
                  {"log_alpha_range", {c.noise.log_alpha_min, c.noise.log_alpha_max}}}}};
}

Json fields_to_json(const std::vector<AffineWarpField>& fields) {
    Json arr = Json::array();
    for (std::size_t k = 0; k < fields.size(); ++k) {
        const AffineWarpField& f = fields[k];
        Json tiles = Json::array();
        for (const Affine& a : f.tiles()) tiles.push_back(affine_to_json(a));
        arr.push_back(Json{{"frame", k},
                           {"height", f.height()},
                           {"width", f.width()},
                           {"tile_size", f.tile_size()},
                           {"tiles_y", f.tiles_y()},
                           {"tiles_x", f.tiles_x()},
                           {"affines", tiles}});
    }
    return arr;
}

std::vector<AffineWarpField> fields_from_json(const Json& j) {
    if (!j.is_array()) throw ValidationError("warps: expected an array of fields");
    std::vector<AffineWarpField> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string where = "warps[" + std::to_string(k) + "]";
        const Json& fj = j[k];
        AffineWarpField f(get<int>(fj, "height", where), get<int>(fj, "width", where), get<int>(fj, "tile_size", where));
        const Json& tiles = need(fj, "affines", where);
        if (!tiles.is_array() || static_cast<int>(tiles.size()) != f.tiles_y() * f.tiles_x())
            throw ValidationError(where + ": tile count does not match the grid");
        for (int ty = 0; ty < f.tiles_y(); ++ty)
            for (int tx = 0; tx < f.tiles_x(); ++tx)
                f.tile(ty, tx) = affine_from_json(tiles[ty * f.tiles_x() + tx], where);
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace rawburst::io
