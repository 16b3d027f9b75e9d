#include "cli.hpp"

#include "rawburst/io/burst_io.hpp"
#include "rawburst/io/formats.hpp"
#include "rawburst/merge/demosaic.hpp"
#include "rawburst/merge/hdr.hpp"
#include "rawburst/metrics/metrics.hpp"
#include "rawburst/model/adjoint_check.hpp"
#include "rawburst/register/register.hpp"
#include "rawburst/solver/solver.hpp"
#include "rawburst/synth/synth.hpp"
#include "rawburst/util/errors.hpp"
#include "rawburst/util/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace rawburst::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;

// Variance floor for noise-free sidecars, where the merge weights would divide by zero.
constexpr double kMinReadVariance = 1e-12;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_json(const fs::path& path, const Json& j) { io::write_file(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
    try {
        return Json::parse(io::read_file(path));
    } catch (const Json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_preview(const fs::path& path, const Image& img) {
    double peak = 0.0;
    for (double v : img.values()) peak = std::max(peak, v);
    Image rgb(img.height(), img.width(), 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c)
                rgb(y, x, c) = peak > 0.0 ? mu_law(img(y, x, std::min(c, img.channels() - 1)), peak) : 0.0;
    io::write_ppm8(path, rgb);
}

/// Ground-truth affines from the sidecar, re-expressed on the high-resolution grid of `scale`.
std::vector<AffineWarpField> gt_fields_at(const io::LoadedBurst& loaded, int scale) {
    const io::BurstSidecar& s = loaded.sidecar;
    std::vector<AffineWarpField> out;
    for (const io::FrameRecord& f : s.frames) {
        require(f.gt_affine.has_value(), "burst has no ground-truth affine for frame " + f.file);
        const Affine lr = f.gt_affine->change_of_units(1.0 / s.scale, -0.5 * (s.scale - 1) / s.scale);
        out.emplace_back(loaded.burst.lr_height() * scale, loaded.burst.lr_width() * scale, 200,
                         lr.change_of_units(scale, 0.5 * (scale - 1)));
    }
    return out;
}

/// A warps file is either the object written by `register` or a bare field array.
std::vector<AffineWarpField> read_fields(const fs::path& path) {
    const Json j = read_json(path);
    return io::fields_from_json(j.is_object() && j.contains("fields") ? j.at("fields") : j);
}

void check_fields(const std::vector<AffineWarpField>& fields, const Burst& burst) {
    require(static_cast<int>(fields.size()) == burst.meta.frame_count, "warps: frame count does not match the burst");
    for (const AffineWarpField& f : fields)
        require(f.height() == burst.hr_height() && f.width() == burst.hr_width(),
                "warps: field size does not match the burst grid at this scale");
}

std::shared_ptr<const ConfidenceFn> make_confidence(const std::string& name) {
    if (name == "unit") return std::make_shared<UnitConfidence>();
    if (name == "residual") return std::make_shared<ResidualConfidence>();
    throw ValidationError("unknown confidence '" + name + "' (expected unit or residual)");
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string config;
    std::string out;
    int count = 1;
    std::uint64_t seed = 0;
    int sr = 0;
    int frames = 0;
    int crop = 0;
    bool noise_free = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthConfig config = a.config.empty() ? SynthConfig{} : io::synth_config_from_json(read_json(a.config));
    if (a.sr) config.scale = a.sr;
    if (a.frames) config.frames = a.frames;
    if (a.crop) config.crop = a.crop;
    if (a.noise_free) config.noise.enabled = false;
    require(a.count >= 1, "synth: --count must be positive");
    fs::create_directories(a.out);
    for (int i = 0; i < a.count; ++i) {
        config.seed = a.seed + static_cast<std::uint64_t>(i);
        config.validate();
        const BurstSample sample = synthesize_random_burst(config);
        char name[32];
        std::snprintf(name, sizeof name, "burst_%04d", i);
        io::write_burst_dir(fs::path(a.out) / name, sample);
        out << name << " seed " << config.seed << " gain_ev " << format_double(sample.gt_gain_ev) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- register

struct RegisterArgs {
    std::string dir;
    std::string features = "plain";
    std::string out;
    bool no_lk = false;
};

int cmd_register(const RegisterArgs& a, std::ostream& out) {
    const io::LoadedBurst loaded = io::read_burst_dir(a.dir);
    RegistrationConfig rc;
    rc.lucas_kanade = !a.no_lk;
    const RegistrationResult r = register_burst(loaded.burst, *make_extractor(a.features), rc);

    Json report{{"features", a.features},
                {"reference", loaded.burst.meta.reference},
                {"scale", loaded.burst.meta.scale},
                {"fields", io::fields_to_json(r.fields)}};
    Json frames = Json::array();
    for (const FrameDiagnostics& d : r.frames)
        frames.push_back({{"frame", d.frame}, {"no_signal", d.no_signal}, {"relative_gain", d.relative_gain},
                          {"init", io::affine_to_json(d.init)}, {"global", io::affine_to_json(d.global)}});
    report["frames"] = frames;
    Json tiles = Json::array();
    for (const TileDiagnostics& t : r.tiles)
        tiles.push_back({{"frame", t.frame}, {"tile_y", t.tile_y}, {"tile_x", t.tile_x},
                         {"iterations", t.lk.iterations}, {"accepted", t.lk.accepted},
                         {"residual", t.lk.residual}, {"singular", t.lk.singular}});
    report["tiles"] = tiles;
    if (loaded.gt_fields) {
        const ErrorSummary e = summarize(frame_errors(r.fields, *loaded.gt_fields, loaded.burst.meta.reference));
        report["geometric_error"] = {{"mean", e.mean}, {"median", e.median}, {"frames", e.count}};
        out << "geometric error: mean " << format_double(e.mean) << " median " << format_double(e.median)
            << " px over " << e.count << " frames\n";
    }
    write_json(a.out, report);
    out << "wrote " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
    std::string dir;
    int sr = 0;
    std::string prior = "tvl1";
    int stages = 3;
    int gd_steps = 3;
    std::string out;
    bool oracle_warps = false;
    std::string warps;
    std::string features = "plain";
    std::string confidence = "unit";
    bool refine_warps = false;
    std::string trace;
    std::string preview;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out) {
    io::LoadedBurst loaded = io::read_burst_dir(a.dir);
    if (a.sr) loaded.burst.meta.scale = a.sr;
    require(!(a.oracle_warps && !a.warps.empty()), "reconstruct: --oracle-warps and --warps are exclusive");

    HqsConfig config;
    config.stages = a.stages;
    config.gd_steps = a.gd_steps;
    config.prior = make_prior(a.prior);
    config.confidence = make_confidence(a.confidence);
    config.features = a.features;
    config.refine_warps = a.refine_warps;

    std::optional<std::vector<AffineWarpField>> fields;
    if (a.oracle_warps) fields = gt_fields_at(loaded, loaded.burst.meta.scale);
    if (!a.warps.empty()) fields = read_fields(a.warps);
    if (fields) check_fields(*fields, loaded.burst);

    const ReconstructionResult r = reconstruct(loaded.burst, config, fields);
    io::write_pfm(a.out, r.x);

    Json stages = Json::array();
    for (const StageTrace& t : r.trace)
        stages.push_back({{"stage", t.stage}, {"eta", t.eta}, {"gamma", t.gamma}, {"step", t.step},
                          {"lipschitz", t.lipschitz}, {"objective", t.objective}});
    const fs::path trace = a.trace.empty() ? fs::path(a.out).replace_extension(".trace.json") : fs::path(a.trace);
    write_json(trace, {{"prior", config.prior->name()}, {"scale", loaded.burst.meta.scale}, {"stages", stages}});
    if (!a.preview.empty()) write_preview(a.preview, r.x);

    for (const StageTrace& t : r.trace)
        out << "stage " << t.stage << " objective "
            << (t.objective.empty() ? std::string("-") : format_double(t.objective.back())) << "\n";
    out << "wrote " << a.out << " (" << r.x.width() << "x" << r.x.height() << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------- merge

struct MergeArgs {
    std::string dir;
    std::string frames = "all";
    std::string demosaic = "bilinear";
    std::string out;
    bool oracle_warps = false;
    std::string features = "plain";
    std::string preview;
};

std::vector<int> parse_selection(const std::string& selection, const std::vector<double>& evs) {
    if (selection == "all") {
        std::vector<int> all(evs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }
    const std::string prefix = "nearest-ev:";
    require(selection.rfind(prefix, 0) == 0, "merge: --frames must be 'all' or 'nearest-ev:<ev>,<ev>,...'");
    std::vector<double> targets;
    std::stringstream ss(selection.substr(prefix.size()));
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used > 0 && used == item.size(), "merge: bad EV '" + item + "' in --frames");
        targets.push_back(v);
    }
    require(!targets.empty(), "merge: --frames lists no EV");
    return select_nearest_ev(evs, targets);
}

int cmd_merge(const MergeArgs& a, std::ostream& out) {
    const io::LoadedBurst loaded = io::read_burst_dir(a.dir);
    const Burst& burst = loaded.burst;
    std::vector<double> evs;
    for (const io::FrameRecord& f : loaded.sidecar.frames) evs.push_back(f.ev);
    const std::vector<int> chosen = parse_selection(a.frames, evs);

    const int scale = burst.meta.scale;
    const std::vector<AffineWarpField> fields =
        a.oracle_warps ? gt_fields_at(loaded, scale) : register_burst(burst, *make_extractor(a.features)).fields;

    std::vector<Image> frames, masks;
    std::vector<double> exposures;
    double alpha = 0.0, beta = 0.0;
    for (int k : chosen) {
        const RawFrame& f = burst.frames[k];
        const WarpResult rgb = align_to_reference(demosaic(f.data, f.sensor.pattern, a.demosaic), fields[k], scale);
        // a channel is usable where no saturated sample entered its interpolation
        const Image clean = demosaic_bilinear(saturation_mask(f.data), f.sensor.pattern);
        const WarpResult clean_aligned = align_to_reference(clean, fields[k], scale);
        Image mask(clean.height(), clean.width(), 3);
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                for (int c = 0; c < 3; ++c)
                    mask(y, x, c) = clean_aligned.image(y, x, c) >= 1.0 - 1e-9 ? clean_aligned.validity(y, x) : 0.0;
        frames.push_back(rgb.image);
        masks.push_back(std::move(mask));
        exposures.push_back(f.exposure);
        alpha = std::max(alpha, f.sensor.alpha);
        beta = std::max(beta, f.sensor.beta);
    }
    const Image merged = hdr_merge_bracket(frames, exposures, masks, alpha, std::max(beta, kMinReadVariance));
    io::write_pfm(a.out, merged);
    if (!a.preview.empty()) write_preview(a.preview, merged);

    out << "frames";
    for (int k : chosen) out << " " << k << " (ev " << format_double(evs[k]) << ")";
    out << "\nwrote " << a.out << " (" << merged.width() << "x" << merged.height() << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string ref;
    std::string test;
    std::string warps;
    std::string gt_warps;
    std::string report;
    int margin = 0;
};

/// Ground-truth warps come from a burst directory's sidecar or from a warps file.
std::pair<std::vector<AffineWarpField>, int> load_gt_warps(const fs::path& path, int est_scale) {
    if (fs::is_directory(path)) {
        const io::LoadedBurst loaded = io::read_burst_dir(path);
        return {gt_fields_at(loaded, est_scale), loaded.burst.meta.reference};
    }
    const Json j = read_json(path);
    const int reference = j.is_object() ? j.value("reference", -1) : -1;
    return {read_fields(path), reference};
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    require(a.warps.empty() == a.gt_warps.empty(), "eval: --warps and --gt-warps go together");
    Json report = Json::object();
    std::ostringstream text;
    if (!a.ref.empty() || !a.test.empty()) {
        require(!a.ref.empty() && !a.test.empty(), "eval: --ref and --test go together");
        const Image ref = crop_border(io::read_pfm(a.ref), a.margin), test = crop_border(io::read_pfm(a.test), a.margin);
        require(ref.same_shape(test), "eval: reference and test images differ in shape");
        const double p = psnr(ref, test), mp = mu_psnr(ref, test), s = ssim(ref, test);
        report["psnr"] = p;
        report["mu_psnr"] = mp;
        report["ssim"] = s;
        report["margin"] = a.margin;
        text << "psnr " << format_double(p) << " dB\nmu_psnr " << format_double(mp) << " dB\nssim "
             << format_double(s) << "\n";
    }
    if (!a.warps.empty()) {
        const Json est_json = read_json(a.warps);
        const int scale = est_json.is_object() ? est_json.value("scale", 1) : 1;
        const std::vector<AffineWarpField> est = read_fields(a.warps);
        auto [truth, reference] = load_gt_warps(a.gt_warps, scale);
        if (reference < 0 && est_json.is_object()) reference = est_json.value("reference", -1);
        const ErrorSummary e = summarize(frame_errors(est, truth, reference));
        report["geometric_error"] = {{"mean", e.mean}, {"median", e.median}, {"frames", e.count}};
        text << "geometric_error mean " << format_double(e.mean) << " px median " << format_double(e.median)
             << " px frames " << e.count << "\n";
    }
    require(!report.empty(), "eval: nothing to evaluate (give --ref/--test and/or --warps/--gt-warps)");
    if (!a.report.empty()) write_json(a.report, report);
    out << text.str();
    return kExitOk;
}

// ---------------------------------------------------------------- check-adjoint

struct AdjointArgs {
    int size = 16;
    int sr = 2;
    std::uint64_t seed = 0;
    double tolerance = 1e-5;
};

int cmd_check_adjoint(const AdjointArgs& a, std::ostream& out) {
    const AdjointReport report = check_adjoints(a.size, a.sr, a.seed, a.tolerance);
    for (const AdjointCase& c : report.cases) {
        char line[160];
        std::snprintf(line, sizeof line, "%-4s %-8s %-4s size %d sr %d dot %.3e matrix %.3e\n",
                      c.passed ? "ok" : "FAIL", c.op.c_str(), c.layout.c_str(), c.size, c.scale, c.dot_error,
                      c.matrix_error);
        out << line;
    }
    out << (report.passed() ? "adjoint suite passed" : "adjoint suite FAILED") << "\n";
    return report.passed() ? kExitOk : kExitNumerical;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-frame raw burst super-resolution and HDR reconstruction", "rawburst"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker cap (0: all hardware threads)")->check(CLI::NonNegativeNumber);

    SynthArgs sa;
    CLI::App* synth = app.add_subcommand("synth", "Write synthetic burst directories");
    synth->add_option("--config", sa.config, "Synthesis config (JSON)")->check(CLI::ExistingFile);
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--count", sa.count, "Number of bursts");
    synth->add_option("--seed", sa.seed, "Seed of the first burst; burst i uses seed + i");
    synth->add_option("--sr", sa.sr, "Override the super-resolution factor")->check(CLI::IsMember({1, 2, 4}));
    synth->add_option("--frames", sa.frames, "Override the burst length");
    synth->add_option("--crop", sa.crop, "Override the ground-truth size");
    synth->add_flag("--noise-free", sa.noise_free, "Disable sensor noise");

    RegisterArgs ra;
    CLI::App* reg = app.add_subcommand("register", "Align every frame on the reference frame");
    reg->add_option("burst", ra.dir, "Burst directory")->required()->check(CLI::ExistingDirectory);
    reg->add_option("--features", ra.features, "Feature map")->check(CLI::IsMember({"plain", "mtb"}));
    reg->add_option("--out", ra.out, "Warps JSON")->required();
    reg->add_flag("--no-lk", ra.no_lk, "Phase-correlation initialization only");

    ReconstructArgs ca;
    CLI::App* rec = app.add_subcommand("reconstruct", "Joint HDR and super-resolution reconstruction");
    rec->add_option("burst", ca.dir, "Burst directory")->required()->check(CLI::ExistingDirectory);
    rec->add_option("--sr", ca.sr, "Super-resolution factor (default: the burst's)")->check(CLI::IsMember({1, 2, 4}));
    rec->add_option("--prior", ca.prior, "Prior")->check(CLI::IsMember({"none", "tvl1"}));
    rec->add_option("--stages", ca.stages, "Outer stages")->check(CLI::PositiveNumber);
    rec->add_option("--gd-steps", ca.gd_steps, "Gradient steps per stage")->check(CLI::NonNegativeNumber);
    rec->add_option("--out", ca.out, "Output PFM")->required();
    rec->add_flag("--oracle-warps", ca.oracle_warps, "Use the sidecar's ground-truth warps");
    rec->add_option("--warps", ca.warps, "Use warps from a register output")->check(CLI::ExistingFile);
    rec->add_option("--features", ca.features, "Feature map for registration")->check(CLI::IsMember({"plain", "mtb"}));
    rec->add_option("--confidence", ca.confidence, "Per-pixel confidence")->check(CLI::IsMember({"unit", "residual"}));
    rec->add_flag("--refine-warps", ca.refine_warps, "Re-align frames after each stage");
    rec->add_option("--trace", ca.trace, "Objective trace JSON (default: <out>.trace.json)");
    rec->add_option("--preview", ca.preview, "Mu-law preview PPM");

    MergeArgs ma;
    CLI::App* merge = app.add_subcommand("merge", "Bracketing baseline: demosaic, align, inverse-variance merge");
    merge->add_option("burst", ma.dir, "Burst directory")->required()->check(CLI::ExistingDirectory);
    merge->add_option("--frames", ma.frames, "'all' or nearest-ev:<ev>,<ev>,...");
    merge->add_option("--demosaic", ma.demosaic, "Demosaicking")->check(CLI::IsMember({"bilinear", "malvar"}));
    merge->add_option("--out", ma.out, "Output PFM")->required();
    merge->add_flag("--oracle-warps", ma.oracle_warps, "Use the sidecar's ground-truth warps");
    merge->add_option("--features", ma.features, "Feature map for registration")->check(CLI::IsMember({"plain", "mtb"}));
    merge->add_option("--preview", ma.preview, "Mu-law preview PPM");

    EvalArgs ea;
    CLI::App* eval = app.add_subcommand("eval", "Image quality and registration error report");
    eval->add_option("--ref", ea.ref, "Reference PFM")->check(CLI::ExistingFile);
    eval->add_option("--test", ea.test, "Test PFM")->check(CLI::ExistingFile);
    eval->add_option("--warps", ea.warps, "Estimated warps JSON")->check(CLI::ExistingFile);
    eval->add_option("--gt-warps", ea.gt_warps, "Burst directory or warps JSON with the true warps")
        ->check(CLI::ExistingPath);
    eval->add_option("--report", ea.report, "JSON report");
    eval->add_option("--margin", ea.margin, "Border pixels excluded from image metrics")->check(CLI::NonNegativeNumber);

    AdjointArgs aa;
    CLI::App* adj = app.add_subcommand("check-adjoint", "Dense-matrix adjoint test of the forward model");
    adj->add_option("--size", aa.size, "High-resolution side");
    adj->add_option("--sr", aa.sr, "Super-resolution factor")->check(CLI::IsMember({1, 2, 4}));
    adj->add_option("--seed", aa.seed, "Seed");
    adj->add_option("--tolerance", aa.tolerance, "Relative tolerance");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
    }

    try {
        set_thread_count(threads);
        if (synth->parsed()) return cmd_synth(sa, out);
        if (reg->parsed()) return cmd_register(ra, out);
        if (rec->parsed()) return cmd_reconstruct(ca, out);
        if (merge->parsed()) return cmd_merge(ma, out);
        if (eval->parsed()) return cmd_eval(ea, out);
        return cmd_check_adjoint(aa, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        // anything else is a failure inside the computation, not bad input
        err << "failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

} // namespace rawburst::cli
