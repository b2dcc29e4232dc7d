#include "svt/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "svt/bench.hpp"
#include "svt/gradsuite.hpp"
#include "svt/io.hpp"
#include "svt/render.hpp"

namespace svt::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("config: '" + key + "' expects a number, got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("config: '" + key + "' expects an integer, got '" + value + "'");
}

int parse_count(const std::string& key, const std::string& value) {
    const long long v = parse_int(key, value);
    if (v < 0 || v > 1'000'000'000) throw InvalidArgument("config: '" + key + "' out of range");
    return static_cast<int>(v);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Per-command context: settings, manifest and the streams.
struct Context {
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> argv;
    std::string command;
    json manifest = json::object();

    void result(const std::string& key, const std::string& value) { out << key << '=' << value << '\n'; }
    void metric(const std::string& key, double value) {
        manifest["metrics"][key] = value;
        result(key, short_double(value));
    }
    void output(const std::string& key, const fs::path& path) { manifest["outputs"][key] = path.string(); }
    void input(const std::string& key, const fs::path& path) { manifest["inputs"][key] = path.string(); }

    void begin(const std::string& cmd) {
        command = cmd;
        manifest["command"] = cmd;
        manifest["argv"] = argv;
    }
    void write_manifest(const fs::path& path) {
        std::ofstream f(path);
        if (!f) throw IoError("cannot write manifest " + path.string());
        f << manifest.dump(2) << '\n';
        if (!f) throw IoError("cannot write manifest " + path.string());
    }
};

// Options shared by every command that takes Settings.
struct SettingFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "key=value config file or run manifest");
        for (const std::string& key : setting_keys()) {
            std::string names = "--" + key;
            std::string dashed = key;
            for (char& c : dashed)
                if (c == '_') c = '-';
            if (dashed != key) names += ",--" + dashed;
            app->add_option_function<std::string>(
                names, [this, key](const std::string& v) { values[key] = v; }, "config key " + key);
        }
    }

    Settings resolve(Context& ctx) const {
        Settings s;
        if (!config_path.empty()) {
            apply_settings(s, read_config_file(config_path));
            ctx.input("config", config_path);
        }
        apply_settings(s, values);
        s.pipeline.stage1.validate();
        s.pipeline.stage2.validate();
        s.forward.validate();
        if (s.pipeline.checker_cell < 1) throw InvalidArgument("checker_cell must be >= 1");
        json cfg = json::object();
        for (const auto& [k, v] : describe(s)) cfg[k] = v;
        ctx.manifest["config"] = cfg;
        ctx.manifest["seed"] = s.pipeline.stage1.seed;
        return s;
    }
};

struct SourceFlags {
    std::string gen_kind;
    std::string gen_variant = "shaded";
    int size = 64;
    double extent = 0.0;
    std::string image;
    std::string mask;
    std::string gt_depth;

    void attach(CLI::App* app, bool with_image) {
        app->add_option("--gen-kind", gen_kind, "generate the input: sphere, cube, pyramid, cylinder");
        app->add_option("--gen-variant", gen_variant, "cue variant of the generated input");
        app->add_option("--size", size, "generated resolution");
        app->add_option("--extent", extent, "generated radius or half-extent in pixels (0: 3/8 of size)");
        if (with_image) app->add_option("--image", image, "input image (PPM/PGM or PFM)");
        app->add_option("--mask", mask, "foreground mask (PGM)");
        app->add_option("--gt-depth", gt_depth, "ground-truth depth (PFM)");
    }
};

PrimitiveSpec primitive_spec(const std::string& kind, const std::string& variant, int size, double extent) {
    PrimitiveSpec spec;
    const auto k = parse_kind(kind);
    if (!k) throw InvalidArgument("unknown kind '" + kind + "'");
    const auto v = parse_variant(variant);
    if (!v) throw InvalidArgument("unknown variant '" + variant + "'");
    spec.kind = *k;
    spec.variant = *v;
    spec.resolution = size;
    spec.extent = extent;
    return spec;
}

ImageField read_image(const fs::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".pfm") return read_pfm(path);
    return read_pnm(path);
}

ImageField encode_normals(const ScalarField& depth, const Mask& mask) {
    ImageField n = normals_from_depth(depth);
    for (int j = 0; j < n.height(); ++j)
        for (int i = 0; i < n.width(); ++i)
            for (int c = 0; c < 3; ++c) n(i, j, c) = mask(i, j) ? 0.5 * (n(i, j, c) + 1.0) : 0.0;
    return n;
}

std::string view_name(double azimuth) {
    std::ostringstream s;
    if (azimuth > 0) s << '+';
    if (azimuth == std::floor(azimuth)) s << static_cast<long long>(azimuth);
    else s << azimuth;
    return "view_" + s.str() + ".ppm";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    return dir;
}

// ---- gen -----------------------------------------------------------------

int cmd_gen(Context& ctx, const std::string& kind, const std::string& variant, int size, double extent,
            const std::string& out_dir) {
    ctx.begin("gen");
    std::vector<std::string> kinds, variants;
    if (kind == "all")
        for (PrimitiveKind k : kAllKinds) kinds.push_back(to_string(k));
    else
        kinds.push_back(kind);
    if (variant == "all")
        for (CueVariant v : kAllVariants) variants.push_back(to_string(v));
    else
        variants.push_back(variant);

    // Validate everything before touching the disk.
    std::vector<PrimitiveSpec> specs;
    for (const auto& k : kinds)
        for (const auto& v : variants) {
            specs.push_back(primitive_spec(k, v, size, extent));
            specs.back().validate();
        }
    const fs::path root = prepare_dir(out_dir);
    int written = 0;
    for (const PrimitiveSpec& spec : specs) {
        const Primitive p = gen_primitive(spec);
        const fs::path dir = prepare_dir((root / to_string(spec.kind) / to_string(spec.variant)).string());
        write_pnm(p.image, dir / "image.ppm");
        write_pfm(p.depth, dir / "depth.pfm");
        write_pnm(p.mask.field(), dir / "mask.pgm");
        ctx.manifest["outputs"]["datasets"].push_back((dir).string());
        ++written;
    }
    ctx.manifest["config"] = {{"kind", kind}, {"variant", variant}, {"size", size}, {"extent", extent}};
    ctx.result("written", std::to_string(written));
    ctx.write_manifest(root / "manifest.json");
    return kOk;
}

// ---- roundtrip -----------------------------------------------------------

int cmd_roundtrip(Context& ctx, const Settings& s, const SourceFlags& src, double tolerance,
                  const std::string& out_dir) {
    ctx.begin("roundtrip");
    ScalarField gt;
    std::optional<Mask> mask;
    if (!src.gt_depth.empty()) {
        gt = read_pfm_scalar(src.gt_depth);
        ctx.input("gt_depth", src.gt_depth);
        if (src.mask.empty()) throw InvalidArgument("--gt-depth needs --mask");
        mask = read_mask(src.mask);
        ctx.input("mask", src.mask);
    } else {
        const std::string kind = src.gen_kind.empty() ? "cube" : src.gen_kind;
        Primitive p = gen_primitive(primitive_spec(kind, src.gen_variant, src.size, src.extent));
        ctx.manifest["inputs"]["generated"] = kind;
        gt = std::move(p.depth);
        mask = std::move(p.mask);
    }
    if (!mask->same_shape(gt)) throw InvalidArgument("mask and depth differ in size");
    if (!(masked_stats(gt, *mask).std > 0.0))
        throw DegenerateError("ground-truth depth is constant over the foreground");

    const auto t0 = std::chrono::steady_clock::now();
    const TexCoords uv = forward_lscm(gt, *mask, s.forward);
    ctx.manifest["timings"]["forward_seconds"] = seconds_since(t0);
    const auto t1 = std::chrono::steady_clock::now();
    const ScalarField depth = stage2(uv, *mask, spherical_init(*mask), s.pipeline.stage2);
    ctx.manifest["timings"]["stage2_seconds"] = seconds_since(t1);

    const double mse = depth_mse(depth, gt, *mask);
    ctx.metric("depth_mse", mse);
    ctx.metric("tolerance", tolerance);
    const bool pass = mse <= tolerance;
    ctx.result("pass", pass ? "1" : "0");
    ctx.manifest["metrics"]["pass"] = pass;
    if (!out_dir.empty()) {
        const fs::path dir = prepare_dir(out_dir);
        write_pfm(depth, dir / "depth.pfm");
        write_texcoords(uv, dir / "texcoords.pfm");
        ctx.output("depth", dir / "depth.pfm");
        ctx.output("texcoords", dir / "texcoords.pfm");
        ctx.write_manifest(dir / "manifest.json");
    }
    if (!pass) ctx.err << "roundtrip: depth_mse " << mse << " exceeds tolerance " << tolerance << '\n';
    return pass ? kOk : kTolerance;
}

// ---- run -----------------------------------------------------------------

struct RunFlags {
    SourceFlags src;
    std::string target;
    std::string guidance = "oracle";
    std::string out_dir = "svt_out";
    bool quiet = false;
};

int cmd_run(Context& ctx, const Settings& s, const RunFlags& f) {
    ctx.begin("run");
    ImageField input;
    std::optional<Mask> mask;
    std::optional<ScalarField> gt;
    if (!f.src.gen_kind.empty()) {
        Primitive p = gen_primitive(primitive_spec(f.src.gen_kind, f.src.gen_variant, f.src.size, f.src.extent));
        ctx.manifest["inputs"]["generated"] = f.src.gen_kind + "/" + f.src.gen_variant;
        input = std::move(p.image);
        mask = std::move(p.mask);
        gt = std::move(p.depth);
    } else {
        if (f.src.image.empty() || f.src.mask.empty())
            throw InvalidArgument("run needs --image and --mask, or --gen-kind");
        input = read_image(f.src.image);
        ctx.input("image", f.src.image);
        mask = read_mask(f.src.mask);
        ctx.input("mask", f.src.mask);
        if (!f.src.gt_depth.empty()) {
            gt = read_pfm_scalar(f.src.gt_depth);
            ctx.input("gt_depth", f.src.gt_depth);
        }
    }
    if (input.height() != mask->height() || input.width() != mask->width())
        throw InvalidArgument("image and mask differ in size");
    if (gt && !mask->same_shape(*gt)) throw InvalidArgument("ground-truth depth and mask differ in size");

    const fs::path dir = prepare_dir(f.out_dir);
    const ImageField texture = pipeline_texture(input, s.pipeline.checker_cell);
    const auto t0 = std::chrono::steady_clock::now();

    // The target is needed by the oracle guidances and handed to remote ones
    // as target.pfm ({target} in the command is replaced by its path).
    std::optional<ImageField> target;
    if (!f.target.empty()) {
        target = read_pfm(f.target);
        ctx.input("target", f.target);
    } else if (gt) {
        target = oracle_target(input, *gt, *mask, texture, s.pipeline.stage1.alpha, s.forward);
    }
    std::string guidance_spec = f.guidance;
    if (target) {
        if (!target->same_shape(input)) throw InvalidArgument("target and image differ in shape");
        write_pfm(*target, dir / "target.pfm");
        ctx.output("target", dir / "target.pfm");
        const auto pos = guidance_spec.find("{target}");
        if (pos != std::string::npos) guidance_spec.replace(pos, 8, (dir / "target.pfm").string());
    } else if (f.guidance.rfind("remote:", 0) != 0) {
        throw InvalidArgument("guidance '" + f.guidance + "' needs --target or a ground-truth depth");
    }
    ctx.manifest["guidance"] = f.guidance;
    ctx.manifest["timings"]["target_seconds"] = seconds_since(t0);

    std::unique_ptr<Guidance> guidance = make_guidance(guidance_spec, target ? *target : ImageField());
    Stage1Observer observer;
    if (!f.quiet) {
        const int every = s.pipeline.stage1.snapshot_interval;
        observer = [&ctx, every](const Stage1Progress& p) {
            if (p.iteration % every == 0)
                ctx.err << "stage1 iteration=" << p.iteration << " loss=" << p.diagnostic_loss
                        << " l1=" << p.l1 << " integrability=" << p.integrability << '\n';
        };
    }
    PipelineResult result = run_pipeline(input, *mask, *guidance, s.pipeline, observer);
    if (auto* remote = dynamic_cast<RemoteGuidance*>(guidance.get())) remote->shutdown();

    const Snapshot& best = result.best();
    write_pfm(best.depth, dir / "depth.pfm");
    write_pnm(encode_normals(best.depth, *mask), dir / "normals.ppm");
    write_texcoords(best.texcoords, dir / "texcoords.pfm");
    write_pnm(blend(input, sample_bilinear(texture, best.texcoords), *mask, s.pipeline.stage1.alpha),
              dir / "blended.ppm");
    ctx.output("depth", dir / "depth.pfm");
    ctx.output("normals", dir / "normals.ppm");
    ctx.output("texcoords", dir / "texcoords.pfm");
    ctx.output("blended", dir / "blended.ppm");

    ctx.manifest["timings"]["stage1_seconds"] = result.stage1_seconds;
    ctx.manifest["timings"]["stage2_seconds"] = result.stage2_seconds;
    json snaps = json::array();
    for (const Snapshot& snap : result.snapshots)
        snaps.push_back({{"iteration", snap.iteration}, {"smoothness", snap.smoothness}});
    ctx.manifest["snapshots"] = snaps;
    ctx.manifest["selected_iteration"] = best.iteration;
    ctx.result("selected_iteration", std::to_string(best.iteration));
    ctx.metric("smoothness", best.smoothness);
    if (gt) {
        ctx.metric("depth_mse", depth_mse(best.depth, *gt, *mask));
        ctx.metric("normal_mse", normal_mse(best.depth, *gt, *mask));
    }
    ctx.write_manifest(dir / "manifest.json");
    return kOk;
}

// ---- render --------------------------------------------------------------

struct RenderFlags {
    std::string depth, texcoords, image, mask;
    std::string azimuths = "0,-10,10";
    double elevation = 0.0;
    std::string out_dir = "svt_views";
};

std::vector<double> parse_angles(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double("azimuths", trim(item)));
    if (out.empty()) throw InvalidArgument("--azimuths is empty");
    return out;
}

int cmd_render(Context& ctx, const RenderFlags& f) {
    ctx.begin("render");
    const std::vector<double> azimuths = parse_angles(f.azimuths);
    std::vector<Camera> cams;
    for (double a : azimuths) cams.emplace_back(a, f.elevation);

    const ScalarField depth = read_pfm_scalar(f.depth);
    const TexCoords uv = read_texcoords(f.texcoords);
    const ImageField input = read_image(f.image);
    const Mask mask = read_mask(f.mask);
    ctx.input("depth", f.depth);
    ctx.input("texcoords", f.texcoords);
    ctx.input("image", f.image);
    ctx.input("mask", f.mask);
    if (!mask.same_shape(depth) || uv.height() != depth.height() || uv.width() != depth.width() ||
        input.height() != depth.height() || input.width() != depth.width())
        throw InvalidArgument("render: inputs differ in size");

    const fs::path dir = prepare_dir(f.out_dir);
    const ImageField texture = resample_inverse(input, uv, mask);
    write_pnm(texture, dir / "texture.ppm");
    ctx.output("texture", dir / "texture.ppm");
    const ImageField colors = sample_bilinear(texture, uv);
    for (std::size_t k = 0; k < cams.size(); ++k) {
        const std::string name = view_name(azimuths[k]);
        write_pnm(rasterize_ortho(depth, colors, mask, cams[k]), dir / name);
        ctx.output(name, dir / name);
        ctx.result("view", (dir / name).string());
    }
    ctx.manifest["config"] = {{"azimuths", azimuths}, {"elevation", f.elevation}};
    ctx.write_manifest(dir / "manifest.json");
    return kOk;
}

// ---- gradcheck -----------------------------------------------------------

int cmd_gradcheck(Context& ctx, const std::string& op, std::uint64_t seed, int size,
                  const std::string& manifest_path) {
    ctx.begin("gradcheck");
    std::vector<std::string> names;
    if (op == "all") names = grad_case_names();
    else names.push_back(op);

    bool all = true;
    ctx.out << std::left << std::setw(18) << "op" << std::setw(8) << "coords" << std::setw(14) << "error"
            << std::setw(10) << "tolerance" << "status\n";
    for (const std::string& name : names) {
        const GradReport r = run_grad_case(make_grad_case(name, seed, size), seed);
        all = all && r.pass();
        ctx.out << std::left << std::setw(18) << r.name << std::setw(8) << r.coordinates << std::setw(14)
                << sci(r.error) << std::setw(10) << sci(r.tolerance)
                << (r.pass() ? "ok" : "FAIL") << '\n';
        ctx.manifest["metrics"][name] = {{"error", r.error}, {"tolerance", r.tolerance}, {"pass", r.pass()}};
    }
    ctx.manifest["seed"] = seed;
    ctx.manifest["config"] = {{"op", op}, {"size", size}};
    if (!manifest_path.empty()) ctx.write_manifest(manifest_path);
    return all ? kOk : kTolerance;
}

// ---- metrics -------------------------------------------------------------

int cmd_metrics(Context& ctx, const std::string& pred_path, const std::string& gt_path,
                const std::string& mask_path, const std::string& manifest_path) {
    ctx.begin("metrics");
    const ScalarField pred = read_pfm_scalar(pred_path);
    const ScalarField gt = read_pfm_scalar(gt_path);
    const Mask mask = read_mask(mask_path);
    ctx.input("pred", pred_path);
    ctx.input("gt", gt_path);
    ctx.input("mask", mask_path);
    ctx.metric("depth_mse", depth_mse(pred, gt, mask));
    ctx.metric("normal_mse", normal_mse(pred, gt, mask));
    if (!manifest_path.empty()) ctx.write_manifest(manifest_path);
    return kOk;
}

}  // namespace

const std::vector<std::string>& setting_keys() {
    static const std::vector<std::string> keys{
        "iterations", "snapshot_interval", "lr",        "lambda1",           "lambda2",
        "alpha",      "scales",            "seed",      "weight_decay",      "checker_cell",
        "stage2_iterations", "stage2_lr",  "lambda3",   "forward_iterations", "forward_lr",
        "mu"};
    return keys;
}

void apply_setting(Settings& s, const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    StageConfig& s1 = s.pipeline.stage1;
    StageConfig& s2 = s.pipeline.stage2;
    if (key == "iterations") s1.iterations = parse_count(key, value);
    else if (key == "snapshot_interval") s1.snapshot_interval = parse_count(key, value);
    else if (key == "lr") s1.lr = parse_double(key, value);
    else if (key == "lambda1") s1.lambda1 = parse_double(key, value);
    else if (key == "lambda2") s1.lambda2 = parse_double(key, value);
    else if (key == "alpha") s1.alpha = parse_double(key, value);
    else if (key == "scales") s1.scales = parse_count(key, value);
    else if (key == "checker_cell") s.pipeline.checker_cell = parse_count(key, value);
    else if (key == "lambda3") s2.lambda3 = parse_double(key, value);
    else if (key == "forward_lr") s.forward.lr = parse_double(key, value);
    else if (key == "mu") s.forward.mu = parse_double(key, value);
    else if (key == "stage2_lr") s2.lr = parse_double(key, value);
    else if (key == "stage2_iterations") {
        s2.iterations = parse_count(key, value);
        s2.snapshot_interval = s2.iterations;
    } else if (key == "forward_iterations") {
        s.forward.iterations = parse_count(key, value);
        s.forward.snapshot_interval = s.forward.iterations;
    } else if (key == "seed") {
        const long long v = parse_int(key, value);
        if (v < 0) throw InvalidArgument("config: seed must be non-negative");
        s1.seed = s2.seed = s.forward.seed = static_cast<std::uint64_t>(v);
    } else if (key == "weight_decay") {
        s1.weight_decay = s2.weight_decay = s.forward.weight_decay = parse_double(key, value);
    } else {
        throw InvalidArgument("config: unknown key '" + key + "'");
    }
}

void apply_settings(Settings& s, const SettingMap& values) {
    for (const auto& [k, v] : values) apply_setting(s, k, v);
}

SettingMap describe(const Settings& s) {
    const StageConfig& s1 = s.pipeline.stage1;
    const StageConfig& s2 = s.pipeline.stage2;
    return {
        {"iterations", std::to_string(s1.iterations)},
        {"snapshot_interval", std::to_string(s1.snapshot_interval)},
        {"lr", format_double(s1.lr)},
        {"lambda1", format_double(s1.lambda1)},
        {"lambda2", format_double(s1.lambda2)},
        {"alpha", format_double(s1.alpha)},
        {"scales", std::to_string(s1.scales)},
        {"seed", std::to_string(s1.seed)},
        {"weight_decay", format_double(s1.weight_decay)},
        {"checker_cell", std::to_string(s.pipeline.checker_cell)},
        {"stage2_iterations", std::to_string(s2.iterations)},
        {"stage2_lr", format_double(s2.lr)},
        {"lambda3", format_double(s2.lambda3)},
        {"forward_iterations", std::to_string(s.forward.iterations)},
        {"forward_lr", format_double(s.forward.lr)},
        {"mu", format_double(s.forward.mu)},
    };
}

SettingMap read_config_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path.string());
    SettingMap out;
    if (path.extension() == ".json") {
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            throw FormatError("config " + path.string() + ": " + e.what());
        }
        if (!j.contains("config") || !j["config"].is_object())
            throw FormatError("config " + path.string() + ": no \"config\" object");
        for (const auto& [k, v] : j["config"].items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
        return out;
    }
    std::string line;
    int number = 0;
    while (std::getline(f, line)) {
        ++number;
        const std::string body = trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw FormatError("config " + path.string() + ":" + std::to_string(number) + ": expected key=value");
        out[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Depth from a virtual texture: deform a checkerboard over an image, then recover depth."};
    app.require_subcommand(1);
    Context ctx{out, err, args, "", json::object()};

    std::string gen_kind = "sphere", gen_variant = "shaded", gen_out = "dataset";
    int gen_size = 64;
    double gen_extent = 0.0;
    CLI::App* gen = app.add_subcommand("gen", "write the primitive dataset (kind/variant/{image.ppm,depth.pfm,mask.pgm})");
    gen->add_option("--kind", gen_kind, "sphere, cube, pyramid, cylinder or all");
    gen->add_option("--variant", gen_variant, "silhouette, shaded, regular, natural or all");
    gen->add_option("--size", gen_size, "resolution");
    gen->add_option("--extent", gen_extent, "radius or half-extent in pixels (0: 3/8 of size)");
    gen->add_option("--out", gen_out, "output directory");

    SettingFlags rt_settings;
    SourceFlags rt_src;
    double rt_tol = 1e-3;
    std::string rt_out;
    CLI::App* roundtrip = app.add_subcommand("roundtrip", "forward conformal map of a known depth, then recover it");
    rt_settings.attach(roundtrip);
    rt_src.attach(roundtrip, false);
    roundtrip->add_option("--tolerance", rt_tol, "maximum depth MSE for exit 0");
    roundtrip->add_option("--out", rt_out, "optional output directory");

    SettingFlags run_settings;
    RunFlags run_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "full pipeline: Stage I, Stage II per snapshot, selection");
    run_settings.attach(run_cmd);
    run_flags.src.attach(run_cmd, true);
    run_cmd->add_option("--target", run_flags.target, "oracle target image (PFM)");
    run_cmd->add_option("--guidance", run_flags.guidance, "oracle, noisy-oracle[:sigma] or remote:<cmd>");
    run_cmd->add_option("--out", run_flags.out_dir, "output directory");
    run_cmd->add_flag("--quiet", run_flags.quiet, "no progress on stderr");

    RenderFlags render_flags;
    CLI::App* render = app.add_subcommand("render", "novel orthographic views of a textured depth map");
    render->add_option("--depth", render_flags.depth, "depth (PFM)")->required();
    render->add_option("--texcoords", render_flags.texcoords, "texture coordinates (PFM)")->required();
    render->add_option("--image", render_flags.image, "input image")->required();
    render->add_option("--mask", render_flags.mask, "mask (PGM)")->required();
    render->add_option("--azimuths", render_flags.azimuths, "comma-separated azimuths in degrees");
    render->add_option("--elevation", render_flags.elevation, "elevation in degrees");
    render->add_option("--out", render_flags.out_dir, "output directory");

    std::string gc_op = "all", gc_manifest;
    std::uint64_t gc_seed = 0;
    int gc_size = 8;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
    gradcheck->add_option("--op", gc_op, "single op or all");
    gradcheck->add_option("--seed", gc_seed, "instance seed");
    gradcheck->add_option("--size", gc_size, "grid size (even, >= 4)");
    gradcheck->add_option("--manifest", gc_manifest, "write a manifest here");

    std::string m_pred, m_gt, m_mask, m_manifest;
    CLI::App* metrics = app.add_subcommand("metrics", "depth and normal MSE of a prediction");
    metrics->add_option("--pred", m_pred, "predicted depth (PFM)")->required();
    metrics->add_option("--gt", m_gt, "ground-truth depth (PFM)")->required();
    metrics->add_option("--mask", m_mask, "mask (PGM)")->required();
    metrics->add_option("--manifest", m_manifest, "write a manifest here");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (gen->parsed()) return cmd_gen(ctx, gen_kind, gen_variant, gen_size, gen_extent, gen_out);
        if (roundtrip->parsed()) return cmd_roundtrip(ctx, rt_settings.resolve(ctx), rt_src, rt_tol, rt_out);
        if (run_cmd->parsed()) return cmd_run(ctx, run_settings.resolve(ctx), run_flags);
        if (render->parsed()) return cmd_render(ctx, render_flags);
        if (gradcheck->parsed()) return cmd_gradcheck(ctx, gc_op, gc_seed, gc_size, gc_manifest);
        if (metrics->parsed()) return cmd_metrics(ctx, m_pred, m_gt, m_mask, m_manifest);
    } catch (const GuidanceError& e) {
        err << "error (guidance, " << to_string(e.kind()) << "): " << e.what() << '\n';
        return kGuidance;
    } catch (const DivergenceError& e) {
        err << "error (divergence): " << e.what() << '\n';
        return kDivergence;
    } catch (const IoError& e) {
        err << "error (io): " << e.what() << '\n';
        return kIo;
    } catch (const FormatError& e) {
        err << "error (format): " << e.what() << '\n';
        return kIo;
    } catch (const DegenerateError& e) {
        err << "error (degenerate): " << e.what() << '\n';
        return kInvalid;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << '\n';
        return kIo;
    }
    return kInvalid;
}

}  // namespace svt::cli
