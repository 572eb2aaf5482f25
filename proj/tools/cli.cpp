#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "loopclose/detector.hpp"
#include "loopclose/io.hpp"
#include "loopclose/metrics.hpp"
#include "loopclose/posegraph.hpp"
#include "loopclose/rng.hpp"
#include "loopclose/synth.hpp"

namespace loopclose::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

enum class TrajFormat { Kitti, Tum };

TrajFormat parse_format(const std::string& s) {
    if (s == "kitti") return TrajFormat::Kitti;
    if (s == "tum") return TrajFormat::Tum;
    throw Error(ErrorCode::InvalidConfig, "format must be kitti or tum, got '" + s + "'");
}

const char* to_string(TrajFormat f) { return f == TrajFormat::Kitti ? "kitti" : "tum"; }

struct RunConfig {
    DetectorConfig detector;
    OptimizeOptions optimizer;
    TrajFormat format = TrajFormat::Kitti;
    AxisMap axis_map = AxisMap::XY;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    bool fullscan = false;
    double loop_noise = 0;

    std::string describe() const {
        std::ostringstream s;
        s << "config k=" << detector.k << " cadence=" << detector.cadence
          << " fast_threshold=" << detector.fast_threshold << " max_dist=" << detector.max_distance
          << " min_matches=" << detector.min_matches << " min_gap=" << detector.min_loop_gap
          << " baseline=" << (fullscan ? "fullscan" : "none") << " format=" << to_string(format)
          << " axis_map=" << loopclose::to_string(axis_map) << " seed=" << seed << " jobs=" << jobs
          << " max_iterations=" << optimizer.max_iterations
          << " tolerance=" << format_double(optimizer.tolerance) << " loop_noise=" << format_double(loop_noise);
        return s.str();
    }

    // The part of the configuration a detection report does not already carry.
    std::string describe_run() const {
        std::ostringstream s;
        s << "run format=" << to_string(format) << " axis_map=" << loopclose::to_string(axis_map) << " seed=" << seed
          << " jobs=" << jobs;
        return s.str();
    }
};

// Config keys shared by the JSON file and the command-line flags.
struct ConfigFlags {
    std::string config_path;
    std::size_t k = 0, cadence = 0, min_matches = 0, min_gap = 0, jobs = 0, max_iterations = 0;
    int max_dist = 0, fast_threshold = 0;
    std::string format, axis_map, baseline;
    std::uint64_t seed = 0;
    double tolerance = 0, loop_noise = 0;
    std::map<std::string, CLI::Option*> given;

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file; flags override its values");
        given["k"] = app->add_option("--k", k, "informative features kept per frame");
        given["cadence"] = app->add_option("--cadence", cadence, "check every N-th frame");
        given["max_dist"] = app->add_option("--max-dist", max_dist, "Hamming acceptance threshold");
        given["min_matches"] = app->add_option("--min-matches", min_matches, "pairs needed to accept a frame");
        given["min_gap"] = app->add_option("--min-gap", min_gap, "frames excluded before the current one");
        given["fast_threshold"] = app->add_option("--fast-threshold", fast_threshold, "FAST intensity threshold");
        given["format"] = app->add_option("--format", format, "trajectory format: kitti | tum");
        given["axis_map"] = app->add_option("--axis-map", axis_map, "ground plane axes: xy | xz");
        given["seed"] = app->add_option("--seed", seed, "random seed");
        given["jobs"] = app->add_option("--jobs", jobs, "worker threads");
        given["baseline"] = app->add_option("--baseline", baseline, "fullscan: also run the full-scan detector");
        given["max_iterations"] = app->add_option("--max-iters", max_iterations, "optimizer iteration cap");
        given["tolerance"] = app->add_option("--tolerance", tolerance, "optimizer relative-decrease stop");
        given["loop_noise"] = app->add_option("--loop-noise", loop_noise,
                                              "std-dev of noise added to ground-truth loop measurements");
    }

    bool has(const std::string& key) const { return given.at(key)->count() > 0; }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            apply_json(cfg, json::parse(read_file(config_path), nullptr, false));
        }
        if (has("k")) cfg.detector.k = k;
        if (has("cadence")) cfg.detector.cadence = cadence;
        if (has("max_dist")) cfg.detector.max_distance = max_dist;
        if (has("min_matches")) cfg.detector.min_matches = min_matches;
        if (has("min_gap")) cfg.detector.min_loop_gap = min_gap;
        if (has("fast_threshold")) cfg.detector.fast_threshold = fast_threshold;
        if (has("format")) cfg.format = parse_format(format);
        if (has("axis_map")) cfg.axis_map = parse_axis_map(axis_map);
        if (has("seed")) cfg.seed = seed;
        if (has("jobs")) cfg.jobs = jobs;
        if (has("baseline")) cfg.fullscan = parse_baseline(baseline);
        if (has("max_iterations")) cfg.optimizer.max_iterations = max_iterations;
        if (has("tolerance")) cfg.optimizer.tolerance = tolerance;
        if (has("loop_noise")) cfg.loop_noise = loop_noise;
        cfg.detector.validate();
        if (cfg.jobs < 1) {
            throw Error(ErrorCode::InvalidConfig, "jobs must be >= 1");
        }
        if (!(cfg.optimizer.tolerance >= 0) || !(cfg.loop_noise >= 0)) {
            throw Error(ErrorCode::InvalidConfig, "tolerance and loop noise must be >= 0");
        }
        return cfg;
    }

    static bool parse_baseline(const std::string& s) {
        if (s == "fullscan") return true;
        if (s == "none") return false;
        throw Error(ErrorCode::InvalidConfig, "baseline must be fullscan or none, got '" + s + "'");
    }

    static void apply_json(RunConfig& cfg, const json& j) {
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::InvalidConfig, "config file must hold a JSON object");
        }
        for (const auto& [key, value] : j.items()) {
            try {
                if (key == "k") cfg.detector.k = value.get<std::size_t>();
                else if (key == "cadence") cfg.detector.cadence = value.get<std::size_t>();
                else if (key == "max_dist") cfg.detector.max_distance = value.get<int>();
                else if (key == "min_matches") cfg.detector.min_matches = value.get<std::size_t>();
                else if (key == "min_gap") cfg.detector.min_loop_gap = value.get<std::size_t>();
                else if (key == "fast_threshold") cfg.detector.fast_threshold = value.get<int>();
                else if (key == "format") cfg.format = parse_format(value.get<std::string>());
                else if (key == "axis_map") cfg.axis_map = parse_axis_map(value.get<std::string>());
                else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
                else if (key == "jobs") cfg.jobs = value.get<std::size_t>();
                else if (key == "baseline") cfg.fullscan = parse_baseline(value.get<std::string>());
                else if (key == "max_iterations") cfg.optimizer.max_iterations = value.get<std::size_t>();
                else if (key == "tolerance") cfg.optimizer.tolerance = value.get<double>();
                else if (key == "loop_noise") cfg.loop_noise = value.get<double>();
                else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
            } catch (const json::exception&) {
                throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' has the wrong type");
            }
        }
    }
};

std::vector<Pose3d> load_trajectory(const fs::path& path, TrajFormat format, std::vector<std::string>* warnings) {
    if (format == TrajFormat::Kitti) {
        return load_kitti(path, warnings);
    }
    std::vector<Pose3d> out;
    for (const auto& tp : load_tum(path, warnings)) {
        out.push_back(tp.pose);
    }
    return out;
}

void save_trajectory(const std::vector<Pose3d>& poses, const fs::path& path, TrajFormat format) {
    if (format == TrajFormat::Kitti) {
        save_kitti(poses, path);
        return;
    }
    std::vector<TimedPose> timed;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        timed.push_back(TimedPose{static_cast<double>(i), poses[i]});
    }
    save_tum(timed, path);
}

std::vector<Pose2d> planar(const std::vector<Pose3d>& poses, AxisMap map) {
    std::vector<Pose2d> out;
    out.reserve(poses.size());
    for (const auto& p : poses) {
        out.push_back(to_planar(p, map));
    }
    return out;
}

std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06zu.pgm", i);
    return buf;
}

void write_revisits(const fs::path& path, const SynthDataset& ds) {
    std::ostringstream s;
    s << "# revisit pairs: earlier later (radius " << format_double(ds.revisit_radius) << " m, gap "
      << ds.spec.min_loop_gap << ")\n";
    for (const auto& p : ds.revisit_pairs) {
        s << p.first << ' ' << p.second << '\n';
    }
    write_file(path, s.str());
}

std::vector<RevisitPair> read_revisits(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::vector<RevisitPair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = split_fields(line);
        if (f.empty() || f[0].starts_with('#')) {
            continue;
        }
        if (f.size() != 2) {
            throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) +
                                                   ": expected two indices", line_no);
        }
        out.push_back(RevisitPair{parse_index(f[0], line_no), parse_index(f[1], line_no)});
    }
    return out;
}

void write_dataset(const SynthDataset& ds, const fs::path& dir, TrajFormat format) {
    fs::create_directories(dir);
    save_trajectory(to_poses3(ds.gt_poses), dir / "gt_poses.txt", format);
    save_trajectory(to_poses3(ds.odom_poses), dir / "odom_poses.txt", format);
    write_revisits(dir / "revisits.txt", ds);
    json spec = {
        {"name", ds.spec.name},
        {"shape", to_string(ds.spec.shape)},
        {"poses", ds.spec.num_poses},
        {"scale", ds.spec.scale},
        {"laps", ds.spec.laps},
        {"drift_rot", ds.spec.drift_rot_per_step},
        {"drift_trans", ds.spec.drift_trans_per_step},
        {"seed", ds.spec.noise_seed},
        {"mode", to_string(ds.spec.feature_mode)},
        {"landmarks_per_cell", ds.spec.landmarks_per_cell},
        {"min_gap", ds.spec.min_loop_gap},
        {"spacing", ds.spacing},
        {"revisit_radius", ds.revisit_radius},
        {"format", to_string(format)},
    };
    write_file(dir / "world.json", spec.dump(2) + "\n");
    if (ds.spec.feature_mode == FeatureMode::Images) {
        for (const auto& kf : ds.keyframes) {
            save_pgm(*kf.image, dir / "images" / frame_name(kf.index));
        }
    } else {
        FeatureCache cache;
        cache.k = 1;
        for (const auto& kf : ds.keyframes) {
            cache.k = std::max(cache.k, kf.features.size());
            cache.frames.push_back(FrameFeatures{kf.index, kf.features});
        }
        save_feature_cache(cache, dir / "features.lcfc");
    }
}

// Keyframes for `poses`, taking pixels or features from a dataset directory.
std::vector<Keyframe> load_frames(const std::vector<Pose3d>& poses, const fs::path& images_dir,
                                  const fs::path& features_path, const fs::path& masks_dir) {
    std::vector<Keyframe> frames(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        frames[i].index = i;
        frames[i].pose = poses[i];
    }
    if (!images_dir.empty()) {
        for (auto& kf : frames) {
            kf.image = load_pgm(images_dir / frame_name(kf.index));
            if (!masks_dir.empty() && fs::exists(masks_dir / frame_name(kf.index))) {
                const GrayImage m = load_pgm(masks_dir / frame_name(kf.index));
                MappedMask mask(m.width, m.height, false);
                for (std::size_t p = 0; p < m.pixels.size(); ++p) {
                    mask.bits[p] = m.pixels[p] != 0 ? 1 : 0;
                }
                kf.mask = std::move(mask);
            }
        }
        return frames;
    }
    if (features_path.empty()) {
        throw Error(ErrorCode::IoError, "no images directory or feature cache given");
    }
    const FeatureCache cache = load_feature_cache(features_path);
    for (const auto& frame : cache.frames) {
        if (frame.index >= frames.size()) {
            throw Error(ErrorCode::BadIndex, "feature cache frame " + std::to_string(frame.index) +
                                                 " has no pose");
        }
        frames[frame.index].features = frame.features;
    }
    return frames;
}

SynthDataset load_dataset_dir(const fs::path& dir, const RunConfig& cfg) {
    SynthDataset ds;
    ds.spec.name = dir.filename().string();
    ds.gt_poses = planar(load_trajectory(dir / "gt_poses.txt", cfg.format, nullptr), cfg.axis_map);
    const auto odom = load_trajectory(dir / "odom_poses.txt", cfg.format, nullptr);
    ds.odom_poses = planar(odom, cfg.axis_map);
    ds.revisit_pairs = read_revisits(dir / "revisits.txt");
    const fs::path images = fs::is_directory(dir / "images") ? dir / "images" : fs::path();
    ds.keyframes = load_frames(odom, images, dir / "features.lcfc", dir / "masks");
    return ds;
}

int cmd_synth(const ConfigFlags& flags, const WorldSpec& base, bool standard_corpus, const std::string& out_dir,
              std::ostream& out) {
    const RunConfig cfg = flags.resolve();
    if (standard_corpus) {
        const auto corpus = generate_corpus(standard_corpus_specs(), cfg.jobs);
        for (const auto& ds : corpus) {
            write_dataset(ds, fs::path(out_dir) / ds.spec.name, cfg.format);
            out << ds.spec.name << ": " << ds.spec.num_poses << " poses, " << ds.revisit_pairs.size()
                << " revisit pairs\n";
        }
        return kExitOk;
    }
    WorldSpec spec = base;
    spec.noise_seed = cfg.seed;
    spec.min_loop_gap = cfg.detector.min_loop_gap;
    if (spec.name.empty()) {
        spec.name = std::string(to_string(spec.shape)) + "-" + std::to_string(spec.noise_seed);
    }
    const SynthDataset ds = generate(spec);
    write_dataset(ds, out_dir, cfg.format);
    const double drift = (ds.odom_poses.back().translation() - ds.gt_poses.back().translation()).norm();
    out << "# " << cfg.describe() << '\n';
    out << spec.name << ": " << spec.num_poses << " poses, spacing " << format_double(ds.spacing) << " m, "
        << ds.revisit_pairs.size() << " revisit pairs, final odometry error " << format_double(drift) << " m\n";
    return kExitOk;
}

int cmd_detect(const ConfigFlags& flags, const std::string& dataset, const std::string& trajectory,
               const std::string& images, const std::string& features, const std::string& masks,
               const std::string& report_path, std::ostream& out) {
    const RunConfig cfg = flags.resolve();
    const fs::path dir(dataset);
    fs::path traj = trajectory.empty() && !dataset.empty() ? dir / "odom_poses.txt" : fs::path(trajectory);
    if (traj.empty()) {
        throw Error(ErrorCode::IoError, "detect needs --dataset or --trajectory");
    }
    fs::path img_dir = images;
    fs::path feat_path = features;
    fs::path mask_dir = masks;
    if (!dataset.empty() && img_dir.empty() && feat_path.empty()) {
        if (fs::is_directory(dir / "images")) {
            img_dir = dir / "images";
        } else {
            feat_path = dir / "features.lcfc";
        }
    }
    if (!dataset.empty() && mask_dir.empty()) {
        mask_dir = dir / "masks";
    }
    std::vector<std::string> warnings;
    const auto poses = load_trajectory(traj, cfg.format, &warnings);
    const auto frames = load_frames(poses, img_dir, feat_path, mask_dir);
    const auto report = run_sequence(frames, cfg.detector, cfg.fullscan);

    std::vector<std::string> comments = {cfg.describe_run(), "trajectory " + traj.string()};
    for (const auto& w : warnings) {
        comments.push_back("warning: " + w);
    }
    comments.push_back("pruning_ratio " + format_double(report.pruning_ratio()));
    if (report_path.empty()) {
        write_report(out, report, comments);
    } else {
        std::ostringstream s;
        write_report(s, report, comments);
        write_file(report_path, s.str());
        out << report.loops.size() << " loop(s), pruning ratio " << format_double(report.pruning_ratio()) << '\n';
    }
    return report.loops.empty() ? kExitNegative : kExitOk;
}

int cmd_optimize(const ConfigFlags& flags, const std::string& trajectory, const std::string& report_path,
                 const std::string& gt_path, const std::string& out_dir, std::ostream& out) {
    const RunConfig cfg = flags.resolve();
    std::vector<std::string> warnings;
    const auto poses3 = load_trajectory(trajectory, cfg.format, &warnings);
    const auto before = planar(poses3, cfg.axis_map);
    std::istringstream report_in(read_file(report_path));
    const ParsedReport parsed = read_report(report_in);

    std::vector<Pose2d> gt;
    if (!gt_path.empty()) {
        gt = planar(load_trajectory(gt_path, cfg.format, nullptr), cfg.axis_map);
        if (gt.size() != before.size()) {
            throw Error(ErrorCode::LengthMismatch, "ground truth and trajectory differ in length");
        }
    }
    Lcg64 rng(cfg.seed);
    PoseGraph graph = build_from_trajectory(before, default_odometry_information());
    for (const auto& loop : parsed.loops) {
        if (loop.current_index >= before.size()) {
            throw Error(ErrorCode::BadIndex, "loop frame " + std::to_string(loop.current_index) + " has no pose");
        }
        Pose2d measurement;
        if (!gt.empty()) {
            const Pose2d rel = between(gt[loop.matched_index], gt[loop.current_index]);
            const double nx = rng.gaussian(), ny = rng.gaussian(), nt = rng.gaussian();
            measurement = Pose2d(rel.x + cfg.loop_noise * nx, rel.y + cfg.loop_noise * ny,
                                 rel.theta + cfg.loop_noise * nt);
        }
        graph = add_loop_edge(std::move(graph), loop, measurement, default_loop_information());
    }
    const auto result = optimize(graph, cfg.optimizer);

    std::vector<Pose3d> corrected;
    corrected.reserve(poses3.size());
    for (std::size_t i = 0; i < poses3.size(); ++i) {
        corrected.push_back(apply_planar_correction(poses3[i], before[i], result.graph.vertices[i], cfg.axis_map));
    }
    const fs::path dir(out_dir);
    save_trajectory(corrected, dir / "optimized_poses.txt", cfg.format);
    std::ostringstream g_in, g_out;
    write_g2o(g_in, graph);
    write_g2o(g_out, result.graph);
    write_file(dir / "graph.g2o", g_in.str());
    write_file(dir / "optimized.g2o", g_out.str());

    const auto& st = result.stats;
    out << "# " << cfg.describe() << '\n';
    out << "# loop measurements from " << (gt.empty() ? "identity (no --gt)" : "ground truth") << '\n';
    for (const auto& w : warnings) {
        out << "# warning: " << w << '\n';
    }
    out << "loops\t" << parsed.loops.size() << '\n';
    out << "iterations\t" << st.iterations << '\n';
    out << "rejected_steps\t" << st.rejected_steps << '\n';
    out << "initial_objective\t" << format_double(st.initial_objective) << '\n';
    out << "final_objective\t" << format_double(st.final_objective) << '\n';
    if (!gt.empty()) {
        out << "ate_before\t" << format_double(ate(before, gt)) << '\n';
        out << "ate_after\t" << format_double(ate(result.graph.vertices, gt)) << '\n';
    }
    return kExitOk;
}

std::vector<double> parse_segments(const std::string& s) {
    std::vector<double> out;
    std::string field;
    std::istringstream in(s);
    while (std::getline(in, field, ',')) {
        const double v = parse_double(field, 0);
        if (!(v > 0)) {
            throw Error(ErrorCode::InvalidConfig, "segment lengths must be positive");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw Error(ErrorCode::InvalidConfig, "empty segment list");
    }
    return out;
}

int cmd_evaluate(const ConfigFlags& flags, const std::string& est_path, const std::string& gt_path,
                 const std::string& segments, const std::string& table_path, const std::string& series_path,
                 std::ostream& out) {
    const RunConfig cfg = flags.resolve();
    std::vector<std::string> warnings;
    const auto est = planar(load_trajectory(est_path, cfg.format, &warnings), cfg.axis_map);
    const auto gt = planar(load_trajectory(gt_path, cfg.format, &warnings), cfg.axis_map);
    std::optional<std::vector<double>> lengths;
    if (!segments.empty()) {
        lengths = parse_segments(segments);
    }
    const ErrorReport report = evaluate(est, gt, lengths);
    std::ostringstream table;
    table << "# " << cfg.describe() << '\n';
    for (const auto& w : warnings) {
        table << "# warning: " << w << '\n';
    }
    write_error_table(table, report);
    if (table_path.empty()) {
        out << table.str();
    } else {
        write_file(table_path, table.str());
    }
    if (!series_path.empty()) {
        std::ostringstream series;
        write_error_series(series, report);
        write_file(series_path, series.str());
    }
    return kExitOk;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& corpus_dir, std::size_t k_min, std::size_t k_max,
              std::size_t tolerance, const std::string& table_path, const std::string& series_path,
              std::ostream& out) {
    const RunConfig cfg = flags.resolve();
    if (k_min < 1 || k_max < k_min || k_max > Descriptor256::kBits) {
        throw Error(ErrorCode::InvalidConfig, "need 1 <= k-min <= k-max <= 256");
    }
    std::vector<SynthDataset> corpus;
    if (corpus_dir.empty()) {
        corpus = generate_corpus(standard_corpus_specs(), cfg.jobs);
    } else {
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(corpus_dir)) {
            if (entry.is_directory()) {
                dirs.push_back(entry.path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            corpus.push_back(load_dataset_dir(d, cfg));
        }
        if (corpus.empty()) {
            throw Error(ErrorCode::IoError, "no datasets under " + corpus_dir);
        }
    }
    for (const auto& ds : corpus) {
        if (ds.revisit_pairs.empty()) {
            throw Error(ErrorCode::SpecError, "dataset " + ds.spec.name + " has no revisit pairs");
        }
    }
    SweepOptions options;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        options.k_values.push_back(k);
    }
    options.config = cfg.detector;
    options.tolerance = tolerance;
    options.use_fullscan = cfg.fullscan;
    options.jobs = cfg.jobs;
    const SweepReport report = success_sweep(corpus, options);

    std::ostringstream table;
    table << "# " << cfg.describe() << " (k varies per row)\n";
    table << "# corpus " << (corpus_dir.empty() ? std::string("standard (generated)") : corpus_dir)
          << ", success tolerance +-" << tolerance << " frames\n";
    write_sweep_table(table, report);
    if (table_path.empty()) {
        out << table.str();
    } else {
        write_file(table_path, table.str());
        out << "minimalK=" << (report.minimal_k ? std::to_string(*report.minimal_k) : "none") << '\n';
    }
    if (!series_path.empty()) {
        std::ostringstream series;
        write_sweep_series(series, report);
        write_file(series_path, series.str());
    }
    return kExitOk;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Diverged: return kExitNumeric;
        default: return kExitUsage;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app("Loop-closure detection with informative features and a geometric search window", "loopclose");
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    ConfigFlags synth_flags;
    synth_flags.add(synth);
    WorldSpec spec;
    std::string shape = "square", mode = "descriptors", synth_out;
    bool standard = false;
    synth->add_option("--shape", shape, "square | circle | figure-eight | line")
        ->check(CLI::IsMember({"square", "circle", "figure-eight", "line"}));
    synth->add_option("--poses", spec.num_poses, "number of poses")->check(CLI::Range(std::size_t{4}, std::size_t{100000}));
    synth->add_option("--scale", spec.scale, "shape size in meters")->check(CLI::PositiveNumber);
    synth->add_option("--laps", spec.laps, "traversals of closed shapes")->check(CLI::PositiveNumber);
    synth->add_option("--drift-rot", spec.drift_rot_per_step, "heading bias per step (rad)");
    synth->add_option("--drift-trans", spec.drift_trans_per_step, "forward bias per step (m)");
    synth->add_option("--mode", mode, "images | descriptors")->check(CLI::IsMember({"images", "descriptors"}));
    synth->add_option("--landmarks-per-cell", spec.landmarks_per_cell, "landmarks per grid cell");
    synth->add_option("--name", spec.name, "dataset name");
    synth->add_flag("--standard-corpus", standard, "write the five standard worlds as subdirectories");
    synth->add_option("--out", synth_out, "output directory")->required();

    // detect
    auto* detect = app.add_subcommand("detect", "run loop detection over a frame sequence");
    ConfigFlags detect_flags;
    detect_flags.add(detect);
    std::string det_dataset, det_traj, det_images, det_features, det_masks, det_out;
    detect->add_option("--dataset", det_dataset, "dataset directory written by synth");
    detect->add_option("--trajectory", det_traj, "keyframe poses");
    detect->add_option("--images", det_images, "directory of frame_NNNNNN.pgm images");
    detect->add_option("--features", det_features, "feature cache file");
    detect->add_option("--masks", det_masks, "directory of mapped-pixel masks (nonzero = mapped)");
    detect->add_option("--out", det_out, "report file (default: standard output)");

    // optimize
    auto* opt = app.add_subcommand("optimize", "close detected loops with pose-graph optimization");
    ConfigFlags opt_flags;
    opt_flags.add(opt);
    std::string opt_traj, opt_report, opt_gt, opt_out;
    opt->add_option("--trajectory", opt_traj, "estimated trajectory")->required();
    opt->add_option("--report", opt_report, "detection report")->required();
    opt->add_option("--gt", opt_gt, "ground truth supplying loop measurements");
    opt->add_option("--out", opt_out, "output directory")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "trajectory error metrics");
    ConfigFlags eval_flags;
    eval_flags.add(eval);
    std::string eval_est, eval_gt, eval_segments, eval_out, eval_series;
    eval->add_option("--est", eval_est, "estimated trajectory")->required();
    eval->add_option("--gt", eval_gt, "ground-truth trajectory")->required();
    eval->add_option("--segments", eval_segments, "comma-separated segment lengths in meters");
    eval->add_option("--out", eval_out, "table file (default: standard output)");
    eval->add_option("--series", eval_series, "segment length vs error series file");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "loop-detection success over a range of K");
    ConfigFlags sweep_flags;
    sweep_flags.add(sweep);
    std::string sweep_corpus, sweep_out, sweep_series;
    std::size_t k_min = 4, k_max = 30, tolerance = 2;
    sweep->add_option("--corpus", sweep_corpus, "directory of datasets (default: standard corpus)");
    sweep->add_option("--k-min", k_min, "smallest K");
    sweep->add_option("--k-max", k_max, "largest K");
    sweep->add_option("--success-tolerance", tolerance, "frames of slack around revisit pairs");
    sweep->add_option("--out", sweep_out, "table file (default: standard output)");
    sweep->add_option("--series", sweep_series, "K vs success-rate series file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) {
            spec.shape = parse_shape(shape);
            spec.feature_mode = parse_feature_mode(mode);
            return cmd_synth(synth_flags, spec, standard, synth_out, out);
        }
        if (detect->parsed()) {
            return cmd_detect(detect_flags, det_dataset, det_traj, det_images, det_features, det_masks, det_out, out);
        }
        if (opt->parsed()) {
            return cmd_optimize(opt_flags, opt_traj, opt_report, opt_gt, opt_out, out);
        }
        if (eval->parsed()) {
            return cmd_evaluate(eval_flags, eval_est, eval_gt, eval_segments, eval_out, eval_series, out);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_flags, sweep_corpus, k_min, k_max, tolerance, sweep_out, sweep_series, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitUsage;
}

}  // namespace loopclose::cli
