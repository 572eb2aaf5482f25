#include "loopclose/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <thread>

#include "loopclose/io.hpp"
#include "loopclose/rng.hpp"

namespace loopclose {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kLandmarkStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPlantStream = 0xD1B54A32D192ED03ULL;

// Arc-length table for the figure-eight x = a sin(phi), y = a sin(phi) cos(phi).
struct EightTable {
    static constexpr int kSamples = 20000;
    std::vector<double> arc;  // arc[i] = length from phi = 0 to phi = 2 pi i / kSamples

    EightTable() : arc(kSamples + 1, 0.0) {
        auto point = [](double phi) { return Vector2d(std::sin(phi), std::sin(phi) * std::cos(phi)); };
        for (int i = 1; i <= kSamples; ++i) {
            const double a = 2 * kPi * (i - 1) / kSamples;
            const double b = 2 * kPi * i / kSamples;
            arc[static_cast<std::size_t>(i)] = arc[static_cast<std::size_t>(i - 1)] + (point(b) - point(a)).norm();
        }
    }

    static const EightTable& get() {
        static const EightTable table;
        return table;
    }

    // phi for a unit-scale arc length in [0, arc.back()].
    double phi_at(double s) const {
        const auto it = std::upper_bound(arc.begin(), arc.end(), s);
        if (it == arc.begin()) {
            return 0.0;
        }
        if (it == arc.end()) {
            return 2 * kPi;
        }
        const auto i = static_cast<std::size_t>(it - arc.begin());
        const double t = (s - arc[i - 1]) / (arc[i] - arc[i - 1]);
        return 2 * kPi * (static_cast<double>(i - 1) + t) / kSamples;
    }
};

Descriptor256 random_descriptor(Lcg64& rng) {
    Descriptor256 d;
    for (auto& b : d.bytes()) {
        b = static_cast<std::uint8_t>(rng.next() >> 56);
    }
    return d;
}

Keypoint view_keypoint(const Vector2d& world, const Pose2d& pose, double spacing) {
    const Vector2d local = inverse(pose) * world;
    const double mpp = spacing / kPixelsPerSpacing;
    Keypoint kp;
    kp.x = static_cast<int>(std::lround(kViewSize / 2.0 - local.y() / mpp));
    kp.y = static_cast<int>(std::lround(kViewSize / 2.0 - local.x() / mpp));
    return kp;
}

std::vector<Landmark> make_landmarks(const WorldSpec& spec, const std::vector<Pose2d>& gt, double spacing) {
    Lcg64 rng(spec.noise_seed ^ kLandmarkStream);
    double min_x = gt.front().x, max_x = min_x, min_y = gt.front().y, max_y = min_y;
    for (const auto& p : gt) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    // Enough margin to cover the corners of every view.
    const double margin = (kViewSize / kPixelsPerSpacing * std::numbers::sqrt2 / 2 + 1) * spacing;
    min_x -= margin;
    min_y -= margin;
    const auto nx = static_cast<std::size_t>(std::ceil((max_x + margin - min_x) / spacing));
    const auto ny = static_cast<std::size_t>(std::ceil((max_y + margin - min_y) / spacing));
    const double px = spacing / kPixelsPerSpacing;

    std::vector<Landmark> out;
    out.reserve(nx * ny * spec.landmarks_per_cell);
    for (std::size_t cy = 0; cy < ny; ++cy) {
        for (std::size_t cx = 0; cx < nx; ++cx) {
            for (std::size_t n = 0; n < spec.landmarks_per_cell; ++n) {
                Landmark lm;
                lm.position = Vector2d(min_x + (static_cast<double>(cx) + rng.uniform()) * spacing,
                                       min_y + (static_cast<double>(cy) + rng.uniform()) * spacing);
                lm.signature = random_descriptor(rng);
                lm.blobs.push_back(Blob{Vector2d::Zero(), 1.2 * px, rng.uniform(110, 150)});
                for (int b = 0; b < 6; ++b) {
                    const double r = 12 * px * std::sqrt(rng.uniform());
                    const double a = rng.uniform(-kPi, kPi);
                    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                    lm.blobs.push_back(Blob{Vector2d(r * std::cos(a), r * std::sin(a)), rng.uniform(2, 4) * px,
                                            sign * rng.uniform(40, 90)});
                }
                out.push_back(std::move(lm));
            }
        }
    }
    return out;
}

std::vector<InformativeFeature> sense_landmarks(const std::vector<Landmark>& landmarks, const Pose2d& pose,
                                                double spacing) {
    const double radius = kSensingRadiusSpacings * spacing;
    std::vector<InformativeFeature> out;
    for (const auto& lm : landmarks) {
        if ((lm.position - pose.translation()).norm() <= radius) {
            InformativeFeature f;
            f.keypoint = view_keypoint(lm.position, pose, spacing);
            f.keypoint.response = lm.blobs.empty() ? 0.0 : lm.blobs.front().amplitude;
            f.descriptor = lm.signature;
            f.score = informativeness_score(f.descriptor);
            out.push_back(f);
        }
    }
    return out;
}

}  // namespace

Shape parse_shape(std::string_view name) {
    if (name == "square") return Shape::Square;
    if (name == "circle") return Shape::Circle;
    if (name == "figure-eight") return Shape::FigureEight;
    if (name == "line") return Shape::Line;
    throw Error(ErrorCode::SpecError, "unknown shape '" + std::string(name) + "'");
}

const char* to_string(Shape shape) {
    switch (shape) {
        case Shape::Square: return "square";
        case Shape::Circle: return "circle";
        case Shape::FigureEight: return "figure-eight";
        case Shape::Line: return "line";
    }
    return "?";
}

FeatureMode parse_feature_mode(std::string_view name) {
    if (name == "images") return FeatureMode::Images;
    if (name == "descriptors") return FeatureMode::Descriptors;
    throw Error(ErrorCode::SpecError, "unknown feature mode '" + std::string(name) + "'");
}

const char* to_string(FeatureMode mode) { return mode == FeatureMode::Images ? "images" : "descriptors"; }

void WorldSpec::validate() const {
    if (num_poses < 4) {
        throw Error(ErrorCode::SpecError, "numPoses must be >= 4");
    }
    if (!(scale > 0) || !std::isfinite(scale)) {
        throw Error(ErrorCode::SpecError, "scale must be positive");
    }
    if (!(laps > 0) || !std::isfinite(laps)) {
        throw Error(ErrorCode::SpecError, "laps must be positive");
    }
    if (!std::isfinite(drift_rot_per_step) || !std::isfinite(drift_trans_per_step)) {
        throw Error(ErrorCode::SpecError, "drift must be finite");
    }
    if (landmarks_per_cell < 1 || landmarks_per_cell > 16) {
        throw Error(ErrorCode::SpecError, "landmarksPerCell must lie in [1, 16]");
    }
    if (min_loop_gap < 2) {
        throw Error(ErrorCode::SpecError, "loop gap must be >= 2");
    }
    if (revisit_radius < 0 || !std::isfinite(revisit_radius)) {
        throw Error(ErrorCode::SpecError, "revisit radius must be >= 0");
    }
}

double shape_perimeter(Shape shape, double scale) {
    switch (shape) {
        case Shape::Square: return 4 * scale;
        case Shape::Circle: return 2 * kPi * scale;
        case Shape::FigureEight: return EightTable::get().arc.back() * scale;
        case Shape::Line: return scale;
    }
    return scale;
}

Pose2d shape_pose(Shape shape, double scale, double s) {
    if (shape == Shape::Line) {
        return Pose2d(s, 0, 0);
    }
    const double perimeter = shape_perimeter(shape, scale);
    s = std::fmod(s, perimeter);
    if (s < 0) {
        s += perimeter;
    }
    switch (shape) {
        case Shape::Square: {
            const int side = std::min(3, static_cast<int>(s / scale));
            const double u = s - side * scale;
            switch (side) {
                case 0: return Pose2d(u, 0, 0);
                case 1: return Pose2d(scale, u, kPi / 2);
                case 2: return Pose2d(scale - u, scale, kPi);
                default: return Pose2d(0, scale - u, -kPi / 2);
            }
        }
        case Shape::Circle: {
            const double phi = s / scale;
            return Pose2d(scale * std::cos(phi), scale * std::sin(phi), phi + kPi / 2);
        }
        case Shape::FigureEight: {
            const double phi = EightTable::get().phi_at(s / scale);
            return Pose2d(scale * std::sin(phi), scale * std::sin(phi) * std::cos(phi),
                          std::atan2(std::cos(2 * phi), std::cos(phi)));
        }
        case Shape::Line: break;
    }
    return Pose2d();
}

std::vector<RevisitPair> find_revisit_pairs(const std::vector<Pose2d>& gt, double radius, std::size_t gap) {
    std::vector<RevisitPair> out;
    for (std::size_t j = 0; j < gt.size(); ++j) {
        for (std::size_t i = 0; i + gap <= j; ++i) {
            if ((gt[j].translation() - gt[i].translation()).norm() <= radius) {
                out.push_back(RevisitPair{i, j});
            }
        }
    }
    return out;
}

GrayImage render_view(const std::vector<Landmark>& landmarks, const Pose2d& pose, double spacing) {
    const double mpp = spacing / kPixelsPerSpacing;
    const double half = kViewSize / 2.0;
    std::vector<float> acc(static_cast<std::size_t>(kViewSize) * kViewSize, 100.0f);
    const double reach = (half * std::numbers::sqrt2 + 40) * mpp;
    const Pose2d world_to_cam = inverse(pose);
    for (const auto& lm : landmarks) {
        if ((lm.position - pose.translation()).norm() > reach) {
            continue;
        }
        for (const auto& blob : lm.blobs) {
            const Vector2d local = world_to_cam * Vector2d(lm.position + blob.offset);
            const double u = half - local.y() / mpp;
            const double v = half - local.x() / mpp;
            const double sigma = blob.sigma / mpp;
            const double r = 3 * sigma;
            const int x0 = std::max(0, static_cast<int>(std::floor(u - r)));
            const int x1 = std::min(kViewSize - 1, static_cast<int>(std::ceil(u + r)));
            const int y0 = std::max(0, static_cast<int>(std::floor(v - r)));
            const int y1 = std::min(kViewSize - 1, static_cast<int>(std::ceil(v + r)));
            const double inv = 1.0 / (2 * sigma * sigma);
            for (int y = y0; y <= y1; ++y) {
                const double dy = y - v;
                for (int x = x0; x <= x1; ++x) {
                    const double dx = x - u;
                    acc[static_cast<std::size_t>(y) * kViewSize + x] +=
                        static_cast<float>(blob.amplitude * std::exp(-(dx * dx + dy * dy) * inv));
                }
            }
        }
    }
    GrayImage img(kViewSize, kViewSize);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[i]), 0L, 255L));
    }
    return img;
}

SynthDataset generate(const WorldSpec& spec) {
    spec.validate();
    SynthDataset ds;
    ds.spec = spec;
    const double length = shape_perimeter(spec.shape, spec.scale) * spec.laps;
    ds.spacing = length / static_cast<double>(spec.num_poses);
    ds.revisit_radius = spec.revisit_radius > 0 ? spec.revisit_radius : 1.5 * ds.spacing;

    ds.gt_poses.reserve(spec.num_poses);
    for (std::size_t i = 0; i < spec.num_poses; ++i) {
        ds.gt_poses.push_back(shape_pose(spec.shape, spec.scale, static_cast<double>(i) * ds.spacing));
    }

    if (spec.drift_rot_per_step == 0 && spec.drift_trans_per_step == 0) {
        ds.odom_poses = ds.gt_poses;
    } else {
        Lcg64 rng(spec.noise_seed);
        const double sigma_rot = 0.25 * std::abs(spec.drift_rot_per_step);
        const double sigma_trans = 0.25 * std::abs(spec.drift_trans_per_step);
        ds.odom_poses.push_back(ds.gt_poses.front());
        for (std::size_t i = 1; i < spec.num_poses; ++i) {
            const Pose2d step = between(ds.gt_poses[i - 1], ds.gt_poses[i]);
            const double nx = rng.gaussian();
            const double ny = rng.gaussian();
            const double nt = rng.gaussian();
            const Pose2d noisy(step.x + spec.drift_trans_per_step + sigma_trans * nx, step.y + sigma_trans * ny,
                               step.theta + spec.drift_rot_per_step + sigma_rot * nt);
            ds.odom_poses.push_back(compose(ds.odom_poses.back(), noisy));
        }
    }

    ds.revisit_pairs = find_revisit_pairs(ds.gt_poses, ds.revisit_radius, spec.min_loop_gap);
    ds.landmarks = make_landmarks(spec, ds.gt_poses, ds.spacing);

    ds.keyframes.resize(spec.num_poses);
    for (std::size_t i = 0; i < spec.num_poses; ++i) {
        auto& kf = ds.keyframes[i];
        kf.index = i;
        kf.pose = from_planar(ds.odom_poses[i]);
        if (spec.feature_mode == FeatureMode::Images) {
            kf.image = render_view(ds.landmarks, ds.gt_poses[i], ds.spacing);
        } else {
            kf.features = sense_landmarks(ds.landmarks, ds.gt_poses[i], ds.spacing);
        }
    }
    return ds;
}

SynthDataset plant_matches(SynthDataset dataset, std::size_t overlap_count) {
    if (dataset.spec.feature_mode != FeatureMode::Descriptors) {
        throw Error(ErrorCode::SpecError, "planting needs a descriptors-mode dataset");
    }
    Lcg64 rng(dataset.spec.noise_seed ^ kPlantStream);
    auto& frames = dataset.keyframes;
    for (auto& kf : frames) {
        for (auto& f : kf.features) {
            f.descriptor = random_descriptor(rng);
            f.score = informativeness_score(f.descriptor);
        }
    }

    // One source per later frame: its first (earliest) revisit partner.
    std::vector<RevisitPair> pairs = dataset.revisit_pairs;
    std::sort(pairs.begin(), pairs.end(), [](const RevisitPair& a, const RevisitPair& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (p > 0 && pairs[p].second == pairs[p - 1].second) {
            continue;
        }
        const auto& source = frames[pairs[p].first].features;
        auto& target = frames[pairs[p].second].features;
        if (overlap_count > source.size() || overlap_count > target.size()) {
            throw Error(ErrorCode::SpecError, "overlap count " + std::to_string(overlap_count) +
                                                  " exceeds the features of frame pair (" +
                                                  std::to_string(pairs[p].first) + ", " +
                                                  std::to_string(pairs[p].second) + ")");
        }
        if (overlap_count == 0) {
            continue;
        }
        const auto copies = select_top_k(source, overlap_count);
        const int ceiling = copies.back().score;
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (i < overlap_count) {
                target[i] = copies[i];
                continue;
            }
            Descriptor256 d = random_descriptor(rng);
            while (informativeness_score(d) >= ceiling) {
                std::size_t bit = rng.below(Descriptor256::kBits);
                while (!d.bit(bit)) {
                    bit = (bit + 1) % Descriptor256::kBits;
                }
                d.set_bit(bit, false);
            }
            target[i].descriptor = d;
            target[i].score = informativeness_score(d);
        }
    }
    return dataset;
}

std::vector<WorldSpec> standard_corpus_specs() {
    struct Row {
        Shape shape;
        std::size_t poses;
        double scale;
        double laps;
    };
    const Row rows[] = {
        {Shape::Square, 125, 10.0, 2.0},   {Shape::Circle, 125, 6.0, 2.0},  {Shape::FigureEight, 150, 10.0, 2.0},
        {Shape::Square, 150, 12.0, 2.3}, {Shape::Circle, 150, 7.0, 2.3},
    };
    std::vector<WorldSpec> out;
    std::uint64_t seed = 1;
    for (const auto& row : rows) {
        WorldSpec s;
        s.shape = row.shape;
        s.num_poses = row.poses;
        s.scale = row.scale;
        s.laps = row.laps;
        s.noise_seed = seed;
        s.drift_rot_per_step = 0.0005;
        s.drift_trans_per_step = 0.002;
        s.feature_mode = FeatureMode::Images;
        s.landmarks_per_cell = 1;
        s.name = std::string(to_string(row.shape)) + "-" + std::to_string(seed);
        out.push_back(s);
        ++seed;
    }
    return out;
}

std::vector<SynthDataset> generate_corpus(const std::vector<WorldSpec>& specs, std::size_t jobs) {
    std::vector<SynthDataset> out(specs.size());
    jobs = std::max<std::size_t>(1, std::min(jobs, specs.size()));
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < specs.size(); i += jobs) {
                    out[i] = generate(specs[i]);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

WorldSpec drifted_square_spec() {
    WorldSpec s;
    s.shape = Shape::Square;
    s.num_poses = 40;
    s.scale = 10.0;
    s.noise_seed = 3;
    s.drift_rot_per_step = 0.004;
    s.feature_mode = FeatureMode::Images;
    s.landmarks_per_cell = 1;
    s.name = "drifted-square-3";
    return s;
}

std::vector<Pose3d> to_poses3(const std::vector<Pose2d>& poses) {
    std::vector<Pose3d> out;
    out.reserve(poses.size());
    for (const auto& p : poses) {
        out.push_back(from_planar(p));
    }
    return out;
}

}  // namespace loopclose
