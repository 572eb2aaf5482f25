#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loopclose/detector.hpp"
#include "loopclose/se2.hpp"

namespace loopclose {

enum class Shape { Square, Circle, FigureEight, Line };
enum class FeatureMode { Images, Descriptors };

Shape parse_shape(std::string_view name);
const char* to_string(Shape shape);
FeatureMode parse_feature_mode(std::string_view name);
const char* to_string(FeatureMode mode);

struct WorldSpec {
    Shape shape = Shape::Square;
    std::size_t num_poses = 40;
    double scale = 10.0;  ///< side length, radius or half-width in meters
    double drift_rot_per_step = 0.0;
    double drift_trans_per_step = 0.0;
    std::uint64_t noise_seed = 1;
    FeatureMode feature_mode = FeatureMode::Descriptors;
    std::size_t landmarks_per_cell = 2;
    /// How many times the closed shapes are traversed.
    double laps = 1.0;
    std::size_t min_loop_gap = 30;
    /// Revisit distance threshold; 0 picks 1.5 x pose spacing.
    double revisit_radius = 0.0;
    std::string name;

    /// Throws SpecError.
    void validate() const;
};

/// Texture element attached to a landmark, in world units.
struct Blob {
    Vector2d offset = Vector2d::Zero();
    double sigma = 1.0;
    double amplitude = 0.0;
};

struct Landmark {
    Vector2d position = Vector2d::Zero();
    Descriptor256 signature;
    std::vector<Blob> blobs;  ///< blob 0 is the sharp centre dot
};

struct RevisitPair {
    std::size_t first = 0;   ///< earlier pose
    std::size_t second = 0;  ///< later pose

    bool operator==(const RevisitPair&) const = default;
};

struct SynthDataset {
    WorldSpec spec;
    double spacing = 0;  ///< arc length between consecutive poses
    double revisit_radius = 0;
    std::vector<Pose2d> gt_poses;
    std::vector<Pose2d> odom_poses;
    std::vector<Keyframe> keyframes;  ///< posed at the odometry estimate
    std::vector<RevisitPair> revisit_pairs;
    std::vector<Landmark> landmarks;
};

inline constexpr int kViewSize = 128;
inline constexpr double kPixelsPerSpacing = 16.0;
inline constexpr double kSensingRadiusSpacings = 2.5;

/// Arc length of one traversal of the shape.
double shape_perimeter(Shape shape, double scale);

/// Ground-truth pose at arc length s (wrapping for closed shapes).
Pose2d shape_pose(Shape shape, double scale, double s);

SynthDataset generate(const WorldSpec& spec);

/// Orthographic top-down view centred on `pose`, heading pointing up.
GrayImage render_view(const std::vector<Landmark>& landmarks, const Pose2d& pose, double spacing);

/// Replaces every frame's features with fresh random descriptors, then copies
/// the `overlap_count` top-ranked features of the earlier frame of each revisit
/// pair into the later frame. The remaining descriptors of a later frame score
/// below the copies, so the copies lead its top-K ranking.
SynthDataset plant_matches(SynthDataset dataset, std::size_t overlap_count);

/// Revisit pairs by brute force over the ground truth.
std::vector<RevisitPair> find_revisit_pairs(const std::vector<Pose2d>& gt, double radius, std::size_t gap);

/// Five looped worlds rendered as images, seeds 1 to 5.
std::vector<WorldSpec> standard_corpus_specs();
std::vector<SynthDataset> generate_corpus(const std::vector<WorldSpec>& specs, std::size_t jobs = 1);

/// One lap of a 40-pose square with heading drift of 0.004 rad per step (seed 3),
/// the world behind the loop-correction experiments.
WorldSpec drifted_square_spec();

std::vector<Pose3d> to_poses3(const std::vector<Pose2d>& poses);

}  // namespace loopclose
