#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "loopclose/features.hpp"
#include "loopclose/se2.hpp"

namespace loopclose {

// Text helpers shared by every line-oriented parser.
std::vector<std::string_view> split_fields(std::string_view line);
/// Finite decimal number; anything else is a ParseError at `line`.
double parse_double(std::string_view field, std::size_t line);
std::size_t parse_index(std::string_view field, std::size_t line);
/// Shortest form that reads back to the same double.
std::string format_double(double v);

/// Which two translation components span the ground plane. The heading is the
/// rotation about the remaining axis, measured from the first axis.
enum class AxisMap { XY, XZ };
AxisMap parse_axis_map(std::string_view name);
const char* to_string(AxisMap map);

Pose2d to_planar(const Pose3d& pose, AxisMap map = AxisMap::XY);
Pose3d from_planar(const Pose2d& pose, AxisMap map = AxisMap::XY);
/// Applies the planar change before -> after to a full 3-D pose; the
/// out-of-plane coordinate and tilt ride along unchanged.
Pose3d apply_planar_correction(const Pose3d& pose, const Pose2d& before, const Pose2d& after,
                               AxisMap map = AxisMap::XY);

// KITTI: 12 numbers per line, row-major [R | t].
std::vector<Pose3d> read_kitti(std::istream& in, std::vector<std::string>* warnings = nullptr);
void write_kitti(std::ostream& out, const std::vector<Pose3d>& poses);
std::vector<Pose3d> load_kitti(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
void save_kitti(const std::vector<Pose3d>& poses, const std::filesystem::path& path);

// TUM: timestamp tx ty tz qx qy qz qw.
struct TimedPose {
    double timestamp = 0;
    Pose3d pose = Pose3d::Identity();
};
std::vector<TimedPose> read_tum(std::istream& in, std::vector<std::string>* warnings = nullptr);
void write_tum(std::ostream& out, const std::vector<TimedPose>& poses);
std::vector<TimedPose> load_tum(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
void save_tum(const std::vector<TimedPose>& poses, const std::filesystem::path& path);

// Binary PGM (P5, maxval 255).
GrayImage decode_pgm(std::string_view bytes);
std::string encode_pgm(const GrayImage& img);
GrayImage load_pgm(const std::filesystem::path& path);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// Feature cache, `LCFC 1 <K>` header then FRAME/FEAT records.
struct FrameFeatures {
    std::size_t index = 0;
    std::vector<InformativeFeature> features;

    bool operator==(const FrameFeatures&) const = default;
};
struct FeatureCache {
    std::size_t k = 0;
    std::vector<FrameFeatures> frames;

    bool operator==(const FeatureCache&) const = default;
};
void write_feature_cache(std::ostream& out, const FeatureCache& cache);
FeatureCache read_feature_cache(std::istream& in);
FeatureCache load_feature_cache(const std::filesystem::path& path);
void save_feature_cache(const FeatureCache& cache, const std::filesystem::path& path);

struct MapPoint {
    Vector3d position = Vector3d::Zero();
    std::size_t owner = 0;  ///< keyframe the point was reconstructed from
};

/// Carries each point with its owner keyframe from `before` to `after`.
std::vector<MapPoint> apply_correction(const std::vector<MapPoint>& points, const std::vector<Pose2d>& before,
                                       const std::vector<Pose2d>& after);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace loopclose
