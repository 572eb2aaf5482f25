#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loopclose/detector.hpp"
#include "loopclose/se2.hpp"
#include "loopclose/synth.hpp"

namespace loopclose {

enum class Alignment { None, Rigid2d };

/// RMSE of position differences, optionally after the best rigid 2-D fit of
/// `estimated` onto `gt`. Throws LengthMismatch.
double ate(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt, Alignment align = Alignment::None);

/// Rotation + translation minimizing sum |T * estimated_i - gt_i|^2.
Pose2d rigid_alignment(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt);

struct SegmentError {
    double length = 0;
    double trans_percent = 0;
    double rot_deg_per_meter = 0;
    std::size_t segments = 0;
};

struct RelativeErrors {
    double trans_percent = 0;
    double rot_deg_per_meter = 0;
    std::vector<double> segment_lengths;
    double length_scale = 1;  ///< factor applied to the 100..800 m convention
    std::size_t segments = 0;
    std::vector<SegmentError> per_length;
};

/// Standard segment set {100, ..., 800} m scaled by the largest power of ten
/// (<= 1) that fits the ground-truth arc length.
std::vector<double> default_segment_lengths(double trajectory_length, double* scale_out = nullptr);

double arc_length(const std::vector<Pose2d>& poses);

/// Segment-relative errors. Segments start at every pose and end at the first
/// pose whose ground-truth arc distance reaches L. Throws LengthMismatch and TooShort.
RelativeErrors kitti_rel_errors(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt,
                                std::optional<std::vector<double>> segment_lengths = std::nullopt);

struct ErrorReport {
    double ate_rmse = 0;
    double ate_rmse_aligned = 0;
    RelativeErrors relative;
};

ErrorReport evaluate(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt,
                     std::optional<std::vector<double>> segment_lengths = std::nullopt);

void write_error_table(std::ostream& out, const ErrorReport& report);
/// Two columns: segment length, translation error %.
void write_error_series(std::ostream& out, const ErrorReport& report);

/// A loop event counts when both indices lie within `tolerance` of a revisit pair.
bool loop_hits_revisit(const LoopCandidate& loop, const std::vector<RevisitPair>& pairs, std::size_t tolerance);

struct SweepOptions {
    std::vector<std::size_t> k_values;
    DetectorConfig config;  ///< template; k is overwritten per cell
    /// Optional per-K override of config.min_matches.
    std::function<std::size_t(std::size_t)> min_matches_for_k;
    std::size_t tolerance = 2;
    bool use_fullscan = false;  ///< judge the executed full-scan events instead of windowed ones
    std::size_t jobs = 1;
};

struct SweepRow {
    std::string dataset;
    std::size_t k = 0;
    bool success = false;
    std::size_t loops = 0;
    double pruning_ratio = 1;
};

struct SweepReport {
    std::vector<SweepRow> rows;  ///< sorted by dataset order, then K
    std::vector<std::string> datasets;
    std::vector<std::optional<std::size_t>> dataset_minimal_k;  ///< first K from which the row stays successful
    std::vector<bool> anomalous;  ///< success not monotone in K
    std::optional<std::size_t> minimal_k;  ///< smallest K where every dataset succeeds

    double success_rate(std::size_t k) const;
};

/// Runs the detector for every (dataset, K) cell. Features are extracted once
/// per dataset and shared by all K. Cells run on `jobs` threads.
SweepReport success_sweep(std::span<const SynthDataset> corpus, const SweepOptions& options);

void write_sweep_table(std::ostream& out, const SweepReport& report);
/// Two columns: K, fraction of datasets that succeed.
void write_sweep_series(std::ostream& out, const SweepReport& report);

/// Copies of the keyframes with images replaced by their extracted features.
/// Frames where extraction finds nothing keep their image.
std::vector<Keyframe> precompute_features(std::span<const Keyframe> frames, int fast_threshold);

}  // namespace loopclose
