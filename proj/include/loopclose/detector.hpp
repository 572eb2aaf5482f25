#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loopclose/features.hpp"
#include "loopclose/geom.hpp"
#include "loopclose/matching.hpp"

namespace loopclose {

struct DetectorConfig {
    std::size_t k = 15;
    std::size_t cadence = 1;
    int fast_threshold = 20;
    int max_distance = 40;
    std::size_t min_matches = 7;
    std::size_t min_loop_gap = 30;

    /// Throws InvalidConfig when a field is out of range.
    void validate() const;
};

struct Keyframe {
    std::size_t index = 0;
    Pose3d pose = Pose3d::Identity();
    std::optional<GrayImage> image;
    std::optional<MappedMask> mask;
    /// Pre-extracted features (descriptor-only mode). Ignored when an image is present.
    std::vector<InformativeFeature> features;
};

/// Bookkeeping for one loop check.
struct FrameCheck {
    std::size_t index = 0;
    std::size_t window_start = 0;
    std::size_t window_end = 0;
    bool geometric = false;  ///< false when the window fell back to the initial position
    std::size_t windowed_comparisons = 0;
    std::size_t fullscan_comparisons = 0;
};

struct DetectionReport {
    DetectorConfig config;
    std::vector<LoopCandidate> loops;
    bool fullscan_executed = false;
    std::vector<LoopCandidate> fullscan_loops;
    std::vector<FrameCheck> checks;
    std::size_t comparisons_windowed = 0;
    std::size_t comparisons_fullscan = 0;
    std::size_t frames = 0;
    std::size_t features_stored = 0;
    std::size_t stored_bytes = 0;
    std::size_t frames_without_mask = 0;
    double wall_seconds = 0;

    double pruning_ratio() const {
        return comparisons_fullscan == 0 ? 1.0
                                         : static_cast<double>(comparisons_windowed) / comparisons_fullscan;
    }
};

/// Per-frame memory ceiling: K features plus the pose record.
std::size_t stored_bytes_bound(std::size_t k);

/// Streaming loop-closure detector. Frames must arrive with consecutive
/// indices starting at 0. Only poses and the retained features are kept.
class LoopDetector {
public:
    explicit LoopDetector(DetectorConfig config, bool execute_fullscan = false);

    std::optional<LoopCandidate> process_frame(const Keyframe& frame);

    const DetectorConfig& config() const { return config_; }
    std::size_t frame_count() const { return poses_.size(); }
    const std::vector<Pose3d>& poses() const { return poses_; }
    const std::vector<PlanarPoint<double>>& projected() const { return projected_; }
    const std::vector<InformativeFeature>& features(std::size_t index) const { return features_.at(index); }
    const std::vector<FrameCheck>& checks() const { return checks_; }
    const std::vector<LoopCandidate>& loops() const { return loops_; }
    const std::vector<LoopCandidate>& fullscan_loops() const { return fullscan_loops_; }
    std::size_t features_stored() const;
    std::size_t stored_bytes() const;
    std::size_t frames_without_mask() const { return frames_without_mask_; }

    bool is_check_frame(std::size_t index) const;

private:
    std::optional<LoopCandidate> match_range(std::size_t current, std::size_t first, std::size_t last) const;

    DetectorConfig config_;
    bool execute_fullscan_;
    std::vector<Pose3d> poses_;
    std::vector<PlanarPoint<double>> projected_;
    std::vector<std::vector<InformativeFeature>> features_;
    std::vector<FrameCheck> checks_;
    std::vector<LoopCandidate> loops_;
    std::vector<LoopCandidate> fullscan_loops_;
    std::size_t frames_without_mask_ = 0;
};

DetectionReport run_sequence(std::span<const Keyframe> frames, const DetectorConfig& config,
                             bool execute_fullscan = false);

/// Line-oriented report: `LOOP <current> <matched> <pairs>` per event,
/// `FULLSCAN_LOOP ...` for executed baseline events, then
/// `COMPARISONS <windowed> <fullscan>` and `FEATURES_STORED <count>`.
/// Lines starting with '#' carry the resolved configuration and notes.
void write_report(std::ostream& out, const DetectionReport& report,
                  const std::vector<std::string>& extra_comments = {});

/// Loop events recovered from a serialized report.
struct ParsedReport {
    std::vector<LoopCandidate> loops;  ///< pairs left empty; size kept in pair_counts
    std::vector<std::size_t> pair_counts;
    std::optional<std::size_t> comparisons_windowed;
    std::optional<std::size_t> comparisons_fullscan;
    std::optional<std::size_t> features_stored;
};

/// Throws ParseError with the 1-based line number on malformed records.
ParsedReport read_report(std::istream& in);

}  // namespace loopclose
