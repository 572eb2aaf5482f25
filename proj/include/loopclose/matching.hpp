#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "loopclose/features.hpp"

namespace loopclose {

struct MatchPair {
    std::size_t index_a = 0;  ///< into the current frame's features
    std::size_t index_b = 0;  ///< into the past frame's features
    int distance = 0;

    bool operator==(const MatchPair&) const = default;
};

struct FrameMatchResult {
    std::size_t frame_index = 0;
    std::vector<MatchPair> pairs;
    bool accepted = false;
};

struct LoopCandidate {
    std::size_t current_index = 0;
    std::size_t matched_index = 0;
    std::vector<MatchPair> pairs;
};

/// Features of one past keyframe, tagged with its stream index.
struct IndexedFrame {
    std::size_t index = 0;
    std::span<const InformativeFeature> features;
};

int hamming(const Descriptor256& a, const Descriptor256& b);

/// Mutual nearest neighbours in Hamming space with distance <= max_distance.
/// Nearest-neighbour ties go to the lower index. Pairs are ordered by index_a.
std::vector<MatchPair> mutual_matches(std::span<const InformativeFeature> current,
                                      std::span<const InformativeFeature> past, int max_distance);

FrameMatchResult match_frames(std::span<const InformativeFeature> current, std::span<const InformativeFeature> past,
                              int max_distance, std::size_t min_matches, std::size_t frame_index = 0);

/// Best accepted frame of the window: most pairs, then lowest index.
std::optional<LoopCandidate> detect_in_window(std::span<const InformativeFeature> current,
                                              std::span<const IndexedFrame> window, int max_distance,
                                              std::size_t min_matches, std::size_t current_index = 0);

}  // namespace loopclose
