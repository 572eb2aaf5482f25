#include "loopclose/matching.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <limits>

namespace loopclose {

int hamming(const Descriptor256& a, const Descriptor256& b) {
    int dist = 0;
    const auto& ab = a.bytes();
    const auto& bb = b.bytes();
    for (std::size_t i = 0; i < Descriptor256::kBytes; i += 8) {
        std::uint64_t wa = 0;
        std::uint64_t wb = 0;
        std::memcpy(&wa, ab.data() + i, 8);
        std::memcpy(&wb, bb.data() + i, 8);
        dist += std::popcount(wa ^ wb);
    }
    return dist;
}

std::vector<MatchPair> mutual_matches(std::span<const InformativeFeature> current,
                                      std::span<const InformativeFeature> past, int max_distance) {
    std::vector<MatchPair> pairs;
    if (current.empty() || past.empty()) {
        return pairs;
    }
    const std::size_t n = current.size();
    const std::size_t m = past.size();
    std::vector<int> dist(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            dist[i * m + j] = hamming(current[i].descriptor, past[j].descriptor);
        }
    }
    std::vector<std::size_t> best_for_past(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        int best = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i * m + j] < best) {
                best = dist[i * m + j];
                best_for_past[j] = i;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        int best = std::numeric_limits<int>::max();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (dist[i * m + j] < best) {
                best = dist[i * m + j];
                best_j = j;
            }
        }
        if (best <= max_distance && best_for_past[best_j] == i) {
            pairs.push_back(MatchPair{i, best_j, best});
        }
    }
    return pairs;
}

FrameMatchResult match_frames(std::span<const InformativeFeature> current, std::span<const InformativeFeature> past,
                              int max_distance, std::size_t min_matches, std::size_t frame_index) {
    FrameMatchResult result;
    result.frame_index = frame_index;
    result.pairs = mutual_matches(current, past, max_distance);
    result.accepted = !result.pairs.empty() && result.pairs.size() >= min_matches;
    return result;
}

std::optional<LoopCandidate> detect_in_window(std::span<const InformativeFeature> current,
                                              std::span<const IndexedFrame> window, int max_distance,
                                              std::size_t min_matches, std::size_t current_index) {
    std::optional<LoopCandidate> best;
    for (const auto& frame : window) {
        FrameMatchResult r = match_frames(current, frame.features, max_distance, min_matches, frame.index);
        if (!r.accepted) {
            continue;
        }
        if (!best || r.pairs.size() > best->pairs.size() ||
            (r.pairs.size() == best->pairs.size() && frame.index < best->matched_index)) {
            best = LoopCandidate{current_index, frame.index, std::move(r.pairs)};
        }
    }
    return best;
}

}  // namespace loopclose
