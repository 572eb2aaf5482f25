#pragma once

// Shared end-to-end fixtures built from the synthetic worlds.

#include <vector>

#include "loopclose/detector.hpp"
#include "loopclose/posegraph.hpp"
#include "loopclose/synth.hpp"

namespace fixture {

/// Odometry graph of `data` plus one edge per loop event, measured from the
/// ground-truth relative pose.
loopclose::PoseGraph loop_graph(const loopclose::SynthDataset& data,
                                const std::vector<loopclose::LoopCandidate>& loops);

struct LoopCorrection {
    loopclose::SynthDataset data;
    loopclose::DetectionReport report;
    loopclose::PoseGraph graph;
    loopclose::OptimizeResult result;
};

/// Drifted 40-pose square: detect with the default config, then optimize.
LoopCorrection drifted_square();

}  // namespace fixture
