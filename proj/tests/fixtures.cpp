#include "fixtures.hpp"

namespace fixture {

using namespace loopclose;

PoseGraph loop_graph(const SynthDataset& data, const std::vector<LoopCandidate>& loops) {
    PoseGraph g = build_from_trajectory(data.odom_poses, default_odometry_information());
    for (const auto& loop : loops) {
        const Pose2d rel = between(data.gt_poses[loop.matched_index], data.gt_poses[loop.current_index]);
        g = add_loop_edge(g, loop, rel, default_loop_information());
    }
    return g;
}

LoopCorrection drifted_square() {
    LoopCorrection f;
    f.data = generate(drifted_square_spec());
    f.report = run_sequence(f.data.keyframes, DetectorConfig{});
    f.graph = loop_graph(f.data, f.report.loops);
    f.result = optimize(f.graph);
    return f;
}

}  // namespace fixture
