#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "loopclose/matching.hpp"
#include "loopclose/se2.hpp"

namespace loopclose {

enum class EdgeKind { Odometry, Loop };

struct PoseEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    Pose2d measurement;  ///< pose of `to` in the frame of `from`
    Matrix3d information = Matrix3d::Identity();
    EdgeKind kind = EdgeKind::Odometry;
};

struct PoseGraph {
    std::vector<Pose2d> vertices;
    std::vector<PoseEdge> edges;
    std::size_t anchor = 0;
};

Matrix3d default_odometry_information();  // diag(100, 100, 400)
Matrix3d default_loop_information();      // diag(1000, 1000, 4000)

/// Error of one edge: (x, y, theta) of measurement^-1 * (from^-1 * to), angle in (-pi, pi].
Vector3d edge_residual(const PoseEdge& edge, const std::vector<Pose2d>& vertices);
inline Vector3d edge_residual(const PoseEdge& edge, const PoseGraph& graph) {
    return edge_residual(edge, graph.vertices);
}

/// d(residual)/d(x, y, theta) for the `from` and `to` vertices.
struct EdgeJacobians {
    Matrix3d from;
    Matrix3d to;
};
EdgeJacobians edge_jacobians(const PoseEdge& edge, const std::vector<Pose2d>& vertices);

/// Sum over edges of r^T * Omega * r.
double objective(const PoseGraph& graph);
double objective(const std::vector<PoseEdge>& edges, const std::vector<Pose2d>& vertices);

PoseGraph build_from_trajectory(const std::vector<Pose2d>& poses, const Matrix3d& odometry_information);

/// Appends a loop edge matched -> current. Throws BadIndex for unknown vertices.
PoseGraph add_loop_edge(PoseGraph graph, const LoopCandidate& candidate, const Pose2d& measurement,
                        const Matrix3d& loop_information);

PoseGraph remove_edge(PoseGraph graph, std::size_t edge_index);

bool is_connected(const PoseGraph& graph);

/// Throws BadInformation unless every information matrix is symmetric positive definite.
void check_information(const PoseGraph& graph);

struct OptimizeOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-9;  ///< relative objective decrease that ends the run
    double objective_floor = 1e-20;  ///< objectives at or below this are treated as converged
    double initial_lambda = 1e-4;
    double max_lambda = 1e8;
};

struct OptimizeStats {
    std::size_t iterations = 0;  ///< accepted steps
    std::size_t rejected_steps = 0;
    double initial_objective = 0;
    double final_objective = 0;
    double final_lambda = 0;
    std::vector<double> objective_history;  ///< objective after each accepted step, initial first
};

struct OptimizeResult {
    PoseGraph graph;
    OptimizeStats stats;
};

/// Levenberg-Marquardt over all vertices except the anchor. The input graph is not modified.
OptimizeResult optimize(const PoseGraph& graph, const OptimizeOptions& options = {});

/// `VERTEX_SE2 id x y theta` / `EDGE_SE2 from to dx dy dtheta i11 i12 i13 i22 i23 i33`.
void write_g2o(std::ostream& out, const PoseGraph& graph);
/// Edges between consecutive ids are read back as odometry, all others as loops.
PoseGraph read_g2o(std::istream& in);

}  // namespace loopclose
