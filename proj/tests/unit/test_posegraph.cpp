#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "loopclose/metrics.hpp"
#include "loopclose/posegraph.hpp"
#include "oracles.hpp"

using namespace loopclose;

namespace {

constexpr double kPi = std::numbers::pi;

// Minimum of the drifted-square loop graph, found by the coordinate-descent
// oracle at 1e-4 resolution and frozen here.
constexpr double kDriftedSquareOptimum = 0.2379867647;

Pose2d random_pose(Lcg64& rng) {
    return Pose2d(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi));
}

Matrix3d random_spd(Lcg64& rng) {
    Matrix3d a;
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.uniform(-1, 1);
    return a * a.transpose() + Matrix3d::Identity();
}

PoseGraph two_vertex_fixture() {
    PoseGraph g;
    g.vertices = {Pose2d(0, 0, 0), Pose2d(0.3, 0, 0)};
    Matrix3d w1 = Matrix3d::Identity();
    Matrix3d w3 = 3 * Matrix3d::Identity();
    g.edges.push_back(PoseEdge{0, 1, Pose2d(1.0, 0, 0), w1, EdgeKind::Odometry});
    g.edges.push_back(PoseEdge{0, 1, Pose2d(2.0, 0, 0), w3, EdgeKind::Loop});
    return g;
}

}  // namespace

TEST(EdgeResidual, ConsistentVerticesGiveZero) {
    const std::vector<Pose2d> v{Pose2d(1, 2, 0.5), compose(Pose2d(1, 2, 0.5), Pose2d(2, -1, 0.3))};
    const PoseEdge e{0, 1, Pose2d(2, -1, 0.3)};
    EXPECT_LT(edge_residual(e, v).norm(), 1e-12);
}

TEST(EdgeResidual, ForwardDisplacement) {
    const Pose2d from(1, 2, 0.5);
    const std::vector<Pose2d> v{from, compose(from, Pose2d(1.1, 0, 0))};
    const PoseEdge e{0, 1, Pose2d(1, 0, 0)};
    const Vector3d r = edge_residual(e, v);
    EXPECT_NEAR(r.x(), 0.1, 1e-12);
    EXPECT_NEAR(r.y(), 0, 1e-12);
    EXPECT_NEAR(r.z(), 0, 1e-12);
}

TEST(EdgeResidual, AngleWrapsAcrossPi) {
    // Measured pi - 0.1, actual pi + 0.1: the residual is the short way round.
    const std::vector<Pose2d> v{Pose2d(0, 0, 0), Pose2d(0, 0, kPi + 0.1)};
    const PoseEdge e{0, 1, Pose2d(0, 0, kPi - 0.1)};
    const Vector3d r = edge_residual(e, v);
    EXPECT_NEAR(r.z(), 0.2, 1e-12);
    EXPECT_NEAR(std::abs(r.z()), 0.2, 1e-12);
}

TEST(EdgeResidual, MatchesScalarOracle) {
    Lcg64 rng(3);
    for (int i = 0; i < 100; ++i) {
        PoseGraph g;
        g.vertices = {random_pose(rng), random_pose(rng)};
        g.edges.push_back(PoseEdge{0, 1, random_pose(rng), random_spd(rng)});
        EXPECT_NEAR(objective(g), oracle::objective(g), 1e-9 * std::max(1.0, objective(g)));
    }
}

TEST(EdgeJacobians, MatchCentralDifferences) {
    Lcg64 rng(17);
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
        std::vector<Pose2d> v{random_pose(rng), random_pose(rng)};
        const PoseEdge e{0, 1, random_pose(rng)};
        const EdgeJacobians j = edge_jacobians(e, v);
        for (int side = 0; side < 2; ++side) {
            Matrix3d numeric;
            for (int c = 0; c < 3; ++c) {
                auto plus = v;
                auto minus = v;
                double* pp = c == 0 ? &plus[side].x : (c == 1 ? &plus[side].y : &plus[side].theta);
                double* pm = c == 0 ? &minus[side].x : (c == 1 ? &minus[side].y : &minus[side].theta);
                *pp += h;
                *pm -= h;
                Vector3d d = edge_residual(e, plus) - edge_residual(e, minus);
                d.z() = wrap_angle(d.z());
                numeric.col(c) = d / (2 * h);
            }
            const Matrix3d& analytic = side == 0 ? j.from : j.to;
            EXPECT_LE((analytic - numeric).norm(), 1e-5 * std::max(1.0, numeric.norm())) << "edge " << i;
        }
    }
}

TEST(BuildGraph, OdometryChain) {
    const std::vector<Pose2d> poses{Pose2d(0, 0, 0), Pose2d(1, 0, 0.1), Pose2d(2, 0.2, 0.3)};
    const auto g = build_from_trajectory(poses, default_odometry_information());
    ASSERT_EQ(g.edges.size(), 2u);
    EXPECT_LT(objective(g), 1e-20);
    EXPECT_EQ(build_from_trajectory({poses[0], poses[1]}, Matrix3d::Identity()).edges.size(), 1u);
    EXPECT_THROW(build_from_trajectory({poses[0]}, Matrix3d::Identity()), Error);
}

TEST(LoopEdges, AddThenRemove) {
    const std::vector<Pose2d> poses{Pose2d(0, 0, 0), Pose2d(1, 0, 0), Pose2d(1, 1, 1.5), Pose2d(0, 1, 3)};
    const auto g = build_from_trajectory(poses, default_odometry_information());
    LoopCandidate c;
    c.current_index = 3;
    c.matched_index = 0;
    const auto with = add_loop_edge(g, c, between(poses[0], poses[3]), default_loop_information());
    ASSERT_EQ(with.edges.size(), 4u);
    EXPECT_EQ(with.edges.back().from, 0u);
    EXPECT_EQ(with.edges.back().to, 3u);
    EXPECT_EQ(with.edges.back().kind, EdgeKind::Loop);
    EXPECT_LT(objective(with), 1e-20);

    const auto back = remove_edge(with, 3);
    ASSERT_EQ(back.edges.size(), g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        EXPECT_EQ(back.edges[i].from, g.edges[i].from);
        EXPECT_EQ(back.edges[i].to, g.edges[i].to);
        EXPECT_EQ(back.edges[i].measurement.vector(), g.edges[i].measurement.vector());
    }
    c.current_index = 9;
    EXPECT_THROW(add_loop_edge(g, c, Pose2d(), default_loop_information()), Error);
    EXPECT_THROW(remove_edge(g, 7), Error);
}

TEST(LoopEdges, CoincidentRevisitAddsNoResidual) {
    WorldSpec spec;
    spec.num_poses = 40;
    spec.feature_mode = FeatureMode::Descriptors;
    const auto data = generate(spec);
    ASSERT_FALSE(data.revisit_pairs.empty());
    LoopCandidate c;
    c.matched_index = data.revisit_pairs.front().first;
    c.current_index = data.revisit_pairs.front().second;
    auto g = build_from_trajectory(data.gt_poses, default_odometry_information());
    const double before = objective(g);
    g = add_loop_edge(g, c, between(data.gt_poses[c.matched_index], data.gt_poses[c.current_index]),
                      default_loop_information());
    EXPECT_NEAR(objective(g), before, 1e-12);
}

TEST(Optimize, WeightedTwoEdgeFixture) {
    const auto res = optimize(two_vertex_fixture());
    EXPECT_NEAR(res.graph.vertices[1].x, 1.75, 1e-9);
    EXPECT_NEAR(res.graph.vertices[1].y, 0, 1e-9);
    EXPECT_NEAR(res.graph.vertices[1].theta, 0, 1e-9);
}

TEST(Optimize, ZeroResidualIsFixedPoint) {
    Lcg64 rng(9);
    std::vector<Pose2d> poses;
    for (int i = 0; i < 30; ++i) poses.push_back(random_pose(rng));
    auto g = build_from_trajectory(poses, default_odometry_information());
    LoopCandidate c;
    c.current_index = 29;
    c.matched_index = 2;
    g = add_loop_edge(g, c, between(poses[2], poses[29]), default_loop_information());
    const auto res = optimize(g);
    EXPECT_LE(res.stats.iterations, 1u);
    EXPECT_LT(res.stats.final_objective, 1e-18);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        EXPECT_NEAR(res.graph.vertices[i].x, poses[i].x, 1e-9);
        EXPECT_NEAR(res.graph.vertices[i].y, poses[i].y, 1e-9);
        EXPECT_NEAR(res.graph.vertices[i].theta, poses[i].theta, 1e-9);
    }
}

TEST(Optimize, DriftedSquareReachesFrozenOptimum) {
    const auto f = fixture::drifted_square();
    ASSERT_FALSE(f.report.loops.empty());
    EXPECT_NEAR(f.result.stats.final_objective, kDriftedSquareOptimum, 1e-6);
    EXPECT_NEAR(oracle::objective(f.result.graph), kDriftedSquareOptimum, 1e-6);

    const auto& hist = f.result.stats.objective_history;
    for (std::size_t i = 1; i < hist.size(); ++i) {
        EXPECT_LE(hist[i], hist[i - 1]);
    }
    const auto& a0 = f.graph.vertices[0];
    const auto& a1 = f.result.graph.vertices[0];
    EXPECT_EQ(a0.x, a1.x);
    EXPECT_EQ(a0.y, a1.y);
    EXPECT_EQ(a0.theta, a1.theta);

    const double before = ate(f.data.odom_poses, f.data.gt_poses);
    const double after = ate(f.result.graph.vertices, f.data.gt_poses);
    EXPECT_LE(after, 0.2 * before);
}

TEST(Optimize, RigidMotionLeavesObjectiveUnchanged) {
    const auto f = fixture::drifted_square();
    PoseGraph moved = f.graph;
    const Pose2d t(4, -7, 1.2);
    for (auto& v : moved.vertices) v = compose(t, v);
    const auto res = optimize(moved);
    EXPECT_NEAR(res.stats.final_objective, f.result.stats.final_objective, 1e-9);
}

TEST(Optimize, RejectsBadGraphs) {
    auto g = two_vertex_fixture();
    g.edges[0].information(0, 0) = -1;
    EXPECT_THROW(optimize(g), Error);
    try {
        optimize(g);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BadInformation);
    }

    PoseGraph split;
    split.vertices = {Pose2d(), Pose2d(1, 0, 0), Pose2d(2, 0, 0), Pose2d(3, 0, 0)};
    split.edges.push_back(PoseEdge{0, 1, Pose2d(1, 0, 0)});
    split.edges.push_back(PoseEdge{2, 3, Pose2d(1, 0, 0)});
    EXPECT_FALSE(is_connected(split));
    try {
        optimize(split);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Disconnected);
    }
}

TEST(G2o, RoundTrip) {
    const auto f = fixture::drifted_square();
    std::stringstream ss;
    write_g2o(ss, f.graph);
    const auto back = read_g2o(ss);
    ASSERT_EQ(back.vertices.size(), f.graph.vertices.size());
    ASSERT_EQ(back.edges.size(), f.graph.edges.size());
    for (std::size_t i = 0; i < back.edges.size(); ++i) {
        EXPECT_EQ(back.edges[i].kind, f.graph.edges[i].kind);
        EXPECT_EQ(back.edges[i].measurement.vector(), f.graph.edges[i].measurement.vector());
        EXPECT_EQ(back.edges[i].information, f.graph.edges[i].information);
    }
    EXPECT_EQ(objective(back), objective(f.graph));
}

TEST(G2o, ParallelEdgeBetweenNeighboursIsLoop) {
    auto g = build_from_trajectory({Pose2d(), Pose2d(1, 0, 0)}, default_odometry_information());
    LoopCandidate c;
    c.current_index = 1;
    g = add_loop_edge(g, c, Pose2d(1.1, 0, 0), default_loop_information());
    std::stringstream ss;
    write_g2o(ss, g);
    const auto back = read_g2o(ss);
    ASSERT_EQ(back.edges.size(), 2u);
    EXPECT_EQ(back.edges[0].kind, EdgeKind::Odometry);
    EXPECT_EQ(back.edges[1].kind, EdgeKind::Loop);
}
