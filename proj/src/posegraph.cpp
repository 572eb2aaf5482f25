#include "loopclose/posegraph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "loopclose/io.hpp"

namespace loopclose {

Matrix3d default_odometry_information() { return Vector3d(100, 100, 400).asDiagonal(); }

Matrix3d default_loop_information() { return Vector3d(1000, 1000, 4000).asDiagonal(); }

namespace {

Eigen::Matrix2d rot(double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
}

void check_edge_indices(const PoseEdge& e, std::size_t n) {
    if (e.from >= n || e.to >= n || e.from == e.to) {
        throw Error(ErrorCode::BadIndex, "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                             " does not connect two distinct vertices");
    }
}

}  // namespace

Vector3d edge_residual(const PoseEdge& edge, const std::vector<Pose2d>& vertices) {
    check_edge_indices(edge, vertices.size());
    const Pose2d err = between(edge.measurement, between(vertices[edge.from], vertices[edge.to]));
    return err.vector();
}

EdgeJacobians edge_jacobians(const PoseEdge& edge, const std::vector<Pose2d>& vertices) {
    check_edge_indices(edge, vertices.size());
    const Pose2d& xi = vertices[edge.from];
    const Pose2d& xj = vertices[edge.to];
    const Eigen::Matrix2d rz_t = rot(edge.measurement.theta).transpose();
    const Eigen::Matrix2d ri_t = rot(xi.theta).transpose();
    const double c = std::cos(xi.theta);
    const double s = std::sin(xi.theta);
    Eigen::Matrix2d dri_t;
    dri_t << -s, c, -c, -s;
    const Eigen::Vector2d dt = xj.translation() - xi.translation();

    EdgeJacobians j;
    j.from.setZero();
    j.to.setZero();
    j.from.topLeftCorner<2, 2>() = -rz_t * ri_t;
    j.from.block<2, 1>(0, 2) = rz_t * dri_t * dt;
    j.from(2, 2) = -1.0;
    j.to.topLeftCorner<2, 2>() = rz_t * ri_t;
    j.to(2, 2) = 1.0;
    return j;
}

double objective(const std::vector<PoseEdge>& edges, const std::vector<Pose2d>& vertices) {
    double total = 0;
    for (const auto& e : edges) {
        const Vector3d r = edge_residual(e, vertices);
        total += r.dot(e.information * r);
    }
    return total;
}

double objective(const PoseGraph& graph) { return objective(graph.edges, graph.vertices); }

PoseGraph build_from_trajectory(const std::vector<Pose2d>& poses, const Matrix3d& odometry_information) {
    if (poses.size() < 2) {
        throw Error(ErrorCode::TooFewPoses, "a pose graph needs at least two poses");
    }
    PoseGraph g;
    g.vertices = poses;
    g.anchor = 0;
    for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
        g.edges.push_back(PoseEdge{i, i + 1, between(poses[i], poses[i + 1]), odometry_information, EdgeKind::Odometry});
    }
    return g;
}

PoseGraph add_loop_edge(PoseGraph graph, const LoopCandidate& candidate, const Pose2d& measurement,
                        const Matrix3d& loop_information) {
    PoseEdge e{candidate.matched_index, candidate.current_index, measurement, loop_information, EdgeKind::Loop};
    check_edge_indices(e, graph.vertices.size());
    graph.edges.push_back(e);
    return graph;
}

PoseGraph remove_edge(PoseGraph graph, std::size_t edge_index) {
    if (edge_index >= graph.edges.size()) {
        throw Error(ErrorCode::BadIndex, "no edge " + std::to_string(edge_index));
    }
    graph.edges.erase(graph.edges.begin() + static_cast<std::ptrdiff_t>(edge_index));
    return graph;
}

bool is_connected(const PoseGraph& graph) {
    const std::size_t n = graph.vertices.size();
    if (n == 0) {
        return false;
    }
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : graph.edges) {
        check_edge_indices(e, n);
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{graph.anchor < n ? graph.anchor : 0};
    seen[stack.back()] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        for (const std::size_t w : adj[v]) {
            if (!seen[w]) {
                seen[w] = true;
                ++visited;
                stack.push_back(w);
            }
        }
    }
    return visited == n;
}

void check_information(const PoseGraph& graph) {
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const Matrix3d& info = graph.edges[i].information;
        const bool finite = info.allFinite();
        const bool symmetric = finite && (info - info.transpose()).cwiseAbs().maxCoeff() <=
                                             1e-9 * std::max(1.0, info.cwiseAbs().maxCoeff());
        if (!symmetric || Eigen::LLT<Matrix3d>(info).info() != Eigen::Success) {
            throw Error(ErrorCode::BadInformation, "edge " + std::to_string(i) + " information is not SPD");
        }
    }
}

OptimizeResult optimize(const PoseGraph& graph, const OptimizeOptions& options) {
    const std::size_t n = graph.vertices.size();
    if (graph.anchor >= n) {
        throw Error(ErrorCode::BadIndex, "anchor vertex out of range");
    }
    check_information(graph);
    if (!is_connected(graph)) {
        throw Error(ErrorCode::Disconnected, "pose graph is not connected");
    }

    // Variable block of each vertex; the anchor has none.
    std::vector<std::ptrdiff_t> block(n, -1);
    std::ptrdiff_t next = 0;
    for (std::size_t v = 0; v < n; ++v) {
        if (v != graph.anchor) {
            block[v] = next;
            next += 3;
        }
    }
    const Eigen::Index dim = next;

    OptimizeResult result{graph, {}};
    std::vector<Pose2d>& x = result.graph.vertices;
    OptimizeStats& stats = result.stats;
    double current = objective(graph.edges, x);
    stats.initial_objective = current;
    stats.objective_history.push_back(current);
    double lambda = options.initial_lambda;

    while (stats.iterations < options.max_iterations && current > options.objective_floor && dim > 0) {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(graph.edges.size() * 36 + static_cast<std::size_t>(dim));
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        for (const auto& e : graph.edges) {
            const Vector3d r = edge_residual(e, x);
            const EdgeJacobians jac = edge_jacobians(e, x);
            const std::array<std::pair<std::ptrdiff_t, const Matrix3d*>, 2> parts = {
                std::pair{block[e.from], &jac.from}, std::pair{block[e.to], &jac.to}};
            for (const auto& [bi, ji] : parts) {
                if (bi < 0) continue;
                b.segment<3>(bi) += ji->transpose() * e.information * r;
                for (const auto& [bj, jj] : parts) {
                    if (bj < 0) continue;
                    const Matrix3d h = ji->transpose() * e.information * *jj;
                    for (int r0 = 0; r0 < 3; ++r0) {
                        for (int c0 = 0; c0 < 3; ++c0) {
                            triplets.emplace_back(bi + r0, bj + c0, h(r0, c0));
                        }
                    }
                }
            }
        }
        Eigen::SparseMatrix<double> hessian(dim, dim);
        hessian.setFromTriplets(triplets.begin(), triplets.end());

        bool accepted = false;
        double relative_decrease = 0;
        while (!accepted) {
            Eigen::SparseMatrix<double> damped = hessian;
            for (Eigen::Index i = 0; i < dim; ++i) {
                damped.coeffRef(i, i) += lambda;
            }
            Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver(damped);
            Eigen::VectorXd delta;
            if (solver.info() == Eigen::Success) {
                delta = solver.solve(-b);
            }
            if (solver.info() != Eigen::Success || !delta.allFinite()) {
                lambda *= 10;
                if (lambda > options.max_lambda) {
                    throw Error(ErrorCode::Diverged, "normal equations could not be solved");
                }
                continue;
            }
            std::vector<Pose2d> candidate = x;
            for (std::size_t v = 0; v < n; ++v) {
                if (block[v] < 0) continue;
                const auto d = delta.segment<3>(block[v]);
                candidate[v] = Pose2d(x[v].x + d[0], x[v].y + d[1], x[v].theta + d[2]);
            }
            const double trial = objective(graph.edges, candidate);
            if (trial < current) {
                relative_decrease = (current - trial) / current;
                x = std::move(candidate);
                current = trial;
                lambda = std::max(lambda / 10, 1e-12);
                accepted = true;
            } else {
                ++stats.rejected_steps;
                lambda *= 10;
                if (lambda > options.max_lambda) {
                    break;
                }
            }
        }
        if (!accepted) {
            break;
        }
        ++stats.iterations;
        stats.objective_history.push_back(current);
        if (relative_decrease < options.tolerance) {
            break;
        }
    }
    stats.final_objective = current;
    stats.final_lambda = lambda;
    return result;
}

void write_g2o(std::ostream& out, const PoseGraph& graph) {
    for (std::size_t i = 0; i < graph.vertices.size(); ++i) {
        const auto& v = graph.vertices[i];
        out << "VERTEX_SE2 " << i << ' ' << format_double(v.x) << ' ' << format_double(v.y) << ' '
            << format_double(v.theta) << '\n';
    }
    for (const auto& e : graph.edges) {
        const auto& m = e.measurement;
        const auto& I = e.information;
        out << "EDGE_SE2 " << e.from << ' ' << e.to << ' ' << format_double(m.x) << ' ' << format_double(m.y) << ' '
            << format_double(m.theta) << ' ' << format_double(I(0, 0)) << ' ' << format_double(I(0, 1)) << ' '
            << format_double(I(0, 2)) << ' ' << format_double(I(1, 1)) << ' ' << format_double(I(1, 2)) << ' '
            << format_double(I(2, 2)) << '\n';
    }
}

PoseGraph read_g2o(std::istream& in) {
    std::map<std::size_t, Pose2d> vertices;
    struct RawEdge {
        std::size_t from, to;
        Pose2d m;
        Matrix3d info;
        std::size_t line;
    };
    std::vector<RawEdge> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = split_fields(line);
        if (f.empty() || f[0].starts_with('#')) {
            continue;
        }
        auto need = [&](std::size_t count) {
            if (f.size() != count) {
                throw Error(ErrorCode::ParseError,
                            "line " + std::to_string(line_no) + ": expected " + std::to_string(count) + " fields",
                            line_no);
            }
        };
        if (f[0] == "VERTEX_SE2") {
            need(5);
            const std::size_t id = parse_index(f[1], line_no);
            if (vertices.count(id)) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": duplicate vertex id",
                            line_no);
            }
            vertices[id] = Pose2d(parse_double(f[2], line_no), parse_double(f[3], line_no), parse_double(f[4], line_no));
        } else if (f[0] == "EDGE_SE2") {
            need(12);
            RawEdge e;
            e.from = parse_index(f[1], line_no);
            e.to = parse_index(f[2], line_no);
            e.m = Pose2d(parse_double(f[3], line_no), parse_double(f[4], line_no), parse_double(f[5], line_no));
            double v[6];
            for (int i = 0; i < 6; ++i) {
                v[i] = parse_double(f[6 + i], line_no);
            }
            e.info << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
            e.line = line_no;
            raw.push_back(e);
        } else {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + ": unknown record '" + std::string(f[0]) + "'", line_no);
        }
    }
    if (vertices.empty()) {
        throw Error(ErrorCode::EmptyFile, "no VERTEX_SE2 records", line_no);
    }
    PoseGraph g;
    std::map<std::size_t, std::size_t> index_of;
    for (const auto& [id, pose] : vertices) {
        index_of[id] = g.vertices.size();
        g.vertices.push_back(pose);
    }
    // g2o has no edge kind: the first edge between consecutive ids is odometry, anything else is a loop.
    std::set<std::size_t> odometry_from;
    for (const auto& e : raw) {
        const auto a = index_of.find(e.from);
        const auto b = index_of.find(e.to);
        if (a == index_of.end() || b == index_of.end() || e.from == e.to) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(e.line) + ": edge references unknown vertex",
                        e.line);
        }
        const bool odometry = e.to == e.from + 1 && odometry_from.insert(e.from).second;
        const EdgeKind kind = odometry ? EdgeKind::Odometry : EdgeKind::Loop;
        g.edges.push_back(PoseEdge{a->second, b->second, e.m, e.info, kind});
    }
    return g;
}

}  // namespace loopclose
