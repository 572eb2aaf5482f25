#pragma once

// Planar geometry behind the trajectory search window: projection of poses
// onto the ground plane, ray/segment intersection, perpendicular cut line and
// the window assembly itself. Everything is templated on the scalar type and
// free of state.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "loopclose/types.hpp"

namespace loopclose {

template <typename S>
using PlanarPoint = Vector2<S>;

/// Determinant magnitude below which a ray and a segment are treated as parallel.
inline constexpr double kParallelTolerance = 1e-9;

template <typename S>
inline S cross2(const Vector2<S>& a, const Vector2<S>& b) {
    return a.x() * b.y() - a.y() * b.x();
}

template <typename S>
inline Vector2<S> rotate90(const Vector2<S>& v) {
    return Vector2<S>(-v.y(), v.x());
}

template <typename S>
inline bool is_finite(const Vector2<S>& p) {
    return std::isfinite(p.x()) && std::isfinite(p.y());
}

/// Half-line origin + t * direction, t >= 0, with a unit direction.
template <typename S>
struct Ray {
    PlanarPoint<S> origin;
    Vector2<S> direction;

    static Ray from_direction(const PlanarPoint<S>& origin, const Vector2<S>& direction) {
        const S n = direction.norm();
        if (!is_finite(origin) || !std::isfinite(n) || n <= S(0)) {
            throw Error(ErrorCode::InvalidGeometry, "ray needs a finite origin and non-zero direction");
        }
        return Ray{origin, direction / n};
    }

    /// Ray starting at `from` and passing through `through`.
    static Ray through(const PlanarPoint<S>& from, const PlanarPoint<S>& through) {
        return from_direction(from, through - from);
    }

    PlanarPoint<S> at(S t) const { return origin + t * direction; }
};

template <typename S>
struct Segment {
    PlanarPoint<S> a;
    PlanarPoint<S> b;

    Segment(const PlanarPoint<S>& a_, const PlanarPoint<S>& b_) : a(a_), b(b_) {
        if (!is_finite(a) || !is_finite(b)) {
            throw Error(ErrorCode::InvalidGeometry, "segment endpoints must be finite");
        }
        if (a == b) {
            throw Error(ErrorCode::InvalidGeometry, "zero-length segment");
        }
    }
};

/// Infinite line point + s * direction, s in R.
template <typename S>
struct Line {
    PlanarPoint<S> point;
    Vector2<S> direction;
};

template <typename S>
struct RayHit {
    PlanarPoint<S> point;
    S ray_param;
};

template <typename S>
struct LineHit {
    PlanarPoint<S> point;
    S line_param;
};

template <typename S>
struct SearchWindow {
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    PlanarPoint<S> p_start = PlanarPoint<S>::Zero();
    std::optional<PlanarPoint<S>> p_end;
    bool fallback = false;  ///< motion ray hit nothing; window starts at the initial position

    std::size_t size() const { return end_index - start_index + 1; }
};

template <typename S>
PlanarPoint<S> project_pose(const Eigen::Transform<S, 3, Eigen::Isometry>& pose) {
    const auto t = pose.translation();
    if (!std::isfinite(t.x()) || !std::isfinite(t.y()) || !std::isfinite(t.z())) {
        throw Error(ErrorCode::InvalidPose, "non-finite pose translation");
    }
    return PlanarPoint<S>(t.x(), t.y());
}

namespace detail {

// Intersects origin + t*dir (t >= 0) with a + u*edge, u in [0, u_max].
// u_max = infinity turns the second primitive into a ray.
template <typename S>
std::optional<RayHit<S>> intersect_half_line(const Ray<S>& ray, const PlanarPoint<S>& a, const Vector2<S>& edge,
                                             S u_max) {
    const Vector2<S>& d = ray.direction;
    const Vector2<S> w = a - ray.origin;
    const S det = cross2(d, edge);
    if (std::abs(det) < S(kParallelTolerance)) {
        // Parallel. Only a collinear overlap counts.
        if (std::abs(cross2(w, d)) > S(kParallelTolerance)) {
            return std::nullopt;
        }
        const S ta = w.dot(d);
        const S slope = edge.dot(d);
        S lo = ta;
        S hi = ta;
        if (std::isinf(u_max)) {
            if (slope > 0) {
                hi = std::numeric_limits<S>::infinity();
            } else {
                lo = -std::numeric_limits<S>::infinity();
            }
        } else {
            const S tb = ta + slope * u_max;
            lo = std::min(ta, tb);
            hi = std::max(ta, tb);
        }
        if (hi < S(0)) {
            return std::nullopt;
        }
        const S t = std::max(lo, S(0));
        return RayHit<S>{ray.at(t), t};
    }
    const S t = cross2(w, edge) / det;
    const S u = cross2(w, d) / det;
    if (t < S(0) || u < S(0) || u > u_max) {
        return std::nullopt;
    }
    return RayHit<S>{ray.at(t), t};
}

}  // namespace detail

template <typename S>
std::optional<RayHit<S>> ray_segment_intersect(const Ray<S>& ray, const Segment<S>& seg) {
    return detail::intersect_half_line(ray, seg.a, Vector2<S>(seg.b - seg.a), S(1));
}

/// Intersection of two rays, parameterized along the first.
template <typename S>
std::optional<RayHit<S>> ray_ray_intersect(const Ray<S>& ray, const Ray<S>& other) {
    return detail::intersect_half_line(ray, other.origin, other.direction, std::numeric_limits<S>::infinity());
}

template <typename S>
Line<S> perpendicular_at(const Ray<S>& ray) {
    return Line<S>{ray.origin, rotate90(ray.direction)};
}

/// Line/segment intersection. A collinear overlap reports the overlap point
/// closest to line.point.
template <typename S>
std::optional<LineHit<S>> line_segment_intersect(const Line<S>& line, const Segment<S>& seg) {
    const Vector2<S> edge = seg.b - seg.a;
    const Vector2<S> w = seg.a - line.point;
    const S det = cross2(line.direction, edge);
    const S dir_sq = line.direction.squaredNorm();
    if (std::abs(det) < S(kParallelTolerance)) {
        if (std::abs(cross2(w, line.direction)) > S(kParallelTolerance) * std::sqrt(dir_sq)) {
            return std::nullopt;
        }
        const S sa = w.dot(line.direction) / dir_sq;
        const S sb = (seg.b - line.point).dot(line.direction) / dir_sq;
        S s = 0;
        if (std::min(sa, sb) > S(0)) {
            s = std::min(sa, sb);
        } else if (std::max(sa, sb) < S(0)) {
            s = std::max(sa, sb);
        }
        return LineHit<S>{line.point + s * line.direction, s};
    }
    const S s = cross2(w, edge) / det;
    const S u = cross2(w, line.direction) / det;
    if (u < S(0) || u > S(1)) {
        return std::nullopt;
    }
    return LineHit<S>{line.point + s * line.direction, s};
}

/// Index of the vertex in points[0..last] closest to p. Distances equal to
/// within 1e-9 m count as ties and go to the smaller index.
template <typename S>
std::size_t nearest_vertex(std::span<const PlanarPoint<S>> points, std::size_t last, const PlanarPoint<S>& p) {
    S best_dist = std::numeric_limits<S>::infinity();
    for (std::size_t i = 0; i <= last; ++i) {
        best_dist = std::min(best_dist, S((points[i] - p).norm()));
    }
    for (std::size_t i = 0; i <= last; ++i) {
        if ((points[i] - p).norm() <= best_dist + S(1e-9)) {
            return i;
        }
    }
    return 0;
}

/// Builds the window of past keyframes worth matching against the keyframe at
/// `current_index`. The motion ray from the previous position through the
/// current one is cut against the trajectory prefix that is at least
/// `min_loop_gap` frames old (plus the backward extension of the very first
/// step); its first hit p and the hit p' of the perpendicular through the
/// current position bound the window. The window spans the vertices nearest
/// to p and p' in index order. Without a hit on the motion ray the whole
/// eligible prefix is returned, starting from the initial position.
///
/// Returns nothing when no keyframe is old enough.
template <typename S>
std::optional<SearchWindow<S>> compute_search_window(std::span<const PlanarPoint<S>> projected,
                                                     std::size_t current_index, std::size_t min_loop_gap) {
    if (current_index < 2) {
        throw Error(ErrorCode::TooFewPoses, "search window needs at least three poses");
    }
    if (projected.size() < current_index + 1) {
        throw Error(ErrorCode::TooFewPoses, "fewer projected poses than current_index + 1");
    }
    if (current_index < min_loop_gap) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i <= current_index; ++i) {
        if (!is_finite(projected[i])) {
            throw Error(ErrorCode::InvalidPose, "non-finite projected position");
        }
    }
    const std::size_t last = current_index - min_loop_gap;
    const PlanarPoint<S>& current = projected[current_index];

    SearchWindow<S> fallback;
    fallback.start_index = 0;
    fallback.end_index = last;
    fallback.p_start = projected[0];
    fallback.fallback = true;

    // Motion direction; repeated positions fall back to the latest distinct one.
    std::optional<Ray<S>> motion;
    for (std::size_t j = current_index; j-- > 0;) {
        if (projected[j] != current) {
            motion = Ray<S>::through(projected[j], current);
            break;
        }
    }
    if (!motion || last == 0) {
        return fallback;
    }

    std::optional<RayHit<S>> best;
    auto consider = [&](const std::optional<RayHit<S>>& hit) {
        if (hit && (!best || hit->ray_param < best->ray_param)) {
            best = hit;
        }
    };
    if (projected[1] != projected[0]) {
        consider(ray_ray_intersect(*motion, Ray<S>::through(projected[0], PlanarPoint<S>(2 * projected[0] - projected[1]))));
    }
    for (std::size_t k = 1; k <= last; ++k) {
        if (projected[k] != projected[k - 1]) {
            consider(ray_segment_intersect(*motion, Segment<S>(projected[k - 1], projected[k])));
        }
    }
    if (!best) {
        return fallback;
    }

    SearchWindow<S> window;
    window.p_start = best->point;
    const std::size_t start_vertex = nearest_vertex(projected, last, best->point);

    const Line<S> cut = perpendicular_at(Ray<S>{current, motion->direction});
    std::optional<LineHit<S>> cut_hit;
    for (std::size_t k = 1; k <= last; ++k) {
        if (projected[k] == projected[k - 1]) {
            continue;
        }
        const auto hit = line_segment_intersect(cut, Segment<S>(projected[k - 1], projected[k]));
        if (hit && (!cut_hit || std::abs(hit->line_param) < std::abs(cut_hit->line_param))) {
            cut_hit = hit;
        }
    }
    if (cut_hit) {
        window.p_end = cut_hit->point;
        const std::size_t end_vertex = nearest_vertex(projected, last, cut_hit->point);
        window.start_index = std::min(start_vertex, end_vertex);
        window.end_index = std::max(start_vertex, end_vertex);
    } else {
        window.start_index = start_vertex;
        window.end_index = last;
    }
    return window;
}

template <typename S>
std::optional<SearchWindow<S>> compute_search_window(const std::vector<PlanarPoint<S>>& projected,
                                                     std::size_t current_index, std::size_t min_loop_gap) {
    return compute_search_window(std::span<const PlanarPoint<S>>(projected), current_index, min_loop_gap);
}

}  // namespace loopclose
