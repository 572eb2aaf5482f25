#pragma once

#include <cmath>
#include <numbers>

#include "loopclose/types.hpp"

namespace loopclose {

/// Wraps an angle into (-pi, pi].
template <typename S>
S wrap_angle(S a) {
    const S two_pi = S(2) * std::numbers::pi_v<S>;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi_v<S>) {
        a += two_pi;
    } else if (a > std::numbers::pi_v<S>) {
        a -= two_pi;
    }
    return a;
}

/// Planar rigid motion (x, y, heading). Heading is kept in (-pi, pi].
template <typename S>
struct Pose2 {
    S x = 0;
    S y = 0;
    S theta = 0;

    Pose2() = default;
    Pose2(S x_, S y_, S theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

    static Pose2 identity() { return Pose2(); }

    Vector2<S> translation() const { return Vector2<S>(x, y); }

    Eigen::Matrix<S, 2, 2> rotation() const {
        const S c = std::cos(theta);
        const S s = std::sin(theta);
        Eigen::Matrix<S, 2, 2> r;
        r << c, -s, s, c;
        return r;
    }

    Eigen::Matrix<S, 3, 1> vector() const { return Eigen::Matrix<S, 3, 1>(x, y, theta); }

    Vector2<S> operator*(const Vector2<S>& p) const { return rotation() * p + translation(); }

    template <typename T>
    Pose2<T> cast() const {
        Pose2<T> p;
        p.x = T(x);
        p.y = T(y);
        p.theta = T(theta);
        return p;
    }
};

using Pose2d = Pose2<double>;

template <typename S>
Pose2<S> compose(const Pose2<S>& a, const Pose2<S>& b) {
    const S c = std::cos(a.theta);
    const S s = std::sin(a.theta);
    return Pose2<S>(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta);
}

template <typename S>
Pose2<S> inverse(const Pose2<S>& a) {
    const S c = std::cos(a.theta);
    const S s = std::sin(a.theta);
    return Pose2<S>(-c * a.x - s * a.y, s * a.x - c * a.y, -a.theta);
}

/// Pose of b expressed in the frame of a.
template <typename S>
Pose2<S> between(const Pose2<S>& a, const Pose2<S>& b) {
    // Difference first, so identical poses give an exact identity.
    const S c = std::cos(a.theta);
    const S s = std::sin(a.theta);
    const S dx = b.x - a.x;
    const S dy = b.y - a.y;
    return Pose2<S>(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta);
}

template <typename S>
Pose2<S> operator*(const Pose2<S>& a, const Pose2<S>& b) {
    return compose(a, b);
}

}  // namespace loopclose
