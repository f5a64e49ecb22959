#pragma once

#include <array>
#include <cmath>

#include "choreo/common.hpp"

namespace choreo::motion {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// Unit quaternion (w,x,y,z). Stored clips keep the w >= 0 hemisphere.
struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quaternion identity() { return {}; }

    static Quaternion from_axis_angle(const Vec3& axis, double angle) {
        double n = axis.norm();
        if (n < 1e-300) return identity();
        double h = 0.5 * angle;
        double s = std::sin(h) / n;
        return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quaternion normalized() const {
        double n = norm();
        if (n < 1e-300) throw ValidationError("cannot normalize zero quaternion");
        return {w / n, x / n, y / n, z / n};
    }

    // w >= 0 representative of the same rotation
    Quaternion canonical() const { return w < 0.0 ? Quaternion{-w, -x, -y, -z} : *this; }

    Quaternion conj() const { return {w, -x, -y, -z}; }

    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const {
        // q v q*; expanded form avoids constructing temporaries
        double tx = 2.0 * (y * v.z - z * v.y);
        double ty = 2.0 * (z * v.x - x * v.z);
        double tz = 2.0 * (x * v.y - y * v.x);
        return {v.x + w * tx + (y * tz - z * ty), v.y + w * ty + (z * tx - x * tz),
                v.z + w * tz + (x * ty - y * tx)};
    }

    std::array<std::array<double, 3>, 3> to_matrix() const {
        double xx = x * x, yy = y * y, zz = z * z;
        double xy = x * y, xz = x * z, yz = y * z;
        double wx = w * x, wy = w * y, wz = w * z;
        return {{{1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy)},
                 {2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx)},
                 {2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy)}}};
    }

    // yaw about world Y, from where this rotation sends the +Z forward axis
    double yaw() const {
        Vec3 f = rotate({0.0, 0.0, 1.0});
        return std::atan2(f.x, f.z);
    }
};

inline Quaternion yaw_rotation(double angle) {
    return Quaternion::from_axis_angle({0.0, 1.0, 0.0}, angle);
}

// Shortest-path spherical interpolation with hemisphere fix.
inline Quaternion slerp(const Quaternion& a, Quaternion b, double t) {
    double dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    if (dot < 0.0) {
        b = {-b.w, -b.x, -b.y, -b.z};
        dot = -dot;
    }
    if (dot > 1.0 - 1e-12) {
        Quaternion out{a.w + (b.w - a.w) * t, a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t,
                       a.z + (b.z - a.z) * t};
        return out.normalized();
    }
    double theta = std::acos(dot);
    double s = std::sin(theta);
    double wa = std::sin((1.0 - t) * theta) / s;
    double wb = std::sin(t * theta) / s;
    return {wa * a.w + wb * b.w, wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z};
}

// Relative rotation angle in [0, pi] (Eq. form: ||log(R R̂ᵀ)||). The quaternion
// route 2 atan2(|vec|, |w|) is double-cover safe and stable near 0 and pi.
double geodesic_distance(const Quaternion& a, const Quaternion& b);

// Matrix overload; accepts any pair of valid rotation matrices.
double geodesic_distance(const std::array<std::array<double, 3>, 3>& ra,
                         const std::array<std::array<double, 3>, 3>& rb);

}  // namespace choreo::motion
