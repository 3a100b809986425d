#pragma once

// Coordinate frames and the rigid conversions between them.
//
// APF frame: target-centered, LVLH-aligned. x along the target velocity
// direction, z nadir (down in the lab), y completes the right-handed triad.
// The origin is pinned to the target centroid at scenario start and the
// frame does not rotate with the target.
//
// Camera frame: optical convention, x right, y down, z along the boresight.
// Tracker frame: motion-capture world frame, placed by a Pose.
// Drone frame: the chaser's own body-command frame, x same as APF, y and z
// negated. Drone commands are exchanged in centimeters; everything else in
// this library is in meters.

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace marvin {

struct Vec3 {
    double x{0.0};
    double y{0.0};
    double z{0.0};

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    friend std::ostream& operator<<(std::ostream& os, const Vec3& v) {
        return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
    }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Unit vector along v. Caller guarantees |v| > 0.
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

/// Thrown when a non-finite point enters a frame conversion.
class InvalidPoint : public std::invalid_argument {
public:
    explicit InvalidPoint(const std::string& what) : std::invalid_argument(what) {}
};

/**
 * @brief Unit quaternion, scalar-last storage (x, y, z, w).
 *
 * Right-handed, active rotation: rotate(v) returns v expressed in the parent
 * frame when the quaternion describes the child frame's orientation.
 */
struct Quaternion {
    double x{0.0};
    double y{0.0};
    double z{0.0};
    double w{1.0};

    static constexpr Quaternion identity() { return {}; }

    /// Rotation of `angle_rad` about `axis` (need not be unit length).
    static Quaternion from_axis_angle(const Vec3& axis, double angle_rad) {
        const Vec3 u = marvin::normalized(axis);
        const double s = std::sin(angle_rad / 2.0);
        return {u.x * s, u.y * s, u.z * s, std::cos(angle_rad / 2.0)};
    }

    /// Z-Y-X (yaw, pitch, roll) intrinsic sequence about APF axes.
    static Quaternion from_yaw_pitch_roll(double yaw, double pitch, double roll) {
        return from_axis_angle({0, 0, 1}, yaw) * from_axis_angle({0, 1, 0}, pitch) *
               from_axis_angle({1, 0, 0}, roll);
    }

    /// Build from a proper rotation matrix given by its three columns.
    static Quaternion from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        const double m00 = c0.x, m10 = c0.y, m20 = c0.z;
        const double m01 = c1.x, m11 = c1.y, m21 = c1.z;
        const double m02 = c2.x, m12 = c2.y, m22 = c2.z;
        const double trace = m00 + m11 + m22;
        Quaternion q;
        if (trace > 0.0) {
            const double s = std::sqrt(trace + 1.0) * 2.0;
            q = {(m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s, 0.25 * s};
        } else if (m00 > m11 && m00 > m22) {
            const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
            q = {0.25 * s, (m01 + m10) / s, (m02 + m20) / s, (m21 - m12) / s};
        } else if (m11 > m22) {
            const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
            q = {(m01 + m10) / s, 0.25 * s, (m12 + m21) / s, (m02 - m20) / s};
        } else {
            const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
            q = {(m02 + m20) / s, (m12 + m21) / s, 0.25 * s, (m10 - m01) / s};
        }
        return q.normalized();
    }

    double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }

    Quaternion normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n, w / n};
    }

    constexpr Quaternion conjugate() const { return {-x, -y, -z, w}; }

    friend constexpr Quaternion operator*(const Quaternion& a, const Quaternion& b) {
        return {a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
                a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z};
    }

    /// Active rotation of v: q v q*.
    constexpr Vec3 rotate(const Vec3& v) const {
        // v' = v + 2w(u x v) + 2 u x (u x v), u = vector part
        const Vec3 u{x, y, z};
        const Vec3 t = 2.0 * cross(u, v);
        return v + w * t + cross(u, t);
    }

    constexpr Vec3 inverse_rotate(const Vec3& v) const { return conjugate().rotate(v); }
};

/// Position plus orientation of a child frame expressed in its parent frame.
struct Pose {
    Vec3 position{};
    Quaternion orientation{};

    bool valid() const {
        return is_finite(position) && std::isfinite(orientation.w) &&
               std::abs(orientation.norm() - 1.0) <= 1e-9;
    }

    /// Camera-style pose at `eye` with its +z boresight toward `target` and
    /// its +y axis as close as possible to `down`.
    static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& down = {0, 0, 1}) {
        const Vec3 z = normalized(target - eye);
        Vec3 y = down - dot(down, z) * z;
        y = normalized(y);
        const Vec3 x = cross(y, z);
        return {eye, Quaternion::from_columns(x, y, z)};
    }
};

enum class FrameTag { Apf, Camera, Tracker, Drone };

inline const char* to_string(FrameTag f) {
    switch (f) {
    case FrameTag::Apf: return "apf";
    case FrameTag::Camera: return "camera";
    case FrameTag::Tracker: return "tracker";
    case FrameTag::Drone: return "drone";
    }
    return "?";
}

/// A vector that carries its frame in the type. Arithmetic is only defined
/// between vectors of the same frame.
template <FrameTag F>
struct Framed {
    static constexpr FrameTag frame = F;
    Vec3 value{};

    constexpr Framed() = default;
    constexpr explicit Framed(const Vec3& v) : value(v) {}
    constexpr Framed(double x, double y, double z) : value(x, y, z) {}

    friend constexpr Framed operator+(const Framed& a, const Framed& b) { return Framed{a.value + b.value}; }
    friend constexpr Framed operator-(const Framed& a, const Framed& b) { return Framed{a.value - b.value}; }
    friend constexpr Framed operator*(const Framed& a, double s) { return Framed{a.value * s}; }
    friend constexpr bool operator==(const Framed&, const Framed&) = default;
};

using ApfVec = Framed<FrameTag::Apf>;
using CameraVec = Framed<FrameTag::Camera>;
using TrackerVec = Framed<FrameTag::Tracker>;
using DroneVec = Framed<FrameTag::Drone>;

namespace detail {
inline void require_finite(const Vec3& v, const char* where) {
    if (!is_finite(v)) {
        throw InvalidPoint(std::string(where) + ": non-finite point");
    }
}
inline void require_pose(const Pose& p, const char* where) {
    if (!p.valid()) {
        throw InvalidPoint(std::string(where) + ": invalid pose (non-finite or non-unit quaternion)");
    }
}
} // namespace detail

/// Rigid transform of a sensor-frame point into APF: rotate, then translate.
template <FrameTag From>
ApfVec apf_from(const Framed<From>& point, const Pose& sensor_pose) {
    static_assert(From == FrameTag::Camera || From == FrameTag::Tracker);
    detail::require_finite(point.value, "apf_from");
    detail::require_pose(sensor_pose, "apf_from");
    return ApfVec{sensor_pose.orientation.rotate(point.value) + sensor_pose.position};
}

/// Inverse of apf_from.
template <FrameTag To>
Framed<To> apf_to(const ApfVec& point, const Pose& sensor_pose) {
    static_assert(To == FrameTag::Camera || To == FrameTag::Tracker);
    detail::require_finite(point.value, "apf_to");
    detail::require_pose(sensor_pose, "apf_to");
    return Framed<To>{sensor_pose.orientation.inverse_rotate(point.value - sensor_pose.position)};
}

inline ApfVec apf_from_camera(const CameraVec& p, const Pose& camera_pose) { return apf_from(p, camera_pose); }
inline CameraVec camera_from_apf(const ApfVec& p, const Pose& camera_pose) {
    return apf_to<FrameTag::Camera>(p, camera_pose);
}
inline ApfVec apf_from_tracker(const TrackerVec& p, const Pose& tracker_pose) { return apf_from(p, tracker_pose); }
inline TrackerVec tracker_from_apf(const ApfVec& p, const Pose& tracker_pose) {
    return apf_to<FrameTag::Tracker>(p, tracker_pose);
}

/// Free vectors (velocities) only rotate.
template <FrameTag From>
ApfVec apf_direction_from(const Framed<From>& v, const Pose& sensor_pose) {
    return ApfVec{sensor_pose.orientation.rotate(v.value)};
}
template <FrameTag To>
Framed<To> apf_direction_to(const ApfVec& v, const Pose& sensor_pose) {
    return Framed<To>{sensor_pose.orientation.inverse_rotate(v.value)};
}

// Drone frame shares the APF origin convention but has Y and Z flipped.
constexpr DroneVec drone_from_apf(const ApfVec& v) { return DroneVec{v.value.x, -v.value.y, -v.value.z}; }
constexpr ApfVec apf_from_drone(const DroneVec& v) { return ApfVec{v.value.x, -v.value.y, -v.value.z}; }

inline constexpr double kCmPerMeter = 100.0;

} // namespace marvin
