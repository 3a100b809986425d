#pragma once

// Chaser vehicles: the drone command envelope, quantization of guidance
// accelerations into minimum moves, point-to-point move execution with
// overshoot, and the injected hardware faults.

#include "marvin/frames.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <variant>

namespace marvin {

/// One relative move in the drone frame. Integer centimeters and cm/s.
struct MoveCommand {
    int dx{0};
    int dy{0};
    int dz{0};
    int speed{100};

    friend bool operator==(const MoveCommand&, const MoveCommand&) = default;

    DroneVec displacement_m() const { return DroneVec{dx / kCmPerMeter, dy / kCmPerMeter, dz / kCmPerMeter}; }
};

struct CommandEnvelope {
    int min_move_cm{20};
    int max_move_cm{500};
    int min_speed_cm_s{10};
    int max_speed_cm_s{100};

    bool axis_ok(int d) const {
        const int a = std::abs(d);
        return a == 0 || (a >= min_move_cm && a <= max_move_cm);
    }

    /// A command is accepted iff every axis is zero or within [min, max] in
    /// magnitude, at least one axis moves, and the speed is in range.
    bool accepts(const MoveCommand& c) const {
        if (c.dx == 0 && c.dy == 0 && c.dz == 0) return false;
        return axis_ok(c.dx) && axis_ok(c.dy) && axis_ok(c.dz) && c.speed >= min_speed_cm_s &&
               c.speed <= max_speed_cm_s;
    }
};

struct QuantizeConfig {
    double deadband_m{0.01}; // pre-quantization displacement below which an axis holds
    int min_move_cm{20};
    int max_step_cm{20};     // > min_move_cm allows larger single moves
    int speed_cm_s{100};
};

/**
 * @brief Turn a guidance acceleration into a drone move, or nullopt to hold.
 *
 * The displacement a*dt^2/2 is taken per axis in the drone frame; an axis
 * at or above the deadband moves by the minimum step in its sign (or the
 * floored magnitude clamped to max_step_cm when that is larger).
 */
inline std::optional<MoveCommand> quantize(const ApfVec& accel, double dt, const QuantizeConfig& cfg = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("quantize: dt must be > 0");
    const DroneVec d = drone_from_apf(ApfVec{0.5 * accel.value * dt * dt});
    auto axis = [&](double meters) -> int {
        if (!(std::abs(meters) >= cfg.deadband_m)) return 0;
        const double cm = std::floor(std::abs(meters) * kCmPerMeter);
        const int mag = static_cast<int>(std::clamp(cm, static_cast<double>(cfg.min_move_cm),
                                                    static_cast<double>(std::max(cfg.min_move_cm, cfg.max_step_cm))));
        return meters > 0 ? mag : -mag;
    };
    MoveCommand cmd{axis(d.value.x), axis(d.value.y), axis(d.value.z), cfg.speed_cm_s};
    if (cmd.dx == 0 && cmd.dy == 0 && cmd.dz == 0) return std::nullopt;
    return cmd;
}

enum class Rejected { Busy, OutOfBounds, Landed };

inline std::string_view to_string(Rejected r) {
    switch (r) {
    case Rejected::Busy: return "busy";
    case Rejected::OutOfBounds: return "out_of_bounds";
    case Rejected::Landed: return "landed";
    }
    return "?";
}

struct ImuDrift {
    double sigma_m{0.3}; // per-axis position error added after each completed move
};

/// The tracker latches onto reflective foil instead of the chaser while it is
/// inside the trigger sphere.
struct TrackerSpoof {
    Vec3 trigger_center{};
    double trigger_radius_m{1.0};
    Vec3 offset{};
};

struct FaultSpec {
    std::optional<ImuDrift> imu_drift;
    std::optional<TrackerSpoof> tracker_spoof;
    double depth_noise_multiplier{1.0}; // consumed by the camera model

    bool any() const { return imu_drift || tracker_spoof || depth_noise_multiplier != 1.0; }
};

struct VehicleKinematics {
    double overshoot_fraction{0.10};
    double settle_time_s{0.3};
    double battery_s{420.0};
    CommandEnvelope envelope{};
};

struct MoveSegment {
    Vec3 start{};
    Vec3 peak{}; // start + d * (1 + overshoot)
    Vec3 end{};
    double t0{0.0};
    double move_time{0.0};
    double settle_time{0.0};

    double t_end() const { return t0 + move_time + settle_time; }

    Vec3 position_at(double t) const {
        if (t <= t0) return start;
        if (t < t0 + move_time) return start + ((t - t0) / move_time) * (peak - start);
        if (settle_time > 0.0 && t < t_end()) return peak + ((t - t0 - move_time) / settle_time) * (end - peak);
        return end;
    }

    Vec3 velocity_at(double t) const {
        if (t < t0) return {};
        if (t < t0 + move_time) return (peak - start) / move_time;
        if (settle_time > 0.0 && t < t_end()) return (end - peak) / settle_time;
        return {};
    }
};

struct VehicleState {
    int id{0};
    ApfVec position{};  // truth
    ApfVec velocity{};
    ApfVec odometry{};  // dead-reckoned from executed commands
    ApfVec reported{};  // what the tracker publishes
    std::optional<MoveSegment> segment;
    double busy_until{0.0};
    double takeoff_time{0.0};
    double battery_elapsed{0.0};
    bool landed{false};
    std::uint64_t moves_completed{0};
    bool drift_pending{false};

    static VehicleState at(int id, const ApfVec& p, double t = 0.0) {
        VehicleState v;
        v.id = id;
        v.position = v.odometry = v.reported = p;
        v.takeoff_time = t;
        v.busy_until = t;
        return v;
    }

    bool busy(double now) const { return now < busy_until - 1e-9; }
    bool battery_expired(double battery_s) const { return battery_elapsed > battery_s; }
};

/// Position of a vehicle at time t without changing its state.
inline Vec3 position_at(const VehicleState& v, double t) {
    return v.segment ? v.segment->position_at(t) : v.position.value;
}

/// Move the vehicle along its active segment to time t; completes the segment when due.
inline VehicleState advance(VehicleState v, double t) {
    if (v.landed) return v;
    v.battery_elapsed = std::max(0.0, t - v.takeoff_time);
    if (!v.segment) {
        v.velocity = ApfVec{};
        return v;
    }
    const MoveSegment s = *v.segment;
    if (t >= s.t_end()) {
        v.position = ApfVec{s.end};
        v.velocity = ApfVec{};
        v.odometry = v.odometry + ApfVec{s.end - s.start};
        v.segment.reset();
        ++v.moves_completed;
        v.drift_pending = true;
    } else {
        v.position = ApfVec{s.position_at(t)};
        v.velocity = ApfVec{s.velocity_at(t)};
    }
    return v;
}

using ExecuteResult = std::variant<VehicleState, Rejected>;

/**
 * @brief Hand a command to a vehicle at time `now`.
 *
 * Busy and out-of-envelope commands are discarded with the state unchanged.
 * An accepted move runs at constant speed over max|axis|/speed seconds to
 * the overshoot peak, then settles back to the target; the vehicle ignores
 * commands until the settle completes.
 */
inline ExecuteResult execute(const VehicleState& v, const MoveCommand& cmd, double now,
                             const VehicleKinematics& kin = {}) {
    if (v.landed) return Rejected::Landed;
    if (v.busy(now)) return Rejected::Busy;
    if (!kin.envelope.accepts(cmd)) return Rejected::OutOfBounds;

    VehicleState next = advance(v, now);
    const Vec3 d = apf_from_drone(cmd.displacement_m()).value;
    const int max_axis = std::max({std::abs(cmd.dx), std::abs(cmd.dy), std::abs(cmd.dz)});
    MoveSegment seg;
    seg.start = next.position.value;
    seg.end = seg.start + d;
    seg.settle_time = kin.overshoot_fraction > 0.0 ? kin.settle_time_s : 0.0;
    seg.peak = seg.settle_time > 0.0 ? seg.start + (1.0 + kin.overshoot_fraction) * d : seg.end;
    seg.t0 = now;
    seg.move_time = static_cast<double>(max_axis) / cmd.speed;
    next.segment = seg;
    next.busy_until = seg.t_end();
    next.velocity = ApfVec{seg.velocity_at(now)};
    return next;
}

/// Vehicle lands in place and leaves the experiment.
inline VehicleState land(VehicleState v, double now) {
    v = advance(v, now);
    v.segment.reset();
    v.velocity = ApfVec{};
    v.landed = true;
    return v;
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
} // namespace detail

/// Deterministic per-purpose seed derivation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return detail::splitmix64(detail::splitmix64(seed ^ detail::splitmix64(a)) ^ b);
}

/**
 * @brief Apply the injected faults after the vehicle has been advanced.
 *
 * IMU drift perturbs the true position once per completed move (the error is
 * drawn from a stream keyed by seed, vehicle and move index, so it does not
 * depend on how often this is called). Tracker spoofing replaces the
 * reported position while the vehicle is inside the trigger sphere. With
 * every fault off the reported position is the true position.
 */
inline VehicleState apply_faults(VehicleState v, const FaultSpec& fault, std::uint64_t rng_seed) {
    if (v.drift_pending) {
        if (fault.imu_drift && fault.imu_drift->sigma_m > 0.0 && !v.landed) {
            std::mt19937_64 rng(derive_seed(rng_seed, static_cast<std::uint64_t>(v.id), v.moves_completed));
            std::normal_distribution<double> gauss(0.0, fault.imu_drift->sigma_m);
            const double ex = gauss(rng), ey = gauss(rng), ez = gauss(rng);
            const Vec3 err{ex, ey, ez};
            v.position = ApfVec{v.position.value + err};
            if (v.segment) {
                // a follow-up move already started from the undrifted point
                v.segment->start += err;
                v.segment->peak += err;
                v.segment->end += err;
            }
        }
        v.drift_pending = false;
    }
    v.reported = v.position;
    if (fault.tracker_spoof && !v.landed) {
        const auto& s = *fault.tracker_spoof;
        if (distance(v.position.value, s.trigger_center) <= s.trigger_radius_m) {
            v.reported = ApfVec{v.position.value + s.offset};
        }
    }
    return v;
}

} // namespace marvin
