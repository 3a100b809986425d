#pragma once

// End-to-end mission loop: vehicles, tracker, camera and guidance exchange
// messages over a Transport on a fixed 0.25 s cycle. Also the run report,
// batch summary and CSV/JSON export.

#include "marvin/apf_guidance.hpp"
#include "marvin/chaser_fleet.hpp"
#include "marvin/scenario.hpp"
#include "marvin/swarm_net.hpp"
#include "marvin/transport.hpp"
#include "marvin/vision_sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace marvin {

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(what + ": " + path.string()), path_(path) {}
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

class NoScenarios : public std::runtime_error {
public:
    explicit NoScenarios(const std::filesystem::path& dir)
        : std::runtime_error("no scenario files (*.json) in " + dir.string()) {}
};

enum class Outcome { Docked, InspectionOrbit, Failed };

inline std::string_view to_string(Outcome o) {
    switch (o) {
    case Outcome::Docked: return "Docked";
    case Outcome::InspectionOrbit: return "Inspection Orbit";
    case Outcome::Failed: return "Failed";
    }
    return "?";
}

enum class FailureReason { ImuFailed, OptiTrackError, RealSenseError, Collision, Timeout };

inline std::string_view to_string(FailureReason r) {
    switch (r) {
    case FailureReason::ImuFailed: return "IMU failed";
    case FailureReason::OptiTrackError: return "OptiTrack error";
    case FailureReason::RealSenseError: return "RealSense error";
    case FailureReason::Collision: return "collision";
    case FailureReason::Timeout: return "timeout";
    }
    return "?";
}

struct ChaserResult {
    std::string id;
    Outcome outcome{Outcome::Failed};
    std::optional<FailureReason> failure_reason;
    std::string failure_detail;
    std::optional<double> time_to_dock_s;
    double end_time_s{0.0};
    Vec3 final_position{};
};

struct TrajectorySample {
    double t{0.0};
    std::string chaser_id;
    Vec3 true_position{};
    Vec3 reported_position{};
    ChaserStatus status{ChaserStatus::Active};
};

struct RunMetrics {
    double min_inter_chaser_m{std::numeric_limits<double>::infinity()};
    // surface-to-footprint clearances; negative means the keep-out was entered
    double min_panel_clearance_m{std::numeric_limits<double>::infinity()};
    double min_body_clearance_m{std::numeric_limits<double>::infinity()};
    int keepout_penetrations{0};
    int chaser_collisions{0};
    int arena_exits{0};
    int cycles{0};
    double sim_time_s{0.0};
    std::uint64_t commands_sent{0};
    std::uint64_t commands_rejected{0};
    std::uint64_t commands_deduplicated{0};
    std::uint64_t detection_frames{0};
    std::uint64_t node_rebuilds{0};
    std::uint64_t rebuild_failures{0};
    std::uint64_t stale_tracker_holds{0};
    std::uint64_t decode_errors{0};
    TransportStats transport{};
};

struct RunReport {
    std::string scenario;
    std::string label;
    Placement placement{Placement::Custom};
    double yaw_dps{0.0}, pitch_dps{0.0}, roll_dps{0.0};
    std::uint64_t seed{0};
    TransportKind transport{TransportKind::InProcess};
    bool completed{false};
    std::vector<ChaserResult> chasers;
    std::vector<TrajectorySample> trajectory;
    RunMetrics metrics{};

    /// Docked or InspectionOrbit.
    int successes() const {
        return static_cast<int>(std::count_if(chasers.begin(), chasers.end(),
                                              [](const auto& c) { return c.outcome != Outcome::Failed; }));
    }
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<TransportKind> transport;
    double loss{0.0};      // injected datagram loss probability
    double duplicate{0.0}; // injected duplication probability
    bool record_trajectory{true};
    double substep_s{0.025};                        // collision-check resolution
    std::chrono::milliseconds udp_wait{500};        // per-topic wait for expected datagrams
};

// ---------------------------------------------------------------------------
// Keep-out geometry, evaluated in the target body frame at time t
// ---------------------------------------------------------------------------

namespace keepout {

inline Vec3 to_body(const TargetMockup& m, double t, const Vec3& apf) {
    const Pose p = m.pose_at(t);
    return p.orientation.inverse_rotate(apf - p.position);
}

inline double body_clearance(const Vec3& local, const Vec3& half) {
    const Vec3 q{std::abs(local.x) - half.x, std::abs(local.y) - half.y, std::abs(local.z) - half.z};
    const Vec3 outside{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    const double inside = std::min(std::max({q.x, q.y, q.z}), 0.0);
    return norm(outside) + inside; // signed: negative inside the box
}

/// Distance to the panel's slab surface; negative inside the slab.
inline double panel_clearance(const Vec3& local, const PanelSpec& p) {
    const Vec3 rel = local - p.center;
    const double a = std::clamp(dot(rel, p.half_u) / dot(p.half_u, p.half_u), -1.0, 1.0);
    const double b = std::clamp(dot(rel, p.half_v) / dot(p.half_v, p.half_v), -1.0, 1.0);
    const Vec3 closest = p.center + a * p.half_u + b * p.half_v;
    return distance(local, closest) - p.thickness / 2.0;
}

/// True if the segment crosses the panel's mid-plane inside the rectangle.
inline bool segment_crosses_panel(const Vec3& a, const Vec3& b, const PanelSpec& p) {
    const Vec3 n = p.normal();
    const double sa = dot(a - p.center, n);
    const double sb = dot(b - p.center, n);
    if (sa * sb > 0.0 || sa == sb) return false;
    const Vec3 q = a + (sa / (sa - sb)) * (b - a) - p.center;
    return std::abs(dot(q, p.half_u) / dot(p.half_u, p.half_u)) <= 1.0 &&
           std::abs(dot(q, p.half_v) / dot(p.half_v, p.half_v)) <= 1.0;
}

} // namespace keepout

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t to_us(double t) { return std::llround(t * 1e6); }

class Mission {
public:
    Mission(const Scenario& sc, const RunOptions& opt) : sc_(sc), opt_(opt) {
        if (sc_.transport == TransportKind::Udp) {
            base_ = std::make_unique<UdpTransport>();
            net_ = sc_.network.with_env_overrides();
        } else {
            base_ = std::make_unique<InProcessTransport>();
            net_ = sc_.network;
        }
        transport_ = base_.get();
        if (opt_.loss > 0.0 || opt_.duplicate > 0.0) {
            lossy_ = std::make_unique<LossyTransport>(*base_, opt_.loss, opt_.duplicate, derive_seed(sc_.rng_seed, 0x10557));
            transport_ = lossy_.get();
        }
        wait_ = sc_.transport == TransportKind::Udp ? opt_.udp_wait : std::chrono::milliseconds{0};
        if (lossy_) wait_ = std::min(wait_, std::chrono::milliseconds{20});

        det_sub_.emplace(*transport_, net_.detections);
        trk_sub_.emplace(*transport_, net_.tracker);
        det_pub_.emplace(*transport_, net_.detections);
        trk_pub_.emplace(*transport_, net_.tracker);
        sender_.emplace(*transport_, net_);

        const std::size_t n = sc_.chasers.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = sc_.chasers[i];
            vehicles_.push_back(VehicleState::at(static_cast<int>(i + 1), ApfVec{c.start}));
            receivers_.emplace_back(*transport_, net_.command(i), c.id);
            ChaserState g;
            g.id = static_cast<int>(i + 1);
            g.position = ApfVec{c.start};
            guidance_.push_back(g);
        }
        crash_.resize(n);
        last_seen_.assign(n, std::nullopt);
        dock_time_.assign(n, std::nullopt);
        end_time_.assign(n, 0.0);

        NoiseSpec noise{sc_.camera.noise_sigma_m, sc_.depth_noise_multiplier()};
        camera_.emplace(sc_.camera.pose, noise, derive_seed(sc_.rng_seed, 0xCA3E4A), sc_.camera.render,
                        sc_.camera.frame_period_s);
        rebuild_cfg_ = sc_.effective_rebuild();
    }

    RunReport run() {
        RunReport rep;
        rep.scenario = sc_.name;
        rep.label = sc_.label;
        rep.placement = sc_.placement;
        rep.yaw_dps = sc_.target.yaw_rate_dps;
        rep.pitch_dps = sc_.target.pitch_rate_dps;
        rep.roll_dps = sc_.target.roll_rate_dps;
        rep.seed = sc_.rng_seed;
        rep.transport = sc_.transport;

        const double dt = sc_.apf.cycle_period;
        const auto max_cycles = static_cast<int>(std::ceil(sc_.max_duration_s / dt - 1e-9));
        update_clearances(0.0);
        if (opt_.record_trajectory) log(rep, 0.0);

        int k = 0;
        while (k < max_cycles && !all_terminal()) {
            const double t0 = k * dt;
            const double t1 = (k + 1) * dt;
            advance_fleet(t0, t1);
            absorb_failures();
            publish_sensors(t1);
            guidance_cycle(t1);
            deliver_commands(t1);
            ++k;
            if (opt_.record_trajectory) log(rep, t1);
        }
        metrics_.cycles = k;
        metrics_.sim_time_s = k * dt;
        finish(rep, k * dt);
        return rep;
    }

private:
    bool all_terminal() const {
        return std::all_of(guidance_.begin(), guidance_.end(), [](const auto& g) { return is_terminal(g.status); });
    }

    FailureReason fault_reason(std::size_t i) const {
        const auto& f = sc_.chasers[i].faults;
        if (f.imu_drift) return FailureReason::ImuFailed;
        if (f.tracker_spoof) return FailureReason::OptiTrackError;
        if (sc_.depth_noise_multiplier() > 1.0) return FailureReason::RealSenseError;
        return FailureReason::Collision;
    }

    void crash(std::size_t i, double t, FailureReason reason, const std::string& what) {
        vehicles_[i] = land(vehicles_[i], t);
        if (!crash_[i]) crash_[i] = std::make_pair(reason, what);
        end_time_[i] = t;
    }

    void update_clearances(double t) {
        const std::size_t n = vehicles_.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (vehicles_[i].landed) continue;
            const Vec3 local = keepout::to_body(sc_.target, t, vehicles_[i].position.value);
            metrics_.min_body_clearance_m =
                std::min(metrics_.min_body_clearance_m,
                         keepout::body_clearance(local, sc_.target.body_half_extents) - sc_.vehicle_radius_m);
            for (const auto& p : sc_.target.panels) {
                metrics_.min_panel_clearance_m =
                    std::min(metrics_.min_panel_clearance_m, keepout::panel_clearance(local, p) - sc_.vehicle_radius_m);
            }
            for (std::size_t j = i + 1; j < n; ++j) {
                if (vehicles_[j].landed) continue;
                metrics_.min_inter_chaser_m = std::min(
                    metrics_.min_inter_chaser_m, distance(vehicles_[i].position.value, vehicles_[j].position.value));
            }
        }
    }

    // Integrate vehicle motion between cycles, checking for contact at each substep.
    void advance_fleet(double t0, double t1) {
        const std::size_t n = vehicles_.size();
        const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / opt_.substep_s - 1e-9)));
        for (int s = 1; s <= steps; ++s) {
            const double t = s == steps ? t1 : t0 + (t1 - t0) * s / steps;
            for (std::size_t i = 0; i < n; ++i) {
                auto& v = vehicles_[i];
                if (v.landed) continue;
                const Vec3 before = v.position.value;
                v = advance(std::move(v), t);
                v = apply_faults(std::move(v), sc_.chasers[i].faults, sc_.rng_seed);
                const Vec3 after = v.position.value;

                const Vec3 la = keepout::to_body(sc_.target, t, before);
                const Vec3 lb = keepout::to_body(sc_.target, t, after);
                const double r = sc_.vehicle_radius_m;
                bool hit = keepout::body_clearance(lb, sc_.target.body_half_extents) < r;
                for (const auto& p : sc_.target.panels) {
                    hit = hit || keepout::panel_clearance(lb, p) < r || keepout::segment_crosses_panel(la, lb, p);
                }
                if (hit) {
                    ++metrics_.keepout_penetrations;
                    crash(i, t, fault_reason(i), "entered target keep-out");
                    continue;
                }
                if (!sc_.arena.contains(after)) {
                    ++metrics_.arena_exits;
                    crash(i, t, fault_reason(i), "left the arena");
                    continue;
                }
                if (v.battery_expired(sc_.vehicle.battery_s)) {
                    crash(i, t, FailureReason::Timeout, "battery depleted");
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (vehicles_[i].landed || vehicles_[j].landed) continue;
                    if (distance(vehicles_[i].position.value, vehicles_[j].position.value) < sc_.collision_distance_m) {
                        ++metrics_.chaser_collisions;
                        crash(i, t, fault_reason(i), "collided with " + sc_.chasers[j].id);
                        crash(j, t, fault_reason(j), "collided with " + sc_.chasers[i].id);
                    }
                }
            }
            update_clearances(t);
        }
    }

    // The harness tells guidance which vehicles went down (an operator would).
    void absorb_failures() {
        for (std::size_t i = 0; i < guidance_.size(); ++i) {
            if (crash_[i] && guidance_[i].status != ChaserStatus::Failed && guidance_[i].status != ChaserStatus::Docked) {
                guidance_[i] = mark_failed(guidance_[i]);
            }
        }
    }

    void publish_sensors(double t) {
        TrackerMsg trk;
        trk.timestamp_us = to_us(t);
        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            const auto& v = vehicles_[i];
            if (v.landed) continue;
            trk.bodies.push_back({sc_.chasers[i].id, tracker_from_apf(v.reported, sc_.tracker_pose),
                                  apf_direction_to<FrameTag::Tracker>(v.velocity, sc_.tracker_pose)});
        }
        trk_pub_->publish(trk);
        trk_expected_ = 1;

        det_expected_ = 0;
        if (camera_->capture(sc_.target, t)) {
            ++metrics_.detection_frames;
            det_pub_->publish(DetectionMsg::from(camera_->detections(), to_us(t)));
            det_expected_ = 1;
        }
    }

    void guidance_cycle(double t) {
        const std::size_t n = guidance_.size();
        trk_sub_->poll(trk_expected_, wait_);
        if (const auto& m = trk_sub_->latest()) {
            for (const auto& b : m->bodies) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (sc_.chasers[i].id != b.id) continue;
                    if (last_seen_[i] && *last_seen_[i] >= m->timestamp_us) break;
                    guidance_[i].position = apf_from_tracker(b.position, sc_.tracker_pose);
                    guidance_[i].velocity = apf_direction_from(b.velocity, sc_.tracker_pose);
                    last_seen_[i] = m->timestamp_us;
                }
            }
        }
        if (det_sub_->poll(det_expected_, wait_)) {
            try {
                nodes_ = rebuild_nodes(det_sub_->latest()->detections, sc_.camera.pose, rebuild_cfg_);
                ++metrics_.node_rebuilds;
            } catch (const NodeRebuildFailed&) {
                ++metrics_.rebuild_failures; // keep flying on the previous node set
            }
        }
        if (!nodes_) return;

        // std::vector<bool> is not contiguous, so keep the flags in a plain array
        auto stalled = std::make_unique<bool[]>(n);
        std::vector<std::optional<MoveCommand>> cmds(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& g = guidance_[i];
            if (!may_move(g)) continue;
            const bool fresh = last_seen_[i] && (t - *last_seen_[i] * 1e-6) <= sc_.tracker_stale_s + 1e-9;
            if (!fresh) {
                ++metrics_.stale_tracker_holds;
                continue;
            }
            g.last_rho_hat = nearest_node_direction(g, *nodes_);
            const Vec3 acc = total_acceleration(g, guidance_, *nodes_, sc_.apf);
            const double step = sc_.apf.cycle_period * (inspection_boost(g, sc_.apf) ? 2.0 : 1.0);
            cmds[i] = quantize(ApfVec{acc}, step, sc_.quantize);
            stalled[i] = !cmds[i];
        }

        auto next = update_status(guidance_, *nodes_, sc_.apf, std::span<const bool>(stalled.get(), n));
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i].status == ChaserStatus::Docked && guidance_[i].status != ChaserStatus::Docked) {
                dock_time_[i] = t;
                end_time_[i] = t;
            }
            if (next[i].status == ChaserStatus::InspectionOrbit && guidance_[i].status != ChaserStatus::InspectionOrbit) {
                end_time_[i] = t;
            }
        }
        guidance_ = std::move(next);

        pending_.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& g = guidance_[i];
            if (g.status == ChaserStatus::Docked && !crash_[i] && !landed_ack(i)) {
                sender_->send(i, sc_.chasers[i].id, LandCommand{});
                ++metrics_.commands_sent;
                pending_[i] = 1;
            } else if (may_move(g) && cmds[i]) {
                sender_->send(i, sc_.chasers[i].id, *cmds[i]);
                ++metrics_.commands_sent;
                pending_[i] = 1;
            }
        }
    }

    bool landed_ack(std::size_t i) const { return vehicles_[i].landed; }

    void deliver_commands(double t) {
        for (std::size_t i = 0; i < receivers_.size(); ++i) {
            const std::size_t expected = i < pending_.size() ? pending_[i] : 0;
            for (const auto& msg : receivers_[i].poll(expected, expected ? wait_ : std::chrono::milliseconds{0})) {
                if (std::holds_alternative<LandCommand>(msg.move)) {
                    if (!vehicles_[i].landed) vehicles_[i] = land(vehicles_[i], t);
                    continue;
                }
                auto r = execute(vehicles_[i], std::get<MoveCommand>(msg.move), t, sc_.vehicle);
                if (auto* v = std::get_if<VehicleState>(&r)) {
                    vehicles_[i] = std::move(*v);
                } else {
                    ++metrics_.commands_rejected;
                }
            }
        }
        pending_.clear();
    }

    void log(RunReport& rep, double t) {
        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            const auto& v = vehicles_[i];
            if (v.landed && logged_landed_.count(i)) continue;
            if (v.landed) logged_landed_.insert(i);
            rep.trajectory.push_back({t, sc_.chasers[i].id, v.position.value, v.reported.value, guidance_[i].status});
        }
    }

    void finish(RunReport& rep, double t_end) {
        for (std::size_t i = 0; i < guidance_.size(); ++i) {
            const auto& g = guidance_[i];
            ChaserResult r;
            r.id = sc_.chasers[i].id;
            r.final_position = vehicles_[i].position.value;
            r.time_to_dock_s = dock_time_[i];
            r.end_time_s = is_terminal(g.status) ? end_time_[i] : t_end;
            switch (g.status) {
            case ChaserStatus::Docked: r.outcome = Outcome::Docked; break;
            case ChaserStatus::InspectionOrbit: r.outcome = Outcome::InspectionOrbit; break;
            case ChaserStatus::Failed:
                r.outcome = Outcome::Failed;
                if (crash_[i]) {
                    r.failure_reason = crash_[i]->first;
                    r.failure_detail = crash_[i]->second;
                } else {
                    r.failure_reason = FailureReason::Timeout;
                }
                break;
            case ChaserStatus::Active:
            case ChaserStatus::Frozen:
                if (g.stall_counter >= sc_.apf.stall_threshold) {
                    r.outcome = Outcome::InspectionOrbit;
                } else {
                    r.outcome = Outcome::Failed;
                    r.failure_reason = FailureReason::Timeout;
                    r.failure_detail = "mission time exhausted";
                }
                break;
            }
            rep.chasers.push_back(r);
        }
        for (const auto& rcv : receivers_) {
            metrics_.commands_deduplicated += rcv.dropped();
            metrics_.decode_errors += rcv.decode_errors();
        }
        metrics_.decode_errors += det_sub_->decode_errors() + trk_sub_->decode_errors();
        metrics_.transport = transport_->stats();
        rep.metrics = metrics_;
        rep.completed = true;
    }

    const Scenario& sc_;
    RunOptions opt_;
    NetworkConfig net_;
    std::unique_ptr<Transport> base_;
    std::unique_ptr<LossyTransport> lossy_;
    Transport* transport_{nullptr};
    std::chrono::milliseconds wait_{0};

    std::optional<Subscription<DetectionMsg>> det_sub_;
    std::optional<Subscription<TrackerMsg>> trk_sub_;
    std::optional<Publisher<DetectionMsg>> det_pub_;
    std::optional<Publisher<TrackerMsg>> trk_pub_;
    std::optional<CommandSender> sender_;
    std::vector<CommandReceiver> receivers_;
    std::size_t det_expected_{0};
    std::size_t trk_expected_{0};
    std::vector<std::size_t> pending_;

    std::optional<SyntheticCamera> camera_;
    RebuildConfig rebuild_cfg_;
    std::optional<NodeSet> nodes_;

    std::vector<VehicleState> vehicles_;
    std::vector<ChaserState> guidance_;
    std::vector<std::optional<std::pair<FailureReason, std::string>>> crash_;
    std::vector<std::optional<std::int64_t>> last_seen_;
    std::vector<std::optional<double>> dock_time_;
    std::vector<double> end_time_;
    std::set<std::size_t> logged_landed_;
    RunMetrics metrics_;
};

} // namespace detail

/**
 * @brief Run one scenario to completion.
 *
 * Each cycle: vehicles fly to the cycle time (contact checked on substeps),
 * the tracker and the 2 FPS camera publish, guidance takes the newest
 * message per topic, computes accelerations, updates mission status, and
 * sends at most one command per chaser, which the vehicles execute at once.
 * Stops when every chaser is terminal or at max_duration_s.
 */
inline RunReport run(Scenario sc, const RunOptions& opt = {}) {
    if (opt.seed) sc.rng_seed = *opt.seed;
    if (opt.transport) sc.transport = *opt.transport;
    sc.validate();
    detail::Mission m(sc, opt);
    return m.run();
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace report_json {
using nlohmann::json;
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
} // namespace report_json

inline nlohmann::json to_json(const RunReport& r, bool include_trajectory = true) {
    using namespace report_json;
    json chasers = json::array();
    for (const auto& c : r.chasers) {
        chasers.push_back({{"id", c.id},
                           {"outcome", std::string(to_string(c.outcome))},
                           {"failure_reason", c.failure_reason ? json(std::string(to_string(*c.failure_reason))) : json(nullptr)},
                           {"failure_detail", c.failure_detail},
                           {"time_to_dock_s", c.time_to_dock_s ? json(*c.time_to_dock_s) : json(nullptr)},
                           {"end_time_s", c.end_time_s},
                           {"final_position", vec(c.final_position)}});
    }
    const auto& m = r.metrics;
    json j = {
        {"scenario", r.scenario},
        {"label", r.label},
        {"placement", std::string(to_string(r.placement))},
        {"rates_dps", {{"yaw", r.yaw_dps}, {"pitch", r.pitch_dps}, {"roll", r.roll_dps}}},
        {"seed", r.seed},
        {"transport", std::string(to_string(r.transport))},
        {"completed", r.completed},
        {"chasers", chasers},
        {"metrics",
         {{"min_inter_chaser_m", num(m.min_inter_chaser_m)},
          {"min_panel_clearance_m", num(m.min_panel_clearance_m)},
          {"min_body_clearance_m", num(m.min_body_clearance_m)},
          {"keepout_penetrations", m.keepout_penetrations},
          {"chaser_collisions", m.chaser_collisions},
          {"arena_exits", m.arena_exits},
          {"cycles", m.cycles},
          {"sim_time_s", m.sim_time_s},
          {"commands_sent", m.commands_sent},
          {"commands_rejected", m.commands_rejected},
          {"commands_deduplicated", m.commands_deduplicated},
          {"detection_frames", m.detection_frames},
          {"node_rebuilds", m.node_rebuilds},
          {"rebuild_failures", m.rebuild_failures},
          {"stale_tracker_holds", m.stale_tracker_holds},
          {"decode_errors", m.decode_errors},
          {"transport",
           {{"sent", m.transport.sent},
            {"delivered", m.transport.delivered},
            {"dropped", m.transport.dropped},
            {"duplicated", m.transport.duplicated},
            {"errors", m.transport.errors}}}}},
    };
    if (include_trajectory) {
        json traj = json::array();
        for (const auto& s : r.trajectory) {
            traj.push_back({{"t", s.t},
                            {"chaser_id", s.chaser_id},
                            {"true", vec(s.true_position)},
                            {"reported", vec(s.reported_position)},
                            {"status", std::string(to_string(s.status))}});
        }
        j["trajectory"] = traj;
    }
    return j;
}

inline std::string report_to_json_text(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

namespace detail {
inline std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
} // namespace detail

/// Trajectory CSV: t,chaser_id,x,y,z,status (true positions, APF meters).
inline std::string trajectory_csv(const RunReport& r) {
    std::string out = "t,chaser_id,x,y,z,status\n";
    for (const auto& s : r.trajectory) {
        out += detail::g17(s.t) + "," + s.chaser_id + "," + detail::g17(s.true_position.x) + "," +
               detail::g17(s.true_position.y) + "," + detail::g17(s.true_position.z) + "," +
               std::string(to_string(s.status)) + "\n";
    }
    return out;
}

inline std::optional<ChaserStatus> chaser_status_from_string(std::string_view s) {
    for (auto st : kAllStatuses) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

/// Inverse of trajectory_csv (reported positions are not part of the CSV and come back equal to true).
inline std::vector<TrajectorySample> parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "t,chaser_id,x,y,z,status") {
        throw std::runtime_error("trajectory csv: missing or unexpected header");
    }
    std::vector<TrajectorySample> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw std::runtime_error("trajectory csv line " + std::to_string(lineno) + ": expected 6 fields");
        auto number = [&](const std::string& s) {
            char* end = nullptr;
            const double x = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0') {
                throw std::runtime_error("trajectory csv line " + std::to_string(lineno) + ": bad number '" + s + "'");
            }
            return x;
        };
        TrajectorySample s;
        s.t = number(f[0]);
        s.chaser_id = f[1];
        s.true_position = {number(f[2]), number(f[3]), number(f[4])};
        s.reported_position = s.true_position;
        const auto st = chaser_status_from_string(f[5]);
        if (!st) throw std::runtime_error("trajectory csv line " + std::to_string(lineno) + ": bad status");
        s.status = *st;
        out.push_back(s);
    }
    return out;
}

/// Write a whole file or throw IoError naming the path.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError(path, "write failed");
}

enum class ExportFormat { Csv, Json };

/// Write the report in the given format into `dir`; returns the file written.
inline std::filesystem::path export_report(const RunReport& r, ExportFormat fmt, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create directory (" + ec.message() + ")");
    const auto path = dir / (r.scenario + (fmt == ExportFormat::Csv ? ".csv" : ".json"));
    write_file(path, fmt == ExportFormat::Csv ? trajectory_csv(r) : report_to_json_text(r));
    return path;
}

// ---------------------------------------------------------------------------
// Batch
// ---------------------------------------------------------------------------

struct BatchRow {
    std::string name;
    std::string label;
    Placement placement{Placement::Custom};
    double yaw_dps{0}, pitch_dps{0}, roll_dps{0};
    std::vector<std::string> outcomes;
    std::string failure_reasons; // "-" when none
    int successes{0};
    int keepout_penetrations{0};
};

struct BatchResult {
    std::vector<BatchRow> rows;
    std::vector<RunReport> reports;
};

inline std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError(dir, "not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw NoScenarios(dir);
    return files;
}

inline BatchRow summarize(const RunReport& r) {
    BatchRow row{r.scenario, r.label, r.placement, r.yaw_dps, r.pitch_dps, r.roll_dps, {}, "", r.successes(),
                 r.metrics.keepout_penetrations};
    std::string reasons;
    for (const auto& c : r.chasers) {
        row.outcomes.emplace_back(to_string(c.outcome));
        if (c.failure_reason) {
            if (!reasons.empty()) reasons += "; ";
            reasons += c.id + ": " + std::string(to_string(*c.failure_reason));
        }
    }
    row.failure_reasons = reasons.empty() ? "-" : reasons;
    return row;
}

inline BatchResult batch(const std::filesystem::path& dir, const RunOptions& opt = {}) {
    BatchResult out;
    for (const auto& f : scenario_files(dir)) {
        RunReport r = run(load_scenario(f), opt);
        out.rows.push_back(summarize(r));
        out.reports.push_back(std::move(r));
    }
    return out;
}

namespace detail {
inline std::string fmt_rate(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}
inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}
} // namespace detail

inline std::string batch_csv(const std::vector<BatchRow>& rows) {
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.outcomes.size());
    std::string out = "name,label,placement,yaw_dps,pitch_dps,roll_dps";
    for (std::size_t i = 0; i < width; ++i) out += ",drone" + std::to_string(i + 1);
    out += ",failure_reasons\n";
    for (const auto& r : rows) {
        out += detail::csv_cell(r.name) + "," + detail::csv_cell(r.label) + "," + std::string(to_string(r.placement)) +
               "," + detail::fmt_rate(r.yaw_dps) + "," + detail::fmt_rate(r.pitch_dps) + "," +
               detail::fmt_rate(r.roll_dps);
        for (std::size_t i = 0; i < width; ++i) out += "," + (i < r.outcomes.size() ? r.outcomes[i] : std::string("-"));
        out += "," + detail::csv_cell(r.failure_reasons) + "\n";
    }
    return out;
}

inline std::string batch_table(const std::vector<BatchRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.outcomes.size());
    std::vector<std::string> header{"Scenario", "Placement", "Yaw", "Pitch", "Roll"};
    for (std::size_t i = 0; i < width; ++i) header.push_back("Drone " + std::to_string(i + 1));
    header.push_back("Failure Reasoning");
    cells.push_back(header);
    for (const auto& r : rows) {
        std::vector<std::string> row{r.name, std::string(to_string(r.placement)), detail::fmt_rate(r.yaw_dps),
                                     detail::fmt_rate(r.pitch_dps), detail::fmt_rate(r.roll_dps)};
        for (std::size_t i = 0; i < width; ++i) row.push_back(i < r.outcomes.size() ? r.outcomes[i] : "-");
        row.push_back(r.failure_reasons);
        cells.push_back(row);
    }
    std::vector<std::size_t> w(header.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], row[c].size());
    std::string out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t c = 0; c < cells[r].size(); ++c) {
            out += cells[r][c];
            if (c + 1 < cells[r].size()) out += std::string(w[c] - cells[r][c].size() + 2, ' ');
        }
        out += "\n";
        if (r == 0) {
            std::size_t total = 0;
            for (auto x : w) total += x + 2;
            out += std::string(total - 2, '-') + "\n";
        }
    }
    return out;
}

} // namespace marvin
