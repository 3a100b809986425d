#pragma once

// Potential-field guidance: node field with R-switch and velocity damping,
// chaser-chaser repulsion, Hill relative dynamics, and the per-cycle mission
// status machine (docking, global freeze, inspection orbit).

#include "marvin/frames.hpp"
#include "marvin/vision_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace marvin {

class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Which vector the damping dot product uses.
enum class DampingMode {
    RelativePosition, // c * (v . rho), scales with distance
    UnitDirection,    // c * (v . rho_hat)
};

struct ApfConfig {
    double mu_attractive{0.1};     // 1/s^2
    double mu_repulsive{-0.015};   // 1/s^2
    double r_switch{2.0};          // m
    double damping{0.08};          // 1/(m s) in RelativePosition mode
    double mu_chaser{-2.5};        // m/s^2
    double chaser_avoid_radius{1.0};
    double dock_range{0.5};        // m
    int dock_cycles{2};
    double cycle_period{0.25};     // s
    bool hill_enabled{false};
    double omega{0.0};             // rad/s
    double omega_dot{0.0};         // rad/s^2
    int stall_threshold{4};        // cycles before the integration step is doubled
    int stall_limit{40};           // cycles before a stalled chaser is declared in inspection orbit
    DampingMode damping_mode{DampingMode::RelativePosition};

    void validate() const {
        auto fail = [](const char* msg) { throw ConfigError(std::string("apf config: ") + msg); };
        if (!(mu_attractive > 0)) fail("mu_attractive must be > 0");
        if (!(mu_repulsive < 0)) fail("mu_repulsive must be < 0");
        if (!(mu_chaser < 0)) fail("mu_chaser must be < 0");
        if (!(r_switch > 0)) fail("r_switch must be > 0");
        if (!(damping >= 0)) fail("damping must be >= 0");
        if (!(chaser_avoid_radius >= 0)) fail("chaser_avoid_radius must be >= 0");
        if (!(dock_range > 0)) fail("dock_range must be > 0");
        if (dock_cycles < 1) fail("dock_cycles must be >= 1");
        if (!(cycle_period > 0)) fail("cycle_period must be > 0");
        if (stall_threshold < 1 || stall_limit < stall_threshold) fail("need 1 <= stall_threshold <= stall_limit");
        if (!std::isfinite(omega) || !std::isfinite(omega_dot)) fail("omega must be finite");
    }
};

enum class ChaserStatus { Active, Frozen, Docked, InspectionOrbit, Failed };

inline constexpr ChaserStatus kAllStatuses[] = {ChaserStatus::Active, ChaserStatus::Frozen, ChaserStatus::Docked,
                                                ChaserStatus::InspectionOrbit, ChaserStatus::Failed};

inline std::string_view to_string(ChaserStatus s) {
    switch (s) {
    case ChaserStatus::Active: return "active";
    case ChaserStatus::Frozen: return "frozen";
    case ChaserStatus::Docked: return "docked";
    case ChaserStatus::InspectionOrbit: return "inspection_orbit";
    case ChaserStatus::Failed: return "failed";
    }
    return "?";
}

inline bool is_terminal(ChaserStatus s) {
    return s == ChaserStatus::Docked || s == ChaserStatus::InspectionOrbit || s == ChaserStatus::Failed;
}

/// Landed chasers are out of the field entirely.
inline bool has_landed(ChaserStatus s) { return s == ChaserStatus::Docked || s == ChaserStatus::Failed; }

struct ChaserState {
    int id{0};
    ApfVec position{};
    ApfVec velocity{};
    ChaserStatus status{ChaserStatus::Active};
    int dock_counter{0};
    int stall_counter{0};
    Vec3 last_rho_hat{1.0, 0.0, 0.0}; // fallback direction for node-coincident evaluations
};

inline constexpr double kCoincidenceEps = 1e-6;

/// Contribution of one node; the building block of field_acceleration.
inline Vec3 node_acceleration(const ChaserState& ch, const FieldNode& node, const ApfConfig& cfg) {
    const Vec3 rho = ch.position.value - node.position.value;
    const double dist = norm(rho);
    const Vec3 rho_hat = dist < kCoincidenceEps ? ch.last_rho_hat : rho / dist;
    const Vec3& v = ch.velocity.value;
    const double damp = cfg.damping * (cfg.damping_mode == DampingMode::RelativePosition ? dot(v, rho) : dot(v, rho_hat));
    const double scalar = node.kind == NodeKind::Repulsive ? node.gain * (cfg.r_switch - dist) + damp
                                                           : node.gain * dist + damp;
    return -scalar * rho_hat;
}

/// Superposed node field: repulsive terms switch sign beyond r_switch, attractive terms grow linearly.
inline Vec3 field_acceleration(const ChaserState& ch, const NodeSet& nodes, const ApfConfig& cfg) {
    if (nodes.empty()) throw std::invalid_argument("field_acceleration: empty node set");
    Vec3 acc{};
    for (const auto& n : nodes.nodes) acc += node_acceleration(ch, n, cfg);
    return acc;
}

/// Direction from the nearest node toward the chaser; used to refresh last_rho_hat.
inline Vec3 nearest_node_direction(const ChaserState& ch, const NodeSet& nodes) {
    double best = std::numeric_limits<double>::infinity();
    Vec3 dir = ch.last_rho_hat;
    for (const auto& n : nodes.nodes) {
        const Vec3 rho = ch.position.value - n.position.value;
        const double d = norm(rho);
        if (d >= kCoincidenceEps && d < best) {
            best = d;
            dir = rho / d;
        }
    }
    return dir;
}

/// Repulsion on `ch` from one other chaser; exact negation when the roles swap.
inline Vec3 pair_repulsion(const ChaserState& ch, const ChaserState& other, const ApfConfig& cfg) {
    if (has_landed(other.status) || has_landed(ch.status)) return {};
    const Vec3 rel = ch.position.value - other.position.value;
    const double dist = norm(rel);
    if (!(dist <= cfg.chaser_avoid_radius)) return {};
    Vec3 away;
    if (dist < kCoincidenceEps) {
        // deterministic tie-break: higher id goes +x
        away = ch.id > other.id ? Vec3{1, 0, 0} : Vec3{-1, 0, 0};
    } else {
        away = rel / dist;
    }
    return -(cfg.mu_chaser / std::exp(dist)) * away;
}

inline Vec3 chaser_chaser_acceleration(const ChaserState& ch, std::span<const ChaserState> others,
                                       const ApfConfig& cfg) {
    Vec3 acc{};
    for (const auto& o : others) {
        if (o.id == ch.id) continue;
        acc += pair_repulsion(ch, o, cfg);
    }
    return acc;
}

/// Hill / Clohessy-Wiltshire terms in the APF (LVLH) frame.
inline Vec3 hill_acceleration(const ChaserState& ch, const ApfConfig& cfg) {
    const Vec3& r = ch.position.value;
    const Vec3& v = ch.velocity.value;
    const double w = cfg.omega, wd = cfg.omega_dot;
    return {2.0 * w * v.z + wd * r.z, -w * w * r.y, 3.0 * w * w * r.z - 2.0 * w * v.x - wd * r.x};
}

inline Vec3 total_acceleration(const ChaserState& ch, std::span<const ChaserState> others, const NodeSet& nodes,
                               const ApfConfig& cfg) {
    Vec3 acc = field_acceleration(ch, nodes, cfg) + chaser_chaser_acceleration(ch, others, cfg);
    if (cfg.hill_enabled) acc += hill_acceleration(ch, cfg);
    return acc;
}

inline double distance_to_dock(const ChaserState& ch, const NodeSet& nodes) {
    return std::min(distance(ch.position.value, nodes.dock_node(0).position.value),
                    distance(ch.position.value, nodes.dock_node(1).position.value));
}

/// True while some chaser is part-way through its docking window.
inline bool dock_pending(std::span<const ChaserState> all, const ApfConfig& cfg) {
    for (const auto& c : all) {
        if (!is_terminal(c.status) && c.dock_counter > 0 && c.dock_counter < cfg.dock_cycles) return true;
    }
    return false;
}

/// A chaser may be sent a move this cycle.
inline bool may_move(const ChaserState& ch) { return ch.status == ChaserStatus::Active && ch.dock_counter == 0; }

/// The next command for this chaser integrates over a doubled time step.
inline bool inspection_boost(const ChaserState& ch, const ApfConfig& cfg) {
    return ch.stall_counter >= cfg.stall_threshold;
}

/**
 * @brief One guidance cycle of the mission status machine.
 *
 * `stalled[i]` reports that chaser i's quantized command this cycle was a hold
 * because every axis fell below the minimum move. Returns the new states;
 * inputs are not modified.
 *
 * - Docking: a chaser within dock_range of either primary dock node counts
 *   up, otherwise resets to zero; reaching dock_cycles makes it Docked.
 * - Freeze: while any docking window is open, every other flying chaser is
 *   Frozen; they return to Active once no window is open.
 * - Stall: consecutive stalled cycles of a free Active chaser accumulate;
 *   at stall_limit it becomes InspectionOrbit.
 * - Docked, InspectionOrbit and Failed are absorbing.
 */
inline std::vector<ChaserState> update_status(std::span<const ChaserState> all, const NodeSet& nodes,
                                              const ApfConfig& cfg, std::span<const bool> stalled) {
    if (stalled.size() != all.size()) throw std::invalid_argument("update_status: stalled flags size mismatch");
    std::vector<ChaserState> next(all.begin(), all.end());

    for (auto& c : next) {
        if (is_terminal(c.status)) continue;
        if (distance_to_dock(c, nodes) <= cfg.dock_range) {
            c.dock_counter = std::min(c.dock_counter + 1, cfg.dock_cycles);
        } else {
            c.dock_counter = 0;
        }
        if (c.dock_counter >= cfg.dock_cycles) {
            c.status = ChaserStatus::Docked;
            c.velocity = ApfVec{};
        }
    }

    const bool pending = dock_pending(next, cfg);
    for (std::size_t i = 0; i < next.size(); ++i) {
        auto& c = next[i];
        if (is_terminal(c.status)) continue;
        if (pending && c.dock_counter == 0) {
            c.status = ChaserStatus::Frozen;
            continue;
        }
        c.status = ChaserStatus::Active;
        if (c.dock_counter > 0) {
            c.stall_counter = 0;
            continue;
        }
        // A chaser that was frozen last cycle received no command to judge.
        if (all[i].status != ChaserStatus::Active) continue;
        c.stall_counter = stalled[i] ? c.stall_counter + 1 : 0;
        if (c.stall_counter >= cfg.stall_limit) c.status = ChaserStatus::InspectionOrbit;
    }
    return next;
}

/// Out-of-band failure (crash, battery). Docked chasers have already landed and are left alone.
inline ChaserState mark_failed(ChaserState ch) {
    if (ch.status != ChaserStatus::Docked) {
        ch.status = ChaserStatus::Failed;
        ch.velocity = ApfVec{};
    }
    return ch;
}

} // namespace marvin
