#pragma once

// Scenario description and its on-disk JSON form (schema in README.md).

#include "marvin/apf_guidance.hpp"
#include "marvin/chaser_fleet.hpp"
#include "marvin/frames.hpp"
#include "marvin/transport.hpp"
#include "marvin/vision_sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace marvin {

enum class Placement { Scattered, RBar, VBar, RBarVBar, Extreme, ExtremeScattered, Custom };

inline std::string_view to_string(Placement p) {
    switch (p) {
    case Placement::Scattered: return "scattered";
    case Placement::RBar: return "rbar";
    case Placement::VBar: return "vbar";
    case Placement::RBarVBar: return "rbar_vbar";
    case Placement::Extreme: return "extreme";
    case Placement::ExtremeScattered: return "extreme_scattered";
    case Placement::Custom: return "custom";
    }
    return "?";
}

inline std::optional<Placement> placement_from_string(std::string_view s) {
    for (auto p : {Placement::Scattered, Placement::RBar, Placement::VBar, Placement::RBarVBar, Placement::Extreme,
                   Placement::ExtremeScattered, Placement::Custom}) {
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

/// Default starting positions for a named placement (APF, meters), for up to three chasers.
inline std::vector<Vec3> expand_placement(Placement p, std::size_t count) {
    std::vector<Vec3> base;
    switch (p) {
    case Placement::Scattered: base = {{-1.9, -1.1, 0.4}, {-1.4, 0.3, -0.4}, {-2.2, 1.3, 0.3}}; break;
    case Placement::RBar: base = {{-1.5, 0.0, -1.05}, {-1.5, 0.0, 0.0}, {-1.5, 0.0, 1.05}}; break;
    case Placement::VBar: base = {{-1.1, 0.0, 0.0}, {-1.75, 0.0, 0.0}, {-2.4, 0.0, 0.0}}; break;
    case Placement::RBarVBar: base = {{-1.2, 0.0, 0.0}, {-2.3, 0.0, 0.0}, {-1.6, 0.0, -1.05}}; break;
    case Placement::Extreme: base = {{-2.4, -1.8, -1.1}, {-2.4, 1.8, 1.1}, {-2.4, 1.8, -1.1}}; break;
    case Placement::ExtremeScattered: base = {{-2.4, -1.8, -1.1}, {-1.4, 0.3, -0.4}, {-2.2, 1.3, 0.3}}; break;
    case Placement::Custom: break;
    }
    if (count > base.size()) throw ConfigError("placement '" + std::string(to_string(p)) + "' defines only " +
                                               std::to_string(base.size()) + " positions");
    base.resize(count);
    return base;
}

enum class TransportKind { InProcess, Udp };

inline std::string_view to_string(TransportKind t) { return t == TransportKind::Udp ? "udp" : "inproc"; }

struct ChaserSpec {
    std::string id;
    Vec3 start{};
    FaultSpec faults{};
};

struct ArenaBounds {
    Vec3 min{-2.5, -2.0, -1.25};
    Vec3 max{1.5, 2.0, 1.25};

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
    }
};

struct CameraSpec {
    Pose pose{Pose::look_at({-3.0, 0.0, 0.0}, {0.0, 0.0, 0.0})};
    RenderConfig render{};
    double noise_sigma_m{0.01};
    double frame_period_s{0.5};
};

struct Scenario {
    std::string name;
    std::string label; // e.g. the lab test this run is an analog of
    Placement placement{Placement::Custom};
    std::vector<ChaserSpec> chasers;
    TargetMockup target{};
    CameraSpec camera{};
    Pose tracker_pose{};
    ApfConfig apf{};
    RebuildConfig rebuild{};
    QuantizeConfig quantize{};
    VehicleKinematics vehicle{};
    ArenaBounds arena{};
    double collision_distance_m{0.15}; // chaser-chaser contact
    double vehicle_radius_m{0.075};    // footprint used for target keep-out
    double tracker_stale_s{1.0};
    std::uint64_t rng_seed{1};
    double max_duration_s{420.0};
    TransportKind transport{TransportKind::InProcess};
    NetworkConfig network{};

    /// Largest depth-noise multiplier requested by any chaser's fault spec.
    double depth_noise_multiplier() const {
        double m = 1.0;
        for (const auto& c : chasers) m = std::max(m, c.faults.depth_noise_multiplier);
        return m;
    }

    /// Rebuild settings with gains and dimensions taken from the field config and target.
    RebuildConfig effective_rebuild() const {
        RebuildConfig r = rebuild;
        r.mu_attractive = apf.mu_attractive;
        r.mu_repulsive = apf.mu_repulsive;
        r.body_half_extents = target.body_half_extents;
        return r;
    }

    void validate() const {
        if (chasers.empty()) throw ConfigError("scenario '" + name + "': needs at least one chaser");
        if (!(max_duration_s > 0)) throw ConfigError("scenario '" + name + "': max_duration_s must be > 0");
        if (!target.valid()) throw ConfigError("scenario '" + name + "': invalid target mockup");
        if (!camera.pose.valid()) throw ConfigError("scenario '" + name + "': invalid camera pose");
        if (!tracker_pose.valid()) throw ConfigError("scenario '" + name + "': invalid tracker pose");
        if (!(rebuild.inflation > 0)) throw ConfigError("scenario '" + name + "': inflation must be > 0");
        if (!(vehicle_radius_m >= 0) || !(collision_distance_m >= 0)) {
            throw ConfigError("scenario '" + name + "': vehicle_radius_m and collision_distance_m must be >= 0");
        }
        if (!(camera.frame_period_s > 0)) throw ConfigError("scenario '" + name + "': frame_period_s must be > 0");
        apf.validate();
        std::set<std::string> ids;
        for (const auto& c : chasers) {
            if (c.id.empty()) throw ConfigError("scenario '" + name + "': chaser id must not be empty");
            if (!ids.insert(c.id).second) throw ConfigError("scenario '" + name + "': duplicate chaser id " + c.id);
            if (!is_finite(c.start)) throw ConfigError("scenario '" + name + "': non-finite start for " + c.id);
            if (!arena.contains(c.start)) throw ConfigError("scenario '" + name + "': " + c.id + " starts outside the arena");
            if (c.faults.depth_noise_multiplier < 1.0) throw ConfigError("depth_noise_multiplier must be >= 1");
        }
    }
};

namespace scenario_json {

using nlohmann::json;

inline Vec3 vec(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
        throw ConfigError(where + ": expected [x, y, z]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline void read_vec(const json& obj, const char* key, Vec3& out, const std::string& where) {
    if (auto it = obj.find(key); it != obj.end()) out = vec(*it, where + "." + key);
}

inline Pose pose(const json& j, const Pose& fallback, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected object");
    Pose p = fallback;
    read_vec(j, "position", p.position, where);
    if (auto it = j.find("look_at"); it != j.end()) {
        Vec3 down{0, 0, 1};
        read_vec(j, "down", down, where);
        p = Pose::look_at(p.position, vec(*it, where + ".look_at"), down);
    } else if (auto q = j.find("orientation_xyzw"); q != j.end()) {
        if (!q->is_array() || q->size() != 4) throw ConfigError(where + ".orientation_xyzw: expected 4 numbers");
        p.orientation = Quaternion{(*q)[0].get<double>(), (*q)[1].get<double>(), (*q)[2].get<double>(),
                                   (*q)[3].get<double>()}
                            .normalized();
    }
    return p;
}

inline json pose(const Pose& p) {
    const auto& q = p.orientation;
    return {{"position", vec(p.position)}, {"orientation_xyzw", json::array({q.x, q.y, q.z, q.w})}};
}

inline FaultSpec faults(const json& j, const std::string& where) {
    FaultSpec f;
    if (auto it = j.find("imu_drift_sigma_m"); it != j.end() && !it->is_null()) f.imu_drift = ImuDrift{it->get<double>()};
    if (auto it = j.find("tracker_spoof"); it != j.end() && !it->is_null()) {
        TrackerSpoof s;
        read_vec(*it, "trigger_center", s.trigger_center, where + ".tracker_spoof");
        read(*it, "trigger_radius_m", s.trigger_radius_m, where + ".tracker_spoof");
        read_vec(*it, "offset", s.offset, where + ".tracker_spoof");
        f.tracker_spoof = s;
    }
    read(j, "depth_noise_multiplier", f.depth_noise_multiplier, where);
    return f;
}

inline json faults(const FaultSpec& f) {
    json j = json::object();
    if (f.imu_drift) j["imu_drift_sigma_m"] = f.imu_drift->sigma_m;
    if (f.tracker_spoof) {
        j["tracker_spoof"] = {{"trigger_center", vec(f.tracker_spoof->trigger_center)},
                              {"trigger_radius_m", f.tracker_spoof->trigger_radius_m},
                              {"offset", vec(f.tracker_spoof->offset)}};
    }
    if (f.depth_noise_multiplier != 1.0) j["depth_noise_multiplier"] = f.depth_noise_multiplier;
    return j;
}

} // namespace scenario_json

inline Scenario scenario_from_json(const nlohmann::json& j) {
    using namespace scenario_json;
    if (!j.is_object()) throw ConfigError("scenario: top level must be an object");
    Scenario s;
    read(j, "name", s.name, "scenario");
    if (s.name.empty()) throw ConfigError("scenario: missing 'name'");
    const std::string where = "scenario '" + s.name + "'";
    read(j, "label", s.label, where);
    if (auto it = j.find("placement"); it != j.end()) {
        auto p = placement_from_string(it->get<std::string>());
        if (!p) throw ConfigError(where + ": unknown placement '" + it->get<std::string>() + "'");
        s.placement = *p;
    }
    read(j, "rng_seed", s.rng_seed, where);
    read(j, "max_duration_s", s.max_duration_s, where);
    read(j, "collision_distance_m", s.collision_distance_m, where);
    read(j, "vehicle_radius_m", s.vehicle_radius_m, where);
    read(j, "tracker_stale_s", s.tracker_stale_s, where);
    if (auto it = j.find("transport"); it != j.end()) {
        const auto t = it->get<std::string>();
        if (t == "inproc") s.transport = TransportKind::InProcess;
        else if (t == "udp") s.transport = TransportKind::Udp;
        else throw ConfigError(where + ": transport must be 'inproc' or 'udp'");
    }

    if (auto it = j.find("target"); it != j.end()) {
        const auto& t = *it;
        const std::string tw = where + ".target";
        read_vec(t, "body_half_extents", s.target.body_half_extents, tw);
        if (auto p = t.find("pose"); p != t.end()) s.target.pose = pose(*p, s.target.pose, tw + ".pose");
        if (auto r = t.find("rates_dps"); r != t.end()) {
            read(*r, "yaw", s.target.yaw_rate_dps, tw);
            read(*r, "pitch", s.target.pitch_rate_dps, tw);
            read(*r, "roll", s.target.roll_rate_dps, tw);
        }
        if (auto ps = t.find("panels"); ps != t.end()) {
            for (const auto& pj : *ps) {
                PanelSpec p;
                read_vec(pj, "center", p.center, tw + ".panels");
                read_vec(pj, "half_u", p.half_u, tw + ".panels");
                read_vec(pj, "half_v", p.half_v, tw + ".panels");
                read(pj, "thickness", p.thickness, tw + ".panels");
                s.target.panels.push_back(p);
            }
        }
    }

    if (auto it = j.find("camera"); it != j.end()) {
        const auto& c = *it;
        const std::string cw = where + ".camera";
        s.camera.pose = pose(c, s.camera.pose, cw);
        read(c, "noise_sigma_m", s.camera.noise_sigma_m, cw);
        read(c, "frame_period_s", s.camera.frame_period_s, cw);
        read(c, "max_range_m", s.camera.render.max_range_m, cw);
        read(c, "corner_inset", s.camera.render.corner_inset, cw);
        read(c, "min_view_cos", s.camera.render.min_view_cos, cw);
        if (auto in = c.find("intrinsics"); in != c.end()) {
            auto& k = s.camera.render.intrinsics;
            read(*in, "width", k.width, cw);
            read(*in, "height", k.height, cw);
            read(*in, "fx", k.fx, cw);
            read(*in, "fy", k.fy, cw);
            read(*in, "cx", k.cx, cw);
            read(*in, "cy", k.cy, cw);
        }
    }
    if (auto it = j.find("tracker"); it != j.end()) s.tracker_pose = pose(*it, s.tracker_pose, where + ".tracker");

    if (auto it = j.find("apf"); it != j.end()) {
        const auto& a = *it;
        const std::string aw = where + ".apf";
        read(a, "mu_attractive", s.apf.mu_attractive, aw);
        read(a, "mu_repulsive", s.apf.mu_repulsive, aw);
        read(a, "r_switch", s.apf.r_switch, aw);
        read(a, "damping", s.apf.damping, aw);
        read(a, "mu_chaser", s.apf.mu_chaser, aw);
        read(a, "chaser_avoid_radius", s.apf.chaser_avoid_radius, aw);
        read(a, "dock_range", s.apf.dock_range, aw);
        read(a, "dock_cycles", s.apf.dock_cycles, aw);
        read(a, "cycle_period", s.apf.cycle_period, aw);
        read(a, "hill_enabled", s.apf.hill_enabled, aw);
        read(a, "omega", s.apf.omega, aw);
        read(a, "omega_dot", s.apf.omega_dot, aw);
        read(a, "stall_threshold", s.apf.stall_threshold, aw);
        read(a, "stall_limit", s.apf.stall_limit, aw);
        if (auto d = a.find("damping_mode"); d != a.end()) {
            const auto m = d->get<std::string>();
            if (m == "relative_position") s.apf.damping_mode = DampingMode::RelativePosition;
            else if (m == "unit_direction") s.apf.damping_mode = DampingMode::UnitDirection;
            else throw ConfigError(aw + ".damping_mode: expected relative_position or unit_direction");
        }
    }
    if (auto it = j.find("rebuild"); it != j.end()) {
        read(*it, "inflation", s.rebuild.inflation, where + ".rebuild");
        read(*it, "centroid_depth_offset", s.rebuild.centroid_depth_offset, where + ".rebuild");
    }
    if (auto it = j.find("quantize"); it != j.end()) {
        read(*it, "deadband_m", s.quantize.deadband_m, where + ".quantize");
        read(*it, "min_move_cm", s.quantize.min_move_cm, where + ".quantize");
        read(*it, "max_step_cm", s.quantize.max_step_cm, where + ".quantize");
        read(*it, "speed_cm_s", s.quantize.speed_cm_s, where + ".quantize");
    }
    if (auto it = j.find("vehicle"); it != j.end()) {
        read(*it, "overshoot_fraction", s.vehicle.overshoot_fraction, where + ".vehicle");
        read(*it, "settle_time_s", s.vehicle.settle_time_s, where + ".vehicle");
        read(*it, "battery_s", s.vehicle.battery_s, where + ".vehicle");
    }
    if (auto it = j.find("arena"); it != j.end()) {
        read_vec(*it, "min", s.arena.min, where + ".arena");
        read_vec(*it, "max", s.arena.max, where + ".arena");
    }
    if (auto it = j.find("network"); it != j.end()) {
        auto ep = [&](const char* key, Endpoint& e) {
            if (auto n = it->find(key); n != it->end()) {
                read(*n, "host", e.host, where + ".network");
                read(*n, "port", e.port, where + ".network");
            }
        };
        ep("detections", s.network.detections);
        ep("tracker", s.network.tracker);
        read(*it, "command_host", s.network.command_host, where + ".network");
        read(*it, "command_base_port", s.network.command_base_port, where + ".network");
    }

    std::vector<Vec3> defaults;
    const auto chasers = j.find("chasers");
    if (chasers == j.end() || !chasers->is_array() || chasers->empty()) {
        throw ConfigError(where + ": 'chasers' must be a non-empty array");
    }
    for (std::size_t i = 0; i < chasers->size(); ++i) {
        const auto& cj = (*chasers)[i];
        ChaserSpec c;
        c.id = "drone" + std::to_string(i + 1);
        read(cj, "id", c.id, where + ".chasers");
        if (auto p = cj.find("position"); p != cj.end()) {
            c.start = vec(*p, where + ".chasers[" + std::to_string(i) + "].position");
        } else {
            if (defaults.empty()) defaults = expand_placement(s.placement, chasers->size());
            c.start = defaults.at(i);
        }
        if (auto f = cj.find("faults"); f != cj.end()) c.faults = faults(*f, where + ".chasers." + c.id);
        s.chasers.push_back(c);
    }
    s.validate();
    return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    using namespace scenario_json;
    json panels = json::array();
    for (const auto& p : s.target.panels) {
        panels.push_back({{"center", vec(p.center)}, {"half_u", vec(p.half_u)}, {"half_v", vec(p.half_v)},
                          {"thickness", p.thickness}});
    }
    json chasers = json::array();
    for (const auto& c : s.chasers) {
        chasers.push_back({{"id", c.id}, {"position", vec(c.start)}, {"faults", faults(c.faults)}});
    }
    const auto& k = s.camera.render.intrinsics;
    json camera = pose(s.camera.pose);
    camera["noise_sigma_m"] = s.camera.noise_sigma_m;
    camera["frame_period_s"] = s.camera.frame_period_s;
    camera["max_range_m"] = s.camera.render.max_range_m;
    camera["corner_inset"] = s.camera.render.corner_inset;
    camera["min_view_cos"] = s.camera.render.min_view_cos;
    camera["intrinsics"] = {{"width", k.width}, {"height", k.height}, {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
    return {
        {"name", s.name},
        {"label", s.label},
        {"placement", std::string(to_string(s.placement))},
        {"rng_seed", s.rng_seed},
        {"max_duration_s", s.max_duration_s},
        {"collision_distance_m", s.collision_distance_m},
        {"vehicle_radius_m", s.vehicle_radius_m},
        {"tracker_stale_s", s.tracker_stale_s},
        {"transport", std::string(to_string(s.transport))},
        {"target",
         {{"body_half_extents", vec(s.target.body_half_extents)},
          {"pose", pose(s.target.pose)},
          {"rates_dps", {{"yaw", s.target.yaw_rate_dps}, {"pitch", s.target.pitch_rate_dps}, {"roll", s.target.roll_rate_dps}}},
          {"panels", panels}}},
        {"camera", camera},
        {"tracker", pose(s.tracker_pose)},
        {"apf",
         {{"mu_attractive", s.apf.mu_attractive},
          {"mu_repulsive", s.apf.mu_repulsive},
          {"r_switch", s.apf.r_switch},
          {"damping", s.apf.damping},
          {"mu_chaser", s.apf.mu_chaser},
          {"chaser_avoid_radius", s.apf.chaser_avoid_radius},
          {"dock_range", s.apf.dock_range},
          {"dock_cycles", s.apf.dock_cycles},
          {"cycle_period", s.apf.cycle_period},
          {"hill_enabled", s.apf.hill_enabled},
          {"omega", s.apf.omega},
          {"omega_dot", s.apf.omega_dot},
          {"stall_threshold", s.apf.stall_threshold},
          {"stall_limit", s.apf.stall_limit},
          {"damping_mode", s.apf.damping_mode == DampingMode::RelativePosition ? "relative_position" : "unit_direction"}}},
        {"rebuild", {{"inflation", s.rebuild.inflation}, {"centroid_depth_offset", s.rebuild.centroid_depth_offset}}},
        {"quantize",
         {{"deadband_m", s.quantize.deadband_m},
          {"min_move_cm", s.quantize.min_move_cm},
          {"max_step_cm", s.quantize.max_step_cm},
          {"speed_cm_s", s.quantize.speed_cm_s}}},
        {"vehicle",
         {{"overshoot_fraction", s.vehicle.overshoot_fraction},
          {"settle_time_s", s.vehicle.settle_time_s},
          {"battery_s", s.vehicle.battery_s}}},
        {"arena", {{"min", vec(s.arena.min)}, {"max", vec(s.arena.max)}}},
        {"network",
         {{"detections", {{"host", s.network.detections.host}, {"port", s.network.detections.port}}},
          {"tracker", {{"host", s.network.tracker.host}, {"port", s.network.tracker.port}}},
          {"command_host", s.network.command_host},
          {"command_base_port", s.network.command_base_port}}},
        {"chasers", chasers},
    };
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

} // namespace marvin
