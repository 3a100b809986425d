#pragma once

// Synthetic stand-in for the detector + depth camera, and the reconstruction
// of the potential-field node set from detections.

#include "marvin/frames.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <ranges>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace marvin {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }

enum class ComponentClass { SolarPanel, Body };

inline std::string_view to_string(ComponentClass c) {
    return c == ComponentClass::SolarPanel ? "solar_panel" : "body";
}

inline std::optional<ComponentClass> component_class_from_string(std::string_view s) {
    if (s == "solar_panel") return ComponentClass::SolarPanel;
    if (s == "body") return ComponentClass::Body;
    return std::nullopt;
}

/// The detection could not be turned into five 3D points.
class DetectionDropped : public std::runtime_error {
public:
    explicit DetectionDropped(const std::string& what) : std::runtime_error(what) {}
};

/// No body detection was available to anchor the node set.
class NodeRebuildFailed : public std::runtime_error {
public:
    explicit NodeRebuildFailed(const std::string& what) : std::runtime_error(what) {}
};

struct PixelPoint {
    double u{0.0};
    double v{0.0};
};

struct BoundingBox {
    double u_min{0.0};
    double v_min{0.0};
    double u_max{0.0};
    double v_max{0.0};

    double width() const { return u_max - u_min; }
    double height() const { return v_max - v_min; }
    bool degenerate() const { return !(width() > 0.0) || !(height() > 0.0); }
    bool contains(double u, double v) const { return u >= u_min && u <= u_max && v >= v_min && v <= v_max; }
};

/// Pinhole intrinsics. Defaults approximate the D435i color stream (69 deg HFOV, 848x480).
struct CameraIntrinsics {
    int width{848};
    int height{480};
    double fx{424.0 / std::tan(deg2rad(69.0) / 2.0)};
    double fy{424.0 / std::tan(deg2rad(69.0) / 2.0)};
    double cx{424.0};
    double cy{240.0};

    CameraVec back_project(double u, double v, double depth) const {
        return CameraVec{(u - cx) * depth / fx, (v - cy) * depth / fy, depth};
    }

    PixelPoint project(const CameraVec& p) const {
        return {cx + fx * p.value.x / p.value.z, cy + fy * p.value.y / p.value.z};
    }

    /// Unnormalized ray direction through a pixel, with unit camera-z component.
    Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

/// Depth (camera z, meters) at a pixel, or nullopt where the sensor has no return.
using DepthLookup = std::function<std::optional<double>(double u, double v)>;

/**
 * @brief Five 3D samples of a bounding box: P1 at the centroid, P2..P5 near
 * the corners (top-left, top-right, bottom-right, bottom-left), inset by
 * `inset` of the box width/height.
 *
 * A sample without depth takes the nearest valid depth inside the box; the
 * point is still back-projected through its own pixel.
 */
inline std::array<CameraVec, 5> extract_five_points(const BoundingBox& bbox, const DepthLookup& depth,
                                                    const CameraIntrinsics& intr, double inset = 0.1) {
    if (bbox.degenerate()) {
        throw DetectionDropped("degenerate bounding box");
    }
    const double du = inset * bbox.width();
    const double dv = inset * bbox.height();
    const std::array<PixelPoint, 5> samples{{
        {(bbox.u_min + bbox.u_max) / 2.0, (bbox.v_min + bbox.v_max) / 2.0},
        {bbox.u_min + du, bbox.v_min + dv},
        {bbox.u_max - du, bbox.v_min + dv},
        {bbox.u_max - du, bbox.v_max - dv},
        {bbox.u_min + du, bbox.v_max - dv},
    }};

    auto valid = [](const std::optional<double>& d) { return d && std::isfinite(*d) && *d > 0.0; };

    auto nearest_valid = [&](const PixelPoint& s) -> std::optional<double> {
        const int max_ring = static_cast<int>(std::ceil(std::max(bbox.width(), bbox.height()))) + 1;
        std::optional<double> best;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int r = 1; r <= max_ring; ++r) {
            for (int dy = -r; dy <= r; ++dy) {
                const int step = (dy == -r || dy == r) ? 1 : 2 * r;
                for (int dx = -r; dx <= r; dx += step) {
                    const double u = s.u + dx;
                    const double v = s.v + dy;
                    if (!bbox.contains(u, v)) continue;
                    const double d2 = static_cast<double>(dx * dx + dy * dy);
                    if (d2 >= best_d2) continue;
                    if (auto d = depth(u, v); valid(d)) {
                        best = d;
                        best_d2 = d2;
                    }
                }
            }
            if (best && best_d2 <= static_cast<double>(r) * r) break;
        }
        return best;
    };

    std::array<CameraVec, 5> out{};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::optional<double> d = depth(samples[i].u, samples[i].v);
        if (!valid(d)) d = nearest_valid(samples[i]);
        if (!d) throw DetectionDropped("no valid depth inside bounding box");
        out[i] = intr.back_project(samples[i].u, samples[i].v, *d);
    }
    return out;
}

/// Flat solar panel rectangle in the target body frame.
struct PanelSpec {
    Vec3 center{};
    Vec3 half_u{};          // half-span along the first edge
    Vec3 half_v{};          // half-span along the second edge
    double thickness{0.02}; // keep-out slab thickness (m)

    Vec3 normal() const { return normalized(cross(half_u, half_v)); }
};

/// Parametric target: a box body with attached panels, spinning at constant body rates.
struct TargetMockup {
    Vec3 body_half_extents{0.2, 0.2, 0.2};
    std::vector<PanelSpec> panels;
    Pose pose{};               // at t = 0, in APF
    double yaw_rate_dps{0.0};  // about APF z
    double pitch_rate_dps{0.0};
    double roll_rate_dps{0.0};

    bool valid() const {
        if (!(body_half_extents.x > 0 && body_half_extents.y > 0 && body_half_extents.z > 0)) return false;
        for (const auto& p : panels) {
            if (!(norm(p.half_u) > 0 && norm(p.half_v) > 0 && norm(cross(p.half_u, p.half_v)) > 0)) return false;
        }
        return pose.valid();
    }

    Quaternion attitude_at(double t) const {
        const Vec3 w{deg2rad(roll_rate_dps), deg2rad(pitch_rate_dps), deg2rad(yaw_rate_dps)};
        const double rate = norm(w);
        if (rate == 0.0) return pose.orientation;
        return (Quaternion::from_axis_angle(w, rate * t) * pose.orientation).normalized();
    }

    Pose pose_at(double t) const { return {pose.position, attitude_at(t)}; }
};

struct NoiseSpec {
    double sigma_m{0.0};          // per-axis point noise
    double depth_multiplier{1.0}; // scales sigma on the camera depth axis
};

struct Detection {
    ComponentClass kind{ComponentClass::Body};
    BoundingBox bbox{};
    std::array<CameraVec, 5> points{};
};

struct RenderConfig {
    CameraIntrinsics intrinsics{};
    double corner_inset{0.1};
    double max_range_m{5.0};
    double min_view_cos{0.05}; // panels closer to edge-on than this are not detected
};

namespace detail {

// Slab-method ray/box hit in box coordinates; returns entry distance.
inline std::optional<double> ray_box(const Vec3& o, const Vec3& d, const Vec3& half) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const double oi = o[i], di = d[i], hi = half[i];
        if (std::abs(di) < 1e-15) {
            if (oi < -hi || oi > hi) return std::nullopt;
            continue;
        }
        double a = (-hi - oi) / di;
        double b = (hi - oi) / di;
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (t0 > t1) return std::nullopt;
    }
    if (t1 < 0.0) return std::nullopt;
    return t0 >= 0.0 ? t0 : t1;
}

inline std::optional<double> ray_rect(const Vec3& o, const Vec3& d, const PanelSpec& p) {
    const Vec3 n = p.normal();
    const double denom = dot(n, d);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = dot(n, p.center - o) / denom;
    if (t <= 0.0) return std::nullopt;
    const Vec3 rel = o + t * d - p.center;
    const double a = dot(rel, p.half_u) / dot(p.half_u, p.half_u);
    const double b = dot(rel, p.half_v) / dot(p.half_v, p.half_v);
    if (std::abs(a) > 1.0 + 1e-12 || std::abs(b) > 1.0 + 1e-12) return std::nullopt;
    return t;
}

inline std::optional<BoundingBox> project_bbox(const std::vector<Vec3>& corners_cam, const CameraIntrinsics& intr) {
    BoundingBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& c : corners_cam) {
        if (c.z <= 1e-3) return std::nullopt; // straddles or behind the camera
        const PixelPoint px = intr.project(CameraVec{c});
        box.u_min = std::min(box.u_min, px.u);
        box.v_min = std::min(box.v_min, px.v);
        box.u_max = std::max(box.u_max, px.u);
        box.v_max = std::max(box.v_max, px.v);
    }
    box.u_min = std::max(box.u_min, 0.0);
    box.v_min = std::max(box.v_min, 0.0);
    box.u_max = std::min(box.u_max, static_cast<double>(intr.width - 1));
    box.v_max = std::min(box.v_max, static_cast<double>(intr.height - 1));
    if (box.degenerate()) return std::nullopt;
    return box;
}

} // namespace detail

/**
 * @brief One synthetic frame: a detection per visible component.
 *
 * Body: bounding box of the projected box, depth from the nearest box
 * surface. Panels: two-sided rectangles, dropped when seen closer to edge-on
 * than `min_view_cos`. Zero-mean Gaussian noise is added to the five points
 * (camera depth axis scaled by `depth_multiplier`). Components farther than
 * the range gate are dropped. A target fully out of view yields an empty list.
 */
template <class Rng>
std::vector<Detection> render_detections(const TargetMockup& mock, const Pose& camera_pose, double t,
                                         const NoiseSpec& noise, Rng& rng, const RenderConfig& cfg = {}) {
    if (!mock.valid()) throw std::invalid_argument("render_detections: invalid target mockup");
    if (!(t >= 0.0)) throw std::invalid_argument("render_detections: negative time");

    const Pose target = mock.pose_at(t);
    const CameraIntrinsics& intr = cfg.intrinsics;
    // body frame -> camera frame
    auto to_cam = [&](const Vec3& body_pt) {
        const ApfVec apf{target.orientation.rotate(body_pt) + target.position};
        return camera_from_apf(apf, camera_pose).value;
    };
    // camera-frame ray -> body frame (origin, direction)
    const Vec3 cam_origin_body = target.orientation.inverse_rotate(camera_pose.position - target.position);
    auto ray_body = [&](double u, double v) {
        const Vec3 d_apf = camera_pose.orientation.rotate(intr.ray(u, v));
        return target.orientation.inverse_rotate(d_apf);
    };

    std::vector<Detection> out;
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto finish = [&](ComponentClass kind, const BoundingBox& box, const DepthLookup& lookup) {
        Detection det{kind, box, {}};
        try {
            det.points = extract_five_points(box, lookup, intr, cfg.corner_inset);
        } catch (const DetectionDropped&) {
            return;
        }
        if (norm(det.points[0].value) > cfg.max_range_m) return;
        if (noise.sigma_m > 0.0) {
            for (auto& p : det.points) {
                p.value.x += noise.sigma_m * gauss(rng);
                p.value.y += noise.sigma_m * gauss(rng);
                p.value.z += noise.sigma_m * noise.depth_multiplier * gauss(rng);
            }
        }
        out.push_back(det);
    };

    {
        const Vec3 h = mock.body_half_extents;
        std::vector<Vec3> corners;
        for (int sx : {-1, 1})
            for (int sy : {-1, 1})
                for (int sz : {-1, 1}) corners.push_back(to_cam({sx * h.x, sy * h.y, sz * h.z}));
        if (auto box = detail::project_bbox(corners, intr)) {
            DepthLookup lookup = [&](double u, double v) -> std::optional<double> {
                return detail::ray_box(cam_origin_body, ray_body(u, v), h);
            };
            finish(ComponentClass::Body, *box, lookup);
        }
    }

    for (const auto& panel : mock.panels) {
        const Vec3 view = normalized(cam_origin_body - panel.center);
        if (std::abs(dot(view, panel.normal())) < cfg.min_view_cos) continue;
        std::vector<Vec3> corners;
        for (int a : {-1, 1})
            for (int b : {-1, 1}) corners.push_back(to_cam(panel.center + a * panel.half_u + b * panel.half_v));
        if (auto box = detail::project_bbox(corners, intr)) {
            DepthLookup lookup = [&](double u, double v) -> std::optional<double> {
                return detail::ray_rect(cam_origin_body, ray_body(u, v), panel);
            };
            finish(ComponentClass::SolarPanel, *box, lookup);
        }
    }
    return out;
}

/// Detector running at a fixed frame rate: a new set is produced at most once per frame period.
class SyntheticCamera {
public:
    SyntheticCamera(Pose pose, NoiseSpec noise, std::uint64_t seed, RenderConfig cfg = {}, double frame_period_s = 0.5)
        : pose_(pose), noise_(noise), cfg_(cfg), period_(frame_period_s), rng_(seed) {}

    /// Returns true when a fresh detection set was produced at time t.
    bool capture(const TargetMockup& mock, double t) {
        if (last_emit_ && t < *last_emit_ + period_ - 1e-9) return false;
        detections_ = render_detections(mock, pose_, t, noise_, rng_, cfg_);
        last_emit_ = t;
        return true;
    }

    const std::vector<Detection>& detections() const { return detections_; }
    std::optional<double> last_emission() const { return last_emit_; }
    const Pose& pose() const { return pose_; }

private:
    Pose pose_;
    NoiseSpec noise_;
    RenderConfig cfg_;
    double period_;
    std::mt19937_64 rng_;
    std::vector<Detection> detections_;
    std::optional<double> last_emit_;
};

// ---------------------------------------------------------------------------
// Node reconstruction
// ---------------------------------------------------------------------------

enum class NodeKind { Attractive, Repulsive };

enum class NodeOrigin { Body, Panel, DockPort };

struct FieldNode {
    ApfVec position{};
    NodeKind kind{NodeKind::Attractive};
    double gain{0.0}; // 1/s^2; > 0 attractive, < 0 repulsive
    NodeOrigin origin{NodeOrigin::Body};
    bool mirrored{false};
};

struct NodeSet {
    std::vector<FieldNode> nodes;
    std::array<std::size_t, 2> primary_dock_nodes{0, 0};
    ApfVec centroid{};

    bool empty() const { return nodes.empty(); }
    const FieldNode& dock_node(std::size_t i) const { return nodes.at(primary_dock_nodes.at(i)); }
};

struct RebuildConfig {
    double inflation{1.75};
    double mu_attractive{0.1};
    double mu_repulsive{-0.015};
    Vec3 body_half_extents{0.2, 0.2, 0.2}; // configured target dimensions (dock ports)
    double centroid_depth_offset{0.2};     // push from the visible surface to the body center, along the view ray
};

/// Anything carrying a component class and five camera-frame points.
template <class T>
concept DetectedComponent = requires(const T& d) {
    { d.kind } -> std::convertible_to<ComponentClass>;
    { d.points[0] } -> std::convertible_to<CameraVec>;
    { d.points.size() } -> std::convertible_to<std::size_t>;
};

/**
 * @brief Rebuild the field from one detection frame.
 *
 * Points go to APF; the centroid is the body-point mean pushed along the view
 * ray by `centroid_depth_offset`; every node is point-reflected through the
 * centroid; two dock ports are added on the APF x axis at +/- the body
 * half-extent; all offsets from the centroid are then inflated.
 */
template <std::ranges::input_range R>
    requires DetectedComponent<std::ranges::range_value_t<R>>
NodeSet rebuild_nodes(const R& detections, const Pose& camera_pose, const RebuildConfig& cfg) {
    std::vector<FieldNode> raw;
    Vec3 body_sum{};
    std::size_t body_count = 0;
    for (const auto& det : detections) {
        const bool is_body = det.kind == ComponentClass::Body;
        for (const auto& p : det.points) {
            const ApfVec a = apf_from_camera(p, camera_pose);
            FieldNode n;
            n.position = a;
            n.kind = is_body ? NodeKind::Attractive : NodeKind::Repulsive;
            n.gain = is_body ? cfg.mu_attractive : cfg.mu_repulsive;
            n.origin = is_body ? NodeOrigin::Body : NodeOrigin::Panel;
            raw.push_back(n);
            if (is_body) {
                body_sum += a.value;
                ++body_count;
            }
        }
    }
    if (body_count == 0) throw NodeRebuildFailed("no body detection");

    Vec3 centroid = body_sum / static_cast<double>(body_count);
    if (cfg.centroid_depth_offset != 0.0) {
        const Vec3 view = centroid - camera_pose.position;
        if (norm(view) > 0.0) centroid += cfg.centroid_depth_offset * normalized(view);
    }

    NodeSet set;
    set.centroid = ApfVec{centroid};
    set.nodes.reserve(raw.size() * 2 + 2);
    for (const auto& n : raw) set.nodes.push_back(n);
    for (const auto& n : raw) {
        FieldNode m = n;
        m.position = ApfVec{2.0 * centroid - n.position.value};
        m.mirrored = true;
        set.nodes.push_back(m);
    }
    for (double side : {-1.0, 1.0}) {
        FieldNode d;
        d.position = ApfVec{centroid + Vec3{side * cfg.body_half_extents.x, 0.0, 0.0}};
        d.kind = NodeKind::Attractive;
        d.gain = cfg.mu_attractive;
        d.origin = NodeOrigin::DockPort;
        set.primary_dock_nodes[side < 0 ? 0 : 1] = set.nodes.size();
        set.nodes.push_back(d);
    }
    for (auto& n : set.nodes) {
        n.position = ApfVec{centroid + cfg.inflation * (n.position.value - centroid)};
    }
    return set;
}

} // namespace marvin
