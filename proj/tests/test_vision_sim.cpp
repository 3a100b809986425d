#include "support.hpp"

#include <limits>

using namespace marvin;
using marvin::test::near;

namespace {

const Pose kCamera = Pose::look_at({-3, 0, 0}, {0, 0, 0}, {0, 0, 1});

// Box body with two panels on the +/-y sides, panel faces toward -x (the camera).
TargetMockup nominal_target() {
    TargetMockup m;
    m.body_half_extents = {0.2, 0.2, 0.2};
    m.panels = {PanelSpec{{0, 0.4, 0}, {0, 0.2, 0}, {0, 0, 0.15}, 0.02},
                PanelSpec{{0, -0.4, 0}, {0, 0.2, 0}, {0, 0, 0.15}, 0.02}};
    return m;
}

// Same panels rotated so their faces are parallel to the view direction.
TargetMockup edge_on_target() {
    TargetMockup m = nominal_target();
    for (auto& p : m.panels) p.half_v = {0.15, 0, 0};
    return m;
}

std::vector<Detection> render_clean(const TargetMockup& m, const Pose& cam = kCamera, double t = 0.0) {
    std::mt19937_64 rng(1);
    return render_detections(m, cam, t, NoiseSpec{}, rng);
}

const Detection* find(const std::vector<Detection>& dets, ComponentClass k, double apf_y_sign = 0) {
    for (const auto& d : dets) {
        if (d.kind != k) continue;
        if (apf_y_sign == 0) return &d;
        if (apf_from_camera(d.points[0], kCamera).value.y * apf_y_sign > 0) return &d;
    }
    return nullptr;
}

DepthLookup uniform_depth(double z) {
    return [z](double, double) -> std::optional<double> { return z; };
}

RebuildConfig plain_rebuild() {
    RebuildConfig cfg;
    cfg.centroid_depth_offset = 0.0;
    return cfg;
}

Detection body_at(const Vec3& c, const std::array<Vec3, 5>& offsets) {
    Detection d;
    d.kind = ComponentClass::Body;
    for (std::size_t i = 0; i < 5; ++i) d.points[i] = CameraVec{c + offsets[i]};
    return d;
}

const std::array<Vec3, 5> kSquare{{{0, 0, 0}, {-0.1, -0.1, 0}, {0.1, -0.1, 0}, {0.1, 0.1, 0}, {-0.1, 0.1, 0}}};

} // namespace

TEST(VisionRender, BodyOnlyWhenPanelsEdgeOn) {
    const auto dets = render_clean(edge_on_target());
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].kind, ComponentClass::Body);
    // front face of the box is at APF x = -0.2
    EXPECT_TRUE(near(apf_from_camera(dets[0].points[0], kCamera).value, {-0.2, 0, 0}, 1e-9));
}

TEST(VisionRender, NominalGivesBodyAndTwoPanels) {
    const auto dets = render_clean(nominal_target());
    ASSERT_EQ(dets.size(), 3u);
    const auto* body = find(dets, ComponentClass::Body);
    const auto* left = find(dets, ComponentClass::SolarPanel, +1);
    const auto* right = find(dets, ComponentClass::SolarPanel, -1);
    ASSERT_TRUE(body && left && right);
    EXPECT_TRUE(near(apf_from_camera(left->points[0], kCamera).value, {0, 0.4, 0}, 1e-9));
    EXPECT_TRUE(near(apf_from_camera(right->points[0], kCamera).value, {0, -0.4, 0}, 1e-9));

    // Hand projection of the +y panel: camera x = APF y, camera y = APF z, depth 3 m.
    const CameraIntrinsics intr;
    EXPECT_NEAR(left->bbox.u_min, intr.cx + intr.fx * 0.2 / 3.0, 1e-9);
    EXPECT_NEAR(left->bbox.u_max, intr.cx + intr.fx * 0.6 / 3.0, 1e-9);
    EXPECT_NEAR(left->bbox.v_min, intr.cy - intr.fy * 0.15 / 3.0, 1e-9);
    EXPECT_NEAR(left->bbox.v_max, intr.cy + intr.fy * 0.15 / 3.0, 1e-9);
    // Body bbox is the projected near face (depth 2.8 m).
    EXPECT_NEAR(body->bbox.u_max, intr.cx + intr.fx * 0.2 / 2.8, 1e-9);
    EXPECT_NEAR(body->bbox.v_min, intr.cy - intr.fy * 0.2 / 2.8, 1e-9);
}

TEST(VisionRender, CornerPointsLieOnTheVisibleSurface) {
    const auto dets = render_clean(nominal_target());
    for (const auto& d : dets) {
        for (std::size_t i = 1; i < 5; ++i) {
            const Vec3 p = apf_from_camera(d.points[i], kCamera).value;
            EXPECT_NEAR(p.x, d.kind == ComponentClass::Body ? -0.2 : 0.0, 1e-9);
        }
    }
}

TEST(VisionRender, TargetOutOfViewGivesEmptyList) {
    const Pose away = Pose::look_at({-3, 0, 0}, {-6, 0, 0}, {0, 0, 1});
    EXPECT_TRUE(render_clean(nominal_target(), away).empty());
}

TEST(VisionRender, RangeGateDropsDistantComponents) {
    const Pose far_cam = Pose::look_at({-6, 0, 0}, {0, 0, 0}, {0, 0, 1});
    EXPECT_TRUE(render_clean(nominal_target(), far_cam).empty());
}

TEST(VisionRender, InvalidInputsThrow) {
    std::mt19937_64 rng(1);
    TargetMockup bad = nominal_target();
    bad.body_half_extents = {0, 0.2, 0.2};
    EXPECT_THROW(render_detections(bad, kCamera, 0.0, NoiseSpec{}, rng), std::invalid_argument);
    EXPECT_THROW(render_detections(nominal_target(), kCamera, -1.0, NoiseSpec{}, rng), std::invalid_argument);
}

TEST(VisionRender, NoiseStatisticsFollowSigmaAndDepthMultiplier) {
    const auto mock = edge_on_target();
    std::mt19937_64 rng(42);
    const NoiseSpec noise{0.01, 5.0};
    const int n = 4000;
    double sx = 0, sz = 0, mx = 0, mz = 0;
    for (int i = 0; i < n; ++i) {
        const auto dets = render_detections(mock, kCamera, 0.0, noise, rng);
        ASSERT_EQ(dets.size(), 1u);
        const Vec3 e = dets[0].points[0].value - Vec3{0, 0, 2.8};
        mx += e.x;
        mz += e.z;
        sx += e.x * e.x;
        sz += e.z * e.z;
    }
    EXPECT_NEAR(mx / n, 0.0, 0.001);
    EXPECT_NEAR(mz / n, 0.0, 0.005);
    EXPECT_NEAR(std::sqrt(sx / n), 0.01, 0.001);
    EXPECT_NEAR(std::sqrt(sz / n), 0.05, 0.005);
}

TEST(VisionRender, SameSeedSameDetections) {
    const NoiseSpec noise{0.02, 1.0};
    std::mt19937_64 a(9), b(9);
    const auto da = render_detections(nominal_target(), kCamera, 1.0, noise, a);
    const auto db = render_detections(nominal_target(), kCamera, 1.0, noise, b);
    ASSERT_EQ(da.size(), db.size());
    for (std::size_t i = 0; i < da.size(); ++i)
        for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(da[i].points[k], db[i].points[k]);
}

TEST(VisionRender, SpinningTargetAttitudeMatchesMatrixOracle) {
    TargetMockup m = nominal_target();
    m.yaw_rate_dps = 5.0;
    const double t = 7.3;
    const auto r = test::rotation_matrix({0, 0, 1}, deg2rad(5.0 * t));
    const Vec3 v{0.3, -0.1, 0.2};
    EXPECT_TRUE(near(m.attitude_at(t).rotate(v), test::apply(r, v), 1e-12));
}

TEST(VisionCamera, CadenceHoldsBetweenFrames) {
    SyntheticCamera cam(kCamera, NoiseSpec{0.01, 1.0}, 5);
    const auto mock = nominal_target();
    ASSERT_TRUE(cam.capture(mock, 0.0));
    const auto first = cam.detections();
    EXPECT_FALSE(cam.capture(mock, 0.25));
    ASSERT_EQ(cam.detections().size(), first.size());
    for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(cam.detections()[i].points, first[i].points);
    EXPECT_EQ(cam.last_emission(), 0.0);
    EXPECT_TRUE(cam.capture(mock, 0.5));
    EXPECT_EQ(cam.last_emission(), 0.5);
}

TEST(ExtractFivePoints, UniformDepth) {
    const CameraIntrinsics intr;
    const BoundingBox box{374, 190, 474, 290};
    const auto pts = extract_five_points(box, uniform_depth(2.0), intr);
    for (const auto& p : pts) EXPECT_DOUBLE_EQ(p.value.z, 2.0);
    EXPECT_TRUE(near(pts[0].value, {0, 0, 2}, 1e-12));
    // top-left sample sits 10 px inside each edge
    EXPECT_NEAR(pts[1].value.x, (384 - intr.cx) * 2.0 / intr.fx, 1e-12);
    EXPECT_NEAR(pts[1].value.y, (200 - intr.cy) * 2.0 / intr.fy, 1e-12);
    EXPECT_NEAR(pts[3].value.x, (464 - intr.cx) * 2.0 / intr.fx, 1e-12);
    EXPECT_NEAR(pts[3].value.y, (280 - intr.cy) * 2.0 / intr.fy, 1e-12);
}

TEST(ExtractFivePoints, CornerHoleUsesNearestValidDepth) {
    const CameraIntrinsics intr;
    const BoundingBox box{374, 190, 474, 290};
    // Depth ramps with u; the top-left corner region has no return.
    auto valid = [](double u, double v) { return !(u < 390 && v < 210); };
    DepthLookup depth = [&](double u, double v) -> std::optional<double> {
        if (!valid(u, v)) return std::nullopt;
        return 2.0 + 0.001 * u;
    };
    // Oracle: brute-force nearest valid integer offset from the sample pixel.
    const double su = 384, sv = 200;
    double best_d2 = 1e18, best_depth = 0;
    for (int dy = -100; dy <= 100; ++dy) {
        for (int dx = -100; dx <= 100; ++dx) {
            const double u = su + dx, v = sv + dy;
            if (!box.contains(u, v) || !valid(u, v)) continue;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best_depth = *depth(u, v);
            }
        }
    }
    const auto pts = extract_five_points(box, depth, intr);
    EXPECT_DOUBLE_EQ(pts[1].value.z, best_depth);
    EXPECT_NEAR(pts[1].value.x, (su - intr.cx) * best_depth / intr.fx, 1e-12);
    EXPECT_DOUBLE_EQ(pts[2].value.z, 2.0 + 0.001 * 464);
}

TEST(ExtractFivePoints, DegenerateBoxIsDropped) {
    const CameraIntrinsics intr;
    EXPECT_THROW(extract_five_points(BoundingBox{100, 100, 100, 200}, uniform_depth(2), intr), DetectionDropped);
    EXPECT_THROW(extract_five_points(BoundingBox{100, 200, 150, 100}, uniform_depth(2), intr), DetectionDropped);
}

TEST(ExtractFivePoints, NoValidDepthIsDropped) {
    const CameraIntrinsics intr;
    DepthLookup none = [](double, double) -> std::optional<double> { return std::nullopt; };
    DepthLookup nan = [](double, double) -> std::optional<double> { return std::numeric_limits<double>::quiet_NaN(); };
    EXPECT_THROW(extract_five_points(BoundingBox{10, 10, 40, 40}, none, intr), DetectionDropped);
    EXPECT_THROW(extract_five_points(BoundingBox{10, 10, 40, 40}, nan, intr), DetectionDropped);
}

TEST(RebuildNodes, SingleBodyDetection) {
    const Vec3 c{-0.5, 0.3, 0.1};
    const std::vector<Detection> dets{body_at(c, kSquare)};
    const auto set = rebuild_nodes(dets, Pose{}, plain_rebuild());
    ASSERT_EQ(set.nodes.size(), 12u);
    EXPECT_TRUE(near(set.centroid.value, c, 1e-12));
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_TRUE(near(set.nodes[i].position.value, c + 1.75 * kSquare[i], 1e-12));
        EXPECT_TRUE(near(set.nodes[5 + i].position.value, c - 1.75 * kSquare[i], 1e-12));
        EXPECT_TRUE(set.nodes[5 + i].mirrored);
    }
    EXPECT_TRUE(near(set.dock_node(0).position.value, c + Vec3{-0.35, 0, 0}, 1e-12));
    EXPECT_TRUE(near(set.dock_node(1).position.value, c + Vec3{0.35, 0, 0}, 1e-12));
    for (const auto& n : set.nodes) {
        EXPECT_EQ(n.kind, NodeKind::Attractive);
        EXPECT_DOUBLE_EQ(n.gain, 0.1);
    }
}

TEST(RebuildNodes, SymmetricInputMirrorsOntoItself) {
    const Vec3 c{0.2, -0.1, 0.4};
    const std::vector<Detection> dets{body_at(c, kSquare)};
    const auto set = rebuild_nodes(dets, Pose{}, plain_rebuild());
    for (std::size_t i = 5; i < 10; ++i) {
        double best = 1e9;
        for (std::size_t j = 0; j < 5; ++j) best = std::min(best, distance(set.nodes[i].position.value, set.nodes[j].position.value));
        EXPECT_LE(best, 1e-9);
    }
}

TEST(RebuildNodes, PanelOffsetIsInflatedAndMirrored) {
    const Vec3 c{-0.4, 0.0, 0.0};
    const Vec3 d{0.1, 0.45, -0.05};
    Detection panel;
    panel.kind = ComponentClass::SolarPanel;
    for (auto& p : panel.points) p = CameraVec{c + d};
    const std::vector<Detection> dets{body_at(c, kSquare), panel};
    const auto set = rebuild_nodes(dets, Pose{}, plain_rebuild());
    // raw order: 5 body, 5 panel; mirrors follow in the same order
    ASSERT_EQ(set.nodes.size(), 22u);
    const auto& fwd = set.nodes[5];
    const auto& mir = set.nodes[15];
    EXPECT_TRUE(near(fwd.position.value, c + 1.75 * d, 1e-12));
    EXPECT_TRUE(near(mir.position.value, c - 1.75 * d, 1e-12));
    for (const auto* n : {&fwd, &mir}) {
        EXPECT_EQ(n->kind, NodeKind::Repulsive);
        EXPECT_DOUBLE_EQ(n->gain, -0.015);
        EXPECT_EQ(n->origin, NodeOrigin::Panel);
    }
}

TEST(RebuildNodes, NoBodyFails) {
    Detection panel;
    panel.kind = ComponentClass::SolarPanel;
    EXPECT_THROW(rebuild_nodes(std::vector<Detection>{panel}, Pose{}, RebuildConfig{}), NodeRebuildFailed);
    EXPECT_THROW(rebuild_nodes(std::vector<Detection>{}, Pose{}, RebuildConfig{}), NodeRebuildFailed);
}

TEST(RebuildNodes, CentroidOffsetPushesAlongViewRay) {
    // The visible face center sits 0.2 m in front of the body center.
    const auto dets = render_clean(nominal_target());
    const auto set = rebuild_nodes(dets, kCamera, RebuildConfig{});
    EXPECT_TRUE(near(set.centroid.value, {0, 0, 0}, 1e-9));
    EXPECT_TRUE(near(set.dock_node(0).position.value, {-0.35, 0, 0}, 1e-9));
    EXPECT_TRUE(near(set.dock_node(1).position.value, {0.35, 0, 0}, 1e-9));
}

TEST(RebuildNodes, InvariantsOnNoisyRenders) {
    const auto mock = nominal_target();
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const auto dets = render_detections(mock, kCamera, 0.5 * trial, NoiseSpec{0.02, 2.0}, rng);
        for (const RebuildConfig& cfg : {RebuildConfig{}, plain_rebuild()}) {
            const auto set = rebuild_nodes(dets, kCamera, cfg);
            const Vec3 c = set.centroid.value;
            std::vector<std::pair<Vec3, ComponentClass>> raw;
            for (const auto& d : dets)
                for (const auto& p : d.points) raw.emplace_back(apf_from_camera(p, kCamera).value, d.kind);
            ASSERT_EQ(set.nodes.size(), 2 * raw.size() + 2);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                const auto& fwd = set.nodes[i];
                const auto& mir = set.nodes[raw.size() + i];
                EXPECT_NEAR(distance(fwd.position.value, c), 1.75 * distance(raw[i].first, c), 1e-9);
                EXPECT_TRUE(near(fwd.position.value + mir.position.value, 2.0 * c, 1e-9));
                const auto want = raw[i].second == ComponentClass::Body ? NodeKind::Attractive : NodeKind::Repulsive;
                EXPECT_EQ(fwd.kind, want);
                EXPECT_EQ(mir.kind, want);
                EXPECT_GT(fwd.gain * (want == NodeKind::Attractive ? 1 : -1), 0.0);
            }
            const Vec3 d0 = set.dock_node(0).position.value, d1 = set.dock_node(1).position.value;
            EXPECT_TRUE(near(d0 + d1, 2.0 * c, 1e-9));
            EXPECT_NEAR(distance(d0, c), 1.75 * 0.2, 1e-9);
            EXPECT_EQ(set.dock_node(0).kind, NodeKind::Attractive);
            for (const auto& n : set.nodes) EXPECT_TRUE(is_finite(n.position.value));
        }
    }
}

TEST(RebuildNodes, ZeroNoisePipelineIsBitReproducible) {
    const auto a = rebuild_nodes(render_clean(nominal_target(), kCamera, 2.0), kCamera, RebuildConfig{});
    const auto b = rebuild_nodes(render_clean(nominal_target(), kCamera, 2.0), kCamera, RebuildConfig{});
    ASSERT_EQ(a.nodes.size(), b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) EXPECT_EQ(a.nodes[i].position, b.nodes[i].position);
}

TEST(ComponentClassNames, RoundTrip) {
    for (auto k : {ComponentClass::Body, ComponentClass::SolarPanel})
        EXPECT_EQ(component_class_from_string(to_string(k)), k);
    EXPECT_FALSE(component_class_from_string("antenna"));
}
