#pragma once

// Wire messages between the vision, tracker, guidance and fleet processes.
//
// Encoding: one UTF-8 JSON object per datagram, keys sorted, no whitespace,
// terminated by '\n'. Floating-point values are rounded to 9 significant
// digits before serialization, so a message built from canonical values
// decodes back to exactly the same values.

#include "marvin/chaser_fleet.hpp"
#include "marvin/frames.hpp"
#include "marvin/vision_sim.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace marvin {

inline constexpr int kSchemaVersion = 1;

class DecodeError : public std::runtime_error {
public:
    DecodeError(std::size_t offset, const std::string& what)
        : std::runtime_error("decode error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedVersion : public std::runtime_error {
public:
    explicit UnsupportedVersion(long long version)
        : std::runtime_error("unsupported schema_version " + std::to_string(version)), version_(version) {}
    long long version() const { return version_; }

private:
    long long version_;
};

class EncodeError : public std::invalid_argument {
public:
    explicit EncodeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Round to 9 significant digits; idempotent.
inline double canonical(double x) {
    if (!std::isfinite(x)) throw EncodeError("non-finite value cannot be encoded");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::strtod(buf, nullptr);
}

inline Vec3 canonical(const Vec3& v) { return {canonical(v.x), canonical(v.y), canonical(v.z)}; }

struct DetectionMsg {
    struct Entry {
        ComponentClass kind{ComponentClass::Body};
        std::array<CameraVec, 5> points{};
        friend bool operator==(const Entry&, const Entry&) = default;
    };
    int schema_version{kSchemaVersion};
    std::int64_t timestamp_us{0};
    std::vector<Entry> detections;

    friend bool operator==(const DetectionMsg&, const DetectionMsg&) = default;

    static DetectionMsg from(const std::vector<Detection>& dets, std::int64_t timestamp_us) {
        DetectionMsg m;
        m.timestamp_us = timestamp_us;
        for (const auto& d : dets) {
            Entry e{d.kind, {}};
            for (std::size_t i = 0; i < 5; ++i) e.points[i] = CameraVec{canonical(d.points[i].value)};
            m.detections.push_back(e);
        }
        return m;
    }
};

struct TrackerMsg {
    struct Body {
        std::string id;
        TrackerVec position{};
        TrackerVec velocity{};
        friend bool operator==(const Body&, const Body&) = default;
    };
    int schema_version{kSchemaVersion};
    std::int64_t timestamp_us{0};
    std::vector<Body> bodies;

    friend bool operator==(const TrackerMsg&, const TrackerMsg&) = default;
};

struct LandCommand {
    friend bool operator==(const LandCommand&, const LandCommand&) = default;
};

struct CommandMsg {
    int schema_version{kSchemaVersion};
    std::int64_t seq{0};
    std::string chaser_id;
    std::variant<MoveCommand, LandCommand> move{LandCommand{}};

    friend bool operator==(const CommandMsg&, const CommandMsg&) = default;
};

namespace wire {

using nlohmann::json;

inline json vec(const Vec3& v) { return json::array({canonical(v.x), canonical(v.y), canonical(v.z)}); }

// Compact dump with floats in their shortest round-trip form; nlohmann's own
// float printer can emit trailing noise digits for some 9-digit values.
inline void dump(const json& j, std::string& out) {
    switch (j.type()) {
    case json::value_t::object: {
        out.push_back('{');
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            if (!first) out.push_back(',');
            first = false;
            out += json(k).dump();
            out.push_back(':');
            dump(v, out);
        }
        out.push_back('}');
        break;
    }
    case json::value_t::array: {
        out.push_back('[');
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out.push_back(',');
            dump(j[i], out);
        }
        out.push_back(']');
        break;
    }
    case json::value_t::number_float: {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, j.get<double>());
        std::string_view num(buf, static_cast<std::size_t>(res.ptr - buf));
        out += num;
        if (num.find_first_of(".e") == std::string_view::npos) out += ".0";
        break;
    }
    default: out += j.dump();
    }
}

inline std::string finish(const json& j) {
    std::string s;
    dump(j, s);
    s.push_back('\n');
    return s;
}

// Parsing helpers: every structural problem is a DecodeError. nlohmann gives
// no positions for values, so schema errors report offset 0.
[[noreturn]] inline void schema_fail(const std::string& what) { throw DecodeError(0, what); }

inline const json& field(const json& obj, const char* key) {
    if (!obj.is_object()) schema_fail("expected object");
    auto it = obj.find(key);
    if (it == obj.end()) schema_fail(std::string("missing field '") + key + "'");
    return *it;
}

inline double number(const json& j, const char* what) {
    if (!j.is_number()) schema_fail(std::string(what) + ": expected number");
    return j.get<double>();
}

inline std::int64_t integer(const json& j, const char* what) {
    if (!j.is_number_integer()) schema_fail(std::string(what) + ": expected integer");
    return j.get<std::int64_t>();
}

inline std::string text(const json& j, const char* what) {
    if (!j.is_string()) schema_fail(std::string(what) + ": expected string");
    return j.get<std::string>();
}

inline Vec3 vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) schema_fail(std::string(what) + ": expected [x,y,z]");
    return {number(j[0], what), number(j[1], what), number(j[2], what)};
}

inline json parse(std::string_view bytes, std::string_view expected_type) {
    if (bytes.empty() || bytes.back() != '\n') throw DecodeError(bytes.size(), "missing newline terminator");
    json j;
    try {
        j = json::parse(bytes.substr(0, bytes.size() - 1));
    } catch (const json::parse_error& e) {
        throw DecodeError(e.byte, e.what());
    }
    if (!j.is_object()) schema_fail("top level must be an object");
    const std::int64_t version = integer(field(j, "schema_version"), "schema_version");
    if (version != kSchemaVersion) throw UnsupportedVersion(version);
    if (text(field(j, "type"), "type") != expected_type) schema_fail("unexpected message type");
    return j;
}

} // namespace wire

inline std::string encode(const DetectionMsg& m) {
    using wire::json;
    json dets = json::array();
    for (const auto& d : m.detections) {
        json pts = json::array();
        for (const auto& p : d.points) pts.push_back(wire::vec(p.value));
        dets.push_back({{"class", std::string(to_string(d.kind))}, {"points", pts}});
    }
    return wire::finish({{"type", "detection"},
                         {"schema_version", m.schema_version},
                         {"timestamp_us", m.timestamp_us},
                         {"detections", dets}});
}

inline std::string encode(const TrackerMsg& m) {
    using wire::json;
    std::set<std::string> ids;
    json bodies = json::array();
    for (const auto& b : m.bodies) {
        if (!ids.insert(b.id).second) throw EncodeError("duplicate tracker body id '" + b.id + "'");
        bodies.push_back({{"id", b.id}, {"position", wire::vec(b.position.value)}, {"velocity", wire::vec(b.velocity.value)}});
    }
    return wire::finish({{"type", "tracker"},
                         {"schema_version", m.schema_version},
                         {"timestamp_us", m.timestamp_us},
                         {"bodies", bodies}});
}

inline std::string encode(const CommandMsg& m) {
    using wire::json;
    json move;
    if (const auto* mv = std::get_if<MoveCommand>(&m.move)) {
        move = {{"dx", mv->dx}, {"dy", mv->dy}, {"dz", mv->dz}, {"speed", mv->speed}};
    } else {
        move = "land";
    }
    return wire::finish({{"type", "command"},
                         {"schema_version", m.schema_version},
                         {"seq", m.seq},
                         {"chaser_id", m.chaser_id},
                         {"move", move}});
}

template <class Msg>
Msg decode(std::string_view bytes);

template <>
inline DetectionMsg decode<DetectionMsg>(std::string_view bytes) {
    const auto j = wire::parse(bytes, "detection");
    DetectionMsg m;
    m.timestamp_us = wire::integer(wire::field(j, "timestamp_us"), "timestamp_us");
    const auto& dets = wire::field(j, "detections");
    if (!dets.is_array()) wire::schema_fail("detections: expected array");
    for (const auto& d : dets) {
        DetectionMsg::Entry e;
        const auto kind = component_class_from_string(wire::text(wire::field(d, "class"), "class"));
        if (!kind) wire::schema_fail("class: unknown component class");
        e.kind = *kind;
        const auto& pts = wire::field(d, "points");
        if (!pts.is_array() || pts.size() != 5) wire::schema_fail("points: expected exactly 5 points");
        for (std::size_t i = 0; i < 5; ++i) e.points[i] = CameraVec{wire::vec3(pts[i], "points")};
        m.detections.push_back(e);
    }
    return m;
}

template <>
inline TrackerMsg decode<TrackerMsg>(std::string_view bytes) {
    const auto j = wire::parse(bytes, "tracker");
    TrackerMsg m;
    m.timestamp_us = wire::integer(wire::field(j, "timestamp_us"), "timestamp_us");
    const auto& bodies = wire::field(j, "bodies");
    if (!bodies.is_array()) wire::schema_fail("bodies: expected array");
    std::set<std::string> ids;
    for (const auto& b : bodies) {
        TrackerMsg::Body body;
        body.id = wire::text(wire::field(b, "id"), "id");
        if (!ids.insert(body.id).second) wire::schema_fail("bodies: duplicate id");
        body.position = TrackerVec{wire::vec3(wire::field(b, "position"), "position")};
        body.velocity = TrackerVec{wire::vec3(wire::field(b, "velocity"), "velocity")};
        m.bodies.push_back(body);
    }
    return m;
}

template <>
inline CommandMsg decode<CommandMsg>(std::string_view bytes) {
    const auto j = wire::parse(bytes, "command");
    CommandMsg m;
    m.seq = wire::integer(wire::field(j, "seq"), "seq");
    m.chaser_id = wire::text(wire::field(j, "chaser_id"), "chaser_id");
    const auto& mv = wire::field(j, "move");
    if (mv.is_string()) {
        if (mv.get<std::string>() != "land") wire::schema_fail("move: unknown verb");
        m.move = LandCommand{};
    } else {
        auto as_int = [](const wire::json& v, const char* what) {
            const auto x = wire::integer(v, what);
            if (x < INT32_MIN || x > INT32_MAX) wire::schema_fail(std::string(what) + ": out of range");
            return static_cast<int>(x);
        };
        m.move = MoveCommand{as_int(wire::field(mv, "dx"), "dx"), as_int(wire::field(mv, "dy"), "dy"),
                             as_int(wire::field(mv, "dz"), "dz"), as_int(wire::field(mv, "speed"), "speed")};
    }
    return m;
}

} // namespace marvin
