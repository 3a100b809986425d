#include "support.hpp"

#include <regex>

using namespace marvin;
using namespace std::chrono_literals;

namespace {

CommandMsg move_msg(std::int64_t seq, const std::string& id = "drone1") {
    CommandMsg m;
    m.seq = seq;
    m.chaser_id = id;
    m.move = MoveCommand{20, 0, -20, 100};
    return m;
}

// Every number token in the encoded text carries at most 9 significant digits.
bool digits_ok(const std::string& text) {
    static const std::regex num(R"(-?\d+(\.\d+)?([eE][-+]?\d+)?)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), num); it != std::sregex_iterator(); ++it) {
        std::string mant = (*it)[0].str();
        if (auto e = mant.find_first_of("eE"); e != std::string::npos) mant.resize(e);
        std::string digits;
        for (char c : mant)
            if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
        const auto first = digits.find_first_not_of('0');
        if (first == std::string::npos) continue;
        digits = digits.substr(first);
        if (mant.find('.') != std::string::npos) {
            while (!digits.empty() && digits.back() == '0') digits.pop_back();
        }
        // integers (timestamps, seq) are exempt: they are not floats
        if (mant.find('.') == std::string::npos && (*it)[0].str().find_first_of("eE") == std::string::npos) continue;
        if (digits.size() > 9) return false;
    }
    return true;
}

} // namespace

TEST(Wire, EmptyDetectionListRoundTrips) {
    DetectionMsg m;
    m.timestamp_us = 123;
    const auto bytes = encode(m);
    EXPECT_EQ(bytes.back(), '\n');
    EXPECT_EQ(decode<DetectionMsg>(bytes), m);
}

TEST(Wire, ThreeDetectionsRoundTripBitExact) {
    std::mt19937_64 rng(2);
    std::vector<Detection> dets(3);
    for (std::size_t i = 0; i < 3; ++i) {
        dets[i].kind = i == 0 ? ComponentClass::Body : ComponentClass::SolarPanel;
        for (auto& p : dets[i].points) p = CameraVec{test::random_vec(rng, -4, 4)};
    }
    const auto m = DetectionMsg::from(dets, 500000);
    const auto back = decode<DetectionMsg>(encode(m));
    ASSERT_EQ(back.detections.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 5; ++k) {
            EXPECT_EQ(back.detections[i].points[k].value.x, m.detections[i].points[k].value.x);
            EXPECT_EQ(back.detections[i].points[k].value.y, m.detections[i].points[k].value.y);
            EXPECT_EQ(back.detections[i].points[k].value.z, m.detections[i].points[k].value.z);
        }
    EXPECT_EQ(back, m);
}

TEST(Wire, CanonicalJsonShape) {
    TrackerMsg t;
    t.timestamp_us = 42;
    t.bodies.push_back({"drone1", TrackerVec{0.123456789123, -1, 2}, TrackerVec{0, 0, 0}});
    const auto bytes = encode(t);
    EXPECT_EQ(bytes, "{\"bodies\":[{\"id\":\"drone1\",\"position\":[0.123456789,-1.0,2.0],\"velocity\":[0.0,0.0,0.0]}],"
                     "\"schema_version\":1,\"timestamp_us\":42,\"type\":\"tracker\"}\n");
    EXPECT_EQ(bytes.find(' '), std::string::npos);
    const auto back = decode<TrackerMsg>(bytes);
    EXPECT_EQ(back.bodies[0].position.value.x, 0.123456789);
}

TEST(Wire, CommandEncodings) {
    EXPECT_EQ(encode(move_msg(7)), "{\"chaser_id\":\"drone1\",\"move\":{\"dx\":20,\"dy\":0,\"dz\":-20,\"speed\":100},"
                                    "\"schema_version\":1,\"seq\":7,\"type\":\"command\"}\n");
    CommandMsg land;
    land.seq = 8;
    land.chaser_id = "drone2";
    EXPECT_EQ(decode<CommandMsg>(encode(land)), land);
    EXPECT_NE(encode(land).find("\"move\":\"land\""), std::string::npos);
}

TEST(Wire, CanonicalRoundingIsIdempotent) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        const double c = canonical(x);
        EXPECT_EQ(canonical(c), c);
        EXPECT_LE(std::abs(c - x), 1e-8 * std::abs(x));
    }
    EXPECT_THROW(canonical(std::numeric_limits<double>::infinity()), EncodeError);
}

TEST(Wire, TenThousandGeneratedMessagesRoundTrip) {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 10000; ++i) {
        switch (i % 3) {
        case 0: {
            const auto m = test::random_detection_msg(rng);
            const auto b = encode(m);
            ASSERT_EQ(decode<DetectionMsg>(b), m);
            ASSERT_TRUE(digits_ok(b)) << b;
            break;
        }
        case 1: {
            const auto m = test::random_tracker_msg(rng);
            const auto b = encode(m);
            ASSERT_EQ(decode<TrackerMsg>(b), m);
            ASSERT_TRUE(digits_ok(b)) << b;
            break;
        }
        default: {
            const auto m = test::random_command_msg(rng);
            ASSERT_EQ(decode<CommandMsg>(encode(m)), m);
        }
        }
    }
}

TEST(Wire, TruncatedPayloadIsDecodeError) {
    const auto bytes = encode(move_msg(1));
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        EXPECT_THROW(decode<CommandMsg>(bytes.substr(0, n)), DecodeError) << n;
    }
    try {
        decode<CommandMsg>(bytes.substr(0, 20) + "\n");
        FAIL();
    } catch (const DecodeError& e) {
        EXPECT_GT(e.offset(), 0u);
    }
}

TEST(Wire, SchemaViolationsAreDecodeErrors) {
    EXPECT_THROW(decode<TrackerMsg>(encode(move_msg(1))), DecodeError); // wrong type
    EXPECT_THROW(decode<DetectionMsg>("{\"detections\":[{\"class\":\"body\",\"points\":[[0,0,0]]}],"
                                      "\"schema_version\":1,\"timestamp_us\":0,\"type\":\"detection\"}\n"),
                 DecodeError);
    EXPECT_THROW(decode<DetectionMsg>("{\"detections\":[],\"schema_version\":1,\"type\":\"detection\"}\n"), DecodeError);
    EXPECT_THROW(decode<CommandMsg>("{\"chaser_id\":\"d\",\"move\":\"hover\",\"schema_version\":1,\"seq\":1,"
                                    "\"type\":\"command\"}\n"),
                 DecodeError);
    EXPECT_THROW(decode<TrackerMsg>("{\"bodies\":[{\"id\":\"a\",\"position\":[0,0,0],\"velocity\":[0,0,0]},"
                                    "{\"id\":\"a\",\"position\":[0,0,0],\"velocity\":[0,0,0]}],"
                                    "\"schema_version\":1,\"timestamp_us\":0,\"type\":\"tracker\"}\n"),
                 DecodeError);
}

TEST(Wire, WrongVersionIsUnsupported) {
    auto bytes = encode(move_msg(1));
    bytes.replace(bytes.find("\"schema_version\":1"), 18, "\"schema_version\":2");
    try {
        decode<CommandMsg>(bytes);
        FAIL();
    } catch (const UnsupportedVersion& e) {
        EXPECT_EQ(e.version(), 2);
    }
}

TEST(Wire, DuplicateTrackerIdsCannotBeEncoded) {
    TrackerMsg t;
    t.bodies = {{"a", {}, {}}, {"a", {}, {}}};
    EXPECT_THROW(encode(t), EncodeError);
}

TEST(InProcess, DeliversAllInOrder) {
    InProcessTransport t;
    Subscription<TrackerMsg> sub(t, Endpoint{"127.0.0.1", 1});
    Publisher<TrackerMsg> pub(t, Endpoint{"127.0.0.1", 1});
    std::vector<std::string> sent;
    for (int i = 0; i < 50; ++i) {
        TrackerMsg m;
        m.timestamp_us = i;
        pub.publish(m);
        sent.push_back(encode(m));
    }
    EXPECT_EQ(t.drain(Endpoint{"127.0.0.1", 1}, 0, 0ms), sent);
}

TEST(InProcess, UnboundEndpointLosesDatagram) {
    InProcessTransport t;
    t.send(Endpoint{"127.0.0.1", 9}, "x");
    EXPECT_TRUE(t.drain(Endpoint{"127.0.0.1", 9}, 0, 0ms).empty());
}

TEST(Subscription, KeepsNewestAndCountsStaleAndGarbage) {
    InProcessTransport t;
    const Endpoint ep{"127.0.0.1", 2};
    Subscription<TrackerMsg> sub(t, ep);
    TrackerMsg a, b;
    a.timestamp_us = 10;
    b.timestamp_us = 5;
    t.send(ep, encode(a));
    t.send(ep, encode(b)); // reordered, older
    t.send(ep, "garbage\n");
    EXPECT_TRUE(sub.poll());
    EXPECT_EQ(sub.latest()->timestamp_us, 10);
    EXPECT_EQ(sub.stale_dropped(), 1u);
    EXPECT_EQ(sub.decode_errors(), 1u);
    EXPECT_FALSE(sub.poll()); // silent topic: hold the last value
    EXPECT_EQ(sub.latest()->timestamp_us, 10);
}

TEST(Commands, DuplicateSeqExecutedOnce) {
    InProcessTransport t;
    NetworkConfig net;
    CommandReceiver rx(t, net.command(0), "drone1");
    const auto m = move_msg(1);
    t.send(net.command(0), encode(m));
    t.send(net.command(0), encode(m));
    const auto got = rx.poll();
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0], m);
    EXPECT_EQ(rx.dropped(), 1u);
}

TEST(Commands, OutOfOrderSeqDroppedAndCounted) {
    InProcessTransport t;
    NetworkConfig net;
    CommandReceiver rx(t, net.command(0), "drone1");
    for (std::int64_t s : {1, 3, 2, 4, 4, 0})
        t.send(net.command(0), encode(move_msg(s)));
    t.send(net.command(0), encode(move_msg(5, "drone2")));
    std::vector<std::int64_t> seqs;
    for (const auto& m : rx.poll()) seqs.push_back(m.seq);
    EXPECT_EQ(seqs, (std::vector<std::int64_t>{1, 3, 4}));
    EXPECT_EQ(rx.dropped(), 3u);
    EXPECT_EQ(rx.misaddressed(), 1u);
}

TEST(Commands, SenderSeqIsStrictlyIncreasingPerChaser) {
    InProcessTransport t;
    NetworkConfig net;
    CommandSender tx(t, net);
    EXPECT_EQ(tx.send(0, "drone1", LandCommand{}).seq, 1);
    EXPECT_EQ(tx.send(1, "drone2", LandCommand{}).seq, 1);
    EXPECT_EQ(tx.send(0, "drone1", MoveCommand{20, 0, 0, 100}).seq, 2);
}

TEST(Lossy, SeededLossAndDuplication) {
    InProcessTransport inner;
    LossyTransport t(inner, 0.2, 0.1, 99);
    const Endpoint ep{"127.0.0.1", 3};
    t.bind(ep);
    for (int i = 0; i < 10000; ++i) t.send(ep, "x");
    const auto got = t.drain(ep, 0, 0ms);
    const auto s = t.stats();
    EXPECT_EQ(got.size(), 10000 - s.dropped + s.duplicated);
    EXPECT_NEAR(static_cast<double>(s.dropped) / 10000, 0.2, 0.02);
    EXPECT_NEAR(static_cast<double>(s.duplicated) / (10000 - s.dropped), 0.1, 0.02);

    InProcessTransport inner2;
    LossyTransport t2(inner2, 0.2, 0.1, 99);
    t2.bind(ep);
    for (int i = 0; i < 10000; ++i) t2.send(ep, "x");
    EXPECT_EQ(t2.stats().dropped, s.dropped);
}

TEST(Udp, LoopbackDelivers) {
    UdpTransport t;
    const Endpoint ep{"127.0.0.1", 47611};
    Subscription<DetectionMsg> sub(t, ep);
    Publisher<DetectionMsg> pub(t, ep);
    std::mt19937_64 rng(8);
    auto m = test::random_detection_msg(rng);
    m.timestamp_us = 77;
    pub.publish(m);
    EXPECT_TRUE(sub.poll(1, 1000ms));
    EXPECT_EQ(*sub.latest(), m);
    EXPECT_EQ(t.stats().sent, 1u);
    EXPECT_EQ(t.stats().errors, 0u);
}

TEST(Udp, CommandChannelThroughSockets) {
    UdpTransport t;
    NetworkConfig net;
    net.command_base_port = 47621;
    CommandReceiver rx(t, net.command(1), "drone2");
    CommandSender tx(t, net);
    tx.send(1, "drone2", MoveCommand{0, 20, 0, 100});
    tx.send(1, "drone2", LandCommand{});
    const auto got = rx.poll(2, 1000ms);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_TRUE(std::holds_alternative<MoveCommand>(got[0].move));
    EXPECT_TRUE(std::holds_alternative<LandCommand>(got[1].move));
}

TEST(Udp, BadAddressIsReportedNotFatal) {
    UdpTransport t;
    EXPECT_THROW(t.send(Endpoint{"not-an-ip", 1}, "x"), std::runtime_error);
    EXPECT_THROW(t.bind(Endpoint{"256.0.0.1", 47631}), std::runtime_error);
}

TEST(Network, EnvironmentOverrides) {
    setenv("MARVIN_TRACKER_ADDR", "127.0.0.2:50000", 1);
    setenv("MARVIN_COMMAND_BASE_PORT", "51000", 1);
    const auto net = NetworkConfig{}.with_env_overrides();
    unsetenv("MARVIN_TRACKER_ADDR");
    unsetenv("MARVIN_COMMAND_BASE_PORT");
    EXPECT_EQ(net.tracker, (Endpoint{"127.0.0.2", 50000}));
    EXPECT_EQ(net.detections, (Endpoint{"127.0.0.1", 47001}));
    EXPECT_EQ(net.command(2), (Endpoint{"127.0.0.1", 51002}));
    setenv("MARVIN_DETECTION_ADDR", "nohostport", 1);
    EXPECT_THROW(NetworkConfig{}.with_env_overrides(), std::runtime_error);
    unsetenv("MARVIN_DETECTION_ADDR");
}
