#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "test_util.hpp"
#include "xenav/errors.hpp"
#include "xenav/protocol.hpp"

using namespace xenav;
using namespace std::chrono_literals;

namespace {

struct Pair
{
    LineServer server;
    LineChannel client;
    LineChannel peer;
};

std::unique_ptr<Pair> connected(std::chrono::milliseconds io_timeout = 2000ms)
{
    auto p = std::make_unique<Pair>();
    p->client = connect_endpoint(parse_endpoint(p->server.endpoint()), io_timeout);
    auto peer = p->server.accept(2000ms, io_timeout);
    if (!peer) {
        throw std::runtime_error("accept timed out");
    }
    p->peer = std::move(*peer);
    return p;
}

} // namespace

TEST(Protocol, HexRoundTrip)
{
    EXPECT_EQ(hex_encode(std::string("\x00\x01\xab\xff", 4)), "0001abff");
    EXPECT_EQ(hex_decode("0001ABff"), std::string("\x00\x01\xab\xff", 4));
    std::string all;
    for (int i = 0; i < 256; ++i) {
        all.push_back(static_cast<char>(i));
    }
    EXPECT_EQ(hex_decode(hex_encode(all)), all);
    EXPECT_THROW(hex_decode("abc"), ProtocolError);
    EXPECT_THROW(hex_decode("zz"), ProtocolError);
}

TEST(Protocol, EndpointParsing)
{
    const Endpoint ep = parse_endpoint("tcp://127.0.0.1:5555");
    EXPECT_EQ(ep.host, "127.0.0.1");
    EXPECT_EQ(ep.port, 5555);
    EXPECT_EQ(parse_endpoint("tcp://localhost:1").host, "localhost");
    EXPECT_THROW(parse_endpoint("udp://127.0.0.1:5555"), ArgumentError);
    EXPECT_THROW(parse_endpoint("tcp://127.0.0.1"), ArgumentError);
    EXPECT_THROW(parse_endpoint("tcp://:5555"), ArgumentError);
    EXPECT_THROW(parse_endpoint("tcp://host:0"), ArgumentError);
    EXPECT_THROW(parse_endpoint("tcp://host:70000"), ArgumentError);
    EXPECT_THROW(parse_endpoint("tcp://host:12ab"), ArgumentError);
}

TEST(Protocol, MessageShapes)
{
    TaskSpec task;
    task.target_category = "bed";
    const nlohmann::json hidden = hello_message("ep-000001", task, nullptr, 128, 128);
    EXPECT_EQ(hidden["type"], "hello");
    EXPECT_EQ(hidden["version"], kProtocolVersion);
    EXPECT_TRUE(hidden["embodiment"].is_null());
    EXPECT_EQ(hidden["task"]["instruction"], "find a bed");
    EXPECT_EQ(hidden["image"]["width"], 128);

    const EmbodimentConfig e = preset_embodiment("locobot");
    const nlohmann::json shown = hello_message("ep-000001", task, &e, 128, 128);
    EXPECT_EQ(shown["embodiment"].get<EmbodimentConfig>(), e);

    EXPECT_EQ(ack_message().dump(), R"({"type":"ack","version":1})");
    EXPECT_EQ(act_message(Action::RotateLeft6).dump(), R"({"action":"RotateLeft6","type":"act"})");
    const auto end = end_message(true, 12, 1, 0.5, {0.1, -0.01}, "");
    EXPECT_EQ(end["metrics"]["collisions"], 1);
    EXPECT_EQ(end["rewards"].size(), 2U);
    EXPECT_EQ(end.dump().find('\n'), std::string::npos);
}

TEST(Protocol, ParseActAndErrors)
{
    for (std::size_t i = 0; i < kActionCount; ++i) {
        const auto a = static_cast<Action>(i);
        EXPECT_EQ(parse_act(act_message(a).dump()), a);
    }
    EXPECT_THROW(parse_act(R"({"type":"act","action":"Jump"})"), ProtocolError);
    EXPECT_THROW(parse_act(R"({"type":"act"})"), ProtocolError);
    EXPECT_THROW(parse_act(R"({"type":"obs","action":"Done"})"), ProtocolError);
    EXPECT_THROW(parse_act("not json"), ProtocolError);
    EXPECT_THROW(parse_act("[1,2]"), ProtocolError);
    EXPECT_THROW(parse_message(R"({"version":1})", "ack"), ProtocolError);
}

TEST(Protocol, ObservationSurvivesTheWire)
{
    auto b = xenav::testing::open_room(4.0);
    b.add_block("chair", {2.5, 2.5, 3.0, 3.0}, 0.0, 0.9);
    const Scene scene = b.build();
    const EmbodimentConfig e = preset_embodiment("stretch_re1");
    Observation obs = observe(scene, e, {1.0, 1.0, 45.0}, eval_sim_options());
    obs.last_action_failed = true;
    TaskSpec task;
    task.target_category = "chair";
    const nlohmann::json msg = obs_message(7, obs, task);
    const nlohmann::json back = parse_message(msg.dump(), "obs");
    EXPECT_EQ(back["step"], 7);
    EXPECT_EQ(back["instruction"], "find a chair");
    const Observation decoded = decode_obs(back);
    EXPECT_EQ(decoded.images[0], obs.images[0]);
    EXPECT_EQ(decoded.images[1], obs.images[1]);
    EXPECT_TRUE(decoded.last_action_failed);

    nlohmann::json broken = msg;
    broken["images"][0]["data"] = "00";
    EXPECT_THROW(decode_obs(broken), ProtocolError);
    broken = msg;
    broken["images"].erase(1);
    EXPECT_THROW(decode_obs(broken), ProtocolError);
}

TEST(Protocol, ChannelCarriesLinesBothWays)
{
    auto p = connected();
    p->client.send_line("first");
    p->client.send_line("second\r");
    const std::string big(300000, 'x');
    p->client.send_line(big);
    EXPECT_EQ(p->peer.recv_line(), "first");
    EXPECT_EQ(p->peer.recv_line(), "second");
    EXPECT_EQ(p->peer.recv_line(), big);
    p->peer.send(ack_message());
    EXPECT_EQ(parse_message(p->client.recv_line(), "ack")["version"], 1);
}

TEST(Protocol, SilentPeerTimesOut)
{
    auto p = connected(150ms);
    const auto t0 = std::chrono::steady_clock::now();
    EXPECT_THROW(p->client.recv_line(), TimeoutError);
    EXPECT_GE(std::chrono::steady_clock::now() - t0, 140ms);
}

TEST(Protocol, ClosedPeerIsAnIoError)
{
    auto p = connected();
    p->peer.send_line("partial-then-more");
    p->peer.close();
    EXPECT_EQ(p->client.recv_line(), "partial-then-more");
    EXPECT_THROW(p->client.recv_line(), IoError);
    LineChannel closed;
    EXPECT_THROW(closed.send_line("x"), IoError);
}

TEST(Protocol, NothingListeningIsAConnectError)
{
    std::uint16_t port = 0;
    {
        LineServer s;
        port = s.port();
    }
    EXPECT_THROW(connect_endpoint({"127.0.0.1", port}, 500ms), ConnectError);
    EXPECT_THROW(connect_endpoint({"no-such-host.invalid", 1}, 500ms), ConnectError);
}

TEST(Protocol, AcceptWithoutClientReturnsEmpty)
{
    LineServer s;
    EXPECT_FALSE(s.accept(50ms));
}

TEST(Protocol, ConstantSessionAnswersEveryObs)
{
    auto p = connected();
    auto answered = std::async(std::launch::async, [&] { return serve_constant_session(p->client, Action::MoveAhead); });
    TaskSpec task;
    task.target_category = "bed";
    p->peer.send(hello_message("ep-000000", task, nullptr, 4, 4));
    EXPECT_EQ(parse_message(p->peer.recv_line(), "ack")["version"], kProtocolVersion);
    Observation obs;
    obs.images[0] = Image::masked(4, 4, 0);
    obs.images[1] = Image::masked(4, 4, 1);
    for (int i = 0; i < 3; ++i) {
        p->peer.send(obs_message(i, obs, task));
        EXPECT_EQ(parse_act(p->peer.recv_line()), Action::MoveAhead);
    }
    p->peer.send(end_message(false, 3, 0, 1.0, {}, ""));
    EXPECT_EQ(answered.get(), 3);
}

TEST(Protocol, ConstantSessionRejectsOtherVersions)
{
    auto p = connected();
    auto session = std::async(std::launch::async, [&] { return serve_constant_session(p->client, Action::Done); });
    nlohmann::json hello = hello_message("ep-000000", TaskSpec{}, nullptr, 4, 4);
    hello["version"] = 2;
    p->peer.send(hello);
    EXPECT_THROW(session.get(), ProtocolError);
}
