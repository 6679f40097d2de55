#include <gtest/gtest.h>

#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "xenav/errors.hpp"
#include "xenav/harness.hpp"

using namespace xenav;
using namespace std::chrono_literals;

namespace {

const BenchmarkSuite& random_suite()
{
    static const BenchmarkSuite suite = make_benchmark(101, 50);
    return suite;
}

BenchmarkSuite short_suite(std::uint64_t n, int max_steps)
{
    BenchmarkOptions o;
    o.task.max_steps = max_steps;
    return make_benchmark(55, n, o);
}

// Serves `sessions` bridge connections in order, one handler call each.
class ScriptedPeer
{
public:
    template <typename Handler>
    ScriptedPeer(int sessions, Handler handler)
        : thread_([this, sessions, handler] {
              for (int i = 0; i < sessions; ++i) {
                  auto ch = server_.accept(10s, 10s);
                  if (!ch) {
                      return;
                  }
                  try {
                      handler(*ch);
                  } catch (const Error&) {
                  }
              }
          })
    {
    }
    ~ScriptedPeer() { thread_.join(); }

    std::string endpoint() const { return server_.endpoint(); }

private:
    LineServer server_;
    std::thread thread_;
};

} // namespace

TEST(Harness, ModeNames)
{
    for (const auto m : {EmbodimentMode::Fixed, EmbodimentMode::Random, EmbodimentMode::External}) {
        EXPECT_EQ(parse_mode(mode_name(m)), m);
    }
    EXPECT_THROW(parse_mode("sometimes"), ArgumentError);
}

TEST(Harness, PolicyParsing)
{
    for (const std::string text : {"expert", "noisy-expert:0.2", "greedy", "random", "constant:RotateLeft30",
                                   "bridge:tcp://127.0.0.1:9000"}) {
        EXPECT_EQ(parse_policy(text).describe(), text);
    }
    EXPECT_EQ(parse_policy("noisy-expert").noise, 0.2);
    EXPECT_EQ(parse_policy("random", 9).seed, 9U);
    EXPECT_EQ(parse_policy("constant:Done").action, Action::Done);
    for (const char* bad : {"", "expert:1", "noisy-expert:2", "noisy-expert:x", "constant:Fly", "constant",
                            "bridge:127.0.0.1:9", "oracle"}) {
        EXPECT_THROW(parse_policy(bad), ArgumentError) << bad;
    }
}

TEST(Harness, FixedModeCarriesThePreset)
{
    BenchmarkOptions o;
    o.mode = EmbodimentMode::Fixed;
    o.preset = "locobot";
    const BenchmarkSuite suite = make_benchmark(3, 20, o);
    ASSERT_EQ(suite.episodes.size(), 20U);
    for (const auto& spec : suite.episodes) {
        ASSERT_TRUE(spec.embodiment);
        EXPECT_EQ(*spec.embodiment, preset_embodiment("locobot"));
    }
    o.preset = "nonexistent";
    EXPECT_THROW(make_benchmark(3, 1, o), LookupError);
}

TEST(Harness, RandomModeDrawsDistinctEmbodiments)
{
    const auto& suite = random_suite();
    std::set<std::uint64_t> seeds;
    std::set<std::uint64_t> scenes;
    for (const auto& spec : suite.episodes) {
        ASSERT_TRUE(spec.embodiment_seed);
        seeds.insert(*spec.embodiment_seed);
        scenes.insert(spec.scene_seed);
    }
    EXPECT_EQ(seeds.size(), suite.episodes.size());
    EXPECT_EQ(scenes.size(), suite.episodes.size());
}

TEST(Harness, ExternalModeCyclesEmbodiments)
{
    BenchmarkOptions o;
    o.mode = EmbodimentMode::External;
    o.embodiments = {preset_embodiment("stretch_re1"), preset_embodiment("locobot")};
    const BenchmarkSuite suite = make_benchmark(4, 3, o);
    EXPECT_EQ(*suite.episodes[0].embodiment, o.embodiments[0]);
    EXPECT_EQ(*suite.episodes[1].embodiment, o.embodiments[1]);
    EXPECT_EQ(*suite.episodes[2].embodiment, o.embodiments[0]);
    o.embodiments.clear();
    EXPECT_THROW(make_benchmark(4, 3, o), ArgumentError);
    EXPECT_THROW(make_benchmark(4, 0, BenchmarkOptions{}), ArgumentError);
}

TEST(Harness, SuitesAreDeterministicAndPersist)
{
    const BenchmarkSuite a = make_benchmark(101, 5);
    const BenchmarkSuite b = make_benchmark(101, 5);
    EXPECT_EQ(a, b);
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
        EXPECT_EQ(a.episodes[i], random_suite().episodes[i]);
    }
    const xenav::testing::TempDir dir;
    save_suite(a, dir / "suite.json");
    EXPECT_EQ(load_suite(dir / "suite.json"), a);
    write_file_atomic(dir / "bad.json", "[]");
    EXPECT_THROW(load_suite(dir / "bad.json"), ParseError);
}

TEST(Harness, ExpertSolvesTheSuite)
{
    const auto& suite = random_suite();
    const BenchmarkResult r = run_benchmark(parse_policy("expert"), suite);
    ASSERT_EQ(r.episodes.size(), suite.episodes.size());
    EXPECT_GE(r.summary.success_rate, 0.95);
    for (const auto& ep : r.episodes) {
        if (ep.record.success) {
            // Replaying the expert reproduces its own length.
            EXPECT_EQ(ep.record.steps, *ep.record.expert_steps);
        }
    }
    EXPECT_DOUBLE_EQ(r.summary.sel, r.summary.success_rate);
}

TEST(Harness, ExpertReplayMatchesStoredTrajectory)
{
    const auto& suite = random_suite();
    const EpisodeSpec& spec = suite.episodes[0];
    const Scene scene = resolve_scene(spec, suite.config.scene_params);
    const EmbodimentConfig e = resolve_embodiment(spec, suite.config.ranges);
    const ExpertTrajectory t = expert_for(suite, spec, scene, e);
    const EpisodeResult r = run_episode(parse_policy("expert"), suite, 0);
    ASSERT_EQ(r.trace.steps.size(), t.actions.size());
    for (std::size_t i = 0; i < t.actions.size(); ++i) {
        EXPECT_EQ(r.trace.steps[i].action, t.actions[i]);
        EXPECT_EQ(r.trace.steps[i].pose, t.steps[i].pose);
    }
    EXPECT_EQ(r.record.success, t.success);
    EXPECT_THROW(run_episode(parse_policy("expert"), suite, suite.episodes.size()), IndexError);
}

TEST(Harness, RandomPolicyFailsWithTenSteps)
{
    const BenchmarkSuite suite = short_suite(10, 10);
    const BenchmarkResult r = run_benchmark(parse_policy("random", 1), suite);
    EXPECT_EQ(r.summary.success_rate, 0.0);
    for (const auto& ep : r.episodes) {
        EXPECT_LE(ep.record.steps, 10);
    }
}

TEST(Harness, ImmediateDoneFailsAfterOneStep)
{
    const EpisodeResult r = run_episode(parse_policy("constant:Done"), random_suite(), 1);
    EXPECT_FALSE(r.record.success);
    EXPECT_EQ(r.record.steps, 1);
    EXPECT_TRUE(r.error.empty());
}

TEST(Harness, RunsAreDeterministicAcrossWorkers)
{
    const BenchmarkSuite suite = short_suite(12, 80);
    RunOptions one;
    RunOptions four;
    four.workers = 4;
    const auto policy = parse_policy("noisy-expert:0.3", 5);
    const BenchmarkResult a = run_benchmark(policy, suite, one);
    const BenchmarkResult b = run_benchmark(policy, suite, four);
    EXPECT_EQ(a.episodes, b.episodes);
    EXPECT_EQ(a.summary, b.summary);
    EXPECT_EQ(run_benchmark(policy, suite, one).summary, a.summary);
}

TEST(Harness, CollisionPenaltyShiftsRewardsExactly)
{
    const BenchmarkSuite suite = short_suite(8, 120);
    const auto policy = parse_policy("noisy-expert:0.2", 2);
    RunOptions plain;
    RunOptions penalized;
    penalized.collision_penalty = 0.1;
    const auto a = run_benchmark(policy, suite, plain);
    const auto b = run_benchmark(policy, suite, penalized);
    int collisions = 0;
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
        const auto& sa = a.episodes[i].trace.steps;
        const auto& sb = b.episodes[i].trace.steps;
        ASSERT_EQ(sa.size(), sb.size());
        for (std::size_t k = 0; k < sa.size(); ++k) {
            EXPECT_EQ(sa[k].action, sb[k].action);
            EXPECT_EQ(sa[k].collision, sb[k].collision);
            EXPECT_EQ(sb[k].reward, sa[k].reward - (sa[k].collision ? 0.1 : 0.0));
            collisions += sa[k].collision ? 1 : 0;
        }
    }
    EXPECT_GT(collisions, 0);
}

TEST(Harness, BridgeConstantPeerMatchesBuiltinConstant)
{
    const BenchmarkSuite suite = short_suite(3, 25);
    ScriptedPeer peer(3, [](LineChannel& ch) { serve_constant_session(ch, Action::MoveAhead); });
    const auto bridged = run_benchmark(parse_policy("bridge:" + peer.endpoint()), suite);
    const auto builtin = run_benchmark(parse_policy("constant:MoveAhead"), suite);
    for (std::size_t i = 0; i < suite.episodes.size(); ++i) {
        EXPECT_TRUE(bridged.episodes[i].error.empty()) << bridged.episodes[i].error;
        EXPECT_EQ(bridged.episodes[i].trace, builtin.episodes[i].trace);
        EXPECT_EQ(bridged.episodes[i].record, builtin.episodes[i].record);
    }
}

TEST(Harness, BridgeSeesEveryObservationAndTheEnd)
{
    const BenchmarkSuite suite = short_suite(1, 6);
    int obs_count = 0;
    nlohmann::json end;
    nlohmann::json hello;
    {
        ScriptedPeer peer(1, [&](LineChannel& ch) {
            hello = parse_message(ch.recv_line(), "hello");
            ch.send(ack_message());
            for (;;) {
                const std::string line = ch.recv_line();
                const auto msg = nlohmann::json::parse(line);
                if (msg["type"] == "end") {
                    end = msg;
                    return;
                }
                EXPECT_EQ(msg["step"], obs_count);
                EXPECT_EQ(decode_obs(msg).images[0].width, kDefaultRenderSize);
                ++obs_count;
                ch.send(act_message(Action::RotateRight30));
            }
        });
        const EpisodeResult r = run_episode(parse_policy("bridge:" + peer.endpoint()), suite, 0);
        EXPECT_EQ(r.record.steps, 6);
    }
    EXPECT_EQ(obs_count, 6);
    EXPECT_TRUE(hello["embodiment"].is_null());
    EXPECT_EQ(end["metrics"]["steps"], 6);
    EXPECT_EQ(end["rewards"].size(), 6U);
}

TEST(Harness, SilentPeerFailsTheEpisodeInBand)
{
    const BenchmarkSuite suite = short_suite(1, 20);
    auto policy = parse_policy("bridge:tcp://127.0.0.1:1");
    ScriptedPeer peer(1, [](LineChannel& ch) {
        parse_message(ch.recv_line(), "hello");
        ch.send(ack_message());
        ch.set_timeout(3s);
        try {
            for (;;) {
                ch.recv_line();
            }
        } catch (const Error&) {
        }
    });
    policy.endpoint = peer.endpoint();
    policy.timeout = 200ms;
    const EpisodeResult r = run_episode(policy, suite, 0);
    EXPECT_FALSE(r.record.success);
    EXPECT_NE(r.error.find("no message"), std::string::npos) << r.error;
}

TEST(Harness, UnknownActionFailsTheEpisode)
{
    const BenchmarkSuite suite = short_suite(1, 20);
    ScriptedPeer peer(1, [](LineChannel& ch) {
        parse_message(ch.recv_line(), "hello");
        ch.send(ack_message());
        ch.recv_line();
        ch.send_line(R"({"type":"act","action":"Teleport"})");
        ch.recv_line();
    });
    const EpisodeResult r = run_episode(parse_policy("bridge:" + peer.endpoint()), suite, 0);
    EXPECT_FALSE(r.record.success);
    EXPECT_NE(r.error.find("Teleport"), std::string::npos) << r.error;
}

TEST(Harness, VersionMismatchIsRejected)
{
    const BenchmarkSuite suite = short_suite(1, 20);
    nlohmann::json reply;
    {
        ScriptedPeer peer(1, [&](LineChannel& ch) {
            parse_message(ch.recv_line(), "hello");
            ch.send(ack_message(2));
            reply = nlohmann::json::parse(ch.recv_line());
        });
        const EpisodeResult r = run_episode(parse_policy("bridge:" + peer.endpoint()), suite, 0);
        EXPECT_FALSE(r.record.success);
        EXPECT_NE(r.error.find("version"), std::string::npos) << r.error;
    }
    EXPECT_EQ(reply["type"], "reject");
}

TEST(Harness, DisclosedEmbodimentReachesThePeer)
{
    BenchmarkOptions o;
    o.disclose_embodiment = true;
    o.task.max_steps = 2;
    const BenchmarkSuite suite = make_benchmark(6, 1, o);
    nlohmann::json hello;
    {
        ScriptedPeer peer(1, [&](LineChannel& ch) {
            hello = parse_message(ch.recv_line(), "hello");
            ch.send(ack_message());
            for (;;) {
                if (nlohmann::json::parse(ch.recv_line())["type"] == "end") {
                    return;
                }
                ch.send(act_message(Action::RotateLeft6));
            }
        });
        run_episode(parse_policy("bridge:" + peer.endpoint()), suite, 0);
    }
    EXPECT_EQ(hello["embodiment"].get<EmbodimentConfig>(),
              resolve_embodiment(suite.episodes[0], suite.config.ranges));
}

TEST(Harness, MissingBridgeIsAConnectError)
{
    std::uint16_t port = 0;
    {
        LineServer s;
        port = s.port();
    }
    const auto policy = parse_policy("bridge:tcp://127.0.0.1:" + std::to_string(port));
    EXPECT_THROW(run_episode(policy, short_suite(1, 5), 0), ConnectError);
}

TEST(Harness, GreedyBeatsRandom)
{
    // Smaller renders keep the 600-step random runs affordable.
    RunOptions opts;
    opts.sim.render_width = 64;
    opts.sim.render_height = 64;
    const auto& suite = random_suite();
    const auto greedy = run_benchmark(parse_policy("greedy"), suite, opts);
    const auto random = run_benchmark(parse_policy("random", 3), suite, opts);
    EXPECT_GE(greedy.summary.success_rate, 0.2);
    EXPECT_GT(greedy.summary.success_rate, random.summary.success_rate);
}

TEST(Harness, ReportHoldsSummaryAndEpisodes)
{
    const BenchmarkSuite suite = short_suite(2, 5);
    const auto policy = parse_policy("constant:RotateRight30");
    const RunOptions opts;
    const auto result = run_benchmark(policy, suite, opts);
    const nlohmann::json report = benchmark_report(result, policy, suite, opts);
    EXPECT_EQ(report["summary"].get<MetricsSummary>(), result.summary);
    ASSERT_EQ(report["episodes"].size(), 2U);
    EXPECT_EQ(report["episodes"][1].get<EpisodeResult>(), result.episodes[1]);
}
