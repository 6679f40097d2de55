#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "xenav/cli.hpp"
#include "xenav/dataset.hpp"
#include "xenav/harness.hpp"

using namespace xenav;

namespace {

struct Outcome
{
    int code = -1;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "xenav");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    Outcome r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Runs the built executable; stderr goes to a file so it can be inspected.
Outcome binary(const std::string& args, const xenav::testing::TempDir& dir)
{
    const auto err_path = dir / "stderr.txt";
    const std::string cmd = std::string(XENAV_CLI_PATH) + " " + args + " 2>" + err_path.string();
    Outcome r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    char buf[4096];
    while (const std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) {
        r.out.append(buf, n);
    }
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_file(err_path);
    return r;
}

} // namespace

TEST(Cli, ExitCodesOfTheBinary)
{
    const xenav::testing::TempDir dir;
    EXPECT_EQ(binary("--help", dir).code, 0);
    EXPECT_EQ(binary("", dir).code, 2);
    EXPECT_EQ(binary("fly-away", dir).code, 2);
    EXPECT_EQ(binary("sample-embodiments --n 0", dir).code, 2);
    const Outcome bad_narrow = binary("sample-embodiments --narrow bogus 0 1", dir);
    EXPECT_EQ(bad_narrow.code, 2);
    EXPECT_NE(bad_narrow.err.find("collider_size"), std::string::npos) << bad_narrow.err;
    EXPECT_EQ(binary("sample-embodiments --narrow camera_height 0.1 9", dir).code, 2);
    EXPECT_EQ(binary("eval", dir).code, 2);
    EXPECT_EQ(binary("render --trace " + (dir / "nothing").string(), dir).code, 2);
    const Outcome ok = binary("sample-embodiments --n 2 --seed 5", dir);
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(nlohmann::json::parse(ok.out).size(), 2U);
}

TEST(Cli, SamplingIsDeterministicAndNarrowable)
{
    const Outcome a = cli({"sample-embodiments", "--n", "20", "--seed", "3", "--narrow", "camera_height", "0.4", "0.8"});
    const Outcome b = cli({"sample-embodiments", "--n", "20", "--seed", "3", "--narrow", "camera_height", "0.4", "0.8"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    const auto list = nlohmann::json::parse(a.out).get<std::vector<EmbodimentConfig>>();
    ASSERT_EQ(list.size(), 20U);
    for (const auto& e : list) {
        EXPECT_TRUE(validate(e).empty());
        for (const auto& c : e.cameras) {
            EXPECT_GE(c.pos_y, 0.4);
            EXPECT_LE(c.pos_y, 0.8);
        }
    }
    EXPECT_NE(a.err.find("config"), std::string::npos);
    EXPECT_NE(cli({"sample-embodiments", "--n", "20", "--seed", "4"}).out, a.out);
}

TEST(Cli, SceneFileMatchesTheLibrary)
{
    const xenav::testing::TempDir dir;
    const Outcome r = cli({"gen-scene", "--seed", "4", "--out", (dir / "s.scene").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(serialize_scene(load_scene(dir / "s.scene")), serialize_scene(generate_scene(4)));
}

TEST(Cli, DefaultOutputHonorsTheEnvironment)
{
    const xenav::testing::TempDir dir;
    ::setenv(kOutDirEnv, dir.path().c_str(), 1);
    EXPECT_EQ(default_output("x.json"), dir / "x.json");
    const Outcome r = cli({"gen-scene", "--seed", "2"});
    ::unsetenv(kOutDirEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "scene-2.json"));
    EXPECT_EQ(default_output("x.json"), std::filesystem::path("x.json"));
}

TEST(Cli, GenDataWritesAVerifiableDataset)
{
    const xenav::testing::TempDir dir;
    const Outcome r = cli({"gen-data", "--n", "6", "--seed", "2", "--workers", "2", "--shard-size", "4", "--out",
                       dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("throughput: 6 expert episodes"), std::string::npos) << r.err;
    Manifest m;
    const auto records = read_dataset(dir.path(), &m);
    EXPECT_EQ(records.size(), 6U);
    EXPECT_EQ(m.shards.size(), 2U);
    EXPECT_EQ(r.out, (dir / "manifest.json").string() + "\n");
}

TEST(Cli, BenchEvalAndRender)
{
    const xenav::testing::TempDir dir;
    const std::string suite = (dir / "suite.json").string();
    const std::string report = (dir / "report.json").string();
    ASSERT_EQ(cli({"make-bench", "--n", "3", "--seed", "8", "--mode", "fixed", "--preset", "locobot", "--out", suite})
                  .code,
              0);
    EXPECT_EQ(load_suite(suite).episodes.size(), 3U);

    const Outcome eval = cli({"eval", "--suite", suite, "--policy", "expert", "--workers", "1", "--report", report});
    ASSERT_EQ(eval.code, 0) << eval.err;
    EXPECT_NE(eval.out.find("expert"), std::string::npos);
    EXPECT_NE(eval.out.find("success"), std::string::npos);
    EXPECT_NE(eval.err.find("throughput:"), std::string::npos);
    const auto doc = nlohmann::json::parse(read_file(report));
    EXPECT_EQ(doc["format"], "xenav-report");
    EXPECT_EQ(doc["episodes"].size(), 3U);

    const std::string svg = (dir / "trace.svg").string();
    const Outcome drawn = cli({"render", "--trace", report, "--suite", suite, "--out", svg});
    ASSERT_EQ(drawn.code, 0) << drawn.err;
    EXPECT_EQ(read_file(svg).rfind("<svg", 0), 0U);

    EXPECT_EQ(cli({"render", "--trace", report, "--out", svg}).code, 2);
    EXPECT_EQ(cli({"render", "--trace", report, "--suite", suite, "--episode", "ep-999999", "--out", svg}).code, 1);
    EXPECT_EQ(cli({"eval", "--suite", suite, "--policy", "teleport"}).code, 2);
}

TEST(Cli, RenderFromDataset)
{
    const xenav::testing::TempDir dir;
    const auto data = dir / "data";
    ASSERT_EQ(cli({"gen-data", "--n", "2", "--seed", "1", "--out", data.string()}).code, 0);
    const auto svg = dir / "d.svg";
    const Outcome r = cli({"render", "--trace", data.string(), "--episode", "ep-000001", "--out", svg.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(read_file(svg).find("ep-000001"), std::string::npos);
    const Outcome shard =
        cli({"render", "--trace", (data / "shard-00000.jsonl").string(), "--out", (dir / "s.svg").string()});
    EXPECT_EQ(shard.code, 0) << shard.err;
}

TEST(Cli, BridgeWithoutServerIsARuntimeError)
{
    const xenav::testing::TempDir dir;
    const std::string suite = (dir / "suite.json").string();
    ASSERT_EQ(cli({"make-bench", "--n", "1", "--seed", "2", "--out", suite}).code, 0);
    std::uint16_t port = 0;
    {
        LineServer s;
        port = s.port();
    }
    const Outcome r = binary("eval --suite " + suite + " --policy bridge:tcp://127.0.0.1:" + std::to_string(port) +
                             " --report " + (dir / "r.json").string(),
                         dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("cannot connect"), std::string::npos) << r.err;
}
