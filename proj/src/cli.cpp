#include "xenav/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xenav/dataset.hpp"
#include "xenav/embodiment.hpp"
#include "xenav/errors.hpp"
#include "xenav/harness.hpp"
#include "xenav/plot.hpp"
#include "xenav/scene.hpp"

namespace xenav {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

template <typename T>
T load_json_file(const std::string& path, const char* what)
{
    try {
        return json::parse(read_file(path)).get<T>();
    } catch (const json::exception& err) {
        throw ParseError(std::string(what) + " " + path + ": " + err.what());
    }
}

void write_output(const std::filesystem::path& path, const std::string& bytes, std::ostream& out)
{
    if (path == "-") {
        out << bytes;
        return;
    }
    write_file_atomic(path, bytes);
}

void log_config(std::ostream& err, std::string_view command, const json& config)
{
    err << "xenav " << command << " config " << config.dump() << "\n";
}

void log_throughput(std::ostream& err, std::string_view what, std::size_t n, double seconds)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "throughput: %zu %s in %.3f s (%.1f episodes/min)\n", n, std::string(what).c_str(),
                  seconds, seconds > 0 ? 60.0 * static_cast<double>(n) / seconds : 0.0);
    err << buf;
}

struct Args
{
    // sample-embodiments
    std::uint64_t n = 1;
    std::uint64_t seed = 0;
    std::string ranges_file;
    std::vector<std::vector<std::string>> narrow;
    std::string out;
    // gen-scene
    std::string params_file;
    // gen-data
    int workers = 0;
    bool store_obs = false;
    std::uint64_t shard_size = 256;
    std::string config_file;
    // make-bench
    std::string mode = "random";
    std::string preset = "locobot";
    std::string embodiments_file;
    bool low_targets = false;
    bool disclose = false;
    double success_distance = 2.0;
    int max_steps = 600;
    // eval
    std::string suite_file;
    std::string policy = "expert";
    std::uint64_t policy_seed = 0;
    double collision_penalty = 0.0;
    std::string report;
    double timeout = 30.0;
    // render
    std::string trace_file;
    std::string episode;
};

SamplingRanges base_ranges(const Args& a)
{
    return a.ranges_file.empty() ? SamplingRanges{} : load_json_file<SamplingRanges>(a.ranges_file, "ranges");
}

SamplingRanges narrowed(SamplingRanges ranges, const std::vector<std::vector<std::string>>& narrow)
{
    for (const auto& triple : narrow) {
        if (triple.size() != 3) {
            throw ArgumentError("--narrow takes PARAM LO HI");
        }
        double lo = 0;
        double hi = 0;
        try {
            lo = std::stod(triple[1]);
            hi = std::stod(triple[2]);
        } catch (const std::exception&) {
            throw ArgumentError("--narrow bounds must be numbers");
        }
        try {
            ranges = filter_ranges(ranges, triple[0], {lo, hi});
        } catch (const LookupError& err) {
            std::string names;
            for (const auto& name : filterable_parameters()) {
                names += (names.empty() ? "" : ", ") + name;
            }
            throw ArgumentError(std::string(err.what()) + "; known: " + names);
        } catch (const RangeError& err) {
            throw ArgumentError("--narrow " + triple[0] + ": " + err.what());
        }
    }
    return ranges;
}

int cmd_sample(const Args& a, std::ostream& out, std::ostream& err)
{
    const SamplingRanges ranges = narrowed(base_ranges(a), a.narrow);
    log_config(err, "sample-embodiments", {{"n", a.n}, {"seed", a.seed}, {"ranges", ranges}});
    json list = json::array();
    for (std::uint64_t i = 0; i < a.n; ++i) {
        list.push_back(sample_embodiment(split_seed(a.seed, i), ranges));
    }
    write_output(a.out.empty() ? std::filesystem::path("-") : std::filesystem::path(a.out), list.dump(2) + "\n", out);
    return 0;
}

int cmd_gen_scene(const Args& a, std::ostream& out, std::ostream& err)
{
    const SceneParams params =
        a.params_file.empty() ? SceneParams{} : load_json_file<SceneParams>(a.params_file, "scene params");
    const std::filesystem::path path = a.out.empty() ? default_output("scene-" + std::to_string(a.seed) + ".json")
                                                     : std::filesystem::path(a.out);
    log_config(err, "gen-scene", {{"seed", a.seed}, {"params", params}, {"out", path.string()}});
    const Scene scene = generate_scene(a.seed, params);
    save_scene(scene, path);
    out << path.string() << "\n";
    err << "scene " << scene.nx() << "x" << scene.nz() << " cells, " << scene.instances().size() << " instances\n";
    return 0;
}

int cmd_gen_data(const Args& a, std::ostream& out, std::ostream& err)
{
    DatasetOptions o;
    o.n = a.n;
    o.master_seed = a.seed;
    o.shard_size = a.shard_size;
    o.workers = a.workers > 0 ? a.workers : default_workers();
    o.store_observations = a.store_obs;
    if (!a.config_file.empty()) {
        o.config = load_json_file<EpisodeConfig>(a.config_file, "episode config");
    }
    if (!a.ranges_file.empty() || !a.narrow.empty()) {
        o.config.ranges = narrowed(a.ranges_file.empty() ? o.config.ranges : base_ranges(a), a.narrow);
    }
    o.out_dir = a.out.empty() ? default_output("dataset") : std::filesystem::path(a.out);
    log_config(err, "gen-data",
               {{"n", o.n},
                {"seed", o.master_seed},
                {"shard_size", o.shard_size},
                {"workers", o.workers},
                {"store_obs", o.store_observations},
                {"out", o.out_dir.string()},
                {"config", o.config}});
    const auto t0 = Clock::now();
    const Manifest m = generate_dataset(o);
    log_throughput(err, "expert episodes", m.episodes, std::chrono::duration<double>(Clock::now() - t0).count());
    char buf[128];
    std::snprintf(buf, sizeof buf, "%llu episodes, %llu successes (%.4f), %zu shards\n",
                  static_cast<unsigned long long>(m.episodes), static_cast<unsigned long long>(m.successes),
                  m.success_fraction(), m.shards.size());
    err << buf;
    out << (o.out_dir / kManifestName).string() << "\n";
    return 0;
}

int cmd_make_bench(const Args& a, std::ostream& out, std::ostream& err)
{
    BenchmarkOptions o;
    o.mode = parse_mode(a.mode);
    o.preset = a.preset;
    o.ranges = narrowed(base_ranges(a), a.narrow);
    if (!a.params_file.empty()) {
        o.scene_params = load_json_file<SceneParams>(a.params_file, "scene params");
    }
    if (!a.embodiments_file.empty()) {
        o.embodiments = load_json_file<std::vector<EmbodimentConfig>>(a.embodiments_file, "embodiments");
    }
    if (o.mode == EmbodimentMode::External && o.embodiments.empty()) {
        throw ArgumentError("--mode external needs --embodiments FILE");
    }
    o.low_targets = a.low_targets;
    o.disclose_embodiment = a.disclose;
    o.task.success_distance = a.success_distance;
    o.task.max_steps = a.max_steps;
    const std::filesystem::path path = a.out.empty() ? default_output("suite.json") : std::filesystem::path(a.out);
    log_config(err, "make-bench",
               {{"n", a.n},
                {"seed", a.seed},
                {"mode", a.mode},
                {"preset", a.preset},
                {"low_targets", a.low_targets},
                {"disclose_embodiment", a.disclose},
                {"success_distance", a.success_distance},
                {"max_steps", a.max_steps},
                {"out", path.string()}});
    const BenchmarkSuite suite = make_benchmark(a.seed, a.n, o);
    save_suite(suite, path);
    out << path.string() << "\n";
    return 0;
}

int cmd_eval(const Args& a, std::ostream& out, std::ostream& err)
{
    PolicyHandle policy = parse_policy(a.policy, a.policy_seed);
    if (!(a.timeout > 0)) {
        throw ArgumentError("--timeout must be positive");
    }
    policy.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout * 1000.0));
    const BenchmarkSuite suite = load_suite(a.suite_file);
    RunOptions o;
    o.collision_penalty = a.collision_penalty;
    o.workers = a.workers > 0 ? a.workers : default_workers();
    log_config(err, "eval",
               {{"suite", a.suite_file},
                {"suite_id", suite.id},
                {"policy", policy.describe()},
                {"policy_seed", policy.seed},
                {"collision_penalty", o.collision_penalty},
                {"workers", o.workers},
                {"timeout_s", a.timeout},
                {"report", a.report}});
    const BenchmarkResult result = run_benchmark(policy, suite, o);
    log_throughput(err, "episodes", result.episodes.size(), result.seconds);
    out << metrics_table({{policy.describe(), result.summary}});
    std::size_t failed = 0;
    for (const auto& ep : result.episodes) {
        failed += ep.error.empty() ? 0 : 1;
    }
    if (failed > 0) {
        err << failed << " episodes failed with a policy error\n";
    }
    const std::filesystem::path report = a.report.empty() ? default_output("report.json") : std::filesystem::path(a.report);
    write_output(report, benchmark_report(result, policy, suite, o).dump(2) + "\n", out);
    return 0;
}

int cmd_render(const Args& a, std::ostream& out, std::ostream& err)
{
    const std::filesystem::path trace_path(a.trace_file);
    std::optional<Scene> scene;
    PlotLayers layers;
    auto pick = [&](const std::string& id, std::size_t i) { return a.episode.empty() ? i == 0 : id == a.episode; };

    const bool is_jsonl = trace_path.extension() == ".jsonl";
    const bool is_report_file = !is_jsonl && std::filesystem::is_regular_file(trace_path) &&
                                trace_path.filename() != kManifestName;
    const json doc = is_report_file ? json::parse(read_file(trace_path)) : json();
    if (is_report_file) {
        if (doc.value("format", std::string{}) != "xenav-report") {
            throw ArgumentError(trace_path.string() + " is neither a report, a manifest, a shard nor a dataset");
        }
        if (a.suite_file.empty()) {
            throw ArgumentError("rendering an evaluation report needs --suite");
        }
        const BenchmarkSuite suite = load_suite(a.suite_file);
        const auto& eps = doc.at("episodes");
        for (std::size_t i = 0; i < eps.size(); ++i) {
            const EpisodeResult r = eps[i].get<EpisodeResult>();
            if (!pick(r.id, i)) {
                continue;
            }
            const auto spec = std::find_if(suite.episodes.begin(), suite.episodes.end(),
                                           [&](const EpisodeSpec& s) { return s.id == r.id; });
            if (spec == suite.episodes.end()) {
                throw LookupError("episode " + r.id + " is not in the suite");
            }
            scene = resolve_scene(*spec, suite.config.scene_params);
            const EmbodimentConfig e = resolve_embodiment(*spec, suite.config.ranges);
            try {
                const ExpertTrajectory t = expert_for(suite, *spec, *scene, e);
                const PlanContext ctx = prepare_plan(*scene, e, suite.config.planner);
                for (const int node : t.path) {
                    layers.planned_path.push_back(ctx.grid.position(node));
                }
                layers.waypoints = t.waypoints;
            } catch (const Error& err_) {
                err << "no expert plan: " << err_.what() << "\n";
            }
            layers.executed.push_back(r.trace.start);
            for (const auto& st : r.trace.steps) {
                layers.executed.push_back(st.pose);
            }
            layers.target_categories = {spec->task.target_category};
            layers.title = r.id + " " + spec->task.instruction() + (r.record.success ? " (success)" : " (failure)");
            break;
        }
    } else {
        // Dataset: a manifest, a dataset directory or a shard next to its manifest.
        std::filesystem::path dir = trace_path;
        if (!std::filesystem::is_directory(dir)) {
            dir = trace_path.parent_path().empty() ? std::filesystem::path(".") : trace_path.parent_path();
        }
        Manifest m;
        std::vector<DatasetRecord> records;
        if (is_jsonl) {
            m = load_manifest(dir / kManifestName);
            const auto shard = std::find_if(m.shards.begin(), m.shards.end(),
                                            [&](const ShardInfo& s) { return s.path == trace_path.filename(); });
            if (shard == m.shards.end()) {
                throw LookupError(trace_path.string() + " is not listed in its manifest");
            }
            records = read_shard(trace_path, shard->sha256);
        } else {
            records = read_dataset(dir, &m);
        }
        for (std::size_t i = 0; i < records.size(); ++i) {
            const DatasetRecord& r = records[i];
            if (!pick(r.spec.id, i)) {
                continue;
            }
            scene = resolve_scene(r.spec, m.config.scene_params);
            if (r.trajectory) {
                const PlanContext ctx = prepare_plan(*scene, r.embodiment, m.config.planner);
                for (const int node : r.trajectory->path) {
                    layers.planned_path.push_back(ctx.grid.position(node));
                }
                layers.waypoints = r.trajectory->waypoints;
                layers.executed = r.trajectory->poses();
            }
            layers.target_categories = {r.spec.task.target_category};
            layers.title = r.spec.id + " " + r.spec.task.instruction() + (r.success ? " (success)" : " (failure)");
            break;
        }
    }
    if (!scene) {
        throw LookupError(a.episode.empty() ? "trace holds no episodes" : "episode " + a.episode + " not found");
    }
    const std::filesystem::path path = a.out.empty() ? default_output("trace.svg") : std::filesystem::path(a.out);
    log_config(err, "render", {{"trace", a.trace_file}, {"episode", a.episode}, {"out", path.string()}});
    write_output(path, plot_svg(*scene, layers), out);
    return 0;
}

} // namespace

std::filesystem::path default_output(const std::string& name)
{
    const char* dir = std::getenv(kOutDirEnv);
    return (dir != nullptr && *dir != '\0') ? std::filesystem::path(dir) / name : std::filesystem::path(name);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Embodiment-randomized navigation simulator, expert planner and benchmark harness", "xenav"};
    app.require_subcommand(1);
    Args a;

    auto* sample = app.add_subcommand("sample-embodiments", "Sample embodiment configurations as JSON");
    sample->add_option("--n", a.n, "How many")->check(CLI::PositiveNumber);
    sample->add_option("--seed", a.seed, "Master seed");
    sample->add_option("--ranges", a.ranges_file, "Sampling ranges JSON")->check(CLI::ExistingFile);
    sample->add_option("--narrow", a.narrow, "Narrow one parameter: PARAM LO HI")->expected(3)->allow_extra_args(false);
    sample->add_option("--out", a.out, "Output file (stdout when omitted)");

    auto* scene = app.add_subcommand("gen-scene", "Generate one scene");
    scene->add_option("--seed", a.seed, "Scene seed");
    scene->add_option("--params", a.params_file, "Scene parameters JSON")->check(CLI::ExistingFile);
    scene->add_option("--out", a.out, "Scene file");

    auto* data = app.add_subcommand("gen-data", "Generate a sharded expert dataset");
    data->add_option("--n", a.n, "Episodes")->check(CLI::PositiveNumber);
    data->add_option("--seed", a.seed, "Master seed");
    data->add_option("--out", a.out, "Output directory");
    data->add_option("--workers", a.workers, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
    data->add_flag("--store-obs", a.store_obs, "Write rendered observations next to the shards");
    data->add_option("--shard-size", a.shard_size, "Episodes per shard")->check(CLI::PositiveNumber);
    data->add_option("--config", a.config_file, "Episode config JSON")->check(CLI::ExistingFile);
    data->add_option("--ranges", a.ranges_file, "Sampling ranges JSON")->check(CLI::ExistingFile);
    data->add_option("--narrow", a.narrow, "Narrow one parameter: PARAM LO HI")->expected(3)->allow_extra_args(false);

    auto* bench = app.add_subcommand("make-bench", "Build a benchmark suite");
    bench->add_option("--n", a.n, "Episodes")->check(CLI::PositiveNumber);
    bench->add_option("--seed", a.seed, "Suite seed");
    bench->add_option("--mode", a.mode, "Embodiment mode")->check(CLI::IsMember({"fixed", "random", "external"}));
    bench->add_option("--preset", a.preset, "Preset for fixed mode")
        ->check(CLI::IsMember(std::vector<std::string>(kPresetNames.begin(), kPresetNames.end())));
    bench->add_option("--embodiments", a.embodiments_file, "Embodiment list JSON for external mode")
        ->check(CLI::ExistingFile);
    bench->add_option("--ranges", a.ranges_file, "Sampling ranges JSON")->check(CLI::ExistingFile);
    bench->add_option("--narrow", a.narrow, "Narrow one parameter: PARAM LO HI")->expected(3)->allow_extra_args(false);
    bench->add_option("--params", a.params_file, "Scene parameters JSON")->check(CLI::ExistingFile);
    bench->add_flag("--low-targets", a.low_targets, "Place targets a 0.3 m camera can see");
    bench->add_flag("--disclose-embodiment", a.disclose, "Send the embodiment to external policies");
    bench->add_option("--success-distance", a.success_distance, "Success distance d, meters")
        ->check(CLI::PositiveNumber);
    bench->add_option("--max-steps", a.max_steps, "Step limit n")->check(CLI::PositiveNumber);
    bench->add_option("--out", a.out, "Suite file");

    auto* eval = app.add_subcommand("eval", "Evaluate a policy on a suite");
    eval->add_option("--suite", a.suite_file, "Suite file")->required()->check(CLI::ExistingFile);
    eval->add_option("--policy", a.policy, "expert | greedy | random | noisy-expert[:P] | constant:ACTION | "
                                           "bridge:tcp://HOST:PORT");
    eval->add_option("--policy-seed", a.policy_seed, "Seed for stochastic policies");
    eval->add_option("--collision-penalty", a.collision_penalty, "Reward penalty per collision")
        ->check(CLI::NonNegativeNumber);
    eval->add_option("--report", a.report, "Report JSON");
    eval->add_option("--workers", a.workers, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
    eval->add_option("--timeout", a.timeout, "Bridge timeout, seconds");

    auto* render = app.add_subcommand("render", "Draw a trace as a top-down SVG");
    render->add_option("--trace", a.trace_file, "Evaluation report, dataset directory, manifest or shard")
        ->required()
        ->check(CLI::ExistingPath);
    render->add_option("--episode", a.episode, "Episode id (default: the first)");
    render->add_option("--suite", a.suite_file, "Suite file, needed for evaluation reports")->check(CLI::ExistingFile);
    render->add_option("--out", a.out, "SVG file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return 2;
    }

    try {
        if (sample->parsed()) {
            return cmd_sample(a, out, err);
        }
        if (scene->parsed()) {
            return cmd_gen_scene(a, out, err);
        }
        if (data->parsed()) {
            return cmd_gen_data(a, out, err);
        }
        if (bench->parsed()) {
            return cmd_make_bench(a, out, err);
        }
        if (eval->parsed()) {
            return cmd_eval(a, out, err);
        }
        if (render->parsed()) {
            return cmd_render(a, out, err);
        }
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace xenav
