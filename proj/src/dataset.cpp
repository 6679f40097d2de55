#include "xenav/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "xenav/errors.hpp"

namespace xenav {

namespace fs = std::filesystem;

std::string episode_id(std::uint64_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "ep-%06llu", static_cast<unsigned long long>(index));
    return buf;
}

EmbodimentConfig resolve_embodiment(const EpisodeSpec& spec, const SamplingRanges& ranges)
{
    if (spec.embodiment) {
        return *spec.embodiment;
    }
    if (spec.embodiment_seed) {
        return sample_embodiment(*spec.embodiment_seed, ranges);
    }
    throw ValidationError("episode " + spec.id + " has neither an embodiment nor an embodiment seed");
}

Scene resolve_scene(const EpisodeSpec& spec, const SceneParams& params) { return generate_scene(spec.scene_seed, params); }

std::optional<Pose> sample_start(const Scene& scene, const EmbodimentConfig& e, const PlanContext& ctx,
                                 const TaskSpec& task, const SimOptions& options, double min_distance, Rng& rng)
{
    std::vector<InstanceId> targets;
    for (const Instance* inst : scene.instances_of(task.target_category)) {
        targets.push_back(inst->id);
    }
    if (targets.empty()) {
        return std::nullopt;
    }
    const std::vector<int> good = visible_goal_components(scene, e, ctx, targets, task, options);
    std::vector<int> nodes;
    for (int node = 0; node < ctx.graph.size(); ++node) {
        if (ctx.graph.has_node(node) && std::binary_search(good.begin(), good.end(), ctx.graph.component(node)) &&
            distance_to_targets(scene, targets, ctx.grid.position(node)) >= min_distance) {
            nodes.push_back(node);
        }
    }
    if (nodes.empty()) {
        return std::nullopt;
    }
    const int node = nodes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(nodes.size()) - 1))];
    const Vec2 p = ctx.grid.position(node);
    return Pose{p.x, p.z, normalize_heading(rng.uniform(0.0, 360.0))};
}

EmbodimentConfig probe_embodiment()
{
    EmbodimentConfig e;
    e.collider = {0.2, 0.3, 0.2};
    CameraConfig c;
    c.pos_y = 0.25;
    c.pitch = 0.0;
    c.hfov = 90.0;
    c.vfov = 60.0;
    e.cameras = {c};
    e.id = "probe";
    return e;
}

namespace {

bool probe_reaches(const Scene& scene, const TaskSpec& task, const PlannerConfig& planner)
{
    const EmbodimentConfig probe = probe_embodiment();
    const ReachGrid grid = reachable_grid(scene, probe, planner.spacing);
    std::vector<InstanceId> targets;
    for (const Instance* inst : scene.instances_of(task.target_category)) {
        targets.push_back(inst->id);
    }
    for (int node = 0; node < grid.size(); ++node) {
        if (grid.reachable[node] != 0 &&
            distance_to_targets(scene, targets, grid.position(node)) <= task.success_distance - planner.goal_margin) {
            return true;
        }
    }
    return false;
}

} // namespace

ResolvedEpisode make_episode(std::uint64_t master_seed, std::uint64_t index, const EpisodeConfig& config)
{
    const std::uint64_t episode_seed = split_seed(master_seed, index);
    std::string last_reason = "no attempts";
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
        const std::uint64_t s = split_seed(episode_seed, static_cast<std::uint64_t>(attempt));
        EpisodeSpec spec;
        spec.id = episode_id(index);
        spec.index = index;
        spec.attempt = attempt;
        spec.scene_seed = split_seed(s, 0);
        if (config.fixed_embodiment) {
            spec.embodiment = config.fixed_embodiment;
        } else {
            spec.embodiment_seed = split_seed(s, 1);
        }
        Rng rng(split_seed(s, 2));

        Scene scene;
        try {
            scene = resolve_scene(spec, config.scene_params);
        } catch (const GenerationError& err) {
            last_reason = err.what();
            continue;
        }
        const EmbodimentConfig e = resolve_embodiment(spec, config.ranges);

        std::vector<std::string> present;
        for (const auto& cat : config.scene_params.target_categories) {
            if (!scene.instances_of(cat).empty()) {
                present.push_back(cat);
            }
        }
        if (present.empty()) {
            last_reason = "scene holds no target category";
            continue;
        }
        spec.task = config.task;
        spec.task.target_category =
            present[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(present.size()) - 1))];
        if (config.probe_check && !probe_reaches(scene, spec.task, config.planner)) {
            last_reason = "probe cannot approach a " + spec.task.target_category;
            continue;
        }
        const PlanContext ctx = prepare_plan(scene, e, config.planner);
        const auto start = sample_start(scene, e, ctx, spec.task, expert_sim_options(), config.min_start_distance, rng);
        if (!start) {
            last_reason = "no start pose with a viewable " + spec.task.target_category;
            continue;
        }
        spec.start = *start;
        return {std::move(spec), std::move(scene), e};
    }
    throw GenerationError("episode " + std::to_string(index) + ": " + last_reason + " after " +
                          std::to_string(config.max_attempts) + " attempts");
}

DatasetRecord generate_record(std::uint64_t master_seed, std::uint64_t index, const EpisodeConfig& config)
{
    DatasetRecord rec;
    rec.spec.id = episode_id(index);
    rec.spec.index = index;
    try {
        ResolvedEpisode ep = make_episode(master_seed, index, config);
        rec.spec = ep.spec;
        rec.embodiment = ep.embodiment;
        ExpertTrajectory traj =
            plan_episode(ep.scene, ep.embodiment, ep.spec.start, ep.spec.task, config.planner, expert_sim_options());
        rec.success = traj.success;
        rec.collisions = traj.collisions;
        rec.steps = static_cast<int>(traj.actions.size());
        rec.error = traj.error;
        rec.trajectory = std::move(traj);
    } catch (const Error& err) {
        rec.success = false;
        rec.error = err.what();
    }
    return rec;
}

// Files ----------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ShardInfo write_shard(const fs::path& path, std::span<const DatasetRecord> records)
{
    if (records.empty()) {
        throw ArgumentError("a shard needs at least one record");
    }
    std::string bytes;
    for (const auto& r : records) {
        bytes += nlohmann::json(r).dump();
        bytes += '\n';
    }
    write_file_atomic(path, bytes);
    ShardInfo info;
    info.path = path.filename().string();
    info.first = records.front().spec.index;
    info.count = records.size();
    info.sha256 = sha256_hex(bytes);
    info.bytes = bytes.size();
    return info;
}

std::vector<DatasetRecord> read_shard(const fs::path& path, std::string_view expected_sha256)
{
    const std::string bytes = read_file(path);
    const std::string actual = sha256_hex(bytes);
    if (actual != expected_sha256) {
        throw CorruptionError("shard " + path.string() + " digest " + actual + " does not match " +
                              std::string(expected_sha256));
    }
    std::vector<DatasetRecord> out;
    std::istringstream in(bytes);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        try {
            out.push_back(nlohmann::json::parse(line).get<DatasetRecord>());
        } catch (const nlohmann::json::exception& err) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + err.what());
        }
    }
    if (out.empty()) {
        throw ArgumentError("shard " + path.string() + " is empty");
    }
    return out;
}

void save_manifest(const Manifest& m, const fs::path& path)
{
    write_file_atomic(path, nlohmann::json(m).dump(2) + "\n");
}

Manifest load_manifest(const fs::path& path)
{
    try {
        return nlohmann::json::parse(read_file(path)).get<Manifest>();
    } catch (const nlohmann::json::exception& err) {
        throw ParseError("manifest " + path.string() + ": " + err.what());
    }
}

std::vector<DatasetRecord> read_dataset(const fs::path& dir, Manifest* manifest)
{
    const Manifest m = load_manifest(dir / kManifestName);
    std::vector<DatasetRecord> out;
    for (const auto& shard : m.shards) {
        auto recs = read_shard(dir / shard.path, shard.sha256);
        if (recs.size() != shard.count) {
            throw CorruptionError("shard " + shard.path + " holds " + std::to_string(recs.size()) +
                                  " records, manifest says " + std::to_string(shard.count));
        }
        out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    if (manifest != nullptr) {
        *manifest = m;
    }
    return out;
}

std::string render_observation_blob(const Scene& scene, const EmbodimentConfig& e, const ExpertTrajectory& t,
                                    const SimOptions& options)
{
    const std::vector<Pose> poses = t.poses();
    std::string out;
    for (const Pose& p : poses) {
        const Observation obs = observe(scene, e, p, options);
        out += encode_image(obs.images[0]);
        out += encode_image(obs.images[1]);
    }
    return out;
}

bool replay_matches(const DatasetRecord& record, const EpisodeConfig& config)
{
    if (!record.trajectory) {
        return !record.success && record.collisions == 0;
    }
    const Scene scene = resolve_scene(record.spec, config.scene_params);
    SimState s = reset(scene, record.embodiment, record.spec.start, record.spec.task, expert_sim_options());
    for (const Action a : record.trajectory->actions) {
        if (s.terminal) {
            return false;
        }
        step(s, a);
    }
    return s.success == record.success && s.collisions == record.collisions;
}

Manifest generate_dataset(const DatasetOptions& options)
{
    if (options.n < 1) {
        throw ArgumentError("dataset needs at least one episode");
    }
    if (options.shard_size < 1) {
        throw ArgumentError("shard size must be positive");
    }
    const fs::path& root = options.out_dir;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) {
        throw IoError("cannot create output directory " + root.string() + (ec ? ": " + ec.message() : ""));
    }

    std::vector<DatasetRecord> records(options.n);
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> done{0};
    std::mutex progress_mutex;
    std::mutex error_mutex;
    std::string io_error;
    auto work = [&] {
        for (std::uint64_t i = next++; i < options.n; i = next++) {
            DatasetRecord rec = generate_record(options.master_seed, i, options.config);
            if (options.store_observations && rec.trajectory) {
                try {
                    const Scene scene = resolve_scene(rec.spec, options.config.scene_params);
                    const std::string rel = "obs/" + rec.spec.id + ".bin";
                    write_file_atomic(root / rel,
                                      render_observation_blob(scene, rec.embodiment, *rec.trajectory, eval_sim_options()));
                    rec.observations = rel;
                } catch (const Error& err) {
                    const std::lock_guard lock(error_mutex);
                    if (io_error.empty()) {
                        io_error = err.what();
                    }
                }
            }
            records[i] = std::move(rec);
            const std::uint64_t finished = ++done;
            if (options.progress) {
                const std::lock_guard lock(progress_mutex);
                options.progress(finished, options.n);
            }
        }
    };
    const int workers = std::max(1, options.workers);
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) {
        pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) {
        t.join();
    }
    if (!io_error.empty()) {
        throw IoError(io_error);
    }

    Manifest m;
    m.master_seed = options.master_seed;
    m.episodes = options.n;
    m.shard_size = options.shard_size;
    m.store_observations = options.store_observations;
    m.config = options.config;
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "xenav-%016llx-n%llu", static_cast<unsigned long long>(options.master_seed),
                      static_cast<unsigned long long>(options.n));
        m.dataset_id = buf;
    }
    for (std::uint64_t first = 0; first < options.n; first += options.shard_size) {
        const std::uint64_t count = std::min(options.shard_size, options.n - first);
        char name[32];
        std::snprintf(name, sizeof name, "shard-%05llu.jsonl",
                      static_cast<unsigned long long>(first / options.shard_size));
        m.shards.push_back(write_shard(root / name, std::span(records).subspan(first, count)));
    }
    for (const auto& r : records) {
        m.successes += r.success ? 1 : 0;
    }
    save_manifest(m, root / kManifestName);
    return m;
}

// JSON -----------------------------------------------------------------------

void to_json(nlohmann::json& j, const EpisodeSpec& s)
{
    j = nlohmann::json{{"id", s.id},
                       {"index", s.index},
                       {"scene_seed", s.scene_seed},
                       {"embodiment_seed", nullptr},
                       {"embodiment", nullptr},
                       {"start", s.start},
                       {"task", s.task},
                       {"attempt", s.attempt}};
    if (s.embodiment_seed) {
        j["embodiment_seed"] = *s.embodiment_seed;
    }
    if (s.embodiment) {
        j["embodiment"] = *s.embodiment;
    }
}

void from_json(const nlohmann::json& j, EpisodeSpec& s)
{
    j.at("id").get_to(s.id);
    j.at("index").get_to(s.index);
    j.at("scene_seed").get_to(s.scene_seed);
    s.embodiment_seed.reset();
    s.embodiment.reset();
    if (j.contains("embodiment_seed") && !j.at("embodiment_seed").is_null()) {
        s.embodiment_seed = j.at("embodiment_seed").get<std::uint64_t>();
    }
    if (j.contains("embodiment") && !j.at("embodiment").is_null()) {
        s.embodiment = j.at("embodiment").get<EmbodimentConfig>();
    }
    j.at("start").get_to(s.start);
    j.at("task").get_to(s.task);
    s.attempt = j.value("attempt", 0);
}

void to_json(nlohmann::json& j, const EpisodeConfig& c)
{
    j = nlohmann::json{{"ranges", c.ranges},
                       {"scene_params", c.scene_params},
                       {"task", c.task},
                       {"planner", c.planner},
                       {"fixed_embodiment", nullptr},
                       {"min_start_distance", c.min_start_distance},
                       {"max_attempts", c.max_attempts},
                       {"probe_check", c.probe_check}};
    if (c.fixed_embodiment) {
        j["fixed_embodiment"] = *c.fixed_embodiment;
    }
}

void from_json(const nlohmann::json& j, EpisodeConfig& c)
{
    const EpisodeConfig d;
    c.ranges = j.contains("ranges") ? j.at("ranges").get<SamplingRanges>() : d.ranges;
    c.scene_params = j.contains("scene_params") ? j.at("scene_params").get<SceneParams>() : d.scene_params;
    if (j.contains("task")) {
        const auto& t = j.at("task");
        c.task.target_category = t.value("target_category", std::string{});
        c.task.success_distance = t.value("success_distance", 2.0);
        c.task.max_steps = t.value("max_steps", 600);
        c.task.collision_penalty = t.value("collision_penalty", 0.0);
    }
    c.planner = j.contains("planner") ? j.at("planner").get<PlannerConfig>() : d.planner;
    c.fixed_embodiment.reset();
    if (j.contains("fixed_embodiment") && !j.at("fixed_embodiment").is_null()) {
        c.fixed_embodiment = j.at("fixed_embodiment").get<EmbodimentConfig>();
    }
    c.min_start_distance = j.value("min_start_distance", d.min_start_distance);
    c.max_attempts = j.value("max_attempts", d.max_attempts);
    c.probe_check = j.value("probe_check", d.probe_check);
}

void to_json(nlohmann::json& j, const DatasetRecord& r)
{
    j = nlohmann::json{{"spec", r.spec},
                       {"embodiment", r.embodiment},
                       {"success", r.success},
                       {"collisions", r.collisions},
                       {"steps", r.steps},
                       {"error", r.error},
                       {"trajectory", nullptr},
                       {"observations", nullptr}};
    if (r.trajectory) {
        j["trajectory"] = *r.trajectory;
    }
    if (!r.observations.empty()) {
        j["observations"] = r.observations;
    }
}

void from_json(const nlohmann::json& j, DatasetRecord& r)
{
    j.at("spec").get_to(r.spec);
    j.at("embodiment").get_to(r.embodiment);
    j.at("success").get_to(r.success);
    j.at("collisions").get_to(r.collisions);
    j.at("steps").get_to(r.steps);
    j.at("error").get_to(r.error);
    r.trajectory.reset();
    if (!j.at("trajectory").is_null()) {
        r.trajectory = j.at("trajectory").get<ExpertTrajectory>();
    }
    r.observations = j.at("observations").is_null() ? std::string{} : j.at("observations").get<std::string>();
}

void to_json(nlohmann::json& j, const ShardInfo& s)
{
    j = nlohmann::json{
        {"path", s.path}, {"first", s.first}, {"count", s.count}, {"sha256", s.sha256}, {"bytes", s.bytes}};
}

void from_json(const nlohmann::json& j, ShardInfo& s)
{
    j.at("path").get_to(s.path);
    j.at("first").get_to(s.first);
    j.at("count").get_to(s.count);
    j.at("sha256").get_to(s.sha256);
    j.at("bytes").get_to(s.bytes);
}

void to_json(nlohmann::json& j, const Manifest& m)
{
    j = nlohmann::json{{"format", "xenav-dataset"},
                       {"version", m.version},
                       {"dataset_id", m.dataset_id},
                       {"master_seed", m.master_seed},
                       {"episodes", m.episodes},
                       {"successes", m.successes},
                       {"success_fraction", m.success_fraction()},
                       {"shard_size", m.shard_size},
                       {"store_observations", m.store_observations},
                       {"config", m.config},
                       {"shards", m.shards}};
}

void from_json(const nlohmann::json& j, Manifest& m)
{
    if (j.value("format", std::string{}) != "xenav-dataset") {
        throw ParseError("not a dataset manifest");
    }
    j.at("version").get_to(m.version);
    if (m.version != 1) {
        throw ParseError("unsupported dataset version " + std::to_string(m.version));
    }
    j.at("dataset_id").get_to(m.dataset_id);
    j.at("master_seed").get_to(m.master_seed);
    j.at("episodes").get_to(m.episodes);
    j.at("successes").get_to(m.successes);
    j.at("shard_size").get_to(m.shard_size);
    j.at("store_observations").get_to(m.store_observations);
    j.at("config").get_to(m.config);
    j.at("shards").get_to(m.shards);
}

} // namespace xenav
