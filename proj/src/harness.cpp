#include "xenav/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"

namespace xenav {

std::string_view mode_name(EmbodimentMode m)
{
    switch (m) {
    case EmbodimentMode::Fixed:
        return "fixed";
    case EmbodimentMode::Random:
        return "random";
    case EmbodimentMode::External:
        return "external";
    }
    return "random";
}

EmbodimentMode parse_mode(std::string_view name)
{
    if (name == "fixed") {
        return EmbodimentMode::Fixed;
    }
    if (name == "random") {
        return EmbodimentMode::Random;
    }
    if (name == "external") {
        return EmbodimentMode::External;
    }
    throw ArgumentError("unknown embodiment mode '" + std::string(name) + "' (fixed, random, external)");
}

BenchmarkSuite make_benchmark(std::uint64_t seed, std::uint64_t n, const BenchmarkOptions& options)
{
    if (n < 1) {
        throw ArgumentError("a suite needs at least one episode");
    }
    BenchmarkSuite suite;
    suite.seed = seed;
    suite.mode = options.mode;
    suite.disclose_embodiment = options.disclose_embodiment;
    EpisodeConfig& cfg = suite.config;
    cfg.ranges = options.ranges;
    cfg.scene_params = options.scene_params;
    cfg.scene_params.low_targets = cfg.scene_params.low_targets || options.low_targets;
    cfg.task = options.task;
    cfg.planner = options.planner;
    cfg.probe_check = true;
    check_params(cfg.scene_params);
    check_ranges(cfg.ranges);

    switch (options.mode) {
    case EmbodimentMode::Fixed:
        suite.preset = options.preset;
        cfg.fixed_embodiment = preset_embodiment(options.preset);
        break;
    case EmbodimentMode::External:
        if (options.embodiments.empty()) {
            throw ArgumentError("external mode needs at least one embodiment");
        }
        for (const auto& e : options.embodiments) {
            if (auto v = validate(e); !v.empty()) {
                throw ValidationError("embodiment '" + e.id + "': " + v.front());
            }
        }
        break;
    case EmbodimentMode::Random:
        break;
    }

    char id[96];
    std::snprintf(id, sizeof id, "suite-%s-%016llx-n%llu", std::string(mode_name(options.mode)).c_str(),
                  static_cast<unsigned long long>(seed), static_cast<unsigned long long>(n));
    suite.id = id;

    suite.episodes.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (options.mode == EmbodimentMode::External) {
            EpisodeConfig per = cfg;
            per.fixed_embodiment = options.embodiments[i % options.embodiments.size()];
            suite.episodes.push_back(make_episode(seed, i, per).spec);
        } else {
            suite.episodes.push_back(make_episode(seed, i, cfg).spec);
        }
    }
    return suite;
}

void save_suite(const BenchmarkSuite& suite, const std::filesystem::path& path)
{
    write_file_atomic(path, nlohmann::json(suite).dump(2) + "\n");
}

BenchmarkSuite load_suite(const std::filesystem::path& path)
{
    try {
        return nlohmann::json::parse(read_file(path)).get<BenchmarkSuite>();
    } catch (const nlohmann::json::exception& err) {
        throw ParseError("suite " + path.string() + ": " + err.what());
    }
}

// Policies -------------------------------------------------------------------

std::string PolicyHandle::describe() const
{
    switch (kind) {
    case PolicyKind::ExpertReplay:
        return "expert";
    case PolicyKind::NoisyExpert: {
        char buf[48];
        std::snprintf(buf, sizeof buf, "noisy-expert:%g", noise);
        return buf;
    }
    case PolicyKind::GreedyVisible:
        return "greedy";
    case PolicyKind::Random:
        return "random";
    case PolicyKind::Constant:
        return "constant:" + std::string(action_name(action));
    case PolicyKind::External:
        return "bridge:" + endpoint;
    }
    return "expert";
}

PolicyHandle parse_policy(std::string_view text, std::uint64_t seed)
{
    PolicyHandle h;
    h.seed = seed;
    const auto colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    const bool has_arg = colon != std::string_view::npos;
    if ((head == "expert" || head == "expert-replay") && !has_arg) {
        h.kind = PolicyKind::ExpertReplay;
    } else if (head == "noisy-expert") {
        h.kind = PolicyKind::NoisyExpert;
        if (has_arg) {
            try {
                std::size_t used = 0;
                h.noise = std::stod(std::string(arg), &used);
                if (used != arg.size()) {
                    throw std::invalid_argument("trailing");
                }
            } catch (const std::exception&) {
                throw ArgumentError("bad noise level in '" + std::string(text) + "'");
            }
            if (!(h.noise >= 0.0 && h.noise <= 1.0)) {
                throw ArgumentError("noise level must lie in [0, 1]");
            }
        }
    } else if ((head == "greedy" || head == "greedy-visible") && !has_arg) {
        h.kind = PolicyKind::GreedyVisible;
    } else if (head == "random" && !has_arg) {
        h.kind = PolicyKind::Random;
    } else if (head == "constant" && has_arg) {
        h.kind = PolicyKind::Constant;
        const auto a = parse_action(arg);
        if (!a) {
            throw ArgumentError("unknown action '" + std::string(arg) + "'");
        }
        h.action = *a;
    } else if (head == "bridge" && has_arg) {
        h.kind = PolicyKind::External;
        parse_endpoint(arg);
        h.endpoint = std::string(arg);
    } else {
        throw ArgumentError("unknown policy '" + std::string(text) +
                            "' (expert, noisy-expert[:P], greedy, random, constant:ACTION, bridge:tcp://HOST:PORT)");
    }
    return h;
}

namespace {

class ReplayPolicy : public Policy
{
public:
    explicit ReplayPolicy(const ExpertTrajectory* expert)
    {
        if (expert != nullptr) {
            actions_ = expert->actions;
        }
    }
    Action act(const PolicyInput&) override { return next_ < actions_.size() ? actions_[next_++] : Action::Done; }

private:
    std::vector<Action> actions_;
    std::size_t next_ = 0;
};

class NoisyExpertPolicy : public Policy
{
public:
    NoisyExpertPolicy(const ExpertTrajectory* expert, double noise, std::uint64_t seed) : noise_(noise), rng_(seed)
    {
        if (expert != nullptr) {
            actions_ = expert->actions;
        }
    }
    Action act(const PolicyInput&) override
    {
        Action a = next_ < actions_.size() ? actions_[next_] : Action::Done;
        ++next_;
        if (rng_.bernoulli(noise_)) {
            a = kAllActions[static_cast<std::size_t>(rng_.uniform_int(0, kActionCount - 1))];
        }
        return a;
    }

private:
    std::vector<Action> actions_;
    std::size_t next_ = 0;
    double noise_;
    Rng rng_;
};

class RandomPolicy : public Policy
{
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
    Action act(const PolicyInput&) override
    {
        return kAllActions[static_cast<std::size_t>(rng_.uniform_int(0, kActionCount - 1))];
    }

private:
    Rng rng_;
};

class ConstantPolicy : public Policy
{
public:
    explicit ConstantPolicy(Action a) : action_(a) {}
    Action act(const PolicyInput&) override { return action_; }

private:
    Action action_;
};

// Turns until target pixels show in the first camera, then centers and
// drives at them, calling Done once the nearest target pixel is close.
class GreedyVisiblePolicy : public Policy
{
public:
    GreedyVisiblePolicy(const Scene& scene, const TaskSpec& task, const EmbodimentConfig& e)
        : success_distance_(task.success_distance), hfov_(e.cameras.front().hfov)
    {
        for (const Instance* inst : scene.instances_of(task.target_category)) {
            targets_.push_back(inst->id);
        }
    }

    Action act(const PolicyInput& in) override
    {
        if (in.observation.last_action_failed) {
            ++bumps_;
            // A blocked move turns away; a blocked turn backs off.
            if (last_ == Action::MoveAhead) {
                escape_ = kEscape.size();
            } else {
                escape_ = 0;
                return remember(bumps_ % 4 == 0 ? Action::RotateLeft30 : Action::MoveBack);
            }
        } else {
            bumps_ = 0;
        }
        if (escape_ > 0) {
            return remember(kEscape[kEscape.size() - escape_--]);
        }
        return remember(seek(in.observation.images[0]));
    }

private:
    // Quarter turn and a short drive after bumping into something.
    static constexpr std::array<Action, 6> kEscape = {Action::RotateRight30, Action::RotateRight30,
                                                      Action::RotateRight30, Action::MoveAhead,
                                                      Action::MoveAhead,     Action::MoveAhead};

    Action remember(Action a)
    {
        last_ = a;
        return a;
    }

    Action seek(const Image& img)
    {
        int count = 0;
        double col_sum = 0.0;
        std::uint16_t nearest = kNoHitDepth;
        for (int r = 0; r < img.height; ++r) {
            for (int c = 0; c < img.width; ++c) {
                const auto idx = static_cast<std::size_t>(r) * img.width + c;
                if (std::find(targets_.begin(), targets_.end(), img.semantic[idx]) != targets_.end()) {
                    ++count;
                    col_sum += c + 0.5;
                    nearest = std::min(nearest, img.depth[idx]);
                }
            }
        }
        if (count > 0) {
            turns_ = 0;
            if (nearest / 1000.0 <= success_distance_ - 0.25) {
                return Action::Done;
            }
            const double offset = (col_sum / count / img.width - 0.5) * hfov_;
            if (offset > 20.0) {
                return Action::RotateRight30;
            }
            if (offset < -20.0) {
                return Action::RotateLeft30;
            }
            if (offset > 4.0) {
                return Action::RotateRight6;
            }
            if (offset < -4.0) {
                return Action::RotateLeft6;
            }
            return Action::MoveAhead;
        }
        if (turns_ < 12) {
            ++turns_;
            return Action::RotateRight30;
        }
        if (++moves_ % 5 == 0) {
            turns_ = 0;
        }
        return Action::MoveAhead;
    }

    std::vector<InstanceId> targets_;
    double success_distance_;
    double hfov_;
    int turns_ = 0;
    int moves_ = 0;
    int bumps_ = 0;
    std::size_t escape_ = 0;
    Action last_ = Action::Done;
};

// Forwards observations to an external process over the wire protocol.
class BridgePolicy : public Policy
{
public:
    BridgePolicy(const PolicyHandle& h, const BenchmarkSuite& suite, const EpisodeSpec& spec, const EmbodimentConfig& e,
                 const SimOptions& sim)
        : channel_(connect_endpoint(parse_endpoint(h.endpoint), h.timeout)), task_(spec.task)
    {
        const int w = sim.render_width > 0 ? sim.render_width : e.cameras.front().width;
        const int hgt = sim.render_height > 0 ? sim.render_height : e.cameras.front().height;
        channel_.send(hello_message(spec.id, spec.task, suite.disclose_embodiment ? &e : nullptr, w, hgt));
        const std::string line = channel_.recv_line();
        const nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
        if (msg.is_object() && msg.value("type", std::string{}) == "reject") {
            throw ProtocolError("policy rejected the handshake: " + msg.value("reason", std::string{}));
        }
        const nlohmann::json ack = parse_message(line, "ack");
        const auto version = ack.find("version");
        if (version == ack.end() || !version->is_number_integer() || version->get<int>() != kProtocolVersion) {
            try {
                channel_.send({{"type", "reject"}, {"reason", "unsupported protocol version"}});
            } catch (const Error&) {
            }
            throw ProtocolError("policy speaks protocol version " +
                                (version == ack.end() ? std::string("?") : version->dump()) + ", expected " +
                                std::to_string(kProtocolVersion));
        }
    }

    Action act(const PolicyInput& in) override
    {
        channel_.send(obs_message(in.step, in.observation, task_));
        return parse_act(channel_.recv_line());
    }

    void finish(const SimState& s, const std::vector<double>& rewards) override { send_end(s, rewards, ""); }

    void send_end(const SimState& s, const std::vector<double>& rewards, std::string_view error)
    {
        if (ended_ || !channel_.is_open()) {
            return;
        }
        ended_ = true;
        try {
            channel_.send(end_message(s.success, s.steps, s.collisions, s.min_distance, rewards, error));
        } catch (const Error&) {
        }
        channel_.close();
    }

private:
    LineChannel channel_;
    TaskSpec task_;
    bool ended_ = false;
};

Scene suite_scene(const BenchmarkSuite& suite, const EpisodeSpec& spec)
{
    return resolve_scene(spec, suite.config.scene_params);
}

} // namespace

ExpertTrajectory expert_for(const BenchmarkSuite& suite, const EpisodeSpec& spec, const Scene& scene,
                            const EmbodimentConfig& e)
{
    return plan_episode(scene, e, spec.start, spec.task, suite.config.planner, expert_sim_options());
}

std::unique_ptr<Policy> make_policy(const PolicyHandle& h, const BenchmarkSuite& suite, const EpisodeSpec& spec,
                                    const Scene& scene, const EmbodimentConfig& e, const ExpertTrajectory* expert,
                                    const SimOptions& sim)
{
    const std::uint64_t seed = split_seed(h.seed, spec.index);
    switch (h.kind) {
    case PolicyKind::ExpertReplay:
        return std::make_unique<ReplayPolicy>(expert);
    case PolicyKind::NoisyExpert:
        return std::make_unique<NoisyExpertPolicy>(expert, h.noise, seed);
    case PolicyKind::GreedyVisible:
        return std::make_unique<GreedyVisiblePolicy>(scene, spec.task, e);
    case PolicyKind::Random:
        return std::make_unique<RandomPolicy>(seed);
    case PolicyKind::Constant:
        return std::make_unique<ConstantPolicy>(h.action);
    case PolicyKind::External:
        return std::make_unique<BridgePolicy>(h, suite, spec, e, sim);
    }
    throw ArgumentError("unknown policy kind");
}

EpisodeResult run_episode(const PolicyHandle& handle, const BenchmarkSuite& suite, std::size_t index,
                          const RunOptions& options)
{
    if (index >= suite.episodes.size()) {
        throw IndexError("episode " + std::to_string(index) + " is outside the suite");
    }
    const EpisodeSpec& spec = suite.episodes[index];
    const Scene scene = suite_scene(suite, spec);
    const EmbodimentConfig e = resolve_embodiment(spec, suite.config.ranges);

    EpisodeResult out;
    out.id = spec.id;
    out.record.group = spec.task.target_category;

    std::optional<ExpertTrajectory> expert;
    try {
        expert = expert_for(suite, spec, scene, e);
        out.record.expert_steps = std::max<int>(1, static_cast<int>(expert->actions.size()));
    } catch (const Error&) {
    }

    TaskSpec task = spec.task;
    task.collision_penalty = options.collision_penalty;
    SimState s = reset(scene, e, spec.start, task, options.sim, split_seed(handle.seed, spec.index));
    out.trace.start = spec.start;
    out.trace.start_distance = s.min_distance;

    std::unique_ptr<Policy> policy;
    try {
        policy = make_policy(handle, suite, spec, scene, e, expert ? &*expert : nullptr, options.sim);
    } catch (const ConnectError&) {
        throw;
    } catch (const Error& err) {
        out.error = err.what();
    }

    std::vector<double> rewards;
    if (policy) {
        try {
            while (!s.terminal) {
                const PolicyInput in{scene, e, spec, s, s.observation, s.steps};
                const Action a = policy->act(in);
                const StepResult r = step(s, a);
                out.trace.steps.push_back({a, r.collision, r.reward, r.distance, s.pose, r.terminal, r.success});
                rewards.push_back(r.reward);
            }
            policy->finish(s, rewards);
        } catch (const Error& err) {
            out.error = err.what();
            if (auto* bridge = dynamic_cast<BridgePolicy*>(policy.get())) {
                bridge->send_end(s, rewards, out.error);
            }
        }
    }

    out.record.success = out.error.empty() && s.success;
    out.record.steps = std::max(1, s.steps);
    out.record.collisions = s.collisions;
    out.min_distance = s.min_distance;
    return out;
}

BenchmarkResult run_benchmark(const PolicyHandle& policy, const BenchmarkSuite& suite, const RunOptions& options)
{
    if (suite.episodes.empty()) {
        throw ArgumentError("suite has no episodes");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = suite.episodes.size();
    BenchmarkResult result;
    result.episodes.resize(n);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<bool> abort{false};
    std::mutex mutex;
    std::exception_ptr failure;

    auto work = [&] {
        for (std::size_t i = next++; i < n && !abort; i = next++) {
            try {
                result.episodes[i] = run_episode(policy, suite, i, options);
            } catch (...) {
                const std::lock_guard lock(mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                abort = true;
                return;
            }
            const std::size_t finished = ++done;
            if (options.progress) {
                const std::lock_guard lock(mutex);
                options.progress(finished, n);
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
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::vector<EpisodeRecord> records;
    records.reserve(n);
    for (const auto& ep : result.episodes) {
        records.push_back(ep.record);
    }
    result.summary = aggregate(records);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// JSON -----------------------------------------------------------------------

void to_json(nlohmann::json& j, const BenchmarkSuite& s)
{
    j = nlohmann::json{{"format", "xenav-suite"},
                       {"version", 1},
                       {"id", s.id},
                       {"seed", s.seed},
                       {"mode", mode_name(s.mode)},
                       {"preset", s.preset},
                       {"disclose_embodiment", s.disclose_embodiment},
                       {"config", s.config},
                       {"episodes", s.episodes}};
}

void from_json(const nlohmann::json& j, BenchmarkSuite& s)
{
    if (j.value("format", std::string{}) != "xenav-suite") {
        throw ParseError("not a benchmark suite");
    }
    if (j.value("version", 0) != 1) {
        throw ParseError("unsupported suite version");
    }
    j.at("id").get_to(s.id);
    j.at("seed").get_to(s.seed);
    s.mode = parse_mode(j.at("mode").get<std::string>());
    s.preset = j.value("preset", std::string{});
    s.disclose_embodiment = j.value("disclose_embodiment", false);
    j.at("config").get_to(s.config);
    j.at("episodes").get_to(s.episodes);
}

void to_json(nlohmann::json& j, const EpisodeResult& r)
{
    j = nlohmann::json{
        {"id", r.id}, {"record", r.record}, {"trace", r.trace}, {"min_distance", r.min_distance}, {"error", r.error}};
}

void from_json(const nlohmann::json& j, EpisodeResult& r)
{
    j.at("id").get_to(r.id);
    j.at("record").get_to(r.record);
    j.at("trace").get_to(r.trace);
    j.at("min_distance").get_to(r.min_distance);
    j.at("error").get_to(r.error);
}

nlohmann::json benchmark_report(const BenchmarkResult& result, const PolicyHandle& policy, const BenchmarkSuite& suite,
                                const RunOptions& options)
{
    return {{"format", "xenav-report"},
            {"version", 1},
            {"suite", suite.id},
            {"policy", policy.describe()},
            {"policy_seed", policy.seed},
            {"collision_penalty", options.collision_penalty},
            {"summary", result.summary},
            {"groups", aggregate_by_group([&] {
                 std::vector<EpisodeRecord> recs;
                 for (const auto& e : result.episodes) {
                     recs.push_back(e.record);
                 }
                 return recs;
             }())},
            {"episodes", result.episodes}};
}

} // namespace xenav
