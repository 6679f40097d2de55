#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xenav/dataset.hpp"
#include "xenav/metrics.hpp"
#include "xenav/planner.hpp"
#include "xenav/protocol.hpp"
#include "xenav/sim.hpp"

namespace xenav {

enum class EmbodimentMode
{
    Fixed,     ///< one preset for every episode
    Random,    ///< a fresh sampled embodiment per episode
    External,  ///< embodiments supplied by the caller, cycled
};

std::string_view mode_name(EmbodimentMode m);
/// Accepts "fixed", "random" and "external". Throws ArgumentError.
EmbodimentMode parse_mode(std::string_view name);

struct BenchmarkSuite
{
    std::string id;
    std::uint64_t seed = 0;
    EmbodimentMode mode = EmbodimentMode::Random;
    std::string preset;  ///< fixed mode only
    /// Whether external policies are told the embodiment in the handshake.
    bool disclose_embodiment = false;
    EpisodeConfig config;
    std::vector<EpisodeSpec> episodes;

    friend bool operator==(const BenchmarkSuite&, const BenchmarkSuite&) = default;
};

struct BenchmarkOptions
{
    EmbodimentMode mode = EmbodimentMode::Random;
    std::string preset = "locobot";
    std::vector<EmbodimentConfig> embodiments;  ///< external mode
    SamplingRanges ranges;
    SceneParams scene_params;
    TaskSpec task;
    PlannerConfig planner;
    bool disclose_embodiment = false;
    /// Targets drawn from templates a 0.3 m camera can see.
    bool low_targets = false;
};

/// One scene per episode, each with a target the 0.3 m probe body can
/// approach. Deterministic given seed and options. Throws ArgumentError for
/// n < 1 and GenerationError when an episode exhausts its retries.
BenchmarkSuite make_benchmark(std::uint64_t seed, std::uint64_t n, const BenchmarkOptions& options = {});

void save_suite(const BenchmarkSuite& suite, const std::filesystem::path& path);
BenchmarkSuite load_suite(const std::filesystem::path& path);

/// What a policy sees at each step.
struct PolicyInput
{
    const Scene& scene;
    const EmbodimentConfig& embodiment;
    const EpisodeSpec& spec;
    const SimState& state;
    const Observation& observation;
    int step = 0;
};

/// Per-episode policy instance.
class Policy
{
public:
    virtual ~Policy() = default;
    virtual Action act(const PolicyInput& in) = 0;
    /// Called once after the episode terminates.
    virtual void finish(const SimState& /*state*/, const std::vector<double>& /*rewards*/) {}
};

enum class PolicyKind
{
    ExpertReplay,
    NoisyExpert,
    GreedyVisible,
    Random,
    Constant,
    External,
};

/// Parsed policy description. Text forms: "expert", "noisy-expert[:P]",
/// "greedy", "random", "constant:ACTION", "bridge:tcp://HOST:PORT".
struct PolicyHandle
{
    PolicyKind kind = PolicyKind::ExpertReplay;
    std::uint64_t seed = 0;
    double noise = 0.2;  ///< substitution probability for noisy-expert
    Action action = Action::MoveAhead;
    std::string endpoint;
    std::chrono::milliseconds timeout = kDefaultBridgeTimeout;

    std::string describe() const;
};

/// Throws ArgumentError on an unknown form.
PolicyHandle parse_policy(std::string_view text, std::uint64_t seed = 0);

struct RunOptions
{
    double collision_penalty = 0.0;
    SimOptions sim = eval_sim_options();
    int workers = 1;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct EpisodeResult
{
    std::string id;
    EpisodeTrace trace;
    EpisodeRecord record;
    double min_distance = 0.0;
    std::string error;  ///< empty unless the policy or protocol failed

    friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

/// Expert trajectory for a suite episode, computed with the expert defaults.
ExpertTrajectory expert_for(const BenchmarkSuite& suite, const EpisodeSpec& spec, const Scene& scene,
                            const EmbodimentConfig& e);

std::unique_ptr<Policy> make_policy(const PolicyHandle& handle, const BenchmarkSuite& suite, const EpisodeSpec& spec,
                                    const Scene& scene, const EmbodimentConfig& e, const ExpertTrajectory* expert,
                                    const SimOptions& sim = eval_sim_options());

/// Observation, action, step until terminal. Policy timeouts and protocol
/// violations fail the episode in-band; ConnectError propagates.
EpisodeResult run_episode(const PolicyHandle& policy, const BenchmarkSuite& suite, std::size_t index,
                          const RunOptions& options = {});

struct BenchmarkResult
{
    MetricsSummary summary;
    std::vector<EpisodeResult> episodes;
    double seconds = 0.0;
};

BenchmarkResult run_benchmark(const PolicyHandle& policy, const BenchmarkSuite& suite, const RunOptions& options = {});

void to_json(nlohmann::json& j, const BenchmarkSuite& s);
void from_json(const nlohmann::json& j, BenchmarkSuite& s);
void to_json(nlohmann::json& j, const EpisodeResult& r);
void from_json(const nlohmann::json& j, EpisodeResult& r);
/// Report written by the evaluation command: summary plus every episode.
nlohmann::json benchmark_report(const BenchmarkResult& result, const PolicyHandle& policy, const BenchmarkSuite& suite,
                                const RunOptions& options);

} // namespace xenav
