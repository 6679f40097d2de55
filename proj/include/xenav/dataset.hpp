#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xenav/embodiment.hpp"
#include "xenav/planner.hpp"
#include "xenav/rng.hpp"
#include "xenav/scene.hpp"
#include "xenav/sim.hpp"

namespace xenav {

/// Everything needed to rebuild one episode, given the scene parameters and
/// sampling ranges it was drawn with.
struct EpisodeSpec
{
    std::string id;
    std::uint64_t index = 0;
    std::uint64_t scene_seed = 0;
    std::optional<std::uint64_t> embodiment_seed;  ///< set when sampled
    std::optional<EmbodimentConfig> embodiment;    ///< set when given explicitly
    Pose start;
    TaskSpec task;
    int attempt = 0;

    friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

/// How episodes are drawn.
struct EpisodeConfig
{
    SamplingRanges ranges;
    SceneParams scene_params;
    TaskSpec task;  ///< template; the category is drawn per episode
    PlannerConfig planner;
    std::optional<EmbodimentConfig> fixed_embodiment;
    double min_start_distance = 2.0;
    int max_attempts = 16;
    /// Extra check that a target is reachable by a short probe body.
    bool probe_check = false;

    friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

std::string episode_id(std::uint64_t index);

EmbodimentConfig resolve_embodiment(const EpisodeSpec& spec, const SamplingRanges& ranges);
Scene resolve_scene(const EpisodeSpec& spec, const SceneParams& params);

/// Start pose drawn uniformly over reachable nodes at least `min_distance`
/// from every target, restricted to components where the expert can end with
/// the target in view. Heading is uniform. Empty when no node qualifies.
std::optional<Pose> sample_start(const Scene& scene, const EmbodimentConfig& e, const PlanContext& ctx,
                                 const TaskSpec& task, const SimOptions& options, double min_distance, Rng& rng);

/// The small body used to confirm that a scene's targets can be approached.
EmbodimentConfig probe_embodiment();

struct ResolvedEpisode
{
    EpisodeSpec spec;
    Scene scene;
    EmbodimentConfig embodiment;
};

/// Episode `index` of a seeded collection. Each attempt re-derives the scene,
/// embodiment and task from split_seed(split_seed(master, index), attempt).
/// Throws GenerationError when every attempt fails.
ResolvedEpisode make_episode(std::uint64_t master_seed, std::uint64_t index, const EpisodeConfig& config);

/// One line of a shard.
struct DatasetRecord
{
    EpisodeSpec spec;
    EmbodimentConfig embodiment;
    bool success = false;
    int collisions = 0;
    int steps = 0;
    std::string error;
    std::optional<ExpertTrajectory> trajectory;
    std::string observations;  ///< sidecar path relative to the dataset root, or empty

    friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct ShardInfo
{
    std::string path;  ///< relative to the dataset root
    std::uint64_t first = 0;
    std::uint64_t count = 0;
    std::string sha256;
    std::uint64_t bytes = 0;

    friend bool operator==(const ShardInfo&, const ShardInfo&) = default;
};

struct Manifest
{
    std::string dataset_id;
    int version = 1;
    std::uint64_t master_seed = 0;
    std::uint64_t episodes = 0;
    std::uint64_t successes = 0;
    std::uint64_t shard_size = 0;
    bool store_observations = false;
    EpisodeConfig config;
    std::vector<ShardInfo> shards;

    double success_fraction() const { return episodes == 0 ? 0.0 : static_cast<double>(successes) / episodes; }
};

struct DatasetOptions
{
    std::uint64_t n = 1;
    std::uint64_t master_seed = 0;
    std::uint64_t shard_size = 256;
    int workers = 1;
    bool store_observations = false;
    EpisodeConfig config;
    std::filesystem::path out_dir;
    std::function<void(std::uint64_t done, std::uint64_t total)> progress;
};

inline constexpr std::string_view kManifestName = "manifest.json";

/// One episode's record; planning failures are captured in-band.
DatasetRecord generate_record(std::uint64_t master_seed, std::uint64_t index, const EpisodeConfig& config);

/// Writes shards and the manifest under options.out_dir. The output bytes do
/// not depend on the worker count. Throws IoError when the directory is unwritable.
Manifest generate_dataset(const DatasetOptions& options);

std::string sha256_hex(std::string_view bytes);

/// Newline-delimited records, written atomically. Throws ArgumentError for an
/// empty record list.
ShardInfo write_shard(const std::filesystem::path& path, std::span<const DatasetRecord> records);

/// Throws CorruptionError when the digest does not match.
std::vector<DatasetRecord> read_shard(const std::filesystem::path& path, std::string_view expected_sha256);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

/// Manifest plus every shard, digest-checked.
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& dir, Manifest* manifest = nullptr);

/// Replays a record's expert actions in a freshly built simulator and checks
/// that success and the collision count come out as recorded.
bool replay_matches(const DatasetRecord& record, const EpisodeConfig& config);

/// Renders every observation of a recorded trajectory (start plus one per
/// step), two camera slots each, in the sensor byte layout.
std::string render_observation_blob(const Scene& scene, const EmbodimentConfig& e, const ExpertTrajectory& t,
                                    const SimOptions& options);

/// Atomic file write via a temporary sibling and rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const EpisodeSpec& s);
void from_json(const nlohmann::json& j, EpisodeSpec& s);
void to_json(nlohmann::json& j, const EpisodeConfig& c);
void from_json(const nlohmann::json& j, EpisodeConfig& c);
void to_json(nlohmann::json& j, const DatasetRecord& r);
void from_json(const nlohmann::json& j, DatasetRecord& r);
void to_json(nlohmann::json& j, const ShardInfo& s);
void from_json(const nlohmann::json& j, ShardInfo& s);
void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

} // namespace xenav
