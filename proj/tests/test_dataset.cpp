#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "xenav/dataset.hpp"
#include "xenav/errors.hpp"
#include "xenav/sensor.hpp"

using namespace xenav;
namespace fs = std::filesystem;

namespace {

std::vector<DatasetRecord> sample_records(int n, std::uint64_t seed = 3)
{
    std::vector<DatasetRecord> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(generate_record(seed, static_cast<std::uint64_t>(i), EpisodeConfig{}));
    }
    return out;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            out[fs::relative(entry.path(), root).string()] = read_file(entry.path());
        }
    }
    return out;
}

} // namespace

TEST(Dataset, EpisodeIdsAreZeroPadded)
{
    EXPECT_EQ(episode_id(0), "ep-000000");
    EXPECT_EQ(episode_id(37), "ep-000037");
}

TEST(Dataset, Sha256KnownVectors)
{
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Dataset, EpisodesAreDeterministicAndWellPlaced)
{
    const EpisodeConfig cfg;
    for (std::uint64_t i = 0; i < 10; ++i) {
        const ResolvedEpisode a = make_episode(9, i, cfg);
        const ResolvedEpisode b = make_episode(9, i, cfg);
        EXPECT_EQ(a.spec, b.spec);
        EXPECT_EQ(serialize_scene(a.scene), serialize_scene(b.scene));
        EXPECT_EQ(a.embodiment, b.embodiment);
        EXPECT_EQ(resolve_embodiment(a.spec, cfg.ranges), a.embodiment);
        EXPECT_EQ(serialize_scene(resolve_scene(a.spec, cfg.scene_params)), serialize_scene(a.scene));
        EXPECT_FALSE(check_collision(a.scene, a.embodiment, a.spec.start));
        double nearest = 1e9;
        for (const Instance* inst : a.scene.instances_of(a.spec.task.target_category)) {
            nearest = std::min(nearest, distance_to_rect(a.spec.start.position(), inst->footprint));
        }
        EXPECT_GE(nearest, cfg.min_start_distance);
    }
    EXPECT_NE(make_episode(9, 0, cfg).spec, make_episode(10, 0, cfg).spec);
}

TEST(Dataset, FixedEmbodimentIsUsedVerbatim)
{
    EpisodeConfig cfg;
    cfg.fixed_embodiment = preset_embodiment("locobot");
    const ResolvedEpisode ep = make_episode(4, 2, cfg);
    EXPECT_EQ(ep.embodiment, preset_embodiment("locobot"));
    EXPECT_FALSE(ep.spec.embodiment_seed);
    EXPECT_THROW(resolve_embodiment(EpisodeSpec{}, cfg.ranges), ValidationError);
}

TEST(Dataset, ShardRoundTrip)
{
    const xenav::testing::TempDir dir;
    const auto records = sample_records(3);
    const ShardInfo info = write_shard(dir / "s.jsonl", records);
    EXPECT_EQ(info.count, 3U);
    const std::string bytes = read_file(dir / "s.jsonl");
    EXPECT_EQ(info.bytes, bytes.size());
    EXPECT_EQ(info.sha256, sha256_hex(bytes));
    EXPECT_EQ(std::count(bytes.begin(), bytes.end(), '\n'), 3);
    EXPECT_EQ(read_shard(dir / "s.jsonl", info.sha256), records);
}

TEST(Dataset, FlippedByteIsDetected)
{
    const xenav::testing::TempDir dir;
    const ShardInfo info = write_shard(dir / "s.jsonl", sample_records(2));
    std::string bytes = read_file(dir / "s.jsonl");
    bytes[bytes.size() / 2] ^= 0x01;
    write_file_atomic(dir / "s.jsonl", bytes);
    EXPECT_THROW(read_shard(dir / "s.jsonl", info.sha256), CorruptionError);
}

TEST(Dataset, EmptyShardsAreRejected)
{
    const xenav::testing::TempDir dir;
    EXPECT_THROW(write_shard(dir / "e.jsonl", std::vector<DatasetRecord>{}), ArgumentError);
    write_file_atomic(dir / "e.jsonl", "");
    EXPECT_THROW(read_shard(dir / "e.jsonl", sha256_hex("")), ArgumentError);
    EXPECT_THROW(read_file(dir / "missing.jsonl"), IoError);
}

TEST(Dataset, ManifestErrors)
{
    const xenav::testing::TempDir dir;
    write_file_atomic(dir / "m.json", R"({"format": "something-else"})");
    EXPECT_THROW(load_manifest(dir / "m.json"), ParseError);
    write_file_atomic(dir / "m.json", "{not json");
    EXPECT_THROW(load_manifest(dir / "m.json"), ParseError);
}

TEST(Dataset, UnwritableOutputIsAnIoError)
{
    const xenav::testing::TempDir dir;
    write_file_atomic(dir / "plain", "x");
    DatasetOptions o;
    o.n = 1;
    o.out_dir = dir / "plain" / "sub";
    EXPECT_THROW(generate_dataset(o), IoError);
    o.out_dir = dir / "ok";
    o.n = 0;
    EXPECT_THROW(generate_dataset(o), ArgumentError);
}

TEST(Dataset, HundredEpisodeCollection)
{
    const xenav::testing::TempDir dir;
    DatasetOptions o;
    o.n = 100;
    o.master_seed = 21;
    o.shard_size = 32;
    o.out_dir = dir.path();
    std::uint64_t last_progress = 0;
    o.progress = [&](std::uint64_t done, std::uint64_t total) {
        EXPECT_EQ(total, 100U);
        EXPECT_GT(done, last_progress);
        last_progress = done;
    };
    const Manifest m = generate_dataset(o);
    EXPECT_EQ(last_progress, 100U);

    ASSERT_EQ(m.shards.size(), 4U);
    const std::vector<std::uint64_t> counts{32, 32, 32, 4};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(m.shards[i].count, counts[i]);
        EXPECT_EQ(m.shards[i].first, 32 * i);
    }
    EXPECT_EQ(m.shards[0].path, "shard-00000.jsonl");

    Manifest loaded;
    const auto records = read_dataset(dir.path(), &loaded);
    EXPECT_EQ(loaded.shards, m.shards);
    EXPECT_EQ(loaded.config, m.config);
    ASSERT_EQ(records.size(), 100U);
    std::uint64_t successes = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(records[i].spec.index, i);
        successes += records[i].success ? 1 : 0;
        EXPECT_TRUE(replay_matches(records[i], m.config)) << records[i].spec.id;
        if (records[i].trajectory) {
            EXPECT_EQ(records[i].steps, static_cast<int>(records[i].trajectory->actions.size()));
        }
    }
    EXPECT_EQ(successes, m.successes);
    EXPECT_GE(m.success_fraction(), 0.95);
}

TEST(Dataset, ReplayDetectsTampering)
{
    auto rec = generate_record(5, 0, EpisodeConfig{});
    ASSERT_TRUE(rec.trajectory);
    ASSERT_TRUE(replay_matches(rec, EpisodeConfig{}));
    rec.collisions += 1;
    EXPECT_FALSE(replay_matches(rec, EpisodeConfig{}));
}

TEST(Dataset, OutputIndependentOfWorkerCount)
{
    const xenav::testing::TempDir one;
    const xenav::testing::TempDir four;
    DatasetOptions o;
    o.n = 16;
    o.master_seed = 8;
    o.shard_size = 5;
    o.out_dir = one.path();
    o.workers = 1;
    generate_dataset(o);
    o.out_dir = four.path();
    o.workers = 4;
    generate_dataset(o);
    const auto a = tree_bytes(one.path());
    EXPECT_EQ(a.size(), 5U);
    EXPECT_EQ(a, tree_bytes(four.path()));
}

TEST(Dataset, ObservationSidecars)
{
    const xenav::testing::TempDir dir;
    DatasetOptions o;
    o.n = 2;
    o.master_seed = 3;
    o.store_observations = true;
    o.out_dir = dir.path();
    generate_dataset(o);
    const auto records = read_dataset(dir.path());
    for (const auto& r : records) {
        ASSERT_TRUE(r.trajectory);
        ASSERT_EQ(r.observations, "obs/" + r.spec.id + ".bin");
        const std::string blob = read_file(dir / r.observations);
        const Scene scene = resolve_scene(r.spec, SceneParams{});
        const auto opts = eval_sim_options();
        const Observation first = observe(scene, r.embodiment, r.trajectory->start, opts);
        const std::string head = encode_image(first.images[0]);
        const std::size_t frames = r.trajectory->actions.size() + 1;
        ASSERT_EQ(blob.size(), frames * 2 * head.size());
        EXPECT_EQ(blob.substr(0, head.size()), head);
        const Image back = decode_image(blob.substr(head.size(), head.size()), opts.render_width,
                                        opts.render_height, 1);
        EXPECT_EQ(back, first.images[1]);
    }
}
