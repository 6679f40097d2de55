#include "xenav/metrics.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"

namespace xenav {

namespace {

void check_records(std::span<const EpisodeRecord> records)
{
    if (records.empty()) {
        throw ArgumentError("metrics need at least one episode");
    }
    for (const auto& r : records) {
        if (r.steps < 1) {
            throw ArgumentError("episode length must be at least 1");
        }
        if (r.collisions < 0 || r.collisions > r.steps) {
            throw ArgumentError("collision count must lie in [0, steps]");
        }
        if (r.expert_steps && *r.expert_steps < 1) {
            throw ArgumentError("expert length must be at least 1");
        }
    }
}

} // namespace

double sc(std::span<const EpisodeRecord> records)
{
    check_records(records);
    double sum = 0.0;
    for (const auto& r : records) {
        if (r.success) {
            sum += 1.0 / (1.0 + r.collisions);
        }
    }
    return sum / static_cast<double>(records.size());
}

double sel(std::span<const EpisodeRecord> records)
{
    check_records(records);
    double sum = 0.0;
    for (const auto& r : records) {
        if (!r.success) {
            continue;
        }
        if (!r.expert_steps) {
            throw ArgumentError("successful episode lacks an expert length");
        }
        const int ref = *r.expert_steps;
        sum += static_cast<double>(ref) / std::max(r.steps, ref);
    }
    return sum / static_cast<double>(records.size());
}

MetricsSummary aggregate(std::span<const EpisodeRecord> records)
{
    MetricsSummary m;
    m.sc = sc(records);
    m.sel = sel(records);
    m.episodes = records.size();
    double successes = 0.0;
    double ratio = 0.0;
    double safe = 0.0;
    for (const auto& r : records) {
        successes += r.success ? 1.0 : 0.0;
        ratio += static_cast<double>(r.collisions) / r.steps;
        safe += r.collisions == 0 ? 1.0 : 0.0;
    }
    const auto n = static_cast<double>(records.size());
    m.success_rate = successes / n;
    m.collision_rate = ratio / n;
    m.safe_episode_rate = safe / n;
    return m;
}

std::map<std::string, MetricsSummary> aggregate_by_group(std::span<const EpisodeRecord> records)
{
    std::map<std::string, std::vector<EpisodeRecord>> groups;
    for (const auto& r : records) {
        groups[r.group].push_back(r);
    }
    std::map<std::string, MetricsSummary> out;
    for (const auto& [name, recs] : groups) {
        out.emplace(name, aggregate(recs));
    }
    return out;
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsSummary>>& rows)
{
    std::size_t name_width = 4;
    for (const auto& [name, _] : rows) {
        name_width = std::max(name_width, name.size());
    }
    const int w = static_cast<int>(name_width);
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s  %8s  %8s  %6s\n", w, "name", "success", "SEL", "SC", "CR",
                  "safe", "N");
    out += line;
    for (const auto& [name, m] : rows) {
        std::snprintf(line, sizeof line, "%-*s  %8.4f  %8.4f  %8.4f  %8.4f  %8.4f  %6zu\n", w, name.c_str(),
                      m.success_rate, m.sel, m.sc, m.collision_rate, m.safe_episode_rate, m.episodes);
        out += line;
    }
    return out;
}

void to_json(nlohmann::json& j, const EpisodeRecord& r)
{
    j = nlohmann::json{{"success", r.success},
                       {"steps", r.steps},
                       {"expert_steps", nullptr},
                       {"collisions", r.collisions},
                       {"group", r.group}};
    if (r.expert_steps) {
        j["expert_steps"] = *r.expert_steps;
    }
}

void from_json(const nlohmann::json& j, EpisodeRecord& r)
{
    j.at("success").get_to(r.success);
    j.at("steps").get_to(r.steps);
    j.at("collisions").get_to(r.collisions);
    r.expert_steps.reset();
    if (j.contains("expert_steps") && !j.at("expert_steps").is_null()) {
        r.expert_steps = j.at("expert_steps").get<int>();
    }
    r.group = j.value("group", std::string{});
}

void to_json(nlohmann::json& j, const MetricsSummary& m)
{
    j = nlohmann::json{{"episodes", m.episodes},
                       {"success_rate", m.success_rate},
                       {"sel", m.sel},
                       {"sc", m.sc},
                       {"collision_rate", m.collision_rate},
                       {"safe_episode_rate", m.safe_episode_rate}};
}

void from_json(const nlohmann::json& j, MetricsSummary& m)
{
    j.at("episodes").get_to(m.episodes);
    j.at("success_rate").get_to(m.success_rate);
    j.at("sel").get_to(m.sel);
    j.at("sc").get_to(m.sc);
    j.at("collision_rate").get_to(m.collision_rate);
    j.at("safe_episode_rate").get_to(m.safe_episode_rate);
}

} // namespace xenav
