#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xenav {

struct EpisodeRecord
{
    bool success = false;
    int steps = 1;                    ///< L
    std::optional<int> expert_steps;  ///< L*, the expert's step count on the same episode
    int collisions = 0;               ///< c
    std::string group;                ///< free-form label for group-by summaries

    friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct MetricsSummary
{
    std::size_t episodes = 0;
    double success_rate = 0.0;
    double sel = 0.0;
    double sc = 0.0;
    double collision_rate = 0.0;  ///< mean over episodes of c / L
    double safe_episode_rate = 0.0;

    friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

/// Mean of S / (1 + c). Throws ArgumentError on empty or invalid input.
double sc(std::span<const EpisodeRecord> records);

/// Mean of S * L* / max(L, L*). L* is only read for successful episodes, and
/// its absence there is an ArgumentError.
double sel(std::span<const EpisodeRecord> records);

MetricsSummary aggregate(std::span<const EpisodeRecord> records);

/// One summary per distinct group label, sorted by label.
std::map<std::string, MetricsSummary> aggregate_by_group(std::span<const EpisodeRecord> records);

/// Aligned plain-text table, one row per named summary.
std::string metrics_table(const std::vector<std::pair<std::string, MetricsSummary>>& rows);

void to_json(nlohmann::json& j, const EpisodeRecord& r);
void from_json(const nlohmann::json& j, EpisodeRecord& r);
void to_json(nlohmann::json& j, const MetricsSummary& m);
void from_json(const nlohmann::json& j, MetricsSummary& m);

} // namespace xenav
