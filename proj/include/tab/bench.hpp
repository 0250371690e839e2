#pragma once

#include "tab/adversary.hpp"
#include "tab/grid.hpp"
#include "tab/mission.hpp"
#include "tab/planner.hpp"
#include "tab/tabfield.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tab {

enum class PlannerKind { Tab, Standard, FixedPath, Mle };

std::string to_string(PlannerKind kind);
PlannerKind planner_from_string(const std::string& name);
std::string to_string(AdversaryKind kind);
AdversaryKind adversary_from_string(const std::string& name);

struct EpisodeResult {
    bool intercepted = false;
    std::optional<int> steps_to_interception;
    bool adversary_completed = false;
    double total_reward = 0.0;
    int decisions = 0;
    double planning_time_ms = 0.0;
    std::uint64_t seed = 0;
};

/// One row per environment step: positions after the step resolves.
struct TraceRow {
    int t;
    Cell ego;
    Cell adv;
};

/// Immutable per-(map, mission) inputs shared by every episode.
struct EpisodeContext {
    GridWorld world;
    MissionSpec spec;
    ConstraintAutomaton aut;
    TabField tab;
    RewardParams rewards;
    Cell ego_start;
    int horizon;
};

EpisodeContext make_context(const MapFile& map, const MissionSpec& spec, int horizon,
                            const RewardParams& rewards = {});

struct EpisodeOptions {
    PlannerKind planner = PlannerKind::Tab;
    AdversaryKind adversary = AdversaryKind::TabSample;
    AdversaryOptions adversary_opts;
    PomcpConfig pomcp;
    int particles = 1000;
    double mle_prior = 1.0;
};

/// Plays one closed-loop episode: observe, update, plan, step, predict.
/// Fully deterministic given the seed. `shared_mle` (optional) lets a
/// benchmark cell carry learned transition counts across episodes.
EpisodeResult run_episode(const EpisodeContext& ctx, const EpisodeOptions& opts,
                          std::uint64_t seed, MleModel* shared_mle = nullptr,
                          std::vector<TraceRow>* trace = nullptr);

/// Test seam: same loop, but the ego action comes from `decide`.
using DecideFn = std::function<EgoAction(const EpisodeContext&, Cell ego,
                                         const Belief&, int t)>;
EpisodeResult run_episode_with(const EpisodeContext& ctx, const EpisodeOptions& opts,
                               std::uint64_t seed, const DecideFn& decide,
                               MleModel* shared_mle = nullptr,
                               std::vector<TraceRow>* trace = nullptr);

struct MetricsRow {
    std::string planner;
    std::string mission;
    double atcr = 0.0;
    double sti = 0.0; // NaN when nothing was intercepted
    double mean_reward = 0.0;
    double mean_plan_ms = 0.0;
    int n = 0;
    double intercept_rate = 0.0;
};

struct EpisodeRecord {
    std::string planner;
    std::string mission;
    int episode = 0;
    EpisodeResult result;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::vector<EpisodeRecord> episodes;
    // traced episodes, keyed "<mission>_<planner>_ep<k>"
    std::vector<std::pair<std::string, std::vector<TraceRow>>> traces;
};

struct MissionEntry {
    std::string name;
    std::string mission_text;
    std::optional<std::filesystem::path> map_path; // overrides the suite map
    int horizon = 0;
};

struct SuiteConfig {
    std::filesystem::path map_path;
    std::vector<MissionEntry> missions;
    std::vector<PlannerKind> planners;
    int episodes = 150;
    std::uint64_t seed_base = 1;
    AdversaryKind adversary = AdversaryKind::TabSample;
    AdversaryOptions adversary_opts;
    PomcpConfig pomcp;
    int particles = 1000;
    double mle_prior = 1.0;
    bool mle_carryover = true;
    int trace_episodes = 2; // per cell; traces beyond this are not written
    int jobs = 0;           // 0 = hardware concurrency
    RewardParams rewards;
};

SuiteConfig load_suite(const std::filesystem::path& path);

/// Runs the (planner x mission) grid. Episodes within a cell run in order
/// (the MLE model may carry over); cells run in parallel up to `jobs`.
/// Per-episode adversary seeds depend only on (suite seed, mission,
/// episode), so every planner faces the same committed trajectories.
MetricsTable run_benchmark(const SuiteConfig& suite,
                           const std::function<void(const std::string&)>& log = {});

/// Writes metrics.csv (deterministic columns), timings.csv, episodes.csv
/// and per-cell trajectory traces under `dir`.
void emit_results(const MetricsTable& table, const std::filesystem::path& dir,
                  const std::vector<std::pair<std::string, std::vector<TraceRow>>>&
                      traces = {});

/// Per-timestep marginal emitters (CSV rows: row, col, probability; PGM
/// grayscale max-normalized per timestep).
void write_marginal_csv(const TabField& tab, int t, const std::filesystem::path& file);
void write_marginal_pgm(const TabField& tab, int t, const std::filesystem::path& file);
void emit_tabfield(const TabField& tab, const std::filesystem::path& dir);

} // namespace tab
