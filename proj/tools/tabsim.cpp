#include "tab/bench.hpp"
#include "tab/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace tab;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
    std::string map_path;
    std::string mission; // literal text or a file path
    int horizon = -1;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::string config_path;
};

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    f >> j;
    return j;
}

void apply_config(const nlohmann::json& j, RewardParams& rewards, PomcpConfig& pomcp,
                  int& particles) {
    if (j.contains("rewards")) {
        const auto& r = j.at("rewards");
        rewards.intercept_bonus = r.value("intercept_bonus", rewards.intercept_bonus);
        rewards.collision_penalty =
            r.value("collision_penalty", rewards.collision_penalty);
        rewards.step_penalty = r.value("step_penalty", rewards.step_penalty);
        rewards.move_cost = r.value("move_cost", rewards.move_cost);
        rewards.intercept_radius = r.value("intercept_radius", rewards.intercept_radius);
        rewards.discount = r.value("discount", rewards.discount);
    }
    if (j.contains("pomcp")) {
        const auto& p = j.at("pomcp");
        pomcp.num_sims = p.value("num_sims", pomcp.num_sims);
        pomcp.uct_c = p.value("uct_c", pomcp.uct_c);
        pomcp.max_depth = p.value("max_depth", pomcp.max_depth);
    }
    particles = j.value("particles", particles);
}

MissionSpec read_mission(const std::string& arg) {
    if (std::filesystem::exists(arg)) return load_mission(arg);
    return parse_mission(arg);
}

int resolve_horizon(const MissionSpec& spec, int flag_value) {
    if (flag_value >= 0) return flag_value;
    if (spec.horizon_hint) return *spec.horizon_hint;
    int best = -1;
    for (const auto& t : spec.tuples)
        if (t.time) best = std::max(best, *t.time);
    if (best < 0)
        throw ConfigError("mission has no finite constraint time; pass --horizon");
    return best;
}

int cmd_tabfield(const CommonArgs& args) {
    const MapFile map = load_map(args.map_path);
    const MissionSpec spec = read_mission(args.mission);
    const int horizon = resolve_horizon(spec, args.horizon);
    const auto aut = compile_automaton(spec, map.world, horizon);
    const auto ref = build_reference(map.world);
    if (map.adv_starts.empty()) throw ConfigError("map has no adversary start ('s')");
    std::vector<std::pair<Cell, double>> mu0;
    for (Cell c : map.adv_starts) mu0.emplace_back(c, 1.0);
    const TabField tab = compute_tabfield(map.world, ref, aut, std::move(mu0), horizon);
    emit_tabfield(tab, args.out_dir);
    std::printf("feasible: yes\nlog_Z: %.9f\nautomaton_states: %d\nhorizon: %d\n",
                tab.log_z(), aut.num_states(), horizon);
    std::printf("wrote %d timestep marginals to %s\n", horizon + 1,
                args.out_dir.c_str());
    return kExitOk;
}

int cmd_check(const CommonArgs& args, bool show_fp_path) {
    const MapFile map = load_map(args.map_path);
    const MissionSpec spec = read_mission(args.mission);
    const int horizon = resolve_horizon(spec, args.horizon);
    const auto aut = compile_automaton(spec, map.world, horizon);
    std::printf("parsed %zu constraint tuples\nautomaton_states: %d\nhorizon: %d\n",
                spec.tuples.size(), aut.num_states(), horizon);
    if (map.adv_starts.empty()) {
        std::printf("feasibility: unknown (map has no adversary start)\n");
        return kExitOk;
    }
    const auto ref = build_reference(map.world);
    std::vector<std::pair<Cell, double>> mu0;
    for (Cell c : map.adv_starts) mu0.emplace_back(c, 1.0);
    const TabField tab = compute_tabfield(map.world, ref, aut, std::move(mu0), horizon);
    std::printf("feasibility: feasible (log_Z = %.9f)\n", tab.log_z());
    if (show_fp_path) {
        const auto path =
            shortest_mission_path(map.world, spec, aut, map.adv_starts.front());
        std::printf("fp_path:");
        for (Cell c : path) std::printf(" (%d,%d)", c.row, c.col);
        std::printf("\n");
    }
    return kExitOk;
}

int cmd_episode(const CommonArgs& args, const std::string& planner,
                const std::string& adversary, double nsp_epsilon,
                const std::string& scripted) {
    const MapFile map = load_map(args.map_path);
    const MissionSpec spec = read_mission(args.mission);
    const int horizon = resolve_horizon(spec, args.horizon);

    RewardParams rewards;
    PomcpConfig pomcp;
    int particles = 1000;
    apply_config(load_config(args.config_path), rewards, pomcp, particles);

    const EpisodeContext ctx = make_context(map, spec, horizon, rewards);
    EpisodeOptions opts;
    opts.planner = planner_from_string(planner);
    opts.adversary = adversary_from_string(adversary);
    opts.adversary_opts.epsilon = nsp_epsilon;
    if (!scripted.empty()) opts.adversary_opts.scripted_path = scripted;
    opts.pomcp = pomcp;
    opts.particles = particles;

    std::vector<TraceRow> trace;
    const EpisodeResult r = run_episode(ctx, opts, args.seed, nullptr, &trace);

    std::filesystem::create_directories(args.out_dir);
    const auto trace_path = std::filesystem::path(args.out_dir) / "trace.csv";
    {
        std::ofstream f(trace_path);
        f << "t,ego_row,ego_col,adv_row,adv_col\n";
        for (const auto& row : trace)
            f << row.t << ',' << row.ego.row << ',' << row.ego.col << ','
              << row.adv.row << ',' << row.adv.col << '\n';
    }
    std::printf("intercepted: %s\n", r.intercepted ? "yes" : "no");
    if (r.steps_to_interception)
        std::printf("steps_to_interception: %d\n", *r.steps_to_interception);
    std::printf("adversary_completed: %s\ntotal_reward: %.3f\ndecisions: %d\n"
                "planning_time_ms: %.3f\ntrace: %s\n",
                r.adversary_completed ? "yes" : "no", r.total_reward, r.decisions,
                r.planning_time_ms, trace_path.c_str());
    return kExitOk;
}

int cmd_bench(const std::string& suite_path, const std::string& out_dir, int jobs) {
    SuiteConfig suite = load_suite(suite_path);
    if (jobs > 0) suite.jobs = jobs;
    const MetricsTable table =
        run_benchmark(suite, [](const std::string& line) {
            std::fprintf(stderr, "[bench] %s\n", line.c_str());
        });
    emit_results(table, out_dir, table.traces);
    std::printf("%-8s %-10s %8s %10s %12s %14s %6s\n", "planner", "mission", "atcr",
                "sti", "mean_reward", "mean_plan_ms", "n");
    for (const auto& r : table.rows)
        std::printf("%-8s %-10s %8.3f %10.2f %12.2f %14.3f %6d\n", r.planner.c_str(),
                    r.mission.c_str(), r.atcr, r.sti, r.mean_reward, r.mean_plan_ms,
                    r.n);
    std::printf("wrote metrics to %s\n", out_dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-aware behavior fields: adversary marginals, belief-space "
                 "planning and benchmarks on grid worlds"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string planner = "tab";
    std::string adversary = "tab";
    std::string scripted;
    std::string suite_path;
    double nsp_epsilon = 0.3;
    int jobs = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_mission = true) {
        cmd->add_option("--map", args.map_path, "ASCII map file")->required();
        auto* m = cmd->add_option("--mission", args.mission,
                                  "mission DSL string or file path");
        if (needs_mission) m->required();
        cmd->add_option("--horizon", args.horizon, "episode horizon (steps)");
        cmd->add_option("--seed", args.seed, "random seed");
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--config", args.config_path,
                        "JSON overriding reward/pomcp defaults");
    };

    auto* tf = app.add_subcommand("tabfield", "compute marginals, write heatmaps");
    add_common(tf);

    auto* ep = app.add_subcommand("episode", "run one seeded episode");
    add_common(ep);
    ep->add_option("--planner", planner, "tab|s|fp|mle");
    ep->add_option("--adversary", adversary, "tab|nsp|scripted");
    ep->add_option("--nsp-epsilon", nsp_epsilon, "noisy shortest path detour rate");
    ep->add_option("--scripted", scripted, "scripted adversary CSV (t,row,col)");

    auto* be = app.add_subcommand("bench", "run a benchmark suite");
    be->add_option("--suite", suite_path, "suite JSON file")->required();
    be->add_option("--out", args.out_dir, "output directory");
    be->add_option("--jobs", jobs, "parallel cell workers (0 = hardware)");

    auto* ck = app.add_subcommand("check", "parse + compile a mission, report "
                                           "automaton size and feasibility");
    add_common(ck);
    bool show_fp_path = false;
    ck->add_flag("--fp-path", show_fp_path, "print the shortest mission path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (tf->parsed()) return cmd_tabfield(args);
        if (ep->parsed())
            return cmd_episode(args, planner, adversary, nsp_epsilon, scripted);
        if (be->parsed()) return cmd_bench(suite_path, args.out_dir, jobs);
        if (ck->parsed()) return cmd_check(args, show_fp_path);
    } catch (const tab::InfeasibleMission& e) {
        std::fprintf(stderr, "infeasible mission: %s\n", e.what());
        return kExitInfeasible;
    } catch (const tab::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitUsage;
    } catch (const tab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
