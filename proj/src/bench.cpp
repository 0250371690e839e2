#include "tab/bench.hpp"

#include "tab/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace tab {

std::string to_string(PlannerKind kind) {
    switch (kind) {
    case PlannerKind::Tab: return "tab";
    case PlannerKind::Standard: return "s";
    case PlannerKind::FixedPath: return "fp";
    case PlannerKind::Mle: return "mle";
    }
    return "?";
}

PlannerKind planner_from_string(const std::string& name) {
    if (name == "tab") return PlannerKind::Tab;
    if (name == "s") return PlannerKind::Standard;
    if (name == "fp") return PlannerKind::FixedPath;
    if (name == "mle") return PlannerKind::Mle;
    throw ConfigError("unknown planner '" + name + "' (expected tab|s|fp|mle)");
}

std::string to_string(AdversaryKind kind) {
    switch (kind) {
    case AdversaryKind::TabSample: return "tab";
    case AdversaryKind::NoisyShortestPath: return "nsp";
    case AdversaryKind::Scripted: return "scripted";
    }
    return "?";
}

AdversaryKind adversary_from_string(const std::string& name) {
    if (name == "tab") return AdversaryKind::TabSample;
    if (name == "nsp") return AdversaryKind::NoisyShortestPath;
    if (name == "scripted") return AdversaryKind::Scripted;
    throw ConfigError("unknown adversary '" + name + "' (expected tab|nsp|scripted)");
}

EpisodeContext make_context(const MapFile& map, const MissionSpec& spec, int horizon,
                            const RewardParams& rewards) {
    if (!map.ego_start) throw ConfigError("map has no ego start ('g')");
    if (map.adv_starts.empty()) throw ConfigError("map has no adversary start ('s')");
    if (rewards.discount <= 0.0 || rewards.discount >= 1.0)
        throw ConfigError("discount must lie in (0, 1)");
    if (rewards.intercept_radius < 0)
        throw ConfigError("intercept radius must be non-negative");
    auto aut = compile_automaton(spec, map.world, horizon);
    auto ref = build_reference(map.world);
    std::vector<std::pair<Cell, double>> mu0;
    for (Cell c : map.adv_starts) mu0.emplace_back(c, 1.0);
    TabField tab = compute_tabfield(map.world, ref, aut, std::move(mu0), horizon);
    return EpisodeContext{map.world, spec,         std::move(aut), std::move(tab),
                          rewards,   *map.ego_start, horizon};
}

namespace {

using Clock = std::chrono::steady_clock;

using ModelDecideFn =
    std::function<EgoAction(Cell ego, const Belief&, int t, const AdvModel&)>;

EpisodeResult run_loop(const EpisodeContext& ctx, const EpisodeOptions& opts,
                       std::uint64_t seed, const ModelDecideFn& decide,
                       MleModel* shared_mle, std::vector<TraceRow>* trace) {
    const auto& world = ctx.world;
    const auto& aut = ctx.aut;

    const auto policy =
        make_adversary(opts.adversary, world, ctx.spec, aut, ctx.tab,
                       mix64(seed, 0x01), opts.adversary_opts);

    std::unique_ptr<AdvModel> owned_model;
    std::unique_ptr<MleModel> owned_mle;
    MleModel* mle = nullptr;
    const AdvModel* model = nullptr;
    switch (opts.planner) {
    case PlannerKind::Tab:
        owned_model = make_tab_model(ctx.tab);
        model = owned_model.get();
        break;
    case PlannerKind::Standard:
        owned_model = make_uniform_model(world, aut);
        model = owned_model.get();
        break;
    case PlannerKind::FixedPath:
        owned_model = make_fixed_path_model(world, ctx.spec, aut,
                                            ctx.tab.mu0().front().first);
        model = owned_model.get();
        break;
    case PlannerKind::Mle:
        if (shared_mle) {
            mle = shared_mle;
        } else {
            owned_mle = make_mle_model(world, aut, opts.mle_prior);
            mle = owned_mle.get();
        }
        model = mle;
        break;
    }

    EpisodeResult res;
    res.seed = seed;

    JointState s{ctx.ego_start, policy.start(), 0};
    if (trace) trace->push_back(TraceRow{0, s.ego, s.adv});

    auto q_real = aut.step(aut.initial(), s.adv, 0);
    int complete_time = std::numeric_limits<int>::max();
    if (aut.complete_at(q_real, 0)) complete_time = 0;

    if (chebyshev(s.ego, s.adv) <= ctx.rewards.intercept_radius) {
        res.intercepted = true;
        res.steps_to_interception = 0;
        res.adversary_completed = false; // interception wins the tie at t=0
        return res;
    }

    Rng belief_rng(mix64(seed, 0x02));
    Belief b = init_belief(ctx.tab, opts.particles, belief_rng);

    std::optional<Observation> prev_obs;
    for (int t = 0; t < ctx.horizon; ++t) {
        const Observation obs = observe(world, s);
        if (mle && prev_obs && prev_obs->adv && obs.adv)
            mle->record(*prev_obs->adv, *obs.adv);
        b = belief_update(std::move(b), obs, ctx.tab, belief_rng);

        const auto t0 = Clock::now();
        const EgoAction a = decide(s.ego, b, t, *model);
        res.planning_time_ms +=
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        ++res.decisions;

        const Cell adv_next = policy.next(t);
        const StepResult sr = step(world, ctx.rewards, s, a, adv_next);
        res.total_reward += sr.reward;
        s = sr.next;
        if (trace) trace->push_back(TraceRow{s.t, s.ego, s.adv});

        q_real = aut.step(q_real, s.adv, s.t);
        if (complete_time == std::numeric_limits<int>::max() &&
            aut.complete_at(q_real, s.t))
            complete_time = s.t;

        if (sr.terminal) {
            res.intercepted = true;
            res.steps_to_interception = s.t;
            break;
        }
        if (t + 1 < ctx.horizon) b = belief_predict(std::move(b), *model, belief_rng);
        prev_obs = obs;
    }

    res.adversary_completed =
        complete_time != std::numeric_limits<int>::max() &&
        (!res.intercepted || complete_time < *res.steps_to_interception);
    return res;
}

} // namespace

EpisodeResult run_episode(const EpisodeContext& ctx, const EpisodeOptions& opts,
                          std::uint64_t seed, MleModel* shared_mle,
                          std::vector<TraceRow>* trace) {
    const auto decide = [&](Cell ego, const Belief& b, int t, const AdvModel& model) {
        PomcpConfig cfg = opts.pomcp;
        cfg.seed = mix64(seed, 0x03, static_cast<std::uint64_t>(t));
        return pomcp_plan(ctx.world, ctx.rewards, ego, b, model, cfg, ctx.horizon);
    };
    return run_loop(ctx, opts, seed, decide, shared_mle, trace);
}

EpisodeResult run_episode_with(const EpisodeContext& ctx, const EpisodeOptions& opts,
                               std::uint64_t seed, const DecideFn& decide,
                               MleModel* shared_mle, std::vector<TraceRow>* trace) {
    const auto adapted = [&](Cell ego, const Belief& b, int t, const AdvModel&) {
        return decide(ctx, ego, b, t);
    };
    return run_loop(ctx, opts, seed, adapted, shared_mle, trace);
}

// ---------------------------------------------------------------------------
// Suite loading and the benchmark grid

namespace {

int default_horizon(const MissionSpec& spec) {
    if (spec.horizon_hint) return *spec.horizon_hint;
    int best = -1;
    for (const auto& t : spec.tuples)
        if (t.time) best = std::max(best, *t.time);
    if (best < 0)
        throw ConfigError("mission has no finite constraint time; set a horizon");
    return best;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

SuiteConfig load_suite(const std::filesystem::path& path) {
    nlohmann::json j;
    {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open suite file: " + path.string());
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad suite JSON: " + std::string(e.what()));
        }
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    SuiteConfig suite;
    try {
        if (j.contains("map")) suite.map_path = resolve(j.at("map").get<std::string>());
        for (const auto& m : j.at("missions")) {
            MissionEntry entry;
            entry.name = m.at("name").get<std::string>();
            if (m.contains("file"))
                entry.mission_text = read_file(resolve(m.at("file").get<std::string>()));
            else
                entry.mission_text = m.at("text").get<std::string>();
            if (m.contains("map")) entry.map_path = resolve(m.at("map").get<std::string>());
            entry.horizon = m.contains("horizon")
                                ? m.at("horizon").get<int>()
                                : default_horizon(parse_mission(entry.mission_text));
            suite.missions.push_back(std::move(entry));
        }
        for (const auto& p : j.at("planners"))
            suite.planners.push_back(planner_from_string(p.get<std::string>()));
        suite.episodes = j.value("episodes", suite.episodes);
        suite.seed_base = j.value("seed", suite.seed_base);
        if (j.contains("adversary"))
            suite.adversary = adversary_from_string(j.at("adversary").get<std::string>());
        suite.adversary_opts.epsilon = j.value("nsp_epsilon", suite.adversary_opts.epsilon);
        if (j.contains("scripted_path"))
            suite.adversary_opts.scripted_path =
                resolve(j.at("scripted_path").get<std::string>());
        if (j.contains("pomcp")) {
            const auto& p = j.at("pomcp");
            suite.pomcp.num_sims = p.value("num_sims", suite.pomcp.num_sims);
            suite.pomcp.uct_c = p.value("uct_c", suite.pomcp.uct_c);
            suite.pomcp.max_depth = p.value("max_depth", suite.pomcp.max_depth);
        }
        suite.particles = j.value("particles", suite.particles);
        suite.mle_prior = j.value("mle_prior", suite.mle_prior);
        suite.mle_carryover = j.value("mle_carryover", suite.mle_carryover);
        suite.trace_episodes = j.value("trace_episodes", suite.trace_episodes);
        suite.jobs = j.value("jobs", suite.jobs);
        if (j.contains("rewards")) {
            const auto& r = j.at("rewards");
            suite.rewards.intercept_bonus =
                r.value("intercept_bonus", suite.rewards.intercept_bonus);
            suite.rewards.collision_penalty =
                r.value("collision_penalty", suite.rewards.collision_penalty);
            suite.rewards.step_penalty = r.value("step_penalty", suite.rewards.step_penalty);
            suite.rewards.move_cost = r.value("move_cost", suite.rewards.move_cost);
            suite.rewards.intercept_radius =
                r.value("intercept_radius", suite.rewards.intercept_radius);
            suite.rewards.discount = r.value("discount", suite.rewards.discount);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad suite JSON: " + std::string(e.what()));
    }
    if (suite.missions.empty()) throw ConfigError("suite lists no missions");
    if (suite.planners.empty()) throw ConfigError("suite lists no planners");
    if (suite.episodes < 0) throw ConfigError("episodes must be non-negative");
    return suite;
}

namespace {

struct CellOutput {
    MetricsRow row;
    std::vector<EpisodeRecord> episodes;
    std::vector<std::pair<std::string, std::vector<TraceRow>>> traces;
    std::string error;
};

} // namespace

MetricsTable run_benchmark(const SuiteConfig& suite,
                           const std::function<void(const std::string&)>& log) {
    // Contexts are shared per mission across planner cells.
    std::vector<EpisodeContext> contexts;
    contexts.reserve(suite.missions.size());
    for (const auto& m : suite.missions) {
        const auto map_path = m.map_path ? *m.map_path : suite.map_path;
        if (map_path.empty())
            throw ConfigError("mission '" + m.name + "' has no map");
        const MapFile map = load_map(map_path);
        const MissionSpec spec = parse_mission(m.mission_text);
        contexts.push_back(make_context(map, spec, m.horizon, suite.rewards));
        if (log) log("compiled mission '" + m.name + "' (horizon " +
                     std::to_string(m.horizon) + ", log Z = " +
                     std::to_string(contexts.back().tab.log_z()) + ")");
    }

    struct CellSpec {
        std::size_t mission;
        std::size_t planner;
    };
    std::vector<CellSpec> cells;
    for (std::size_t mi = 0; mi < suite.missions.size(); ++mi)
        for (std::size_t pi = 0; pi < suite.planners.size(); ++pi)
            cells.push_back({mi, pi});
    std::vector<CellOutput> outputs(cells.size());

    auto run_cell = [&](std::size_t idx) {
        const auto [mi, pi] = cells[idx];
        const auto& ctx = contexts[mi];
        const std::string mission_name = suite.missions[mi].name;
        const PlannerKind planner = suite.planners[pi];
        CellOutput& out = outputs[idx];
        out.row.planner = to_string(planner);
        out.row.mission = mission_name;
        out.row.n = suite.episodes;

        EpisodeOptions opts;
        opts.planner = planner;
        opts.adversary = suite.adversary;
        opts.adversary_opts = suite.adversary_opts;
        opts.pomcp = suite.pomcp;
        opts.particles = suite.particles;
        opts.mle_prior = suite.mle_prior;

        std::unique_ptr<MleModel> carry;
        if (planner == PlannerKind::Mle && suite.mle_carryover)
            carry = make_mle_model(ctx.world, ctx.aut, suite.mle_prior);

        int intercepted = 0, completed = 0;
        double steps_sum = 0.0, reward_sum = 0.0, plan_ms = 0.0;
        long long decisions = 0;
        try {
            for (int e = 0; e < suite.episodes; ++e) {
                const std::uint64_t seed =
                    mix64(suite.seed_base, static_cast<std::uint64_t>(mi),
                          static_cast<std::uint64_t>(e));
                std::vector<TraceRow> trace;
                std::vector<TraceRow>* tp = e < suite.trace_episodes ? &trace : nullptr;
                const EpisodeResult r = run_episode(ctx, opts, seed, carry.get(), tp);
                if (r.intercepted) {
                    ++intercepted;
                    steps_sum += *r.steps_to_interception;
                }
                if (r.adversary_completed) ++completed;
                reward_sum += r.total_reward;
                plan_ms += r.planning_time_ms;
                decisions += r.decisions;
                out.episodes.push_back(
                    EpisodeRecord{out.row.planner, mission_name, e, r});
                if (tp)
                    out.traces.emplace_back(mission_name + "_" + out.row.planner +
                                                "_ep" + std::to_string(e),
                                            std::move(trace));
            }
        } catch (const std::exception& e) {
            out.error = e.what();
            return;
        }
        const int n = suite.episodes;
        out.row.atcr = n > 0 ? static_cast<double>(completed) / n : 0.0;
        out.row.intercept_rate = n > 0 ? static_cast<double>(intercepted) / n : 0.0;
        out.row.sti = intercepted > 0 ? steps_sum / intercepted
                                      : std::numeric_limits<double>::quiet_NaN();
        out.row.mean_reward = n > 0 ? reward_sum / n : 0.0;
        out.row.mean_plan_ms = decisions > 0 ? plan_ms / static_cast<double>(decisions)
                                             : 0.0;
        if (log)
            log("cell " + mission_name + "/" + out.row.planner + ": atcr=" +
                std::to_string(out.row.atcr) + " intercept_rate=" +
                std::to_string(out.row.intercept_rate));
    };

    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    const int jobs = std::max(1, suite.jobs > 0 ? suite.jobs : hw);
    if (jobs == 1 || cells.size() <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::mutex mu;
        std::size_t next = 0;
        auto worker = [&] {
            for (;;) {
                std::size_t idx;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= cells.size()) return;
                    idx = next++;
                }
                run_cell(idx);
            }
        };
        std::vector<std::thread> pool;
        const int nthreads = std::min<std::size_t>(jobs, cells.size());
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    MetricsTable table;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!outputs[i].error.empty())
            throw ConfigError("benchmark cell " + outputs[i].row.mission + "/" +
                              outputs[i].row.planner + " failed: " + outputs[i].error);
        table.rows.push_back(outputs[i].row);
        for (auto& e : outputs[i].episodes) table.episodes.push_back(std::move(e));
        for (auto& tr : outputs[i].traces) table.traces.push_back(std::move(tr));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Emitters

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

void emit_results(const MetricsTable& table, const std::filesystem::path& dir,
                  const std::vector<std::pair<std::string, std::vector<TraceRow>>>&
                      traces) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "metrics.csv");
        if (!f) throw ConfigError("cannot write " + (dir / "metrics.csv").string());
        f << "planner,mission,atcr,sti,mean_reward,n,intercept_rate\n";
        for (const auto& r : table.rows)
            f << r.planner << ',' << r.mission << ',' << fmt(r.atcr) << ','
              << fmt(r.sti) << ',' << fmt(r.mean_reward) << ',' << r.n << ','
              << fmt(r.intercept_rate) << '\n';
    }
    {
        std::ofstream f(dir / "timings.csv");
        f << "planner,mission,mean_plan_ms\n";
        for (const auto& r : table.rows)
            f << r.planner << ',' << r.mission << ',' << fmt(r.mean_plan_ms) << '\n';
    }
    {
        std::ofstream f(dir / "episodes.csv");
        f << "planner,mission,episode,seed,intercepted,steps,completed,total_reward,"
             "decisions,plan_ms\n";
        for (const auto& e : table.episodes) {
            f << e.planner << ',' << e.mission << ',' << e.episode << ','
              << e.result.seed << ',' << (e.result.intercepted ? 1 : 0) << ',';
            if (e.result.steps_to_interception)
                f << *e.result.steps_to_interception;
            f << ',' << (e.result.adversary_completed ? 1 : 0) << ','
              << fmt(e.result.total_reward) << ',' << e.result.decisions << ','
              << fmt(e.result.planning_time_ms) << '\n';
        }
    }
    if (!traces.empty()) {
        const auto tdir = dir / "traces";
        std::filesystem::create_directories(tdir);
        for (const auto& [name, rows] : traces) {
            std::ofstream f(tdir / (name + ".csv"));
            f << "t,ego_row,ego_col,adv_row,adv_col\n";
            for (const auto& r : rows)
                f << r.t << ',' << r.ego.row << ',' << r.ego.col << ',' << r.adv.row
                  << ',' << r.adv.col << '\n';
        }
    }
}

void write_marginal_csv(const TabField& tab, int t, const std::filesystem::path& file) {
    std::ofstream f(file);
    if (!f) throw ConfigError("cannot write " + file.string());
    f << "row,col,probability\n";
    const auto& world = tab.world();
    for (int r = 0; r < world.height(); ++r)
        for (int c = 0; c < world.width(); ++c)
            f << r << ',' << c << ',' << fmt(tab.marginal(t, Cell{r, c})) << '\n';
}

void write_marginal_pgm(const TabField& tab, int t, const std::filesystem::path& file) {
    std::ofstream f(file);
    if (!f) throw ConfigError("cannot write " + file.string());
    const auto& world = tab.world();
    double maxp = 0.0;
    for (int r = 0; r < world.height(); ++r)
        for (int c = 0; c < world.width(); ++c)
            maxp = std::max(maxp, tab.marginal(t, Cell{r, c}));
    // darker = more probable, like a printed heatmap
    f << "P2\n" << world.width() << ' ' << world.height() << "\n255\n";
    for (int r = 0; r < world.height(); ++r) {
        for (int c = 0; c < world.width(); ++c) {
            int v = 255;
            if (maxp > 0.0) {
                const double p = tab.marginal(t, Cell{r, c});
                v = 255 - static_cast<int>(std::lround(255.0 * p / maxp));
            }
            f << v << (c + 1 == world.width() ? '\n' : ' ');
        }
    }
}

void emit_tabfield(const TabField& tab, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[64];
    for (int t = 0; t <= tab.horizon(); ++t) {
        std::snprintf(name, sizeof(name), "marginal_t%03d.csv", t);
        write_marginal_csv(tab, t, dir / name);
        std::snprintf(name, sizeof(name), "heatmap_t%03d.pgm", t);
        write_marginal_pgm(tab, t, dir / name);
    }
}

} // namespace tab
