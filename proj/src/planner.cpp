#include "tab/planner.hpp"

#include "tab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

namespace tab {

namespace {

class TabModel final : public AdvModel {
public:
    explicit TabModel(const TabField& tab) : tab_(&tab) {}
    std::pair<Cell, ConstraintAutomaton::State>
    next_adv(int t, Cell adv, ConstraintAutomaton::State q, Rng& rng) const override {
        return tab_->sample_next(t, adv, q, rng);
    }

private:
    const TabField* tab_;
};

class UniformModel final : public AdvModel {
public:
    UniformModel(const GridWorld& world, const ConstraintAutomaton& aut)
        : world_(&world), aut_(&aut) {}
    std::pair<Cell, ConstraintAutomaton::State>
    next_adv(int t, Cell adv, ConstraintAutomaton::State q, Rng& rng) const override {
        const auto& mv = world_->feasible_moves(adv);
        Cell n = mv[uniform_int(rng, static_cast<int>(mv.size()))];
        return {n, aut_->step(q, n, t + 1)}; // q kept for bookkeeping only
    }

private:
    const GridWorld* world_;
    const ConstraintAutomaton* aut_;
};

class FixedPathModel final : public AdvModel {
public:
    FixedPathModel(const GridWorld& world, const ConstraintAutomaton& aut,
                   std::vector<Cell> path)
        : world_(&world), aut_(&aut), path_(std::move(path)) {}

    std::pair<Cell, ConstraintAutomaton::State>
    next_adv(int t, Cell adv, ConstraintAutomaton::State q, Rng&) const override {
        const int ti = std::min<int>(t + 1, static_cast<int>(path_.size()) - 1);
        Cell target = path_[ti];
        Cell next;
        if (t < static_cast<int>(path_.size()) && adv == path_[t]) {
            next = target;
        } else {
            // off the schedule (e.g. after a belief reset): close in greedily
            const auto& mv = world_->feasible_moves(adv);
            next = mv[0];
            int best = chebyshev(mv[0], target);
            for (Cell c : mv) {
                const int d = chebyshev(c, target);
                if (d < best) {
                    best = d;
                    next = c;
                }
            }
        }
        return {next, aut_->step(q, next, t + 1)};
    }

private:
    const GridWorld* world_;
    const ConstraintAutomaton* aut_;
    std::vector<Cell> path_;
};

/// BFS shortest path from `from` to any goal cell, avoiding obstacles and
/// mission-forbidden cells. Neighbors expand in row-major order, so equal
/// length paths resolve deterministically. Returns the cells walked,
/// excluding `from`; empty when already on the goal.
std::vector<Cell> bfs_leg(const GridWorld& world, const ConstraintAutomaton& aut,
                          Cell from, const std::vector<std::uint8_t>& goal) {
    if (goal[world.cell_id(from)]) return {};
    std::vector<int> parent(static_cast<std::size_t>(world.num_cells()), -2);
    std::deque<Cell> queue;
    parent[world.cell_id(from)] = -1;
    queue.push_back(from);
    while (!queue.empty()) {
        Cell c = queue.front();
        queue.pop_front();
        for (Cell n : world.feasible_moves(c)) {
            const int ni = world.cell_id(n);
            if (parent[ni] != -2 || aut.is_forbidden(n)) continue;
            parent[ni] = world.cell_id(c);
            if (goal[ni]) {
                std::vector<Cell> leg;
                for (int cur = ni; cur != world.cell_id(from); cur = parent[cur])
                    leg.push_back(world.cell_at(cur));
                std::reverse(leg.begin(), leg.end());
                return leg;
            }
            queue.push_back(n);
        }
    }
    throw ConfigError("no path to a mission goal exists");
}

std::vector<std::uint8_t> zone_mask(const GridWorld& world, char label) {
    const auto* cells = world.zone(label);
    if (!cells)
        throw ConfigError(std::string("unknown region label '") + label + "'");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(world.num_cells()), 0);
    for (Cell c : *cells) mask[world.cell_id(c)] = 1;
    return mask;
}

} // namespace

std::unique_ptr<AdvModel> make_tab_model(const TabField& tab) {
    return std::make_unique<TabModel>(tab);
}

std::unique_ptr<AdvModel> make_uniform_model(const GridWorld& world,
                                             const ConstraintAutomaton& aut) {
    return std::make_unique<UniformModel>(world, aut);
}

std::vector<Cell> shortest_mission_path(const GridWorld& world, const MissionSpec& spec,
                                        const ConstraintAutomaton& aut, Cell adv_start) {
    const int horizon = aut.horizon();
    if (aut.is_forbidden(adv_start))
        throw ConfigError("adversary start lies in a forbidden zone");
    std::vector<Cell> path{adv_start};
    auto now = [&] { return static_cast<int>(path.size()) - 1; };

    // Honor 'stay ... until' clauses by waiting out the longest window.
    int wait_until = -1;
    for (const auto& tuple : spec.tuples)
        if (tuple.type == ConstraintType::Until)
            wait_until = std::max(wait_until, tuple.time.value());
    while (now() < wait_until) path.push_back(path.back());

    struct Stage {
        std::vector<std::uint8_t> goal;
        int time;
        bool exact;
    };
    std::vector<Stage> stages;
    for (const auto& tuple : spec.tuples) {
        switch (tuple.type) {
        case ConstraintType::ExactTime:
        case ConstraintType::Deadline:
            stages.push_back({zone_mask(world, tuple.region), tuple.time.value(),
                              tuple.type == ConstraintType::ExactTime});
            break;
        case ConstraintType::Eventually:
            stages.push_back(
                {zone_mask(world, tuple.region), tuple.time.value_or(horizon), false});
            break;
        case ConstraintType::Recurrent:
            // head for the goal and hold it: every window gets a visit
            stages.push_back({zone_mask(world, tuple.region), tuple.period, false});
            break;
        default:
            break;
        }
    }

    for (const auto& stage : stages) {
        auto leg = bfs_leg(world, aut, path.back(), stage.goal);
        for (Cell c : leg) path.push_back(c);
        if (now() > stage.time)
            throw ConfigError("shortest path misses a constraint time");
        if (stage.exact)
            while (now() < stage.time) path.push_back(path.back());
    }
    while (now() < horizon) path.push_back(path.back());
    if (static_cast<int>(path.size()) != horizon + 1 ||
        !evaluate_trajectory(aut, path))
        throw ConfigError("shortest-path construction does not satisfy the mission");
    return path;
}

std::unique_ptr<AdvModel> make_fixed_path_model(const GridWorld& world,
                                                const MissionSpec& spec,
                                                const ConstraintAutomaton& aut,
                                                Cell adv_start) {
    return std::make_unique<FixedPathModel>(
        world, aut, shortest_mission_path(world, spec, aut, adv_start));
}

MleModel::MleModel(const GridWorld& world, const ConstraintAutomaton& aut,
                   double prior_pseudocount)
    : world_(&world), aut_(&aut) {
    if (prior_pseudocount <= 0.0)
        throw std::invalid_argument("prior pseudocount must be positive");
    counts_.resize(static_cast<std::size_t>(world.num_cells()));
    for (int id = 0; id < world.num_cells(); ++id) {
        Cell c = world.cell_at(id);
        if (!world.is_free(c)) continue;
        counts_[id].assign(world.feasible_moves(c).size(), prior_pseudocount);
    }
}

std::pair<Cell, ConstraintAutomaton::State>
MleModel::next_adv(int t, Cell adv, ConstraintAutomaton::State q, Rng& rng) const {
    const auto& mv = world_->feasible_moves(adv);
    const auto& w = counts_[world_->cell_id(adv)];
    Cell n = mv[sample_weighted(rng, w)];
    return {n, aut_->step(q, n, t + 1)};
}

void MleModel::record(Cell from, Cell to) {
    if (!world_->is_free(from)) {
        ++anomalies_;
        return;
    }
    const auto& mv = world_->feasible_moves(from);
    const auto it = std::find(mv.begin(), mv.end(), to);
    if (it == mv.end()) {
        ++anomalies_;
        return;
    }
    counts_[world_->cell_id(from)][static_cast<std::size_t>(it - mv.begin())] += 1.0;
}

double MleModel::count(Cell from, Cell to) const {
    const auto& mv = world_->feasible_moves(from);
    const auto it = std::find(mv.begin(), mv.end(), to);
    if (it == mv.end()) return 0.0;
    return counts_[world_->cell_id(from)][static_cast<std::size_t>(it - mv.begin())];
}

std::unique_ptr<MleModel> make_mle_model(const GridWorld& world,
                                         const ConstraintAutomaton& aut,
                                         double prior_pseudocount) {
    return std::make_unique<MleModel>(world, aut, prior_pseudocount);
}

// ---------------------------------------------------------------------------
// Belief

Belief init_belief(const TabField& tab, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("belief needs at least one particle");
    Belief b;
    b.t = 0;
    b.particles.reserve(static_cast<std::size_t>(n));
    const double w = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        auto [c, q] = tab.sample_initial(rng);
        b.particles.push_back(Particle{c, q, w});
    }
    return b;
}

Belief belief_predict(Belief b, const AdvModel& model, Rng& rng) {
    for (auto& p : b.particles) {
        auto [c, q] = model.next_adv(b.t, p.adv, p.q, rng);
        p.adv = c;
        p.q = q;
    }
    b.t += 1;
    return b;
}

namespace {

void resample_in_place(Belief& b, const std::vector<double>& weights, Rng& rng) {
    const std::size_t n = b.particles.size();
    std::vector<double> cum(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += weights[i];
        cum[i] = acc;
    }
    std::vector<Particle> next;
    next.reserve(n);
    const double step = acc / static_cast<double>(n);
    double u = uniform_double(rng) * step;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (j + 1 < n && cum[j] <= u) ++j;
        next.push_back(b.particles[j]);
        next.back().weight = 1.0 / static_cast<double>(n);
        u += step;
    }
    b.particles = std::move(next);
}

} // namespace

Belief belief_update(Belief b, const Observation& obs, const TabField& tab, Rng& rng) {
    const auto& world = tab.world();
    if (obs.adv) {
        const Cell z = *obs.adv;
        std::vector<double> w(b.particles.size(), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < b.particles.size(); ++i) {
            if (b.particles[i].adv == z) {
                w[i] = b.particles[i].weight;
                total += w[i];
            }
        }
        if (total > 0.0) {
            resample_in_place(b, w, rng);
            return b;
        }
        // Depleted: rebuild from the TAB posterior restricted to z.
        const int nlive = tab.automaton().num_live_states();
        std::vector<double> wq(static_cast<std::size_t>(nlive), 0.0);
        double qtotal = 0.0;
        for (int q = 0; q < nlive; ++q) {
            wq[q] = tab.alpha(b.t, z, q) * tab.beta(b.t, z, q);
            qtotal += wq[q];
        }
        if (qtotal <= 0.0)
            throw ZeroSupport("belief_update: observation off the mission support");
        const double uw = 1.0 / static_cast<double>(b.particles.size());
        for (auto& p : b.particles) {
            p.adv = z;
            p.q = sample_weighted(rng, wq);
            p.weight = uw;
        }
        return b;
    }
    // No observation: the adversary is provably on no checkpoint cell.
    double total = 0.0;
    for (const auto& p : b.particles)
        if (!world.on_checkpoint(p.adv)) total += p.weight;
    if (total <= 0.0) return b; // keep prior on depletion
    for (auto& p : b.particles)
        p.weight = world.on_checkpoint(p.adv) ? 0.0 : p.weight / total;
    return b;
}

// ---------------------------------------------------------------------------
// POMCP

namespace {

struct QNodeT {
    int visits = 0;
    double value = 0.0;
    std::map<int, int> children; // observation key -> vnode index
};

struct VNodeT {
    int visits = 0;
    std::array<int, kNumActions> qnode;
    VNodeT() { qnode.fill(-1); }
};

class Search {
public:
    Search(const GridWorld& world, const RewardParams& params, const AdvModel& model,
           const PomcpConfig& cfg, int horizon)
        : world_(world), params_(params), model_(model), cfg_(cfg), horizon_(horizon),
          rng_(cfg.seed) {
        vnodes_.reserve(static_cast<std::size_t>(cfg.num_sims) + 1);
        qnodes_.reserve(static_cast<std::size_t>(cfg.num_sims) * 2);
        vnodes_.emplace_back();
    }

    void run(Cell ego, const Belief& belief) {
        std::vector<double> cum(belief.particles.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < cum.size(); ++i) {
            acc += belief.particles[i].weight;
            cum[i] = acc;
        }
        for (int s = 0; s < cfg_.num_sims; ++s) {
            const double u = uniform_double(rng_) * acc;
            const std::size_t i = static_cast<std::size_t>(
                std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            const auto& p = belief.particles[std::min(i, cum.size() - 1)];
            simulate(ego, p.adv, p.q, belief.t, 0, 0);
        }
    }

    EgoAction best_action(Cell ego, PomcpStats* stats) const {
        const auto& actions = world_.feasible_actions(ego);
        EgoAction best = actions[0];
        int best_visits = -1;
        for (std::uint8_t a : actions) {
            const int qi = vnodes_[0].qnode[a];
            const int visits = qi >= 0 ? qnodes_[qi].visits : 0;
            if (stats) {
                stats->root_visits[a] = visits;
                stats->root_values[a] = qi >= 0 ? qnodes_[qi].value : 0.0;
            }
            if (visits > best_visits) {
                best_visits = visits;
                best = a;
            }
        }
        return best;
    }

private:
    double simulate(Cell ego, Cell adv, ConstraintAutomaton::State q, int t, int vid,
                    int depth) {
        if (t >= horizon_ || depth >= cfg_.max_depth) return 0.0;
        const auto& actions = world_.feasible_actions(ego);

        int chosen = -1;
        for (std::uint8_t a : actions) {
            const int qi = vnodes_[vid].qnode[a];
            if (qi < 0 || qnodes_[qi].visits == 0) {
                chosen = a;
                break;
            }
        }
        if (chosen < 0) {
            const double logn = std::log(static_cast<double>(vnodes_[vid].visits));
            double best = -1e300;
            for (std::uint8_t a : actions) {
                const auto& qn = qnodes_[vnodes_[vid].qnode[a]];
                const double ucb =
                    qn.value + cfg_.uct_c * std::sqrt(logn / qn.visits);
                if (ucb > best) {
                    best = ucb;
                    chosen = a;
                }
            }
        }
        if (vnodes_[vid].qnode[chosen] < 0) {
            vnodes_[vid].qnode[chosen] = static_cast<int>(qnodes_.size());
            qnodes_.emplace_back();
        }
        const int qid = vnodes_[vid].qnode[chosen];

        auto [advn, qn2] = model_.next_adv(t, adv, q, rng_);
        const StepResult sr =
            step(world_, params_, JointState{ego, adv, t}, chosen, advn);
        double ret = sr.reward;
        if (!sr.terminal) {
            const int key = world_.on_checkpoint(advn) ? world_.cell_id(advn) : -1;
            auto it = qnodes_[qid].children.find(key);
            if (it != qnodes_[qid].children.end()) {
                ret += params_.discount *
                       simulate(sr.next.ego, advn, qn2, t + 1, it->second, depth + 1);
            } else {
                const int child = static_cast<int>(vnodes_.size());
                vnodes_.emplace_back(); // expand one leaf per simulation
                qnodes_[qid].children.emplace(key, child);
                ret += params_.discount *
                       rollout(sr.next.ego, advn, qn2, t + 1, depth + 1);
            }
        }
        auto& qn = qnodes_[qid];
        ++qn.visits;
        ++vnodes_[vid].visits;
        qn.value += (ret - qn.value) / qn.visits;
        return ret;
    }

    double rollout(Cell ego, Cell adv, ConstraintAutomaton::State q, int t, int depth) {
        double total = 0.0;
        double disc = 1.0;
        while (t < horizon_ && depth < cfg_.max_depth) {
            const auto& actions = world_.feasible_actions(ego);
            const EgoAction a =
                actions[uniform_int(rng_, static_cast<int>(actions.size()))];
            auto [advn, qn2] = model_.next_adv(t, adv, q, rng_);
            const StepResult sr =
                step(world_, params_, JointState{ego, adv, t}, a, advn);
            total += disc * sr.reward;
            if (sr.terminal) break;
            disc *= params_.discount;
            ego = sr.next.ego;
            adv = advn;
            q = qn2;
            ++t;
            ++depth;
        }
        return total;
    }

    const GridWorld& world_;
    const RewardParams& params_;
    const AdvModel& model_;
    const PomcpConfig& cfg_;
    int horizon_;
    Rng rng_;
    std::vector<VNodeT> vnodes_;
    std::vector<QNodeT> qnodes_;
};

} // namespace

EgoAction pomcp_plan(const GridWorld& world, const RewardParams& params, Cell ego,
                     const Belief& belief, const AdvModel& model,
                     const PomcpConfig& cfg, int horizon, PomcpStats* stats) {
    if (belief.particles.empty())
        throw std::invalid_argument("pomcp_plan: empty belief");
    if (cfg.num_sims < 1 || cfg.max_depth < 1)
        throw std::invalid_argument("pomcp_plan: bad config");
    Search search(world, params, model, cfg, horizon);
    search.run(ego, belief);
    return search.best_action(ego, stats);
}

} // namespace tab
