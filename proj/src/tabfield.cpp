#include "tab/tabfield.hpp"

#include "tab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tab {

ReferenceProcess::ReferenceProcess(const GridWorld& world) : width_(world.width()) {
    const int n = world.num_cells();
    moves_.resize(static_cast<std::size_t>(n));
    prob_.assign(static_cast<std::size_t>(n), 0.0);
    for (int id = 0; id < n; ++id) {
        Cell c = world.cell_at(id);
        if (!world.is_free(c)) continue;
        moves_[id] = world.feasible_moves(c);
        prob_[id] = 1.0 / static_cast<double>(moves_[id].size());
    }
}

namespace {

/// Per-timestep transition tables: delta[t][q * ncells + cell] with the
/// convention that the cell is absorbed at time t.
struct DeltaTables {
    int ncells = 0;
    int nlive = 0;
    std::vector<std::int32_t> data; // (T+1) x nlive x ncells

    DeltaTables(const GridWorld& world, const ConstraintAutomaton& aut, int horizon) {
        ncells = world.num_cells();
        nlive = aut.num_live_states();
        data.assign(static_cast<std::size_t>(horizon + 1) * nlive * ncells, 0);
        for (int t = 0; t <= horizon; ++t)
            for (int q = 0; q < nlive; ++q)
                for (int ci = 0; ci < ncells; ++ci)
                    at(t, q, ci) =
                        static_cast<std::int32_t>(aut.step(q, world.cell_at(ci), t));
    }
    std::int32_t& at(int t, int q, int ci) {
        return data[(static_cast<std::size_t>(t) * nlive + q) * ncells + ci];
    }
    std::int32_t get(int t, int q, int ci) const {
        return data[(static_cast<std::size_t>(t) * nlive + q) * ncells + ci];
    }
};

std::vector<std::pair<Cell, double>>
normalize_mu0(const GridWorld& world, std::vector<std::pair<Cell, double>> mu0) {
    if (mu0.empty()) throw std::invalid_argument("mu0 is empty");
    double total = 0.0;
    for (auto& [c, w] : mu0) {
        if (!world.is_free(c))
            throw std::invalid_argument("mu0 cell is not free");
        if (w < 0.0) throw std::invalid_argument("mu0 weight is negative");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("mu0 has zero total mass");
    for (auto& [c, w] : mu0) w /= total;
    return mu0;
}

} // namespace

TabField::TabField(GridWorld world, ReferenceProcess ref, ConstraintAutomaton aut,
                   std::vector<std::pair<Cell, double>> mu0, int horizon,
                   const TabFieldOptions& opts)
    : world_(std::move(world)), ref_(std::move(ref)), aut_(std::move(aut)),
      mu0_(normalize_mu0(world_, std::move(mu0))), horizon_(horizon),
      ncells_(world_.num_cells()), nlive_(aut_.num_live_states()) {
    if (horizon_ < 0) throw std::invalid_argument("horizon must be non-negative");
    if (aut_.horizon() != horizon_)
        throw std::invalid_argument("automaton compiled for a different horizon");
    build_messages(opts);
    build_kernel_cache(opts);
}

void TabField::build_messages(const TabFieldOptions& opts) {
    const std::size_t slab = static_cast<std::size_t>(horizon_ + 1) *
                             static_cast<std::size_t>(ncells_) *
                             static_cast<std::size_t>(nlive_);
    if (slab * 2 > opts.max_message_doubles)
        throw CompileError("message arrays exceed the configured memory cap");

    DeltaTables delta(world_, aut_, horizon_);
    alpha_.assign(slab, 0.0);
    beta_.assign(slab, 0.0);
    marginals_.assign(static_cast<std::size_t>(horizon_ + 1) * ncells_, 0.0);
    std::vector<double> ls_beta(static_cast<std::size_t>(horizon_ + 1), 0.0);
    std::vector<double> ls_alpha(static_cast<std::size_t>(horizon_ + 1), 0.0);

    // Backward messages, rescaled per timestep to dodge underflow.
    for (int ci = 0; ci < ncells_; ++ci) {
        if (!world_.is_free(world_.cell_at(ci))) continue;
        for (int q = 0; q < nlive_; ++q)
            beta_[midx(horizon_, ci, q)] = aut_.accepting(q, horizon_) ? 1.0 : 0.0;
    }
    for (int t = horizon_; t >= 0; --t) {
        if (t < horizon_) {
            for (int ci = 0; ci < ncells_; ++ci) {
                Cell c = world_.cell_at(ci);
                if (!world_.is_free(c)) continue;
                const auto& mv = ref_.moves(c);
                const double p = ref_.prob(c);
                for (int q = 0; q < nlive_; ++q) {
                    double acc = 0.0;
                    for (Cell n : mv) {
                        const int ni = world_.cell_id(n);
                        const std::int32_t q2 = delta.get(t + 1, q, ni);
                        if (q2 < nlive_) acc += beta_[midx(t + 1, ni, q2)];
                    }
                    beta_[midx(t, ci, q)] = p * acc;
                }
            }
        }
        double m = 0.0;
        for (int ci = 0; ci < ncells_; ++ci)
            for (int q = 0; q < nlive_; ++q) m = std::max(m, beta_[midx(t, ci, q)]);
        if (m > 0.0) {
            const double inv = 1.0 / m;
            for (int ci = 0; ci < ncells_; ++ci)
                for (int q = 0; q < nlive_; ++q) beta_[midx(t, ci, q)] *= inv;
            ls_beta[t] = std::log(m) + (t < horizon_ ? ls_beta[t + 1] : 0.0);
        } else {
            ls_beta[t] = t < horizon_ ? ls_beta[t + 1] : 0.0;
        }
    }

    // Forward messages over the reference chain, dead-state mass dropped.
    {
        const int q0 = aut_.initial();
        for (const auto& [c, w] : mu0_) {
            const int ci = world_.cell_id(c);
            const std::int32_t q = delta.get(0, q0, ci);
            if (q < nlive_) alpha_[midx(0, ci, q)] += w;
        }
    }
    for (int t = 0; t <= horizon_; ++t) {
        if (t > 0) {
            for (int ci = 0; ci < ncells_; ++ci) {
                Cell c = world_.cell_at(ci);
                if (!world_.is_free(c)) continue;
                const double p = ref_.prob(c);
                for (int q = 0; q < nlive_; ++q) {
                    const double a = alpha_[midx(t - 1, ci, q)];
                    if (a == 0.0) continue;
                    const double w = a * p;
                    for (Cell n : ref_.moves(c)) {
                        const int ni = world_.cell_id(n);
                        const std::int32_t q2 = delta.get(t, q, ni);
                        if (q2 < nlive_) alpha_[midx(t, ni, q2)] += w;
                    }
                }
            }
        }
        double s = 0.0;
        for (int ci = 0; ci < ncells_; ++ci)
            for (int q = 0; q < nlive_; ++q) s += alpha_[midx(t, ci, q)];
        if (s <= 0.0)
            throw InfeasibleMission("no trajectory satisfies the mission (prefix mass "
                                    "vanished at t=" +
                                    std::to_string(t) + ")");
        const double inv = 1.0 / s;
        for (int ci = 0; ci < ncells_; ++ci)
            for (int q = 0; q < nlive_; ++q) alpha_[midx(t, ci, q)] *= inv;
        ls_alpha[t] = (t > 0 ? ls_alpha[t - 1] : 0.0) + std::log(s);
    }

    // Z and the per-timestep marginals of the conditioned chain.
    double s0 = 0.0;
    for (int ci = 0; ci < ncells_; ++ci)
        for (int q = 0; q < nlive_; ++q)
            s0 += alpha_[midx(0, ci, q)] * beta_[midx(0, ci, q)];
    if (s0 <= 0.0)
        throw InfeasibleMission("no trajectory satisfies the mission (Z = 0)");
    log_z_ = std::log(s0) + ls_alpha[0] + ls_beta[0];

    for (int t = 0; t <= horizon_; ++t) {
        double norm = 0.0;
        for (int ci = 0; ci < ncells_; ++ci) {
            double m = 0.0;
            for (int q = 0; q < nlive_; ++q)
                m += alpha_[midx(t, ci, q)] * beta_[midx(t, ci, q)];
            marginals_[static_cast<std::size_t>(t) * ncells_ + ci] = m;
            norm += m;
        }
        if (norm <= 0.0)
            throw InfeasibleMission("conditioned marginal vanished at t=" +
                                    std::to_string(t));
        const double inv = 1.0 / norm;
        for (int ci = 0; ci < ncells_; ++ci)
            marginals_[static_cast<std::size_t>(t) * ncells_ + ci] *= inv;
    }
}

void TabField::build_kernel_cache(const TabFieldOptions& opts) {
    if (horizon_ == 0) return;
    const std::size_t slots = static_cast<std::size_t>(horizon_) * ncells_ * nlive_ *
                              static_cast<std::size_t>(kNumActions);
    if (slots > opts.max_kernel_cache_doubles) return; // fall back to on-the-fly rows
    kweights_.assign(slots, 0.0);
    knext_.assign(slots, 0);
    for (int t = 0; t < horizon_; ++t) {
        for (int ci = 0; ci < ncells_; ++ci) {
            Cell c = world_.cell_at(ci);
            if (!world_.is_free(c)) continue;
            const auto& mv = ref_.moves(c);
            const double p = ref_.prob(c);
            for (int q = 0; q < nlive_; ++q) {
                if (beta_[midx(t, ci, q)] == 0.0) continue;
                const std::size_t base = kidx(t, ci, q);
                for (std::size_t s = 0; s < mv.size(); ++s) {
                    const int ni = world_.cell_id(mv[s]);
                    const auto q2 = aut_.step(q, mv[s], t + 1);
                    knext_[base + s] = q2;
                    if (q2 < nlive_) kweights_[base + s] = p * beta_[midx(t + 1, ni, q2)];
                }
            }
        }
    }
    cached_ = true;
}

std::vector<KernelEntry> TabField::kernel_row(int t, Cell c,
                                              ConstraintAutomaton::State q) const {
    if (t < 0 || t >= horizon_)
        throw std::invalid_argument("kernel_row: t out of range");
    const int ci = world_.cell_id(c);
    if (q < 0 || q >= nlive_ || beta_[midx(t, ci, q)] == 0.0)
        throw ZeroSupport("kernel_row: state has zero conditioned mass");
    const auto& mv = ref_.moves(c);
    const double p = ref_.prob(c);
    std::vector<KernelEntry> row;
    row.reserve(mv.size());
    double total = 0.0;
    for (Cell n : mv) {
        const auto q2 = aut_.step(q, n, t + 1);
        double w = 0.0;
        if (q2 < nlive_) w = p * beta_[midx(t + 1, world_.cell_id(n), q2)];
        if (w > 0.0) {
            row.push_back(KernelEntry{n, q2, w});
            total += w;
        }
    }
    if (total <= 0.0) throw ZeroSupport("kernel_row: empty conditioned row");
    for (auto& e : row) e.prob /= total;
    return row;
}

std::pair<Cell, ConstraintAutomaton::State>
TabField::sample_next(int t, Cell c, ConstraintAutomaton::State q, Rng& rng) const {
    if (t < 0 || t >= horizon_)
        throw std::invalid_argument("sample_next: t out of range");
    const int ci = world_.cell_id(c);
    const auto& mv = ref_.moves(c);
    if (cached_) {
        const std::size_t base = kidx(t, ci, q);
        const int s = sample_weighted(
            rng, std::span<const double>(kweights_.data() + base, mv.size()));
        if (s < 0 || kweights_[base + s] <= 0.0)
            throw ZeroSupport("sample_next: state has zero conditioned mass");
        return {mv[s], knext_[base + s]};
    }
    std::array<double, kNumActions> w{};
    std::array<std::int32_t, kNumActions> nq{};
    const double p = ref_.prob(c);
    for (std::size_t s = 0; s < mv.size(); ++s) {
        const auto q2 = aut_.step(q, mv[s], t + 1);
        nq[s] = q2;
        w[s] = q2 < nlive_ ? p * beta_[midx(t + 1, world_.cell_id(mv[s]), q2)] : 0.0;
    }
    const int s = sample_weighted(rng, std::span<const double>(w.data(), mv.size()));
    if (s < 0 || w[s] <= 0.0)
        throw ZeroSupport("sample_next: state has zero conditioned mass");
    return {mv[s], nq[s]};
}

std::pair<Cell, ConstraintAutomaton::State> TabField::sample_initial(Rng& rng) const {
    std::vector<double> w(mu0_.size(), 0.0);
    for (std::size_t i = 0; i < mu0_.size(); ++i) {
        const int ci = world_.cell_id(mu0_[i].first);
        const auto q = initial_state_at(mu0_[i].first);
        if (q < nlive_) w[i] = mu0_[i].second * beta_[midx(0, ci, q)];
    }
    const int i = sample_weighted(rng, w);
    if (i < 0 || w[i] <= 0.0)
        throw ZeroSupport("sample_initial: no feasible start");
    return {mu0_[i].first, initial_state_at(mu0_[i].first)};
}

TabField compute_tabfield(const GridWorld& world, const ReferenceProcess& ref,
                          const ConstraintAutomaton& aut,
                          std::vector<std::pair<Cell, double>> mu0, int horizon,
                          const TabFieldOptions& opts) {
    return TabField(world, ref, aut, std::move(mu0), horizon, opts);
}

TabField compute_tabfield(const GridWorld& world, const ReferenceProcess& ref,
                          const MissionSpec& spec, Cell adv_start, int horizon,
                          const TabFieldOptions& opts) {
    auto aut = compile_automaton(spec, world, horizon);
    return TabField(world, ref, std::move(aut), {{adv_start, 1.0}}, horizon, opts);
}

std::vector<KernelEntry> conditioned_kernel(const TabField& tab, int t, Cell c,
                                            ConstraintAutomaton::State q) {
    return tab.kernel_row(t, c, q);
}

BackwardMessages backward_pass(const GridWorld& world, const ReferenceProcess& ref,
                               const ConstraintAutomaton& aut, int horizon) {
    const int ncells = world.num_cells();
    const int nlive = aut.num_live_states();
    BackwardMessages out;
    out.ncells = ncells;
    out.nlive = nlive;
    out.beta.assign(static_cast<std::size_t>(horizon + 1) * ncells * nlive, 0.0);
    out.log_scale.assign(static_cast<std::size_t>(horizon + 1), 0.0);
    auto idx = [&](int t, int ci, int q) {
        return (static_cast<std::size_t>(t) * ncells + ci) * nlive + q;
    };
    for (int ci = 0; ci < ncells; ++ci) {
        if (!world.is_free(world.cell_at(ci))) continue;
        for (int q = 0; q < nlive; ++q)
            out.beta[idx(horizon, ci, q)] = aut.accepting(q, horizon) ? 1.0 : 0.0;
    }
    for (int t = horizon; t >= 0; --t) {
        if (t < horizon) {
            for (int ci = 0; ci < ncells; ++ci) {
                Cell c = world.cell_at(ci);
                if (!world.is_free(c)) continue;
                const double p = ref.prob(c);
                for (int q = 0; q < nlive; ++q) {
                    double acc = 0.0;
                    for (Cell n : ref.moves(c)) {
                        const auto q2 = aut.step(q, n, t + 1);
                        if (q2 < nlive) acc += out.beta[idx(t + 1, world.cell_id(n), q2)];
                    }
                    out.beta[idx(t, ci, q)] = p * acc;
                }
            }
        }
        double m = 0.0;
        for (int ci = 0; ci < ncells; ++ci)
            for (int q = 0; q < nlive; ++q) m = std::max(m, out.beta[idx(t, ci, q)]);
        if (m > 0.0) {
            for (int ci = 0; ci < ncells; ++ci)
                for (int q = 0; q < nlive; ++q) out.beta[idx(t, ci, q)] /= m;
            out.log_scale[t] = std::log(m) + (t < horizon ? out.log_scale[t + 1] : 0.0);
        } else {
            out.log_scale[t] = t < horizon ? out.log_scale[t + 1] : 0.0;
        }
    }
    return out;
}

std::vector<Cell> sample_trajectory(const TabField& tab, Rng& rng) {
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(tab.horizon()) + 1);
    auto [c, q] = tab.sample_initial(rng);
    cells.push_back(c);
    for (int t = 0; t < tab.horizon(); ++t) {
        std::tie(c, q) = tab.sample_next(t, c, q, rng);
        cells.push_back(c);
    }
    return cells;
}

namespace {

struct BruteForce {
    const GridWorld& world;
    const ReferenceProcess& ref;
    const ConstraintAutomaton& aut;
    int horizon;
    std::uint64_t max_paths;
    std::uint64_t paths = 0;
    std::vector<Cell> path;
    BruteForceResult out;

    void leaf(ConstraintAutomaton::State q, double w) {
        if (++paths > max_paths)
            throw EnumerationTooLarge("brute force exceeds " +
                                      std::to_string(max_paths) + " paths");
        if (!aut.accepting(q, horizon)) return;
        out.z += w;
        for (int t = 0; t <= horizon; ++t)
            out.marginals[static_cast<std::size_t>(t) * out.ncells +
                          world.cell_id(path[t])] += w;
    }

    void rec(Cell c, ConstraintAutomaton::State q, int t, double w) {
        path.push_back(c);
        if (t == horizon) {
            leaf(q, w);
        } else {
            const double p = ref.prob(c);
            for (Cell n : ref.moves(c))
                rec(n, aut.step(q, n, t + 1), t + 1, w * p);
        }
        path.pop_back();
    }
};

} // namespace

BruteForceResult brute_force_marginals(const GridWorld& world,
                                       const ReferenceProcess& ref,
                                       const ConstraintAutomaton& aut,
                                       const std::vector<std::pair<Cell, double>>& mu0,
                                       int horizon, std::uint64_t max_paths) {
    BruteForce bf{world, ref, aut, horizon, max_paths};
    bf.out.horizon = horizon;
    bf.out.ncells = world.num_cells();
    bf.out.marginals.assign(static_cast<std::size_t>(horizon + 1) * world.num_cells(),
                            0.0);
    for (const auto& [c, w] : normalize_mu0(world, mu0))
        bf.rec(c, aut.step(aut.initial(), c, 0), 0, w);
    if (bf.out.z > 0.0)
        for (double& m : bf.out.marginals) m /= bf.out.z;
    return bf.out;
}

} // namespace tab
