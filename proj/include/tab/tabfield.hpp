#pragma once

#include "tab/grid.hpp"
#include "tab/mission.hpp"
#include "tab/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace tab {

/// The unconstrained feasible random walk: from each free cell, uniform over
/// feasible_moves. Encodes geometry only; zero mass on obstacles.
class ReferenceProcess {
public:
    explicit ReferenceProcess(const GridWorld& world);

    const std::vector<Cell>& moves(Cell c) const { return moves_[index(c)]; }
    /// Per-successor probability of a row (rows are uniform).
    double prob(Cell c) const { return prob_[index(c)]; }
    int degree(Cell c) const { return static_cast<int>(moves_[index(c)].size()); }

private:
    int index(Cell c) const { return c.row * width_ + c.col; }
    int width_;
    std::vector<std::vector<Cell>> moves_;
    std::vector<double> prob_;
};

inline ReferenceProcess build_reference(const GridWorld& world) {
    return ReferenceProcess(world);
}

/// One outcome of a conditioned transition kernel row.
struct KernelEntry {
    Cell cell;
    ConstraintAutomaton::State q;
    double prob;
};

struct TabFieldOptions {
    /// Upper bound on the dense (horizon+1) x cells x states message arrays,
    /// in doubles, counting alpha and beta together.
    std::size_t max_message_doubles = 1ull << 28; // ~2 GiB
    /// Kernel rows are cached densely when the table fits this many doubles;
    /// otherwise rows are recomputed on demand.
    std::size_t max_kernel_cache_doubles = 1ull << 25; // ~256 MiB
};

/// Marginals P*_t and backward messages of the mission-conditioned chain:
/// the KL projection of the reference process onto the set of trajectories
/// satisfying the mission, computed exactly in the hard-constraint limit.
class TabField {
public:
    TabField(GridWorld world, ReferenceProcess ref, ConstraintAutomaton aut,
             std::vector<std::pair<Cell, double>> mu0, int horizon,
             const TabFieldOptions& opts = {});

    int horizon() const { return horizon_; }
    const GridWorld& world() const { return world_; }
    const ReferenceProcess& reference() const { return ref_; }
    const ConstraintAutomaton& automaton() const { return aut_; }
    const std::vector<std::pair<Cell, double>>& mu0() const { return mu0_; }
    double log_z() const { return log_z_; }

    /// P*_t(c); sums to 1 over cells for each t.
    double marginal(int t, Cell c) const {
        return marginals_[static_cast<std::size_t>(t) * ncells_ + world_.cell_id(c)];
    }
    /// Rescaled backward message; zero iff (c, q) cannot reach acceptance.
    double beta(int t, Cell c, ConstraintAutomaton::State q) const {
        return beta_[midx(t, world_.cell_id(c), q)];
    }
    /// Rescaled forward message (the chain's reachability weights).
    double alpha(int t, Cell c, ConstraintAutomaton::State q) const {
        return alpha_[midx(t, world_.cell_id(c), q)];
    }

    /// Conditioned transition row out of (c, q) at time t (t < horizon).
    /// Probabilities sum to 1. Throws ZeroSupport when beta(t, c, q) == 0.
    std::vector<KernelEntry> kernel_row(int t, Cell c,
                                        ConstraintAutomaton::State q) const;

    /// Fast path used by samplers and the planner: draws the next (cell, q)
    /// from the conditioned kernel. Equivalent in law to kernel_row.
    std::pair<Cell, ConstraintAutomaton::State>
    sample_next(int t, Cell c, ConstraintAutomaton::State q, Rng& rng) const;

    /// Draws the conditioned initial (cell, q) pair.
    std::pair<Cell, ConstraintAutomaton::State> sample_initial(Rng& rng) const;

    ConstraintAutomaton::State initial_state_at(Cell c) const {
        return aut_.step(aut_.initial(), c, 0);
    }

private:
    std::size_t midx(int t, int cell, int q) const {
        return (static_cast<std::size_t>(t) * ncells_ + cell) * nlive_ + q;
    }
    void build_messages(const TabFieldOptions& opts);
    void build_kernel_cache(const TabFieldOptions& opts);

    GridWorld world_;
    ReferenceProcess ref_;
    ConstraintAutomaton aut_;
    std::vector<std::pair<Cell, double>> mu0_;
    int horizon_;
    int ncells_;
    int nlive_;
    std::vector<double> alpha_, beta_;  // (T+1) x cells x live states, rescaled
    std::vector<double> marginals_;     // (T+1) x cells
    double log_z_ = 0.0;
    // dense kernel cache: unnormalized row weights + successor states per move slot
    bool cached_ = false;
    std::vector<double> kweights_;
    std::vector<std::int32_t> knext_;
    std::size_t kidx(int t, int cell, int q) const {
        return ((static_cast<std::size_t>(t) * ncells_ + cell) * nlive_ + q) * kNumActions;
    }
};

/// Solves the constrained problem for a known start cell.
TabField compute_tabfield(const GridWorld& world, const ReferenceProcess& ref,
                          const MissionSpec& spec, Cell adv_start, int horizon,
                          const TabFieldOptions& opts = {});

/// General form: initial distribution mu0 and a precompiled automaton.
TabField compute_tabfield(const GridWorld& world, const ReferenceProcess& ref,
                          const ConstraintAutomaton& aut,
                          std::vector<std::pair<Cell, double>> mu0, int horizon,
                          const TabFieldOptions& opts = {});

/// Spec-facing helper mirroring TabField::kernel_row.
std::vector<KernelEntry> conditioned_kernel(const TabField& tab, int t, Cell c,
                                            ConstraintAutomaton::State q);

/// Backward messages alone (rescaled per timestep, with the log scale
/// factors needed to recover absolute values).
struct BackwardMessages {
    int ncells = 0;
    int nlive = 0;
    std::vector<double> beta;       // (T+1) x cells x live states
    std::vector<double> log_scale;  // per timestep
    double at(int t, int cell, int q) const {
        return beta[(static_cast<std::size_t>(t) * ncells + cell) * nlive + q];
    }
};
BackwardMessages backward_pass(const GridWorld& world, const ReferenceProcess& ref,
                               const ConstraintAutomaton& aut, int horizon);

/// Samples a full trajectory (horizon+1 cells) from the conditioned chain.
/// Every returned trajectory satisfies evaluate_trajectory by construction.
std::vector<Cell> sample_trajectory(const TabField& tab, Rng& rng);

/// Exhaustive-enumeration oracle for the same marginals. Enumerates every
/// reference-positive trajectory, zeroes the non-satisfying ones, and
/// renormalizes. Throws EnumerationTooLarge past `max_paths`.
struct BruteForceResult {
    int horizon = 0;
    int ncells = 0;
    std::vector<double> marginals; // (T+1) x cells
    double z = 0.0;                // total satisfying probability mass
    bool feasible() const { return z > 0.0; }
    double marginal(int t, int cell) const {
        return marginals[static_cast<std::size_t>(t) * ncells + cell];
    }
};
BruteForceResult brute_force_marginals(const GridWorld& world,
                                       const ReferenceProcess& ref,
                                       const ConstraintAutomaton& aut,
                                       const std::vector<std::pair<Cell, double>>& mu0,
                                       int horizon,
                                       std::uint64_t max_paths = 10'000'000);

} // namespace tab
