#pragma once

#include "tab/grid.hpp"
#include "tab/mission.hpp"
#include "tab/rng.hpp"
#include "tab/tabfield.hpp"

#include <array>
#include <memory>
#include <vector>

namespace tab {

struct Particle {
    Cell adv;
    ConstraintAutomaton::State q;
    double weight;
};

struct Belief {
    int t = 0;
    std::vector<Particle> particles;
};

/// Sampling surrogate for the indeterminate adversary transition.
/// Implementations must return a cell that is a feasible move from `adv`.
class AdvModel {
public:
    virtual ~AdvModel() = default;
    virtual std::pair<Cell, ConstraintAutomaton::State>
    next_adv(int t, Cell adv, ConstraintAutomaton::State q, Rng& rng) const = 0;
};

/// Wraps the conditioned kernel; propagation stays on the mission-consistent
/// support. The TabField must outlive the model.
std::unique_ptr<AdvModel> make_tab_model(const TabField& tab);

/// Uniform over feasible moves (the mission-unaware baseline). The automaton
/// state is advanced for bookkeeping only.
std::unique_ptr<AdvModel> make_uniform_model(const GridWorld& world,
                                             const ConstraintAutomaton& aut);

/// Deterministic shortest-path policy through the mission goals in order,
/// Stay-padded to meet exact times, ties broken row-major. Off-path states
/// step greedily toward the scheduled cell so returned moves stay feasible.
std::unique_ptr<AdvModel> make_fixed_path_model(const GridWorld& world,
                                                const MissionSpec& spec,
                                                const ConstraintAutomaton& aut,
                                                Cell adv_start);

/// Builds just the path the fixed-path model follows (also used by the
/// noisy-shortest-path adversary). Throws ConfigError when no path exists.
std::vector<Cell> shortest_mission_path(const GridWorld& world, const MissionSpec& spec,
                                        const ConstraintAutomaton& aut, Cell adv_start);

/// Laplace-smoothed transition counts, learned from observed consecutive
/// adversary positions. Sampling follows the posterior-mean transition law.
class MleModel : public AdvModel {
public:
    MleModel(const GridWorld& world, const ConstraintAutomaton& aut,
             double prior_pseudocount);

    std::pair<Cell, ConstraintAutomaton::State>
    next_adv(int t, Cell adv, ConstraintAutomaton::State q, Rng& rng) const override;

    /// Records an observed transition. Geometrically infeasible pairs are
    /// rejected and counted as anomalies.
    void record(Cell from, Cell to);
    int anomalies() const { return anomalies_; }
    double count(Cell from, Cell to) const;

private:
    const GridWorld* world_;
    const ConstraintAutomaton* aut_;
    std::vector<std::vector<double>> counts_; // per cell id, per move slot
    int anomalies_ = 0;
};

std::unique_ptr<MleModel> make_mle_model(const GridWorld& world,
                                         const ConstraintAutomaton& aut,
                                         double prior_pseudocount);

struct PomcpConfig {
    int num_sims = 2000;
    double uct_c = 75.0; // roughly the reward span
    int max_depth = 30;
    std::uint64_t seed = 0;
};

/// N particles drawn from the conditioned initial distribution (all at the
/// start cell when mu0 is a point mass), uniform weights.
Belief init_belief(const TabField& tab, int n, Rng& rng);

/// Advances every particle one step through the model; weights unchanged.
Belief belief_predict(Belief b, const AdvModel& model, Rng& rng);

/// Exact-observation Bayes update. With the adversary seen at z, mass moves
/// to z (resampled across surviving automaton states); on depletion the
/// belief is rebuilt from the TAB posterior restricted to z. With no
/// observation, particles sitting on checkpoint cells are zeroed; if that
/// would deplete the belief, the prior is kept.
Belief belief_update(Belief b, const Observation& obs, const TabField& tab, Rng& rng);

struct PomcpStats {
    std::array<int, kNumActions> root_visits{};
    std::array<double, kNumActions> root_values{};
};

/// One POMCP search from the current belief. Deterministic given the
/// config seed. Returns the root action with the most visits (ties to the
/// lowest action index); only actions feasible at `ego` are considered.
EgoAction pomcp_plan(const GridWorld& world, const RewardParams& params, Cell ego,
                     const Belief& belief, const AdvModel& model,
                     const PomcpConfig& cfg, int horizon, PomcpStats* stats = nullptr);

} // namespace tab
