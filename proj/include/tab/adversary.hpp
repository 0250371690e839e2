#pragma once

#include "tab/grid.hpp"
#include "tab/mission.hpp"
#include "tab/rng.hpp"
#include "tab/tabfield.hpp"

#include <filesystem>
#include <vector>

namespace tab {

enum class AdversaryKind { TabSample, NoisyShortestPath, Scripted };

/// A ground-truth adversary: commits to a full mission-satisfying trajectory
/// before the episode starts and replays it.
class AdversaryPolicy {
public:
    AdversaryPolicy(AdversaryKind kind, std::vector<Cell> trajectory)
        : kind_(kind), trajectory_(std::move(trajectory)) {}

    AdversaryKind kind() const { return kind_; }
    const std::vector<Cell>& trajectory() const { return trajectory_; }
    Cell start() const { return trajectory_.front(); }

    /// Cell occupied after the step taken at time t (i.e. trajectory[t+1]).
    Cell next(int t) const;

private:
    AdversaryKind kind_;
    std::vector<Cell> trajectory_;
};

struct AdversaryOptions {
    double epsilon = 0.3;                // NoisyShortestPath detour rate
    int repair_attempts = 10000;         // rejection-sampling cap
    std::filesystem::path scripted_path; // Scripted: CSV of (t, row, col)
};

AdversaryPolicy make_adversary(AdversaryKind kind, const GridWorld& world,
                               const MissionSpec& spec, const ConstraintAutomaton& aut,
                               const TabField& tab, std::uint64_t seed,
                               const AdversaryOptions& opts = {});

inline Cell adversary_next(const AdversaryPolicy& policy, int t) {
    return policy.next(t);
}

/// Loads and validates a scripted trajectory (cells free, moves feasible,
/// mission satisfied). Throws ConfigError on any violation.
std::vector<Cell> load_scripted_path(const std::filesystem::path& path,
                                     const GridWorld& world,
                                     const ConstraintAutomaton& aut);

} // namespace tab
