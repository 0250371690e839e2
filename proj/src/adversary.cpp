#include "tab/adversary.hpp"

#include "tab/errors.hpp"
#include "tab/planner.hpp"

#include <fstream>
#include <sstream>

namespace tab {

Cell AdversaryPolicy::next(int t) const {
    if (t < 0 || t + 1 >= static_cast<int>(trajectory_.size()))
        throw std::out_of_range("adversary_next: past the committed horizon");
    return trajectory_[static_cast<std::size_t>(t) + 1];
}

namespace {

std::vector<Cell> noisy_shortest_path(const GridWorld& world, const MissionSpec& spec,
                                      const ConstraintAutomaton& aut, Cell start,
                                      double epsilon, int attempts, Rng& rng) {
    const auto fp = shortest_mission_path(world, spec, aut, start);
    if (epsilon <= 0.0) return fp;
    const int horizon = aut.horizon();
    for (int attempt = 0; attempt < attempts; ++attempt) {
        std::vector<Cell> cand{start};
        for (int t = 0; t < horizon; ++t) {
            const auto& mv = world.feasible_moves(cand.back());
            Cell next;
            if (uniform_double(rng) < epsilon) {
                next = mv[uniform_int(rng, static_cast<int>(mv.size()))];
            } else {
                // steer toward the scheduled cell
                const Cell target = fp[static_cast<std::size_t>(t) + 1];
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
            cand.push_back(next);
        }
        if (evaluate_trajectory(aut, cand)) return cand;
    }
    throw ConfigError("noisy shortest path: repair cap exceeded");
}

} // namespace

std::vector<Cell> load_scripted_path(const std::filesystem::path& path,
                                     const GridWorld& world,
                                     const ConstraintAutomaton& aut) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scripted path: " + path.string());
    std::vector<Cell> cells;
    std::string line;
    int expect_t = 0;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
        std::istringstream ss(line);
        int t, row, col;
        char comma;
        if (!(ss >> t >> comma >> row >> comma >> col))
            throw ConfigError("scripted path: bad row '" + line + "'");
        if (t != expect_t)
            throw ConfigError("scripted path: expected t=" + std::to_string(expect_t));
        ++expect_t;
        cells.push_back(Cell{row, col});
    }
    if (static_cast<int>(cells.size()) != aut.horizon() + 1)
        throw ConfigError("scripted path: expected horizon+1 rows");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!world.is_free(cells[i]))
            throw ConfigError("scripted path: cell is not free at t=" +
                              std::to_string(i));
        if (i > 0) {
            const auto& mv = world.feasible_moves(cells[i - 1]);
            if (std::find(mv.begin(), mv.end(), cells[i]) == mv.end())
                throw ConfigError("scripted path: infeasible move at t=" +
                                  std::to_string(i));
        }
    }
    if (!evaluate_trajectory(aut, cells))
        throw ConfigError("scripted path violates the mission");
    return cells;
}

AdversaryPolicy make_adversary(AdversaryKind kind, const GridWorld& world,
                               const MissionSpec& spec, const ConstraintAutomaton& aut,
                               const TabField& tab, std::uint64_t seed,
                               const AdversaryOptions& opts) {
    Rng rng(seed);
    switch (kind) {
    case AdversaryKind::TabSample:
        return AdversaryPolicy(kind, sample_trajectory(tab, rng));
    case AdversaryKind::NoisyShortestPath: {
        Cell start = tab.mu0().front().first;
        return AdversaryPolicy(kind, noisy_shortest_path(world, spec, aut, start,
                                                         opts.epsilon,
                                                         opts.repair_attempts, rng));
    }
    case AdversaryKind::Scripted:
        return AdversaryPolicy(kind, load_scripted_path(opts.scripted_path, world, aut));
    }
    throw ConfigError("unknown adversary kind");
}

} // namespace tab
