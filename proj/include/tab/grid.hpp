#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tab {

struct Cell {
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell&) const = default;
};

inline int chebyshev(Cell a, Cell b) {
    int dr = a.row > b.row ? a.row - b.row : b.row - a.row;
    int dc = a.col > b.col ? a.col - b.col : b.col - a.col;
    return dr > dc ? dr : dc;
}

/// The nine moves (8-connected step or Stay), in row-major offset order.
/// Action indices are stable; ties in the planner break toward lower index.
inline constexpr std::array<std::pair<int, int>, 9> kMoveOffsets = {{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 0}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
}};
inline constexpr int kNumActions = 9;
inline constexpr int kStayAction = 4;

using EgoAction = int; // index into kMoveOffsets

inline Cell apply_action(Cell c, EgoAction a) {
    return Cell{c.row + kMoveOffsets[a].first, c.col + kMoveOffsets[a].second};
}

struct RewardParams {
    double intercept_bonus = 50.0;
    double collision_penalty = -30.0;
    double step_penalty = -1.0;
    double move_cost = 0.1;
    int intercept_radius = 1; // Chebyshev
    double discount = 0.95;
};

/// Discrete environment: free/obstacle/restricted cells plus labeled regions.
/// Labeled cells (A-Z) act both as monitored checkpoints and as named zones
/// that missions may reference. Restricted cells (~) stay traversable at the
/// geometry level; they are excluded from adversary behavior by the mission
/// machinery, not here.
class GridWorld {
public:
    GridWorld(int width, int height, std::vector<Cell> obstacles,
              std::vector<Cell> restricted,
              std::map<char, std::vector<Cell>> zones);

    int width() const { return width_; }
    int height() const { return height_; }
    int num_cells() const { return width_ * height_; }

    bool in_bounds(Cell c) const {
        return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
    }
    int cell_id(Cell c) const { return c.row * width_ + c.col; }
    Cell cell_at(int id) const { return Cell{id / width_, id % width_}; }

    bool is_obstacle(Cell c) const { return terrain_[cell_id(c)] == '#'; }
    bool is_free(Cell c) const { return in_bounds(c) && terrain_[cell_id(c)] != '#'; }
    bool is_restricted(Cell c) const { return terrain_[cell_id(c)] == '~'; }

    /// Label at a cell, or 0 when unlabeled.
    char label_at(Cell c) const { return labels_[cell_id(c)]; }
    bool on_checkpoint(Cell c) const { return labels_[cell_id(c)] != 0; }

    /// Cells of a labeled region (sorted row-major); nullptr when unknown.
    const std::vector<Cell>* zone(char label) const;
    const std::map<char, std::vector<Cell>>& zones() const { return zones_; }
    const std::vector<Cell>& restricted_cells() const { return restricted_; }

    /// Stay plus the 8-connected free neighbors of c, row-major order.
    /// Restricted cells are included. Throws if c is an obstacle.
    const std::vector<Cell>& feasible_moves(Cell c) const;

    /// Feasible ego action indices at c, ascending. Stay is always present.
    const std::vector<std::uint8_t>& feasible_actions(Cell c) const;

    bool action_feasible(Cell c, EgoAction a) const {
        Cell n = apply_action(c, a);
        return is_free(n);
    }

private:
    int width_;
    int height_;
    std::vector<char> terrain_; // '.', '#', '~'
    std::vector<char> labels_;  // 0 or 'A'..'Z'
    std::map<char, std::vector<Cell>> zones_;
    std::vector<Cell> restricted_;
    std::vector<std::vector<Cell>> moves_;
    std::vector<std::vector<std::uint8_t>> actions_;
};

/// A parsed map file: the world plus the recorded start cells.
struct MapFile {
    GridWorld world;
    std::vector<Cell> adv_starts;  // 's' cells, row-major
    std::optional<Cell> ego_start; // 'g' cell
};

/// Parses the ASCII map format: '.' free, '#' obstacle, '~' restricted,
/// 'A'-'Z' checkpoint/zone label, 's' adversary start, 'g' ego start.
MapFile parse_map(std::string_view text);
MapFile load_map(const std::filesystem::path& path);

struct JointState {
    Cell ego;
    Cell adv;
    int t = 0;
};

struct Observation {
    Cell ego;
    std::optional<Cell> adv; // present iff the adversary sits on a checkpoint
};

struct StepResult {
    JointState next;
    double reward = 0.0;
    bool terminal = false;
};

/// Advances the joint state one step. The ego moves by `a` (an infeasible
/// action is a penalized no-op); the adversary moves to `adv_next`, which
/// must be feasible from s.adv. Interception is judged after both moves
/// resolve; agents swapping cells also count as intercepted.
StepResult step(const GridWorld& world, const RewardParams& params,
                const JointState& s, EgoAction a, Cell adv_next);

Observation observe(const GridWorld& world, const JointState& s);

} // namespace tab
