#include "tab/grid.hpp"

#include "tab/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tab {

GridWorld::GridWorld(int width, int height, std::vector<Cell> obstacles,
                     std::vector<Cell> restricted,
                     std::map<char, std::vector<Cell>> zones)
    : width_(width), height_(height), zones_(std::move(zones)) {
    if (width_ <= 0 || height_ <= 0)
        throw ParseError("grid dimensions must be positive");
    terrain_.assign(static_cast<std::size_t>(num_cells()), '.');
    labels_.assign(static_cast<std::size_t>(num_cells()), 0);
    for (Cell c : obstacles) {
        if (!in_bounds(c)) throw ParseError("obstacle out of bounds");
        terrain_[cell_id(c)] = '#';
    }
    for (Cell c : restricted) {
        if (!in_bounds(c)) throw ParseError("restricted cell out of bounds");
        if (terrain_[cell_id(c)] == '#')
            throw ParseError("restricted cell overlaps an obstacle");
        terrain_[cell_id(c)] = '~';
    }
    for (auto& [label, cells] : zones_) {
        if (label < 'A' || label > 'Z') throw ParseError("zone labels must be A-Z");
        std::sort(cells.begin(), cells.end());
        for (Cell c : cells) {
            if (!in_bounds(c)) throw ParseError("zone cell out of bounds");
            if (terrain_[cell_id(c)] == '#')
                throw ParseError("checkpoint overlaps an obstacle");
            labels_[cell_id(c)] = label;
        }
    }
    restricted_ = std::move(restricted);
    std::sort(restricted_.begin(), restricted_.end());

    bool any_free = std::any_of(terrain_.begin(), terrain_.end(),
                                [](char t) { return t != '#'; });
    if (!any_free) throw ParseError("map has zero free cells");

    moves_.resize(static_cast<std::size_t>(num_cells()));
    actions_.resize(static_cast<std::size_t>(num_cells()));
    for (int id = 0; id < num_cells(); ++id) {
        Cell c = cell_at(id);
        if (!is_free(c)) continue;
        for (int a = 0; a < kNumActions; ++a) {
            Cell n = apply_action(c, a);
            if (is_free(n)) {
                moves_[id].push_back(n);
                actions_[id].push_back(static_cast<std::uint8_t>(a));
            }
        }
    }
}

const std::vector<Cell>* GridWorld::zone(char label) const {
    auto it = zones_.find(label);
    return it == zones_.end() ? nullptr : &it->second;
}

const std::vector<Cell>& GridWorld::feasible_moves(Cell c) const {
    if (!is_free(c)) throw std::invalid_argument("feasible_moves: cell is not free");
    return moves_[cell_id(c)];
}

const std::vector<std::uint8_t>& GridWorld::feasible_actions(Cell c) const {
    if (!is_free(c)) throw std::invalid_argument("feasible_actions: cell is not free");
    return actions_[cell_id(c)];
}

MapFile parse_map(std::string_view text) {
    std::vector<std::string> rows;
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && rows.empty()) continue; // leading blank lines
        if (line.empty()) break;                    // map block ends at a blank line
        rows.push_back(line);
    }
    if (rows.empty()) throw ParseError("empty map");

    const int height = static_cast<int>(rows.size());
    const int width = static_cast<int>(rows[0].size());
    std::vector<Cell> obstacles, restricted, adv_starts;
    std::optional<Cell> ego_start;
    std::map<char, std::vector<Cell>> zones;

    for (int r = 0; r < height; ++r) {
        if (static_cast<int>(rows[r].size()) != width)
            throw ParseError("ragged row " + std::to_string(r) + ": expected width " +
                             std::to_string(width));
        for (int c = 0; c < width; ++c) {
            const char ch = rows[r][c];
            const Cell cell{r, c};
            if (ch == '.') continue;
            if (ch == '#') { obstacles.push_back(cell); continue; }
            if (ch == '~') { restricted.push_back(cell); continue; }
            if (ch == 's') { adv_starts.push_back(cell); continue; }
            if (ch == 'g') {
                if (ego_start)
                    throw ParseError("multiple ego starts ('g') in map");
                ego_start = cell;
                continue;
            }
            if (ch >= 'A' && ch <= 'Z') { zones[ch].push_back(cell); continue; }
            throw ParseError("unknown character '" + std::string(1, ch) + "' at row " +
                             std::to_string(r) + ", col " + std::to_string(c));
        }
    }
    GridWorld world(width, height, std::move(obstacles), std::move(restricted),
                    std::move(zones));
    return MapFile{std::move(world), std::move(adv_starts), ego_start};
}

MapFile load_map(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open map file: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_map(ss.str());
}

StepResult step(const GridWorld& world, const RewardParams& params,
                const JointState& s, EgoAction a, Cell adv_next) {
    if (!world.is_free(s.adv))
        throw std::invalid_argument("step: adversary cell is not free");
    const auto& cand = world.feasible_moves(s.adv);
    if (std::find(cand.begin(), cand.end(), adv_next) == cand.end())
        throw std::invalid_argument("step: adv_next is not a feasible adversary move");

    const bool feasible = world.action_feasible(s.ego, a);
    const Cell ego_next = feasible ? apply_action(s.ego, a) : s.ego;
    const bool moved = feasible && a != kStayAction;

    double reward = params.step_penalty;
    if (moved) reward -= params.move_cost;
    if (!feasible) reward += params.collision_penalty;

    const bool swapped = ego_next == s.adv && adv_next == s.ego;
    const bool intercepted =
        chebyshev(ego_next, adv_next) <= params.intercept_radius || swapped;
    if (intercepted) reward += params.intercept_bonus;

    return StepResult{JointState{ego_next, adv_next, s.t + 1}, reward, intercepted};
}

Observation observe(const GridWorld& world, const JointState& s) {
    Observation obs{s.ego, std::nullopt};
    if (world.on_checkpoint(s.adv)) obs.adv = s.adv;
    return obs;
}

} // namespace tab
