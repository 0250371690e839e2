#pragma once

#include "tab/grid.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tab {

enum class ConstraintType { ExactTime, Deadline, Until, Eventually, Always, Recurrent };

/// One mission clause. Region labels are resolved against a GridWorld at
/// compile time, not at parse time.
struct ConstraintTuple {
    ConstraintType type = ConstraintType::Deadline;
    char region = 0;              // goal/region label; 0 for pure avoidance
    std::optional<int> time;      // t_c; nullopt means "by the horizon"
    int period = 0;               // Recurrent only
    std::vector<char> forbid;     // theta: forbidden zone labels
    std::optional<int> max_gap;   // mirrored from the mission-level gap clause
};

struct MissionSpec {
    std::vector<ConstraintTuple> tuples; // in listed order
    std::optional<int> max_gap;          // max steps between consecutive reach visits
    std::optional<int> horizon_hint;
};

/// Mission DSL:
///   mission := clause (';' clause)*
///   clause  := 'reach' REGION ('at'|'by') INT   -- exact time / deadline
///            | 'reach' REGION 'every' INT       -- recurrent
///            | 'reach' REGION                   -- eventually (by the horizon)
///            | 'avoid' REGION
///            | 'stay' REGION 'until' INT        -- remain inside REGION through INT
///            | 'gap' INT
/// REGION is a single uppercase checkpoint/zone label.
MissionSpec parse_mission(std::string_view text);
MissionSpec load_mission(const std::filesystem::path& path);

struct CompileOptions {
    int state_cap = 200000; // reject automata larger than this
};

/// Deterministic finite-state monitor whose accepting runs over cell
/// sequences of length horizon+1 are exactly the mission-satisfying
/// trajectories. Sequenced reach clauses use existential semantics: a
/// state tracks, for every progress level still achievable, the smallest
/// gap counter that can realize it, so delaying a goal visit is never
/// wrongly committed.
///
/// The restricted cells of the world are compiled in as globally forbidden
/// (the environment constraint), alongside any 'avoid' zones.
class ConstraintAutomaton {
public:
    using State = int;

    State initial() const { return initial_; }
    State dead() const { return dead_; }
    int num_states() const { return dead_ + 1; } // live states plus dead
    int num_live_states() const { return dead_; }
    int horizon() const { return horizon_; }

    /// Successor after the adversary occupies `cell` at time `t`.
    State step(State q, Cell cell, int t) const;

    /// Accepting when the trajectory ends at time t in state q. Meaningful
    /// at the compiled horizon; accepting(dead, .) is always false.
    bool accepting(State q, int t) const;

    /// True once every demand of the mission has been conclusively met by
    /// time t: all sequenced and eventually goals visited, every 'until'
    /// window elapsed, and (for recurrent missions) the horizon reached.
    /// Used to judge adversary task completion mid-episode.
    bool complete_at(State q, int t) const;

    /// Highest progress level still achievable in q (tests/diagnostics).
    int progress_of(State q) const;

    bool is_forbidden(Cell c) const { return forbidden_[cell_index(c)] != 0; }

private:
    friend ConstraintAutomaton compile_automaton(const MissionSpec&, const GridWorld&,
                                                 int, const CompileOptions&);
    struct SeqClause {
        std::vector<std::uint8_t> goal;
        int time = 0;
        bool exact = false;
    };
    struct EvClause {
        std::vector<std::uint8_t> goal;
        int time = 0;
    };
    struct RecClause {
        std::vector<std::uint8_t> goal;
        int period = 1;
    };
    struct UntilClause {
        std::vector<std::uint8_t> region;
        int time = 0;
    };

    int cell_index(Cell c) const { return c.row * width_ + c.col; }

    // mixed-radix state codec; track p holds {unreachable} + gap values
    int track_width(int p) const;
    void decode(State q, std::span<int> status, int& ev, int& rec) const;
    State encode(std::span<const int> status, int ev, int rec) const;

    int width_ = 0;
    int horizon_ = 0;
    std::vector<SeqClause> seq_;
    std::vector<EvClause> ev_;
    std::vector<RecClause> rec_;
    std::vector<UntilClause> until_;
    std::vector<std::uint8_t> forbidden_;
    int gap_ = 0; // 0 = no gap constraint
    State initial_ = 0;
    State dead_ = 0;
};

ConstraintAutomaton compile_automaton(const MissionSpec& spec, const GridWorld& world,
                                      int horizon, const CompileOptions& opts = {});

inline ConstraintAutomaton::State automaton_step(const ConstraintAutomaton& aut,
                                                 ConstraintAutomaton::State q, Cell cell,
                                                 int t) {
    return aut.step(q, cell, t);
}

/// Folds the automaton over a full trajectory (cells.size() must equal
/// horizon+1) and reports acceptance. This is the reference oracle f_M.
bool evaluate_trajectory(const ConstraintAutomaton& aut, std::span<const Cell> cells);

} // namespace tab
