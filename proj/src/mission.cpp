#include "tab/mission.hpp"

#include "tab/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace tab {

namespace {

struct Token {
    enum Kind { Word, Label, Int, Semi, End } kind = End;
    std::string text;
    int value = 0;
    std::size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("mission syntax error at position " + std::to_string(tok_.pos) +
                         ": " + what);
    }

private:
    void advance() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '#') { // comment to end of line
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
        tok_.pos = pos_;
        if (pos_ >= text_.size()) {
            tok_ = Token{Token::End, "", 0, pos_};
            return;
        }
        char c = text_[pos_];
        if (c == ';') {
            tok_ = Token{Token::Semi, ";", 0, pos_};
            ++pos_;
        } else if (std::islower(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   std::islower(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            tok_ = Token{Token::Word, std::string(text_.substr(start, pos_ - start)), 0,
                         start};
        } else if (std::isupper(static_cast<unsigned char>(c))) {
            if (pos_ + 1 < text_.size() &&
                std::isalnum(static_cast<unsigned char>(text_[pos_ + 1])))
                throw ParseError("mission syntax error at position " +
                                 std::to_string(pos_) +
                                 ": region labels are single uppercase letters");
            tok_ = Token{Token::Label, std::string(1, c), 0, pos_};
            ++pos_;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            long v = 0;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                v = v * 10 + (text_[pos_] - '0');
                if (v > 1000000)
                    throw ParseError("mission syntax error at position " +
                                     std::to_string(start) + ": integer too large");
                ++pos_;
            }
            tok_ = Token{Token::Int, std::string(text_.substr(start, pos_ - start)),
                         static_cast<int>(v), start};
        } else {
            throw ParseError("mission syntax error at position " + std::to_string(pos_) +
                             ": unexpected character '" + std::string(1, c) + "'");
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    Token tok_;
};

char expect_label(Lexer& lex, const char* after) {
    if (lex.peek().kind != Token::Label)
        lex.fail(std::string("expected region label after '") + after + "'");
    return lex.take().text[0];
}

int expect_int(Lexer& lex, const char* after) {
    if (lex.peek().kind != Token::Int)
        lex.fail(std::string("expected integer after '") + after + "'");
    return lex.take().value;
}

} // namespace

MissionSpec parse_mission(std::string_view text) {
    MissionSpec spec;
    Lexer lex(text);
    bool expect_clause = true;
    while (lex.peek().kind != Token::End) {
        if (!expect_clause) {
            if (lex.peek().kind != Token::Semi) lex.fail("expected ';' between clauses");
            lex.take();
            expect_clause = true;
            continue;
        }
        if (lex.peek().kind != Token::Word) lex.fail("expected a clause keyword");
        Token kw = lex.take();
        if (kw.text == "reach") {
            char region = expect_label(lex, "reach");
            ConstraintTuple tuple;
            tuple.region = region;
            if (lex.peek().kind == Token::Word) {
                Token mode = lex.take();
                if (mode.text == "at") {
                    tuple.type = ConstraintType::ExactTime;
                    tuple.time = expect_int(lex, "at");
                } else if (mode.text == "by") {
                    tuple.type = ConstraintType::Deadline;
                    tuple.time = expect_int(lex, "by");
                } else if (mode.text == "every") {
                    tuple.type = ConstraintType::Recurrent;
                    tuple.period = expect_int(lex, "every");
                    if (tuple.period < 1) lex.fail("recurrent period must be >= 1");
                } else {
                    lex.fail("expected 'at', 'by' or 'every' after region");
                }
            } else {
                tuple.type = ConstraintType::Eventually; // by the horizon
            }
            spec.tuples.push_back(tuple);
        } else if (kw.text == "avoid") {
            ConstraintTuple tuple;
            tuple.type = ConstraintType::Always;
            tuple.forbid.push_back(expect_label(lex, "avoid"));
            spec.tuples.push_back(tuple);
        } else if (kw.text == "stay") {
            ConstraintTuple tuple;
            tuple.type = ConstraintType::Until;
            tuple.region = expect_label(lex, "stay");
            if (lex.peek().kind != Token::Word || lex.peek().text != "until")
                lex.fail("expected 'until' in stay clause");
            lex.take();
            tuple.time = expect_int(lex, "until");
            spec.tuples.push_back(tuple);
        } else if (kw.text == "gap") {
            int g = expect_int(lex, "gap");
            if (g < 1) lex.fail("gap must be >= 1");
            if (spec.max_gap) lex.fail("gap declared twice");
            spec.max_gap = g;
        } else {
            lex.fail("unknown clause keyword '" + kw.text + "'");
        }
        expect_clause = false;
    }
    if (expect_clause && !spec.tuples.empty())
        throw ParseError("mission syntax error: trailing ';'");
    // Mirror the mission-level gap onto the reach tuples it constrains.
    if (spec.max_gap) {
        for (auto& t : spec.tuples)
            if (t.type == ConstraintType::ExactTime || t.type == ConstraintType::Deadline)
                t.max_gap = spec.max_gap;
    }
    return spec;
}

MissionSpec load_mission(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open mission file: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_mission(ss.str());
}

// ---------------------------------------------------------------------------
// Automaton

namespace {
constexpr int kMaxTracks = 32;
constexpr int kUnreachable = 0; // track status value; g = value - 1 when alive
} // namespace

int ConstraintAutomaton::track_width(int p) const {
    const int n = static_cast<int>(seq_.size());
    if (gap_ == 0 || p == 0 || p == n) return 2;
    return gap_ + 1;
}

void ConstraintAutomaton::decode(State q, std::span<int> status, int& ev,
                                 int& rec) const {
    rec = q % (1 << rec_.size());
    q /= (1 << rec_.size());
    ev = q % (1 << ev_.size());
    q /= (1 << ev_.size());
    const int n = static_cast<int>(seq_.size());
    for (int p = 0; p <= n; ++p) {
        const int w = track_width(p);
        status[p] = q % w;
        q /= w;
    }
}

ConstraintAutomaton::State ConstraintAutomaton::encode(std::span<const int> status,
                                                       int ev, int rec) const {
    const int n = static_cast<int>(seq_.size());
    State q = 0;
    for (int p = n; p >= 0; --p) q = q * track_width(p) + status[p];
    q = q * (1 << ev_.size()) + ev;
    q = q * (1 << rec_.size()) + rec;
    return q;
}

ConstraintAutomaton::State ConstraintAutomaton::step(State q, Cell cell, int t) const {
    if (q == dead_) return dead_;
    const int ci = cell_index(cell);
    if (forbidden_[ci]) return dead_;
    for (const auto& u : until_)
        if (t <= u.time && !u.region[ci]) return dead_;

    std::array<int, kMaxTracks> status{};
    int ev = 0, rec = 0;
    decode(q, std::span<int>(status.data(), seq_.size() + 1), ev, rec);

    for (std::size_t j = 0; j < ev_.size(); ++j) {
        if (ev_[j].goal[ci]) ev |= 1 << j;
        if (t == ev_[j].time && !(ev & (1 << j))) return dead_;
    }
    for (std::size_t r = 0; r < rec_.size(); ++r) {
        const bool in = rec_[r].goal[ci] != 0;
        const int bit = 1 << r;
        const int k = rec_[r].period;
        if (t == 0) {
            rec = in ? (rec | bit) : (rec & ~bit);
        } else if (t % k == 0) {
            if (!(rec & bit) && !in) return dead_; // window [t-k, t] missed
            rec = in ? (rec | bit) : (rec & ~bit);
        } else if (in) {
            rec |= bit;
        }
    }

    const int n = static_cast<int>(seq_.size());
    std::array<int, kMaxTracks> next{};
    bool any = false;
    for (int p = 0; p <= n; ++p) {
        if (status[p] == kUnreachable) continue;
        const int g = status[p] - 1;
        if (p < n) {
            const auto& cl = seq_[p];
            const bool sat = cl.goal[ci] && (cl.exact ? t == cl.time : t <= cl.time);
            if (sat && (next[p + 1] == kUnreachable || next[p + 1] > 1)) {
                next[p + 1] = 1; // progressed; fresh gap counter
                any = true;
            }
            if (t >= cl.time) continue; // clause p can no longer be satisfied later
            int g2 = 0;
            if (gap_ > 0 && p >= 1) {
                if (g + 1 >= gap_) continue; // next visit would come too late
                g2 = g + 1;
            }
            if (next[p] == kUnreachable || next[p] > g2 + 1) {
                next[p] = g2 + 1;
                any = true;
            }
        } else {
            next[p] = 1; // all sequenced goals done; stays done
            any = true;
        }
    }
    if (!any) return dead_;
    return encode(std::span<const int>(next.data(), seq_.size() + 1), ev, rec);
}

bool ConstraintAutomaton::accepting(State q, int /*t*/) const {
    if (q == dead_) return false;
    std::array<int, kMaxTracks> status{};
    int ev = 0, rec = 0;
    decode(q, std::span<int>(status.data(), seq_.size() + 1), ev, rec);
    if (status[seq_.size()] == kUnreachable) return false;
    return ev == (1 << ev_.size()) - 1;
}

bool ConstraintAutomaton::complete_at(State q, int t) const {
    if (!accepting(q, t)) return false;
    for (const auto& u : until_)
        if (u.time > t) return false;
    if (!rec_.empty() && t < horizon_) return false;
    return true;
}

int ConstraintAutomaton::progress_of(State q) const {
    if (q == dead_) return -1;
    std::array<int, kMaxTracks> status{};
    int ev = 0, rec = 0;
    decode(q, std::span<int>(status.data(), seq_.size() + 1), ev, rec);
    int best = -1;
    for (int p = 0; p <= static_cast<int>(seq_.size()); ++p)
        if (status[p] != kUnreachable) best = p;
    return best;
}

ConstraintAutomaton compile_automaton(const MissionSpec& spec, const GridWorld& world,
                                      int horizon, const CompileOptions& opts) {
    if (horizon < 0) throw CompileError("horizon must be non-negative");
    ConstraintAutomaton aut;
    aut.width_ = world.width();
    aut.horizon_ = horizon;
    aut.gap_ = spec.max_gap.value_or(0);
    aut.forbidden_.assign(static_cast<std::size_t>(world.num_cells()), 0);

    auto resolve = [&](char label) {
        const auto* cells = world.zone(label);
        if (!cells)
            throw CompileError(std::string("unknown region label '") + label + "'");
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(world.num_cells()), 0);
        for (Cell c : *cells) mask[world.cell_id(c)] = 1;
        return mask;
    };
    auto check_time = [&](int t, const char* what) {
        if (t > horizon)
            throw CompileError(std::string("horizon ") + std::to_string(horizon) +
                               " smaller than " + what + " time " + std::to_string(t));
    };

    for (const auto& tuple : spec.tuples) {
        switch (tuple.type) {
        case ConstraintType::ExactTime:
        case ConstraintType::Deadline: {
            ConstraintAutomaton::SeqClause cl;
            cl.goal = resolve(tuple.region);
            cl.time = tuple.time.value();
            cl.exact = tuple.type == ConstraintType::ExactTime;
            check_time(cl.time, cl.exact ? "exact-time" : "deadline");
            aut.seq_.push_back(std::move(cl));
            break;
        }
        case ConstraintType::Eventually: {
            ConstraintAutomaton::EvClause cl;
            cl.goal = resolve(tuple.region);
            cl.time = tuple.time.value_or(horizon);
            check_time(cl.time, "eventually");
            aut.ev_.push_back(std::move(cl));
            break;
        }
        case ConstraintType::Recurrent: {
            ConstraintAutomaton::RecClause cl;
            cl.goal = resolve(tuple.region);
            cl.period = tuple.period;
            if (cl.period < 1) throw CompileError("recurrent period must be >= 1");
            aut.rec_.push_back(std::move(cl));
            break;
        }
        case ConstraintType::Until: {
            ConstraintAutomaton::UntilClause cl;
            cl.region = resolve(tuple.region);
            cl.time = tuple.time.value();
            check_time(cl.time, "until");
            aut.until_.push_back(std::move(cl));
            break;
        }
        case ConstraintType::Always:
            break; // forbid list handled below
        }
        for (char label : tuple.forbid) {
            auto mask = resolve(label);
            for (std::size_t i = 0; i < mask.size(); ++i)
                if (mask[i]) aut.forbidden_[i] = 1;
        }
    }
    // Environment constraint: prohibited cells are forbidden at every t.
    for (Cell c : world.restricted_cells()) aut.forbidden_[world.cell_id(c)] = 1;

    const int n = static_cast<int>(aut.seq_.size());
    if (n + 1 > kMaxTracks) throw CompileError("too many sequenced reach clauses");
    if (aut.ev_.size() > 16 || aut.rec_.size() > 16)
        throw CompileError("too many eventually/recurrent clauses");

    long long live = 1;
    for (int p = 0; p <= n; ++p) {
        live *= aut.track_width(p);
        if (live > opts.state_cap) throw CompileError("automaton state cap exceeded");
    }
    live <<= aut.ev_.size();
    live <<= aut.rec_.size();
    if (live > opts.state_cap) throw CompileError("automaton state cap exceeded");

    aut.dead_ = static_cast<int>(live);
    std::array<int, kMaxTracks> status{};
    status[0] = 1;
    aut.initial_ = aut.encode(std::span<const int>(status.data(), n + 1), 0, 0);
    return aut;
}

bool evaluate_trajectory(const ConstraintAutomaton& aut, std::span<const Cell> cells) {
    if (static_cast<int>(cells.size()) != aut.horizon() + 1)
        throw std::invalid_argument("evaluate_trajectory: expected horizon+1 cells");
    auto q = aut.initial();
    for (int t = 0; t < static_cast<int>(cells.size()); ++t) {
        q = aut.step(q, cells[t], t);
        if (q == aut.dead()) return false;
    }
    return aut.accepting(q, aut.horizon());
}

} // namespace tab
