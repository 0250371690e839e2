#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tab/adversary.hpp"
#include "tab/errors.hpp"
#include "tab/planner.hpp"

#include "testutil.hpp"

#include <fstream>

using namespace tab;

namespace {

const Cell c0{0, 0}, c1{0, 1}, c2{0, 2};

struct CorridorFixture {
    // single row: the conditioned chain has exactly one satisfying path
    MapFile map = parse_map("s.C\n");
    MissionSpec spec = parse_mission("reach C at 2");
    ConstraintAutomaton aut = compile_automaton(spec, map.world, 2);
    ReferenceProcess ref = build_reference(map.world);
    TabField tab = compute_tabfield(map.world, ref, aut, {{c0, 1.0}}, 2);
};

std::filesystem::path write_csv(const std::string& name, const std::string& body) {
    const auto dir = std::filesystem::path("adversary_tmp");
    std::filesystem::create_directories(dir);
    const auto p = dir / name;
    std::ofstream f(p);
    f << body;
    return p;
}

} // namespace

TEST_CASE("tab-sample adversary on the corridor commits the unique path") {
    CorridorFixture fx;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto adv = make_adversary(AdversaryKind::TabSample, fx.map.world, fx.spec,
                                        fx.aut, fx.tab, seed);
        CHECK(adv.trajectory() == std::vector<Cell>{c0, c1, c2});
        CHECK(adv.start() == c0);
        CHECK(adversary_next(adv, 0) == c1);
        CHECK(adversary_next(adv, 1) == c2);
        CHECK_THROWS_AS(adversary_next(adv, 2), std::out_of_range);
    }
}

TEST_CASE("1000 seeded tab-sample adversaries per family all satisfy the mission") {
    Rng rng(55);
    for (int family = 1; family <= 5; ++family) {
        const auto ri = tabtest::random_instance(family, rng);
        const auto& w = ri.map.world;
        const auto ref = build_reference(w);
        const auto aut = compile_automaton(ri.spec, w, ri.horizon);
        std::vector<std::pair<Cell, double>> mu0;
        for (Cell c : ri.map.adv_starts) mu0.emplace_back(c, 1.0);
        const auto tab = compute_tabfield(w, ref, aut, mu0, ri.horizon);
        int pass = 0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const auto adv = make_adversary(AdversaryKind::TabSample, w, ri.spec, aut,
                                            tab, seed);
            if (evaluate_trajectory(aut, adv.trajectory())) ++pass;
        }
        CHECK(pass == 1000);
    }
}

TEST_CASE("noisy shortest path with zero noise reproduces the FP path") {
    const MapFile m = parse_map("s....\n..#..\n....A\ng....\n");
    const auto spec = parse_mission("reach A by 8");
    const auto aut = compile_automaton(spec, m.world, 8);
    const auto ref = build_reference(m.world);
    const auto tab = compute_tabfield(m.world, ref, aut, {{c0, 1.0}}, 8);
    const auto fp = shortest_mission_path(m.world, spec, aut, c0);

    AdversaryOptions opts;
    opts.epsilon = 0.0;
    const auto adv = make_adversary(AdversaryKind::NoisyShortestPath, m.world, spec,
                                    aut, tab, 17, opts);
    CHECK(adv.trajectory() == fp);
}

TEST_CASE("noisy shortest path detours but still satisfies the mission") {
    const MapFile m = parse_map("s....\n.....\n....A\ng....\n");
    const auto spec = parse_mission("reach A by 9");
    const auto aut = compile_automaton(spec, m.world, 9);
    const auto ref = build_reference(m.world);
    const auto tab = compute_tabfield(m.world, ref, aut, {{c0, 1.0}}, 9);
    const auto fp = shortest_mission_path(m.world, spec, aut, c0);

    AdversaryOptions opts;
    opts.epsilon = 0.4;
    int deviated = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto adv = make_adversary(AdversaryKind::NoisyShortestPath, m.world,
                                        spec, aut, tab, seed, opts);
        CHECK(evaluate_trajectory(aut, adv.trajectory()));
        if (adv.trajectory() != fp) ++deviated;
    }
    CHECK(deviated > 0);
}

TEST_CASE("scripted adversary: load, validate, reject") {
    CorridorFixture fx;
    // valid corridor path
    const auto good = write_csv("good.csv", "t,row,col\n0,0,0\n1,0,1\n2,0,2\n");
    AdversaryOptions opts;
    opts.scripted_path = good;
    const auto adv = make_adversary(AdversaryKind::Scripted, fx.map.world, fx.spec,
                                    fx.aut, fx.tab, 0, opts);
    CHECK(adv.trajectory() == std::vector<Cell>{c0, c1, c2});

    // violates the mission (never reaches C at 2)
    opts.scripted_path = write_csv("bad_mission.csv", "0,0,0\n1,0,1\n2,0,1\n");
    CHECK_THROWS_AS(make_adversary(AdversaryKind::Scripted, fx.map.world, fx.spec,
                                   fx.aut, fx.tab, 0, opts),
                    ConfigError);

    // teleports between cells
    opts.scripted_path = write_csv("bad_move.csv", "0,0,0\n1,0,2\n2,0,2\n");
    CHECK_THROWS_AS(make_adversary(AdversaryKind::Scripted, fx.map.world, fx.spec,
                                   fx.aut, fx.tab, 0, opts),
                    ConfigError);

    // wrong length
    opts.scripted_path = write_csv("bad_len.csv", "0,0,0\n1,0,1\n");
    CHECK_THROWS_AS(make_adversary(AdversaryKind::Scripted, fx.map.world, fx.spec,
                                   fx.aut, fx.tab, 0, opts),
                    ConfigError);

    // scripted path entering an avoided zone fails validation
    const MapFile mz = parse_map("s.Z\ng..\n");
    const auto specz = parse_mission("avoid Z");
    const auto autz = compile_automaton(specz, mz.world, 2);
    const auto refz = build_reference(mz.world);
    const auto tabz = compute_tabfield(mz.world, refz, autz, {{c0, 1.0}}, 2);
    opts.scripted_path = write_csv("bad_zone.csv", "0,0,0\n1,0,1\n2,0,2\n");
    CHECK_THROWS_AS(make_adversary(AdversaryKind::Scripted, mz.world, specz, autz,
                                   tabz, 0, opts),
                    ConfigError);
}

TEST_CASE("noisy shortest path: repair cap is enforced") {
    // force detours but allow no attempts: the sampler must give up
    const MapFile m = parse_map("s....A\n......\n");
    const auto spec = parse_mission("reach A at 5");
    const auto aut = compile_automaton(spec, m.world, 5);
    const auto ref = build_reference(m.world);
    const auto tab = compute_tabfield(m.world, ref, aut, {{c0, 1.0}}, 5);
    AdversaryOptions opts;
    opts.epsilon = 0.9;
    opts.repair_attempts = 0;
    CHECK_THROWS_AS(make_adversary(AdversaryKind::NoisyShortestPath, m.world, spec,
                                   aut, tab, 3, opts),
                    ConfigError);
}
