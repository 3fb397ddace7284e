#include <cmath>
#include <limits>

#include <doctest.h>

#include "bubblemesh/bubbles.hpp"
#include "bubblemesh/errors.hpp"

using namespace bubblemesh;

TEST_SUITE("bubbles") {

TEST_CASE("force polynomial") {
    CHECK(std::abs(interbubble_force_magnitude(1.0, 1.0)) <= 1e-15);
    CHECK(std::abs(interbubble_force_magnitude(1.5, 1.0)) <= 1e-15);
    CHECK(interbubble_force_magnitude(0.0, 1.0) == doctest::Approx(1.125).epsilon(1e-15));
    CHECK(interbubble_force_magnitude(2.0, 1.0) == 0.0);
    CHECK(interbubble_force_magnitude(0.5, 2.0) == doctest::Approx(2.0 * (1.25 * 0.125 - 2.375 * 0.25 + 1.125)));
    CHECK(interbubble_force_magnitude(0.9, 1.0) > 0.0);  // repulsive inside tangency
    CHECK(interbubble_force_magnitude(1.2, 1.0) < 0.0);  // attractive beyond it
    CHECK_THROWS_AS(interbubble_force_magnitude(-0.1, 1.0), ArgumentError);
}

TEST_CASE("fusion degree") {
    CHECK(fusion_degree(0.1, 0.1) == 0.0);
    CHECK(fusion_degree(0.1, 0.072) == doctest::Approx(0.28));
    CHECK(fusion_degree(0.1, 0.13) == doctest::Approx(-0.3));
    CHECK_THROWS_AS(fusion_degree(0.0, 0.1), ArgumentError);
    CHECK_THROWS_AS(fusion_degree(-1.0, 0.1), ArgumentError);
}

TEST_CASE("initialization counts") {
    const auto tri = preset_domain(DomainPreset::equilateral_triangle);
    const BubbleSystem s = initialize(tri, SizeField::constant(0.5), 1);
    CHECK(s.count(Mobility::fixed_corner) == 3);
    CHECK(s.count(Mobility::boundary_slide) == 3);

    const auto circle = preset_domain(DomainPreset::unit_circle);
    const BubbleSystem c = initialize(circle, SizeField::constant(0.1), 1);
    CHECK(c.count(Mobility::fixed_corner) == 0);
    CHECK(c.count(Mobility::boundary_slide) == 63);
    CHECK(c.count(Mobility::interior) > 250);

    // Seeds: interior candidates keep a clearance of 0.3 h from the boundary.
    for (const auto& b : c.bubbles) {
        if (b.mobility == Mobility::interior) CHECK(circle.signed_distance(b.pos) < -0.3 * 0.1 + 1e-15);
        if (b.mobility == Mobility::boundary_slide) CHECK(std::abs(circle.signed_distance(b.pos)) < 1e-12);
    }
}

TEST_CASE("initialization is deterministic per seed") {
    const auto g = preset_domain(DomainPreset::regular_pentagon);
    const auto size = SizeField::constant(0.1);
    const BubbleSystem a = initialize(g, size, 42);
    const BubbleSystem b = initialize(g, size, 42);
    const BubbleSystem c = initialize(g, size, 43);
    REQUIRE(a.bubbles.size() == b.bubbles.size());
    for (std::size_t i = 0; i < a.bubbles.size(); ++i) CHECK(a.bubbles[i].pos == b.bubbles[i].pos);
    bool differs = a.bubbles.size() != c.bubbles.size();
    for (std::size_t i = 0; !differs && i < a.bubbles.size(); ++i) differs = !(a.bubbles[i].pos == c.bubbles[i].pos);
    CHECK(differs);
}

TEST_CASE("graded initialization follows the size field") {
    const auto g = preset_domain(DomainPreset::square3);
    const auto size = SizeField::radial_ring();
    const BubbleSystem s = initialize(g, size, 1);
    // Expected count from the hexagonal density 2 / (sqrt(3) s^2) integrated over the square.
    double expected = 0.0;
    const int n = 300;
    const double cell = 6.0 / n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double s_local = size.evaluate({-3.0 + (i + 0.5) * cell, -3.0 + (j + 0.5) * cell});
            expected += cell * cell * 2.0 / (std::sqrt(3.0) * s_local * s_local);
        }
    const double got = static_cast<double>(s.bubbles.size());
    CHECK(got > 0.8 * expected);
    CHECK(got < 1.2 * expected);
}

TEST_CASE("three collinear bubbles: middle one settles at the midpoint") {
    const auto g = DomainGeometry::polygon("box", {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}});
    const auto size = SizeField::constant(0.1);
    BubbleSystem sys(g, size);
    sys.bubbles.push_back({{-0.1, 0.0}, {}, Mobility::fixed_corner, std::nullopt, {}});
    sys.bubbles.push_back({{0.1, 0.0}, {}, Mobility::fixed_corner, std::nullopt, {}});
    sys.bubbles.push_back({{-0.03, 0.0}, {}, Mobility::interior, std::nullopt, {}});
    const InnerLoopReport r = inner_loop(sys, 5000, 1e-10);
    CHECK(r.max_residual_force < 1e-10);
    CHECK(sys.bubbles[2].pos.x == doctest::Approx(0.0).epsilon(1e-8).scale(1.0));
    CHECK(std::abs(sys.bubbles[2].pos.y) < 1e-15);
    CHECK(sys.bubbles[0].pos == Vec2{-0.1, 0.0});
    CHECK(sys.bubbles[1].pos == Vec2{0.1, 0.0});

    // Already at equilibrium: nothing to do.
    const auto before = sys.bubbles;
    const InnerLoopReport again = inner_loop(sys, 100, 1e-6);
    CHECK(again.steps_taken == 0);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(sys.bubbles[i].pos == before[i].pos);
}

TEST_CASE("pair forces are antisymmetric") {
    const auto g = preset_domain(DomainPreset::unit_circle);
    const auto size = SizeField::constant(0.1);
    BubbleSystem sys(g, size);
    const Vec2 a{0.013, -0.021};
    const Vec2 b{0.071, 0.033};
    sys.bubbles.push_back({a, {}, Mobility::interior, std::nullopt, {}});
    sys.bubbles.push_back({b, {}, Mobility::interior, std::nullopt, {}});
    inner_loop(sys, 1, 1e-12);
    const Vec2 da = sys.bubbles[0].pos - a;
    const Vec2 db = sys.bubbles[1].pos - b;
    CHECK(norm(da) > 0.0);
    CHECK(std::abs(da.x + db.x) < 1e-17);
    CHECK(std::abs(da.y + db.y) < 1e-17);
    // Repulsive at w < 1: the pair moves apart.
    CHECK(distance(sys.bubbles[0].pos, sys.bubbles[1].pos) > distance(a, b));
}

TEST_CASE("stepping invariants on the circle and the L-shape") {
    for (auto preset : {DomainPreset::unit_circle, DomainPreset::l_shape}) {
        const auto g = preset_domain(preset);
        const auto size = SizeField::constant(0.1);
        BubbleSystem sys = initialize(g, size, 3);
        const auto corners = sys.bubbles;
        const double tol = 1e-9 * g.diameter();
        const BpmParams& p = sys.params();
        bool inside = true;
        bool on_boundary = true;
        bool corners_fixed = true;
        double vmax = 0.0;
        auto check = [&](int, const BubbleSystem& s) {
            for (std::size_t i = 0; i < s.bubbles.size(); ++i) {
                const Bubble& b = s.bubbles[i];
                vmax = std::max(vmax, norm(b.vel));
                switch (b.mobility) {
                case Mobility::interior: inside = inside && g.signed_distance(b.pos) < 1e-9; break;
                case Mobility::boundary_slide: on_boundary = on_boundary && std::abs(g.signed_distance(b.pos)) <= tol; break;
                case Mobility::fixed_corner: corners_fixed = corners_fixed && b.pos == corners[i].pos; break;
                }
            }
        };
        inner_loop(sys, 300, 1e-3, check, 1);
        CHECK_MESSAGE(inside, to_string(preset));
        CHECK_MESSAGE(on_boundary, to_string(preset));
        CHECK_MESSAGE(corners_fixed, to_string(preset));
        CHECK(vmax <= 10.0 * p.k0 / p.c_damp);
    }
}

TEST_CASE("divergence is reported") {
    const auto g = preset_domain(DomainPreset::unit_circle);
    const auto size = SizeField::constant(0.1);
    BpmParams p;
    p.dt = std::numeric_limits<double>::infinity();
    BubbleSystem sys = initialize(g, size, 1, p);
    try {
        inner_loop(sys, 10, 1e-3);
        FAIL("expected SimulationDivergence");
    } catch (const SimulationDivergence& e) {
        CHECK(std::string(e.what()).find("dt") != std::string::npos);
    }
}

TEST_CASE("circle equilibrium has near-constant fusion degree") {
    const auto g = preset_domain(DomainPreset::unit_circle);
    const auto size = SizeField::constant(0.1);
    BubbleSystem sys = initialize(g, size, 1);
    // The default 400-step cap may stop short of the tolerance; give room to converge.
    const InnerLoopReport r = inner_loop(sys, 20 * sys.params().max_inner_steps, sys.params().tol_force);
    CHECK(r.max_residual_force < sys.params().tol_force);
    const PairStats st = force_pair_fusion(sys);
    CHECK(st.stddev < 0.05);
    CHECK(r.max_abs_fusion_degree == doctest::Approx(st.max_abs));
}

TEST_CASE("ideal subdivision reaches a near-zero objective") {
    const auto g = preset_domain(DomainPreset::equilateral_triangle);
    const BpmResult r = run_bpm(g, SizeField::constant(0.2), 1);
    double best = 1e300;
    for (const auto& o : r.rounds) best = std::min(best, o.epsilon);
    CHECK(best < 1e-3);
    CHECK(mesh_edge_fusion(r.system, r.mesh).max_abs == doctest::Approx(best));
}

TEST_CASE("outer loop returns the best round and stops on stagnation") {
    const auto g = preset_domain(DomainPreset::unit_circle);
    const auto size = SizeField::constant(0.1);
    BubbleSystem sys = initialize(g, size, 1);
    inner_loop(sys, sys.params().max_inner_steps, sys.params().tol_force);
    const OuterLoopResult o = outer_loop(sys, 20);
    REQUIRE(!o.rounds.empty());
    REQUIRE(o.epsilon_history.size() == o.rounds.size());
    double best = o.rounds.front().epsilon;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < o.rounds.size(); ++i)
        if (o.rounds[i].epsilon < best) best = o.rounds[i].epsilon, arg = i;
    CHECK(o.best_round == arg);
    CHECK(mesh_edge_fusion(o.system, triangulate_bubbles(o.system)).max_abs == doctest::Approx(best));
    CHECK(best < o.rounds.front().epsilon);
    // Stagnation rule: the last max_stalled rounds did not beat the best.
    const int stalled = sys.params().max_stalled;
    if (static_cast<int>(o.rounds.size()) - 1 < 20) CHECK(o.rounds.size() - 1 - arg == static_cast<std::size_t>(stalled));
}

TEST_CASE("outer loop leaves a converged system unchanged") {
    const auto g = preset_domain(DomainPreset::equilateral_triangle);
    const auto size = SizeField::constant(0.25);
    BubbleSystem sys = initialize(g, size, 1);
    inner_loop(sys, 5000, 1e-12);
    REQUIRE(mesh_edge_fusion(sys, triangulate_bubbles(sys)).max_abs < 1e-6);
    const OuterLoopResult o = outer_loop(sys, 20);
    CHECK(o.best_round == 0);
    REQUIRE(o.system.bubbles.size() == sys.bubbles.size());
    for (std::size_t i = 0; i < sys.bubbles.size(); ++i) CHECK(o.system.bubbles[i].pos == sys.bubbles[i].pos);
}

TEST_CASE("end-to-end BPM is deterministic") {
    const auto g = preset_domain(DomainPreset::regular_pentagon);
    const auto size = SizeField::constant(0.15);
    const BpmResult a = run_bpm(g, size, 7);
    const BpmResult b = run_bpm(g, size, 7);
    REQUIRE(a.system.bubbles.size() == b.system.bubbles.size());
    for (std::size_t i = 0; i < a.system.bubbles.size(); ++i) CHECK(a.system.bubbles[i].pos == b.system.bubbles[i].pos);
    CHECK(a.epsilon_history == b.epsilon_history);
}

} // TEST_SUITE
