#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <doctest.h>

#include "bubblemesh/bubbles.hpp"
#include "bubblemesh/errors.hpp"
#include "bubblemesh/predicates.hpp"
#include "bubblemesh/triangulate.hpp"

using namespace bubblemesh;

namespace {

// Every triangle's circumcircle is free of other points (exact arithmetic).
bool empty_circumcircles(const TriMesh& m) {
    for (const auto& t : m.tris) {
        for (std::size_t k = 0; k < m.node_count(); ++k) {
            if (static_cast<int>(k) == t[0] || static_cast<int>(k) == t[1] || static_cast<int>(k) == t[2]) continue;
            if (predicates::incircle_exact(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]], m.nodes[k]) > 0.0)
                return false;
        }
    }
    return true;
}

bool all_ccw(const TriMesh& m) {
    return std::all_of(m.tris.begin(), m.tris.end(), [&](const auto& t) {
        return predicates::orient2d(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) > 0.0;
    });
}

double hull_area(std::vector<Vec2> p) {
    std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    std::vector<Vec2> h;
    for (int pass = 0; pass < 2; ++pass) {
        const std::size_t start = h.size();
        for (const auto& q : p) {
            while (h.size() >= start + 2 && cross(h[h.size() - 1] - h[h.size() - 2], q - h[h.size() - 2]) <= 0)
                h.pop_back();
            h.push_back(q);
        }
        h.pop_back();
        std::reverse(p.begin(), p.end());
    }
    double a = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) a += cross(h[i], h[(i + 1) % h.size()]);
    return 0.5 * a;
}

} // namespace

TEST_SUITE("triangulate") {

TEST_CASE("orientation and incircle signs") {
    CHECK(predicates::orient2d({0, 0}, {1, 0}, {0, 1}) > 0);
    CHECK(predicates::orient2d({0, 0}, {0, 1}, {1, 0}) < 0);
    CHECK(predicates::orient2d({0, 0}, {1, 1}, {2, 2}) == 0);
    CHECK(predicates::incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) > 0);
    CHECK(predicates::incircle({0, 0}, {1, 0}, {0, 1}, {2, 2}) < 0);
    CHECK(predicates::incircle({0, 0}, {1, 0}, {1, 1}, {0, 1}) == 0);
}

TEST_CASE("filtered predicates agree with exact arithmetic near degeneracy") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e-12, 1e-12);
    for (int i = 0; i < 2000; ++i) {
        const Vec2 a{0.5 + u(rng), 0.5 + u(rng)};
        const Vec2 b{12.0 + u(rng), 12.0 + u(rng)};
        const Vec2 c{24.0 + u(rng), 24.0 + u(rng)};
        const double f = predicates::orient2d(a, b, c);
        const double e = predicates::orient2d_exact(a, b, c);
        CHECK((f > 0) == (e > 0));
        CHECK((f < 0) == (e < 0));
        // Fourth point within 1e-12 of the unit circle through the other three.
        const Vec2 d{u(rng), -1.0 + u(rng)};
        const double fi = predicates::incircle({1, 0}, {0, 1}, {-1, 0}, d);
        const double ei = predicates::incircle_exact({1, 0}, {0, 1}, {-1, 0}, d);
        CHECK((fi > 0) == (ei > 0));
        CHECK((fi < 0) == (ei < 0));
    }
}

TEST_CASE("simplex and unit square") {
    const std::vector<Vec2> tri{{0, 0}, {1, 0}, {0, 1}};
    const TriMesh m = delaunay(tri);
    CHECK(m.tri_count() == 1);
    CHECK(m.edge_count() == 3);

    const std::vector<Vec2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const TriMesh s = delaunay(sq);
    CHECK(s.tri_count() == 2);
    CHECK(s.edge_count() == 5);
    CHECK(all_ccw(s));
    // Deterministic tie resolution.
    const TriMesh s2 = delaunay(sq);
    CHECK(s2.tris == s.tris);
}

TEST_CASE("degenerate and duplicate inputs") {
    const std::vector<Vec2> two{{0, 0}, {1, 0}};
    CHECK_THROWS_AS(delaunay(two), DegenerateInput);
    const std::vector<Vec2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
    CHECK_THROWS_AS(delaunay(line), DegenerateInput);
    const std::vector<Vec2> dup{{0, 0}, {1, 0}, {0, 1}, {1, 0}};
    try {
        delaunay(dup);
        FAIL("expected DuplicatePoints");
    } catch (const DuplicatePoints& e) {
        CHECK(std::string(e.what()).find("(1, 3)") != std::string::npos);
    }
}

TEST_CASE("empty circumcircle on 50 random 200-point clouds") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int cloud = 0; cloud < 50; ++cloud) {
        std::vector<Vec2> pts(200);
        for (auto& p : pts) p = {u(rng), u(rng)};
        const TriMesh m = delaunay(pts);
        CHECK(empty_circumcircles(m));
        CHECK(all_ccw(m));
        double area = 0.0;
        for (std::size_t t = 0; t < m.tri_count(); ++t) area += m.signed_area(t);
        CHECK(area == doctest::Approx(hull_area(pts)).epsilon(1e-12));
        // Euler relation for a triangulated disk.
        CHECK(static_cast<long>(m.node_count()) - static_cast<long>(m.edge_count()) +
                  static_cast<long>(m.tri_count()) == 1);
    }
}

TEST_CASE("cocircular lattice input stays valid") {
    std::vector<Vec2> pts;
    for (int j = 0; j < 15; ++j)
        for (int i = 0; i < 15; ++i) pts.push_back({0.1 * i, 0.1 * j});
    const TriMesh m = delaunay(pts);
    CHECK(m.tri_count() == 2 * 14 * 14);
    CHECK(empty_circumcircles(m));
    CHECK(all_ccw(m));
}

TEST_CASE("mesh connectivity invariants") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec2> pts(300);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const TriMesh m = delaunay(pts);
    std::set<std::pair<int, int>> unique;
    for (const auto& e : m.edges) {
        CHECK(e.nodes[0] < e.nodes[1]);
        unique.insert({e.nodes[0], e.nodes[1]});
        CHECK(e.tris[0] >= 0);
    }
    CHECK(unique.size() == m.edge_count());
    for (std::size_t t = 0; t < m.tri_count(); ++t)
        for (int k = 0; k < 3; ++k) {
            const auto& e = m.edges[m.tri_edges[t][k]];
            const int a = m.tris[t][k];
            const int b = m.tris[t][(k + 1) % 3];
            CHECK(((e.nodes[0] == std::min(a, b)) && (e.nodes[1] == std::max(a, b))));
        }
}

TEST_CASE("clipping") {
    // Convex domain with every point inside: unchanged.
    const auto tri = preset_domain(DomainPreset::equilateral_triangle);
    std::vector<Vec2> pts{{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}, {0.5, 0.3}, {0.4, 0.2}, {0.6, 0.25}};
    const TriMesh m = delaunay(pts);
    const TriMesh c = clip_to_domain(m, tri);
    CHECK(c.tri_count() == m.tri_count());
    CHECK(clip_to_domain(c, tri).tri_count() == c.tri_count());

    // L-shape: nothing survives in the removed quadrant.
    const auto l = preset_domain(DomainPreset::l_shape);
    std::vector<Vec2> lp;
    for (int j = 0; j <= 10; ++j)
        for (int i = 0; i <= 10; ++i) {
            const Vec2 p{-1.0 + 0.2 * i, -1.0 + 0.2 * j};
            if (l.signed_distance(p) <= 1e-12) lp.push_back(p);
        }
    const TriMesh lm = clip_to_domain(delaunay(lp), l);
    CHECK(lm.tri_count() > 0);
    for (std::size_t t = 0; t < lm.tri_count(); ++t) CHECK(l.signed_distance(lm.centroid(t)) < 0.0);
    double area = 0.0;
    for (std::size_t t = 0; t < lm.tri_count(); ++t) area += lm.signed_area(t);
    CHECK(area == doctest::Approx(3.0));
    CHECK(static_cast<long>(lm.node_count()) - static_cast<long>(lm.edge_count()) +
              static_cast<long>(lm.tri_count()) == 1);

    // Points entirely outside the domain: nothing is left.
    std::vector<Vec2> outside{{0.2, -0.2}, {0.8, -0.2}, {0.5, -0.8}};
    CHECK_THROWS_AS(clip_to_domain(delaunay(outside), l), EmptyMesh);
}

TEST_CASE("BPM circle mesh satisfies the Euler relation and is Delaunay") {
    const auto g = preset_domain(DomainPreset::unit_circle);
    const auto size = SizeField::constant(0.1);
    BpmParams p;
    p.max_rounds = 2;
    const BpmResult r = run_bpm(g, size, 1, p);
    const TriMesh& m = r.mesh;
    CHECK(static_cast<long>(m.node_count()) - static_cast<long>(m.edge_count()) + static_cast<long>(m.tri_count()) ==
          1);
    CHECK(all_ccw(m));
    CHECK(empty_circumcircles(m));
    std::size_t boundary_edges = 0;
    for (const auto& e : m.edges) boundary_edges += e.on_boundary() ? 1 : 0;
    CHECK(boundary_edges == r.system.count(Mobility::boundary_slide));
}

TEST_CASE("structured rectangle mesh") {
    const TriMesh m = structured_rect_mesh(4);
    CHECK(m.node_count() == 25);
    CHECK(m.tri_count() == 32);
    CHECK(all_ccw(m));
    double area = 0.0;
    for (std::size_t t = 0; t < m.tri_count(); ++t) area += m.signed_area(t);
    CHECK(area == doctest::Approx(1.0));
}

TEST_CASE("from_triangles rejects degenerate elements") {
    std::vector<Vec2> n{{0, 0}, {1, 0}, {2, 0}, {0, 1}};
    CHECK_THROWS(TriMesh::from_triangles(n, {{0, 1, 2}}));
}

} // TEST_SUITE
