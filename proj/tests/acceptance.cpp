// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include <Eigen/Dense>

#include "bubblemesh/bubbles.hpp"
#include "bubblemesh/fem.hpp"
#include "bubblemesh/harness.hpp"
#include "bubblemesh/predicates.hpp"
#include "bubblemesh/triangulate.hpp"

using namespace bubblemesh;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

int failures = 0;

void verdict(int id, bool pass, const std::string& name, const std::string& detail) {
    fmt::print("{} criterion {}: {} | {}\n", pass ? "PASS" : "FAIL", id, name, detail);
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string list(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt::format("{:.3f}", x);
    return s;
}

ExperimentReport run(const std::string& name, const fs::path& out) {
    ExperimentConfig cfg = load_config(fs::path(BUBBLEMESH_CONFIG_DIR) / (name + ".cfg"));
    cfg.output_dir = out / name;
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport r = run_experiment(cfg, [](const std::string& line) { fmt::print("  {}\n", line); });
    emit_outputs(r, cfg.output_dir);
    fmt::print("  {} finished in {:.0f}s\n",
               name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return r;
}

std::vector<double> orders(const ExperimentReport& r, bool p2) {
    std::vector<double> v;
    for (const auto& row : r.rows) {
        const double o = p2 ? row.order_p2 : row.order_p1;
        if (std::isfinite(o)) v.push_back(o);
    }
    return v;
}

bool within(const std::vector<double>& v, double lo, double hi) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [&](double x) { return x >= lo && x <= hi; });
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double min_q(const ExperimentReport& r, double max_h) {
    double q = 1.0;
    for (const auto& row : r.rows)
        if (row.h <= max_h + 1e-12) q = std::min(q, row.report.q_avg);
    return q;
}

const LevelResult& level(const ExperimentReport& r, double h) {
    for (const auto& row : r.rows)
        if (std::abs(row.h - h) < 1e-12) return row;
    throw std::runtime_error(fmt::format("no level h={} in {}", h, r.config.domain));
}

// Criterion 7 helpers.

BenchmarkProblem poly(std::function<double(const Vec2&)> u, std::function<Vec2(const Vec2&)> g, double f) {
    return {"poly", std::move(u), std::move(g), [f](const Vec2&) { return f; }, ""};
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

struct SystemCheck {
    double max_asym = 0.0;
    double max_residual = 0.0;
};

// Assembles, checks symmetry of the free block and solves, tracking both measures.
FemSolution checked_solve(const FemSpace& s, const BenchmarkProblem& p, SystemCheck& chk) {
    const SparseSystem sys = assemble(s, p);
    const SparseMatrix t = sys.matrix.transpose();
    chk.max_asym = std::max(chk.max_asym, (sys.matrix - t).cwiseAbs().sum());
    FemSolution u{&s, solve(sys)};
    chk.max_residual = std::max(chk.max_residual, relative_residual(sys, u.coeffs));
    return u;
}

void property_suite() {
    // (a) Force polynomial roots.
    const double r1 = std::abs(interbubble_force_magnitude(1.0, 1.0));
    const double r15 = std::abs(interbubble_force_magnitude(1.5, 1.0));
    const bool a = r1 <= 1e-15 && r15 <= 1e-15;

    // (b) Empty circumcircles on random clouds.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    bool b = true;
    for (int cloud = 0; cloud < 50 && b; ++cloud) {
        std::vector<Vec2> pts(200);
        for (auto& p : pts) p = {u01(rng), u01(rng)};
        const TriMesh m = delaunay(pts);
        for (const auto& t : m.tris)
            for (std::size_t k = 0; k < m.node_count(); ++k)
                if (static_cast<int>(k) != t[0] && static_cast<int>(k) != t[1] && static_cast<int>(k) != t[2] &&
                    predicates::incircle_exact(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]], m.nodes[k]) > 0.0)
                    b = false;
    }

    // (c) Patch tests on a perturbed grid.
    SystemCheck chk;
    TriMesh grid = structured_rect_mesh(6);
    auto nodes = grid.nodes;
    std::uniform_real_distribution<double> jit(-0.03, 0.03);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (!grid.boundary_flags[i]) nodes[i] += Vec2{jit(rng), jit(rng)};
    const TriMesh patch = TriMesh::from_triangles(nodes, grid.tris);
    const FemSpace s1 = FemSpace::create(patch, 1);
    const auto lin = poly([](const Vec2& p) { return 2 * p.x - p.y + 1; }, [](const Vec2&) { return Vec2{2, -1}; }, 0.0);
    const double e1 = h1_norm_vs_exact(checked_solve(s1, lin, chk), lin);
    const FemSpace s2 = FemSpace::create(patch, 2);
    const auto quad = poly([](const Vec2& p) { return p.x * p.x + p.x * p.y - 2 * p.y * p.y; },
                           [](const Vec2& p) { return Vec2{2 * p.x + p.y, p.x - 4 * p.y}; }, 2.0);
    const double e2 = h1_norm_vs_exact(checked_solve(s2, quad, chk), quad);
    const bool c = e1 <= 1e-8 && e2 <= 1e-8;

    // (d) Structured-mesh orders for sin(pi x) sin(pi y).
    const BenchmarkProblem ss{"sin-sin",
                              [](const Vec2& p) { return std::sin(pi * p.x) * std::sin(pi * p.y); },
                              [](const Vec2& p) {
                                  return Vec2{pi * std::cos(pi * p.x) * std::sin(pi * p.y),
                                              pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
                              },
                              [](const Vec2& p) { return 2 * pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y); },
                              ""};
    std::vector<double> od[2];
    for (int degree : {1, 2}) {
        std::vector<std::pair<double, double>> errs;
        for (int n : {8, 16, 32}) {
            const TriMesh m = structured_rect_mesh(n);
            const FemSpace s = FemSpace::create(m, degree);
            errs.emplace_back(1.0 / n, h1_norm_vs_exact(checked_solve(s, ss, chk), ss));
        }
        od[degree - 1] = convergence_order(errs);
    }
    const bool d = within(od[0], 0.9, 1.1) && within(od[1], 1.9, 2.1);

    // (e) Quadrature exactness.
    double qerr = 0.0;
    for (int degree : {4, 6}) {
        for (int i = 0; i <= degree; ++i)
            for (int j = 0; i + j <= degree; ++j) {
                double s = 0.0;
                for (const auto& q : quadrature_rule(degree)) s += q.w * std::pow(q.l1, i) * std::pow(q.l2, j);
                const double exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                qerr = std::max(qerr, std::abs(0.5 * s - exact) / exact);
            }
    }
    const bool e = qerr <= 1e-14;

    // (f) Symmetry and residual, also on a BPM mesh.
    const BpmResult bpm = run_bpm(preset_domain(DomainPreset::unit_circle), SizeField::constant(0.1), 1);
    const auto circle = benchmark_problem(benchmark_for_domain(DomainPreset::unit_circle));
    for (int degree : {1, 2}) {
        const FemSpace s = FemSpace::create(bpm.mesh, degree);
        checked_solve(s, circle, chk);
    }
    const bool f = chk.max_asym <= 1e-12 && chk.max_residual <= 1e-10;

    verdict(7, a && b && c && d && e && f, "property suite",
            fmt::format("(a) roots {:.1e},{:.1e} {}; (b) Delaunay {}; (c) patch {:.1e},{:.1e} {}; "
                        "(d) orders P1 [{}] P2 [{}] {}; (e) quadrature rel err {:.1e} {}; "
                        "(f) asymmetry {:.1e} residual {:.1e} {}",
                        r1, r15, a ? "ok" : "bad", b ? "ok" : "bad", e1, e2, c ? "ok" : "bad", list(od[0]),
                        list(od[1]), d ? "ok" : "bad", qerr, e ? "ok" : "bad", chk.max_asym, chk.max_residual,
                        f ? "ok" : "bad"));
}

} // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(out);

    try {
        fmt::print("equilateral_triangle series\n");
        const ExperimentReport tri = run("equilateral_triangle", out);
        {
            const auto o1 = orders(tri, false);
            const auto o2 = orders(tri, true);
            const double q = min_q(tri, 0.1);
            verdict(1, within(o1, 1.9, 2.2) && within(o2, 2.8, 3.2) && q >= 0.999, "equilateral triangle orders",
                    fmt::format("P1 [{}] in [1.9,2.2], P2 [{}] in [2.8,3.2], min Q_avg(h<=0.1) {:.5f}", list(o1),
                                list(o2), q));
        }

        fmt::print("unit_circle series\n");
        const ExperimentReport circle = run("unit_circle", out);
        {
            const auto o1 = orders(circle, false);
            const auto o2 = orders(circle, true);
            const double q = min_q(circle, 1e300);
            verdict(2, within(o1, 1.25, 1.75) && within(o2, 2.2, 2.8) && q >= 0.95, "unit circle orders",
                    fmt::format("P1 [{}] in [1.25,1.75], P2 [{}] in [2.2,2.8], min Q_avg {:.4f}", list(o1), list(o2),
                                q));
        }

        fmt::print("regular_pentagon series\n");
        const ExperimentReport pent = run("regular_pentagon", out);
        {
            const double m1 = mean(orders(pent, false));
            const double m2 = mean(orders(pent, true));
            const double q = min_q(pent, 1e300);
            verdict(3, m1 >= 1.3 && m1 <= 1.8 && m2 >= 2.25 && m2 <= 2.8 && q >= 0.95, "regular pentagon orders",
                    fmt::format("mean P1 {:.3f} in [1.3,1.8], mean P2 {:.3f} in [2.25,2.8], min Q_avg {:.4f}", m1,
                                m2, q));
        }

        {
            const MeshReport& c = level(circle, 0.1).report;
            const MeshReport& t = level(tri, 0.1).report;
            const bool pass = c.edge_mean >= 0.09 && c.edge_mean <= 0.105 && c.h_err <= 0.014 &&
                              c.max_edge_err <= 0.03 && c.edge_var <= 1e-4 && t.h_err <= 1e-4;
            verdict(4, pass, "mesh-condition statistics",
                    fmt::format("circle h=0.1: edge_mean {:.4f}, h_err {:.4f}, max_edge_err {:.4f}, var {:.2e}; "
                                "triangle h=0.1: h_err {:.2e}",
                                c.edge_mean, c.h_err, c.max_edge_err, c.edge_var, t.h_err));
        }

        {
            const auto& rounds = level(circle, 0.1).rounds;
            std::vector<double> eps;
            for (const auto& r : rounds) eps.push_back(r.epsilon);
            const bool decreasing = eps.size() >= 3 && eps[1] < eps[0] && eps[2] < eps[1];
            const double best = eps.empty() ? 0.0 : *std::min_element(eps.begin(), eps.end());
            const double drop = eps.empty() ? 0.0 : (eps.front() - best) / eps.front();
            verdict(5, decreasing && drop >= 0.4, "outer-loop effectiveness",
                    fmt::format("epsilon by round [{}], first two rounds decreasing: {}, drop {:.0f}% (need 40%)",
                                list(eps), decreasing ? "yes" : "no", 100.0 * drop));
        }

        fmt::print("l_shape series\n");
        const ExperimentReport l = run("l_shape", out);
        {
            const bool pass = l.rows.size() >= 4 && l.slope_p1 && *l.slope_p1 < -0.5 && l.slope_p2 &&
                              *l.slope_p2 < -1.0;
            verdict(6, pass, "L-shape supercloseness slopes",
                    fmt::format("{} levels, slope P1 {} (< -0.5), slope P2 {} (< -1.0)", l.rows.size(),
                                l.slope_p1 ? fmt::format("{:.3f}", *l.slope_p1) : "absent",
                                l.slope_p2 ? fmt::format("{:.3f}", *l.slope_p2) : "absent"));
        }

        property_suite();

        fmt::print("unit_circle series (repeat)\n");
        const ExperimentReport again = run("unit_circle", out / "repeat");
        {
            const bool same = table_csv(again) == table_csv(circle) && metrics_csv(again) == metrics_csv(circle);
            verdict(8, same, "determinism", same ? "identical table.csv and metrics.csv" : "CSV output differs");
        }
    } catch (const std::exception& e) {
        fmt::print("FAIL acceptance aborted: {}\n", e.what());
        return 2;
    }

    fmt::print("{} criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
