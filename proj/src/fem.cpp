#include "bubblemesh/fem.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/IterativeLinearSolvers>
#include <fmt/format.h>

#include "bubblemesh/errors.hpp"

namespace bubblemesh {

namespace {

// Symmetric rules with weights normalised to 1. Degree 4 and 6 are the
// Dunavant rules with 6 and 12 points, digits from Dunavant (1985) extended
// to double precision.
constexpr QuadPoint kRule1[] = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0}};

constexpr QuadPoint kRule2[] = {
    {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0},
};

constexpr double kD4wA = 0.223381589678011465695007;
constexpr double kD4a = 0.4459484909159648863183293;
constexpr double kD4wB = 0.1099517436553218676383263;
constexpr double kD4b = 0.09157621350977074345957146;

constexpr QuadPoint kRule4[] = {
    {kD4a, kD4a, 1.0 - 2.0 * kD4a, kD4wA},
    {kD4a, 1.0 - 2.0 * kD4a, kD4a, kD4wA},
    {1.0 - 2.0 * kD4a, kD4a, kD4a, kD4wA},
    {kD4b, kD4b, 1.0 - 2.0 * kD4b, kD4wB},
    {kD4b, 1.0 - 2.0 * kD4b, kD4b, kD4wB},
    {1.0 - 2.0 * kD4b, kD4b, kD4b, kD4wB},
};

constexpr double kD6wA = 0.1167862757263793660252896;
constexpr double kD6a = 0.2492867451709104212916386;
constexpr double kD6wB = 0.05084490637020681692093681;
constexpr double kD6b = 0.0630890144915022283403316;
constexpr double kD6wC = 0.08285107561837357519355346;
constexpr double kD6c1 = 0.05314504984481694735324967;
constexpr double kD6c2 = 0.3103524510337844054166077;
constexpr double kD6c3 = 1.0 - kD6c1 - kD6c2;

constexpr QuadPoint kRule6[] = {
    {kD6a, kD6a, 1.0 - 2.0 * kD6a, kD6wA},
    {kD6a, 1.0 - 2.0 * kD6a, kD6a, kD6wA},
    {1.0 - 2.0 * kD6a, kD6a, kD6a, kD6wA},
    {kD6b, kD6b, 1.0 - 2.0 * kD6b, kD6wB},
    {kD6b, 1.0 - 2.0 * kD6b, kD6b, kD6wB},
    {1.0 - 2.0 * kD6b, kD6b, kD6b, kD6wB},
    {kD6c1, kD6c2, kD6c3, kD6wC},
    {kD6c1, kD6c3, kD6c2, kD6wC},
    {kD6c2, kD6c1, kD6c3, kD6wC},
    {kD6c2, kD6c3, kD6c1, kD6wC},
    {kD6c3, kD6c1, kD6c2, kD6wC},
    {kD6c3, kD6c2, kD6c1, kD6wC},
};

/// Affine element data: vertices, area and barycentric gradients.
struct Element {
    std::array<Vec2, 3> p;
    double area;
    std::array<Vec2, 3> dl;

    Element(const TriMesh& mesh, std::size_t t) {
        for (int k = 0; k < 3; ++k) p[k] = mesh.nodes[mesh.tris[t][k]];
        area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
        const double inv = 1.0 / (2.0 * area);
        for (int i = 0; i < 3; ++i) {
            const Vec2& a = p[(i + 1) % 3];
            const Vec2& b = p[(i + 2) % 3];
            dl[i] = Vec2{a.y - b.y, b.x - a.x} * inv;
        }
    }

    Vec2 point(const QuadPoint& q) const { return p[0] * q.l0 + p[1] * q.l1 + p[2] * q.l2; }
};

struct Basis {
    std::array<double, 6> v{};
    std::array<Vec2, 6> g{};
};

Basis eval_basis(int degree, const Element& el, const QuadPoint& q) {
    Basis b;
    const double l[3] = {q.l0, q.l1, q.l2};
    if (degree == 1) {
        for (int i = 0; i < 3; ++i) {
            b.v[i] = l[i];
            b.g[i] = el.dl[i];
        }
        return b;
    }
    for (int i = 0; i < 3; ++i) {
        b.v[i] = l[i] * (2.0 * l[i] - 1.0);
        b.g[i] = el.dl[i] * (4.0 * l[i] - 1.0);
    }
    for (int k = 0; k < 3; ++k) {
        const int i = k;
        const int j = (k + 1) % 3;
        b.v[3 + k] = 4.0 * l[i] * l[j];
        b.g[3 + k] = (el.dl[i] * l[j] + el.dl[j] * l[i]) * 4.0;
    }
    return b;
}

void check_element(std::size_t t, const Element& el, double min_area) {
    if (!(el.area > min_area))
        throw AssemblyError(fmt::format("triangle {} is degenerate (area {:.3e})", t, el.area));
}

double min_element_area(const TriMesh& mesh) {
    const double d = mesh.bbox().diameter();
    return 1e-14 * d * d;
}

/// Dense local stiffness matrix (local_count x local_count).
std::array<std::array<double, 6>, 6> local_stiffness(int degree, const Element& el) {
    std::array<std::array<double, 6>, 6> k{};
    const int n = degree == 1 ? 3 : 6;
    for (const auto& q : quadrature_rule(degree == 1 ? 1 : 2)) {
        const Basis b = eval_basis(degree, el, q);
        const double w = q.w * el.area;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) k[i][j] += w * dot(b.g[i], b.g[j]);
    }
    return k;
}

struct PointValue {
    double v = 0.0;
    Vec2 g;
};

PointValue eval_solution(const FemSolution& s, std::size_t t, const Basis& b) {
    PointValue pv;
    const auto& dofs = s.space->dof_map[t];
    for (int i = 0; i < s.space->local_count(); ++i) {
        const double c = s.coeffs[dofs[i]];
        pv.v += c * b.v[i];
        pv.g += b.g[i] * c;
    }
    return pv;
}

} // namespace

std::span<const QuadPoint> quadrature_rule(int degree) {
    switch (degree) {
    case 1: return kRule1;
    case 2: return kRule2;
    case 4: return kRule4;
    case 6: return kRule6;
    default: throw ArgumentError(fmt::format("no quadrature rule of degree {}", degree));
    }
}

FemSpace FemSpace::create(const TriMesh& mesh, int degree) {
    if (degree != 1 && degree != 2) throw ArgumentError(fmt::format("unsupported element degree {}", degree));
    FemSpace s;
    s.degree = degree;
    s.mesh = &mesh;
    s.dof_points = mesh.nodes;
    s.is_dirichlet.assign(mesh.node_count(), false);
    for (std::size_t i = 0; i < mesh.node_count(); ++i) s.is_dirichlet[i] = mesh.boundary_flags[i];
    s.dof_map.resize(mesh.tri_count());
    const int n_nodes = static_cast<int>(mesh.node_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        auto& m = s.dof_map[t];
        m.fill(-1);
        for (int k = 0; k < 3; ++k) m[k] = mesh.tris[t][k];
        if (degree == 2)
            for (int k = 0; k < 3; ++k) m[3 + k] = n_nodes + mesh.tri_edges[t][k];
    }
    if (degree == 2) {
        for (const auto& e : mesh.edges) {
            s.dof_points.push_back((mesh.nodes[e.nodes[0]] + mesh.nodes[e.nodes[1]]) * 0.5);
            s.is_dirichlet.push_back(e.on_boundary());
        }
    }
    for (std::size_t i = 0; i < s.is_dirichlet.size(); ++i)
        if (s.is_dirichlet[i]) s.dirichlet_dofs.push_back(static_cast<int>(i));
    return s;
}

std::string_view to_string(Benchmark b) {
    switch (b) {
    case Benchmark::cos_sin: return "cos-sin";
    case Benchmark::sin_sin: return "sin-sin";
    case Benchmark::exp_sum: return "exp";
    case Benchmark::corner_singularity: return "corner";
    }
    return "?";
}

Benchmark parse_benchmark(std::string_view name) {
    for (Benchmark b : {Benchmark::cos_sin, Benchmark::sin_sin, Benchmark::exp_sum, Benchmark::corner_singularity})
        if (name == to_string(b)) return b;
    try {
        return benchmark_for_domain(parse_domain_preset(name));
    } catch (const ConfigError&) {
        throw ConfigError(fmt::format("unknown benchmark '{}' (expected cos-sin, sin-sin, exp, corner or a domain name)", name));
    }
}

Benchmark benchmark_for_domain(DomainPreset preset) {
    switch (preset) {
    case DomainPreset::equilateral_triangle: return Benchmark::cos_sin;
    case DomainPreset::unit_circle: return Benchmark::sin_sin;
    case DomainPreset::regular_pentagon: return Benchmark::exp_sum;
    case DomainPreset::l_shape: return Benchmark::corner_singularity;
    case DomainPreset::square3: break;
    }
    throw ConfigError(fmt::format("domain '{}' has no FEM benchmark", to_string(preset)));
}

BenchmarkProblem benchmark_problem(Benchmark b) {
    constexpr double pi = std::numbers::pi;
    BenchmarkProblem p;
    p.name = std::string(to_string(b));
    switch (b) {
    case Benchmark::cos_sin:
        p.domain = "equilateral_triangle";
        p.exact_u = [](const Vec2& q) { return std::cos(2 * pi * q.x) * std::sin(2 * pi * q.y); };
        p.exact_grad = [](const Vec2& q) {
            return Vec2{-2 * pi * std::sin(2 * pi * q.x) * std::sin(2 * pi * q.y),
                        2 * pi * std::cos(2 * pi * q.x) * std::cos(2 * pi * q.y)};
        };
        p.rhs_f = [](const Vec2& q) { return 8 * pi * pi * std::cos(2 * pi * q.x) * std::sin(2 * pi * q.y); };
        break;
    case Benchmark::sin_sin:
        p.domain = "unit_circle";
        p.exact_u = [](const Vec2& q) { return std::sin(q.x) * std::sin(q.y); };
        p.exact_grad = [](const Vec2& q) {
            return Vec2{std::cos(q.x) * std::sin(q.y), std::sin(q.x) * std::cos(q.y)};
        };
        p.rhs_f = [](const Vec2& q) { return 2 * std::sin(q.x) * std::sin(q.y); };
        break;
    case Benchmark::exp_sum:
        p.domain = "regular_pentagon";
        p.exact_u = [](const Vec2& q) { return std::exp(q.x + q.y); };
        p.exact_grad = [](const Vec2& q) {
            const double e = std::exp(q.x + q.y);
            return Vec2{e, e};
        };
        p.rhs_f = [](const Vec2& q) { return -2 * std::exp(q.x + q.y); };
        break;
    case Benchmark::corner_singularity: {
        // r^(2/3) sin(2t/3) with t in [0, 2pi): zero on the two edges at the
        // re-entrant corner (t = 0 and t = 3pi/2) of the L-shape.
        p.domain = "l_shape";
        auto angle = [](const Vec2& q) {
            const double t = std::atan2(q.y, q.x);
            return t < 0.0 ? t + 2 * pi : t;
        };
        p.exact_u = [angle](const Vec2& q) {
            const double r = norm(q);
            return std::pow(r, 2.0 / 3.0) * std::sin(2.0 / 3.0 * angle(q));
        };
        p.exact_grad = [angle](const Vec2& q) {
            const double r = norm(q);
            if (r == 0.0) return Vec2{};
            const double t = angle(q);
            const double c = 2.0 / 3.0 * std::pow(r, -1.0 / 3.0);
            const double ur = c * std::sin(2.0 / 3.0 * t);
            const double ut = c * std::cos(2.0 / 3.0 * t);
            return Vec2{ur * std::cos(t) - ut * std::sin(t), ur * std::sin(t) + ut * std::cos(t)};
        };
        p.rhs_f = [](const Vec2&) { return 0.0; };
        break;
    }
    }
    return p;
}

SparseMatrix assemble_stiffness(const FemSpace& space) {
    const TriMesh& mesh = *space.mesh;
    const double min_area = min_element_area(mesh);
    const int n = space.local_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.tri_count() * n * n);
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        const Element el(mesh, t);
        check_element(t, el, min_area);
        const auto k = local_stiffness(space.degree, el);
        const auto& dofs = space.dof_map[t];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) trips.emplace_back(dofs[i], dofs[j], k[i][j]);
    }
    const auto nd = static_cast<Eigen::Index>(space.dof_count());
    SparseMatrix a(nd, nd);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

int default_load_degree(int element_degree) { return element_degree == 1 ? 1 : 6; }

SparseSystem assemble(const FemSpace& space, const BenchmarkProblem& problem, int load_degree) {
    if (load_degree == 0) load_degree = default_load_degree(space.degree);
    const TriMesh& mesh = *space.mesh;
    const double min_area = min_element_area(mesh);
    const int n = space.local_count();
    const auto nd = static_cast<Eigen::Index>(space.dof_count());

    std::vector<double> g(space.dof_count(), 0.0);
    for (int d : space.dirichlet_dofs) g[d] = problem.exact_u(space.dof_points[d]);

    SparseSystem sys;
    sys.rhs = Eigen::VectorXd::Zero(nd);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.tri_count() * n * n + space.dirichlet_dofs.size());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        const Element el(mesh, t);
        check_element(t, el, min_area);
        const auto k = local_stiffness(space.degree, el);
        const auto& dofs = space.dof_map[t];

        std::array<double, 6> load{};
        for (const auto& q : quadrature_rule(load_degree)) {
            const Basis b = eval_basis(space.degree, el, q);
            const double fw = problem.rhs_f(el.point(q)) * q.w * el.area;
            for (int i = 0; i < n; ++i) load[i] += fw * b.v[i];
        }

        for (int i = 0; i < n; ++i) {
            const int row = dofs[i];
            if (space.is_dirichlet[row]) continue;
            sys.rhs[row] += load[i];
            for (int j = 0; j < n; ++j) {
                const int col = dofs[j];
                if (space.is_dirichlet[col]) sys.rhs[row] -= k[i][j] * g[col];
                else trips.emplace_back(row, col, k[i][j]);
            }
        }
    }
    for (int d : space.dirichlet_dofs) {
        trips.emplace_back(d, d, 1.0);
        sys.rhs[d] = g[d];
    }
    sys.matrix.resize(nd, nd);
    sys.matrix.setFromTriplets(trips.begin(), trips.end());
    return sys;
}

double relative_residual(const SparseSystem& sys, std::span<const double> x) {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const double r = (sys.matrix * xv - sys.rhs).norm();
    const double b = sys.rhs.norm();
    return b > 0.0 ? r / b : r;
}

std::vector<double> solve(const SparseSystem& sys, double rel_tol) {
    const Eigen::Index n = sys.matrix.rows();
    if (sys.matrix.cols() != n || sys.rhs.size() != n) throw ArgumentError("solve: dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    if (n == 0 || sys.rhs.norm() == 0.0) return out;

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(rel_tol);
    cg.setMaxIterations(10 * n);
    cg.compute(sys.matrix);
    const Eigen::VectorXd x = cg.solve(sys.rhs);
    std::copy(x.data(), x.data() + n, out.begin());
    const double res = relative_residual(sys, out);
    if (cg.info() != Eigen::Success || !std::isfinite(res) || res > rel_tol)
        throw SolverError(fmt::format("conjugate gradients did not converge in {} iterations (relative residual {:.3e})",
                                      cg.iterations(), res),
                          res);
    return out;
}

FemSolution solve_problem(const FemSpace& space, const BenchmarkProblem& problem, double rel_tol, int load_degree) {
    return FemSolution{&space, solve(assemble(space, problem, load_degree), rel_tol)};
}

FemSolution interpolate(const FemSpace& space, const std::function<double(const Vec2&)>& u) {
    FemSolution s{&space, std::vector<double>(space.dof_count())};
    for (std::size_t i = 0; i < space.dof_count(); ++i) s.coeffs[i] = u(space.dof_points[i]);
    return s;
}

double H1Parts::full() const { return std::sqrt(l2 * l2 + semi * semi); }

H1Parts h1_parts_diff(const FemSolution& a, const FemSolution& b) {
    if (a.space == nullptr || a.space != b.space) throw ArgumentError("h1_norm_diff: solutions live on different spaces");
    const FemSpace& space = *a.space;
    double l2 = 0.0;
    double semi = 0.0;
    for (std::size_t t = 0; t < space.mesh->tri_count(); ++t) {
        const Element el(*space.mesh, t);
        for (const auto& q : quadrature_rule(4)) {
            const Basis bs = eval_basis(space.degree, el, q);
            const PointValue va = eval_solution(a, t, bs);
            const PointValue vb = eval_solution(b, t, bs);
            const double w = q.w * el.area;
            const double dv = va.v - vb.v;
            const Vec2 dg = va.g - vb.g;
            l2 += w * dv * dv;
            semi += w * dot(dg, dg);
        }
    }
    return {std::sqrt(l2), std::sqrt(semi)};
}

H1Parts h1_parts_vs_exact(const FemSolution& a, const BenchmarkProblem& problem) {
    if (a.space == nullptr) throw ArgumentError("h1_norm_vs_exact: solution has no space");
    const FemSpace& space = *a.space;
    double l2 = 0.0;
    double semi = 0.0;
    for (std::size_t t = 0; t < space.mesh->tri_count(); ++t) {
        const Element el(*space.mesh, t);
        for (const auto& q : quadrature_rule(6)) {
            const Basis bs = eval_basis(space.degree, el, q);
            const PointValue va = eval_solution(a, t, bs);
            const Vec2 x = el.point(q);
            const double w = q.w * el.area;
            const double dv = va.v - problem.exact_u(x);
            const Vec2 dg = va.g - problem.exact_grad(x);
            l2 += w * dv * dv;
            semi += w * dot(dg, dg);
        }
    }
    return {std::sqrt(l2), std::sqrt(semi)};
}

double h1_norm_diff(const FemSolution& a, const FemSolution& b) { return h1_parts_diff(a, b).full(); }

double h1_norm_vs_exact(const FemSolution& a, const BenchmarkProblem& problem) {
    return h1_parts_vs_exact(a, problem).full();
}

std::vector<double> convergence_order(std::span<const std::pair<double, double>> h_and_err) {
    std::vector<double> out;
    for (const auto& [h, e] : h_and_err)
        if (!(e > 0.0) || !(h > 0.0)) throw ArgumentError("convergence_order: sizes and errors must be positive");
    for (std::size_t i = 0; i + 1 < h_and_err.size(); ++i) {
        const auto& [h0, e0] = h_and_err[i];
        const auto& [h1, e1] = h_and_err[i + 1];
        out.push_back(std::log(e0 / e1) / std::log(h0 / h1));
    }
    return out;
}

} // namespace bubblemesh
