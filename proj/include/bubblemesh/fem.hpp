#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "bubblemesh/geometry.hpp"
#include "bubblemesh/triangulate.hpp"
#include "bubblemesh/vec2.hpp"

namespace bubblemesh {

/// Quadrature point in barycentric coordinates; weights sum to 1 (multiply by the area).
struct QuadPoint {
    double l0;
    double l1;
    double l2;
    double w;
};

/// Symmetric triangle rules exact for polynomials of the given degree (1, 2, 4 or 6).
std::span<const QuadPoint> quadrature_rule(int degree);

/// Continuous Lagrange space of degree 1 or 2. P2 local DOFs are the three
/// vertices followed by the midpoints of edges (0,1), (1,2), (2,0).
struct FemSpace {
    int degree = 1;
    const TriMesh* mesh = nullptr;
    std::vector<std::array<int, 6>> dof_map;  // first 3 (P1) or 6 (P2) entries used
    std::vector<Vec2> dof_points;
    std::vector<int> dirichlet_dofs;
    std::vector<bool> is_dirichlet;

    static FemSpace create(const TriMesh& mesh, int degree);

    int local_count() const { return degree == 1 ? 3 : 6; }
    std::size_t dof_count() const { return dof_points.size(); }
    std::size_t free_dof_count() const { return dof_points.size() - dirichlet_dofs.size(); }
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SparseSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
};

struct BenchmarkProblem {
    std::string name;
    std::function<double(const Vec2&)> exact_u;
    std::function<Vec2(const Vec2&)> exact_grad;
    std::function<double(const Vec2&)> rhs_f;  // -Laplacian of exact_u
    std::string domain;  // preset name of the domain the benchmark belongs to, or empty
};

enum class Benchmark { cos_sin, sin_sin, exp_sum, corner_singularity };

std::string_view to_string(Benchmark b);
/// Accepts benchmark names (`cos-sin`, `sin-sin`, `exp`, `corner`) or domain preset names.
Benchmark parse_benchmark(std::string_view name);
Benchmark benchmark_for_domain(DomainPreset preset);
BenchmarkProblem benchmark_problem(Benchmark b);

struct FemSolution {
    const FemSpace* space = nullptr;
    std::vector<double> coeffs;
};

/// Gradient-gradient stiffness over all DOFs, without boundary conditions.
SparseMatrix assemble_stiffness(const FemSpace& space);

/// Quadrature degree for the load vector when none is requested: the centroid
/// rule for P1 (the same rule as its stiffness) and the degree-6 rule for P2.
int default_load_degree(int element_degree);

/// Stiffness and load with Dirichlet DOFs eliminated symmetrically: their
/// columns move to the right-hand side and their rows become identity rows.
/// `load_degree` 0 selects default_load_degree.
SparseSystem assemble(const FemSpace& space, const BenchmarkProblem& problem, int load_degree = 0);

/// Jacobi-preconditioned conjugate gradients to relative residual `rel_tol`.
std::vector<double> solve(const SparseSystem& sys, double rel_tol = 1e-10);

/// Relative residual |Ax - b| / |b| (absolute when b = 0).
double relative_residual(const SparseSystem& sys, std::span<const double> x);

FemSolution solve_problem(const FemSpace& space, const BenchmarkProblem& problem, double rel_tol = 1e-10,
                          int load_degree = 0);

/// Lagrange interpolant: values of `u` at the DOF points.
FemSolution interpolate(const FemSpace& space, const std::function<double(const Vec2&)>& u);

struct H1Parts {
    double l2 = 0.0;
    double semi = 0.0;
    double full() const;
};

/// Norms of a - b on the same space (degree-4 quadrature).
H1Parts h1_parts_diff(const FemSolution& a, const FemSolution& b);
/// Norms of a - exact_u (degree-6 quadrature).
H1Parts h1_parts_vs_exact(const FemSolution& a, const BenchmarkProblem& problem);

double h1_norm_diff(const FemSolution& a, const FemSolution& b);
double h1_norm_vs_exact(const FemSolution& a, const BenchmarkProblem& problem);

/// order_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1}).
std::vector<double> convergence_order(std::span<const std::pair<double, double>> h_and_err);

} // namespace bubblemesh
