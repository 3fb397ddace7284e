#pragma once

#include <span>
#include <utility>
#include <vector>

#include "bubblemesh/sizing.hpp"
#include "bubblemesh/triangulate.hpp"

namespace bubblemesh {

/// q = (b+c-a)(c+a-b)(a+b-c) / (abc): twice the inradius over the circumradius.
/// Returns 0 when the strict triangle inequality fails.
double shape_quality(double a, double b, double c);

struct BadEdgePartition {
    std::vector<int> good;  // E1
    std::vector<int> bad;   // E2
    double bad_area = 0.0;  // summed area of the triangles adjacent to E2 edges
    double sigma_area = 0.0;   // from bad_area ~ h^(2 sigma)
    double sigma_count = 0.0;  // from #E2 ~ #E^sigma
};

struct MeshReport {
    double q_avg = 0.0;
    double q_min = 0.0;
    double edge_mean = 0.0;
    double edge_var = 0.0;  // population variance of the edge lengths
    double h_err = 0.0;     // mean |l_e - target_e|
    double max_edge_err = 0.0;
    BadEdgePartition bad_edges;
    std::vector<double> lambda_weights;  // target_e / sum of targets
};

/// Edge `e` is bad when |l_e - target_e| > threshold_factor * target_e^(1 + alpha).
BadEdgePartition classify_bad_edges(const TriMesh& mesh, const SizeField& size, double threshold_factor = 3.0,
                                    double alpha = 1.0);

MeshReport mesh_report(const TriMesh& mesh, const SizeField& size, double threshold_factor = 3.0,
                       double alpha = 1.0);

/// Least-squares slope of log(h_err) against log(h), minus one. Returns
/// +infinity when some h_err is exactly zero.
double estimate_alpha(std::span<const std::pair<double, double>> h_and_err);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// For every interior edge the two triangles form a quadrilateral; returns the
/// absolute length differences of its two pairs of opposite sides.
std::vector<double> opposite_edge_differences(const TriMesh& mesh);

} // namespace bubblemesh
