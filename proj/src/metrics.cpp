#include "bubblemesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bubblemesh/errors.hpp"

namespace bubblemesh {

namespace {

double edge_target(const TriMesh& mesh, const SizeField& size, std::size_t e) {
    const auto& ed = mesh.edges[e];
    return size.pair_target(mesh.nodes[ed.nodes[0]], mesh.nodes[ed.nodes[1]]);
}

double side(const TriMesh& mesh, int a, int b) { return distance(mesh.nodes[a], mesh.nodes[b]); }

} // namespace

double shape_quality(double a, double b, double c) {
    if (a < 0.0 || b < 0.0 || c < 0.0) throw ArgumentError("shape_quality: negative side length");
    const double x = b + c - a;
    const double y = c + a - b;
    const double z = a + b - c;
    if (x <= 0.0 || y <= 0.0 || z <= 0.0) return 0.0;
    return x * y * z / (a * b * c);
}

BadEdgePartition classify_bad_edges(const TriMesh& mesh, const SizeField& size, double threshold_factor,
                                    double alpha) {
    BadEdgePartition part;
    double target_sum = 0.0;
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const double target = edge_target(mesh, size, e);
        target_sum += target;
        const double dev = std::abs(mesh.edge_length(e) - target);
        if (dev > threshold_factor * std::pow(target, 1.0 + alpha)) {
            part.bad.push_back(static_cast<int>(e));
            for (int t : mesh.edges[e].tris)
                if (t >= 0) part.bad_area += mesh.signed_area(t);
        } else {
            part.good.push_back(static_cast<int>(e));
        }
    }
    if (!part.bad.empty() && mesh.edge_count() > 1) {
        const double h = target_sum / static_cast<double>(mesh.edge_count());
        if (h != 1.0) part.sigma_area = std::log(part.bad_area) / (2.0 * std::log(h));
        part.sigma_count = std::log(static_cast<double>(part.bad.size())) / std::log(static_cast<double>(mesh.edge_count()));
    }
    return part;
}

MeshReport mesh_report(const TriMesh& mesh, const SizeField& size, double threshold_factor, double alpha) {
    if (mesh.tri_count() == 0 || mesh.edge_count() == 0) throw EmptyMesh("mesh_report: mesh has no triangles");
    MeshReport r;

    r.q_min = std::numeric_limits<double>::infinity();
    double q_sum = 0.0;
    for (const auto& v : mesh.tris) {
        const double q = shape_quality(side(mesh, v[1], v[2]), side(mesh, v[2], v[0]), side(mesh, v[0], v[1]));
        q_sum += q;
        r.q_min = std::min(r.q_min, q);
    }
    r.q_avg = q_sum / static_cast<double>(mesh.tri_count());

    const auto ne = static_cast<double>(mesh.edge_count());
    double len_sum = 0.0;
    double err_sum = 0.0;
    double target_sum = 0.0;
    r.lambda_weights.resize(mesh.edge_count());
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const double len = mesh.edge_length(e);
        const double target = edge_target(mesh, size, e);
        const double err = std::abs(len - target);
        len_sum += len;
        err_sum += err;
        target_sum += target;
        r.max_edge_err = std::max(r.max_edge_err, err);
        r.lambda_weights[e] = target;
    }
    r.edge_mean = len_sum / ne;
    r.h_err = err_sum / ne;
    double var = 0.0;
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const double d = mesh.edge_length(e) - r.edge_mean;
        var += d * d;
    }
    r.edge_var = var / ne;
    for (double& w : r.lambda_weights) w /= target_sum;

    r.bad_edges = classify_bad_edges(mesh, size, threshold_factor, alpha);
    return r;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ArgumentError("loglog_slope: need at least two (x, y) pairs");
    double mx = 0.0;
    double my = 0.0;
    const auto n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ArgumentError("loglog_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw ArgumentError("loglog_slope: x values must not all be equal");
    return sxy / sxx;
}

double estimate_alpha(std::span<const std::pair<double, double>> h_and_err) {
    std::vector<double> h;
    std::vector<double> err;
    for (const auto& [hv, ev] : h_and_err) {
        if (ev == 0.0) return std::numeric_limits<double>::infinity();
        h.push_back(hv);
        err.push_back(ev);
    }
    return loglog_slope(h, err) - 1.0;
}

std::vector<double> opposite_edge_differences(const TriMesh& mesh) {
    std::vector<double> out;
    auto apex = [&](int t, int a, int b) {
        for (int v : mesh.tris[t])
            if (v != a && v != b) return v;
        return -1;
    };
    for (const auto& e : mesh.edges) {
        if (e.on_boundary()) continue;
        // Quadrilateral a-c-b-d around the shared edge (a, b).
        const int a = e.nodes[0];
        const int b = e.nodes[1];
        const int c = apex(e.tris[0], a, b);
        const int d = apex(e.tris[1], a, b);
        out.push_back(std::abs(side(mesh, a, c) - side(mesh, b, d)));
        out.push_back(std::abs(side(mesh, c, b) - side(mesh, d, a)));
    }
    return out;
}

} // namespace bubblemesh
