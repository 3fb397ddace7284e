#pragma once

#include <array>
#include <span>
#include <vector>

#include "bubblemesh/geometry.hpp"
#include "bubblemesh/vec2.hpp"

namespace bubblemesh {

struct MeshEdge {
    std::array<int, 2> nodes;  // nodes[0] < nodes[1]
    std::array<int, 2> tris;   // tris[1] == -1 on the boundary
    bool on_boundary() const { return tris[1] < 0; }
};

/// Conforming triangle mesh with counterclockwise elements and a unique edge list.
struct TriMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> tris;
    std::vector<MeshEdge> edges;
    // tri_edges[t][k] is the edge joining local vertices k and (k+1)%3.
    std::vector<std::array<int, 3>> tri_edges;
    std::vector<bool> boundary_flags;
    // Index of each node in the point set the mesh was built from.
    std::vector<int> origin;

    /// Builds edges and boundary flags. Clockwise triangles are flipped; triangles
    /// with area below 1e-14 * diameter^2 or non-manifold edges are rejected.
    /// With `exact_orientation` the triangles are known to be counterclockwise
    /// (exact predicates) and the floating-point area checks are skipped.
    static TriMesh from_triangles(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> tris,
                                  bool exact_orientation = false);

    std::size_t node_count() const { return nodes.size(); }
    std::size_t tri_count() const { return tris.size(); }
    std::size_t edge_count() const { return edges.size(); }

    double signed_area(std::size_t t) const;
    double edge_length(std::size_t e) const;
    Vec2 centroid(std::size_t t) const;
    BBox bbox() const;
};

/// Delaunay triangulation of the convex hull of `points` (incremental
/// Bowyer-Watson with exact predicates). Node i of the result is points[i].
/// Cocircular ties resolve to the configuration produced by insertion order,
/// which is a fixed spatial (Hilbert) order, so output is reproducible.
TriMesh delaunay(std::span<const Vec2> points);

/// Keeps the triangles whose centroid lies inside the domain (sdf below
/// -1e-10 * diameter, which discards hull slivers along straight boundary
/// edges) and drops nodes left without triangles. `origin` is composed through.
TriMesh clip_to_domain(const TriMesh& mesh, const DomainGeometry& geom);

/// Structured n x n grid of [x0,x1] x [y0,y1], each cell split along its
/// lower-left to upper-right diagonal.
TriMesh structured_rect_mesh(int n, Vec2 lo = {0.0, 0.0}, Vec2 hi = {1.0, 1.0});

} // namespace bubblemesh
