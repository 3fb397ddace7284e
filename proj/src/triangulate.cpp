#include "bubblemesh/triangulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "bubblemesh/errors.hpp"
#include "bubblemesh/predicates.hpp"

namespace bubblemesh {

using predicates::incircle;
using predicates::orient2d;

// ---------------------------------------------------------------------------
// TriMesh

double TriMesh::signed_area(std::size_t t) const {
    const auto& v = tris[t];
    return 0.5 * cross(nodes[v[1]] - nodes[v[0]], nodes[v[2]] - nodes[v[0]]);
}

double TriMesh::edge_length(std::size_t e) const {
    return distance(nodes[edges[e].nodes[0]], nodes[edges[e].nodes[1]]);
}

Vec2 TriMesh::centroid(std::size_t t) const {
    const auto& v = tris[t];
    return (nodes[v[0]] + nodes[v[1]] + nodes[v[2]]) * (1.0 / 3.0);
}

BBox TriMesh::bbox() const {
    BBox b{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
           {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
    for (const auto& p : nodes) {
        b.min.x = std::min(b.min.x, p.x);
        b.min.y = std::min(b.min.y, p.y);
        b.max.x = std::max(b.max.x, p.x);
        b.max.y = std::max(b.max.y, p.y);
    }
    return b;
}

TriMesh TriMesh::from_triangles(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> tris,
                                bool exact_orientation) {
    TriMesh m;
    m.nodes = std::move(nodes);
    m.tris = std::move(tris);
    m.origin.resize(m.nodes.size());
    std::iota(m.origin.begin(), m.origin.end(), 0);

    const int n = static_cast<int>(m.nodes.size());
    const double diam = m.nodes.empty() ? 0.0 : m.bbox().diameter();
    const double min_area = 1e-14 * diam * diam;

    for (std::size_t t = 0; t < m.tris.size(); ++t) {
        auto& v = m.tris[t];
        for (int k = 0; k < 3; ++k)
            if (v[k] < 0 || v[k] >= n) throw ArgumentError(fmt::format("triangle {} has invalid node index", t));
        if (exact_orientation) continue;
        double a = m.signed_area(t);
        if (a < 0.0) {
            std::swap(v[1], v[2]);
            a = -a;
        }
        if (!(a >= min_area) || a == 0.0)
            throw ArgumentError(fmt::format("triangle {} is degenerate (area {:.3e})", t, a));
    }

    std::unordered_map<std::uint64_t, int> lookup;
    lookup.reserve(m.tris.size() * 2);
    m.tri_edges.resize(m.tris.size());
    for (std::size_t t = 0; t < m.tris.size(); ++t) {
        for (int k = 0; k < 3; ++k) {
            int a = m.tris[t][k];
            int b = m.tris[t][(k + 1) % 3];
            if (a > b) std::swap(a, b);
            const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
            auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(m.edges.size()));
            if (inserted) {
                m.edges.push_back({{a, b}, {static_cast<int>(t), -1}});
            } else {
                auto& e = m.edges[it->second];
                if (e.tris[1] >= 0)
                    throw ArgumentError(fmt::format("edge ({}, {}) shared by more than two triangles", a, b));
                e.tris[1] = static_cast<int>(t);
            }
            m.tri_edges[t][k] = it->second;
        }
    }

    m.boundary_flags.assign(m.nodes.size(), false);
    for (const auto& e : m.edges)
        if (e.on_boundary()) m.boundary_flags[e.nodes[0]] = m.boundary_flags[e.nodes[1]] = true;
    return m;
}

// ---------------------------------------------------------------------------
// Delaunay

namespace {

constexpr int kGhost = -1;
constexpr int kNone = -1;

struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nbr{kNone, kNone, kNone};  // nbr[k] is across the edge opposite v[k]
    bool alive = true;

    bool is_ghost() const { return v[0] == kGhost || v[1] == kGhost || v[2] == kGhost; }
};

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order) {
    const std::uint32_t n = 1u << order;
    std::uint64_t d = 0;
    for (std::uint32_t s = n / 2; s > 0; s /= 2) {
        const std::uint32_t rx = (x & s) ? 1u : 0u;
        const std::uint32_t ry = (y & s) ? 1u : 0u;
        d += static_cast<std::uint64_t>(s) * s * ((3u * rx) ^ ry);
        if (ry == 0) {
            if (rx == 1) {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::swap(x, y);
        }
    }
    return d;
}

std::vector<int> hilbert_order(std::span<const Vec2> pts, const BBox& box) {
    constexpr int order = 16;
    const double scale_x = box.max.x > box.min.x ? (65535.0 / (box.max.x - box.min.x)) : 0.0;
    const double scale_y = box.max.y > box.min.y ? (65535.0 / (box.max.y - box.min.y)) : 0.0;
    std::vector<std::pair<std::uint64_t, int>> keys(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto x = static_cast<std::uint32_t>((pts[i].x - box.min.x) * scale_x);
        const auto y = static_cast<std::uint32_t>((pts[i].y - box.min.y) * scale_y);
        keys[i] = {hilbert_index(x, y, order), static_cast<int>(i)};
    }
    std::sort(keys.begin(), keys.end());
    std::vector<int> out(pts.size());
    for (std::size_t i = 0; i < keys.size(); ++i) out[i] = keys[i].second;
    return out;
}

void check_duplicates(std::span<const Vec2> pts, double tol) {
    std::vector<int> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return pts[a].x < pts[b].x || (pts[a].x == pts[b].x && pts[a].y < pts[b].y);
    });
    std::vector<std::pair<int, int>> dups;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size() && pts[idx[j]].x - pts[idx[i]].x <= tol; ++j)
            if (distance(pts[idx[i]], pts[idx[j]]) <= tol)
                dups.emplace_back(std::min(idx[i], idx[j]), std::max(idx[i], idx[j]));
    }
    if (!dups.empty()) {
        std::sort(dups.begin(), dups.end());
        std::string list;
        for (std::size_t k = 0; k < dups.size() && k < 20; ++k)
            list += fmt::format("{}({}, {})", k ? ", " : "", dups[k].first, dups[k].second);
        if (dups.size() > 20) list += ", ...";
        throw DuplicatePoints("duplicate points: " + list);
    }
}

class BowyerWatson {
public:
    explicit BowyerWatson(std::span<const Vec2> pts) : pts_(pts) {}

    void run(const std::vector<int>& order) {
        // Seed with the first non-collinear triple in insertion order.
        const int a = order[0];
        const int b = order[1];
        std::size_t k = 2;
        while (k < order.size() && orient2d(pts_[a], pts_[b], pts_[order[k]]) == 0.0) ++k;
        if (k == order.size()) throw DegenerateInput("all points are collinear");
        int c = order[k];
        if (orient2d(pts_[a], pts_[b], pts_[c]) > 0.0) seed(a, b, c);
        else seed(a, c, b);

        for (std::size_t i = 2; i < order.size(); ++i)
            if (i != k) insert(order[i]);
    }

    std::vector<std::array<int, 3>> real_triangles() const {
        std::vector<std::array<int, 3>> out;
        for (const auto& t : tris_)
            if (t.alive && !t.is_ghost()) out.push_back(t.v);
        return out;
    }

private:
    void seed(int a, int b, int c) {
        tris_.push_back({{a, b, c}});
        // Ghost across each hull edge, formal ccw order with the ghost last.
        tris_.push_back({{b, a, kGhost}});  // across (a, b), opposite c
        tris_.push_back({{c, b, kGhost}});  // across (b, c), opposite a
        tris_.push_back({{a, c, kGhost}});  // across (c, a), opposite b
        tris_[0].nbr = {2, 3, 1};
        tris_[1].nbr[2] = 0;
        tris_[2].nbr[2] = 0;
        tris_[3].nbr[2] = 0;
        // Ghost-ghost adjacency: ghost (x, y, G) neighbours across (y, G) and (G, x).
        link_ghosts();
        last_ = 0;
    }

    void link_ghosts() {
        std::unordered_map<int, int> by_first;
        std::unordered_map<int, int> by_second;
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            if (!tris_[t].alive || !tris_[t].is_ghost()) continue;
            by_first[tris_[t].v[0]] = t;
            by_second[tris_[t].v[1]] = t;
        }
        for (auto& [first, t] : by_first) {
            // Across (y, G) (opposite x) is the ghost whose first vertex is y.
            tris_[t].nbr[0] = by_first.at(tris_[t].v[1]);
            tris_[t].nbr[1] = by_second.at(tris_[t].v[0]);
        }
    }

    bool conflicts(int t, int p) const {
        const Tri& tri = tris_[t];
        const Vec2& q = pts_[p];
        if (!tri.is_ghost()) return incircle(pts_[tri.v[0]], pts_[tri.v[1]], pts_[tri.v[2]], q) > 0.0;
        // Ghost stored as (x, y, G): exterior lies to the left of x -> y.
        const Vec2& x = pts_[tri.v[0]];
        const Vec2& y = pts_[tri.v[1]];
        const double o = orient2d(x, y, q);
        if (o > 0.0) return true;
        if (o < 0.0) return false;
        // Collinear: conflict only when q splits the hull edge.
        return dot(q - x, y - x) > 0.0 && dot(q - y, x - y) > 0.0;
    }

    int locate(int p) const {
        const Vec2& q = pts_[p];
        int t = last_;
        if (!tris_[t].alive) t = first_alive();
        if (tris_[t].is_ghost()) t = tris_[t].nbr[2];
        int came_from = kNone;
        const std::size_t limit = 4 * tris_.size() + 16;
        for (std::size_t step = 0; step < limit; ++step) {
            const Tri& tri = tris_[t];
            if (tri.is_ghost()) return t;
            int next = kNone;
            for (int r = 0; r < 3; ++r) {
                const int k = static_cast<int>((step + r) % 3);
                const int nb = tri.nbr[k];
                if (nb == came_from) continue;
                const Vec2& e0 = pts_[tri.v[(k + 1) % 3]];
                const Vec2& e1 = pts_[tri.v[(k + 2) % 3]];
                if (orient2d(e0, e1, q) < 0.0) {
                    next = nb;
                    break;
                }
            }
            if (next == kNone) return t;
            came_from = t;
            t = next;
        }
        // Walk did not settle; fall back to a scan.
        for (int i = 0; i < static_cast<int>(tris_.size()); ++i)
            if (tris_[i].alive && conflicts(i, p)) return i;
        throw DegenerateInput(fmt::format("could not locate point {}", p));
    }

    int first_alive() const {
        for (int i = 0; i < static_cast<int>(tris_.size()); ++i)
            if (tris_[i].alive) return i;
        return 0;
    }

    int new_tri(const std::array<int, 3>& v) {
        std::array<int, 3> w = v;
        // Keep the ghost in the last slot, preserving cyclic order.
        while (w[0] == kGhost || w[1] == kGhost) std::rotate(w.begin(), w.begin() + 1, w.end());
        if (!free_.empty()) {
            const int t = free_.back();
            free_.pop_back();
            tris_[t] = Tri{w};
            return t;
        }
        tris_.push_back(Tri{w});
        return static_cast<int>(tris_.size()) - 1;
    }

    void insert(int p) {
        const int start = locate(p);
        if (!conflicts(start, p)) throw DegenerateInput(fmt::format("point {} is not in conflict with its locating triangle", p));

        cavity_.clear();
        stack_.clear();
        stack_.push_back(start);
        tris_[start].alive = false;
        struct BoundaryEdge {
            int u, w, outside;
        };
        std::vector<BoundaryEdge> boundary;
        while (!stack_.empty()) {
            const int t = stack_.back();
            stack_.pop_back();
            cavity_.push_back(t);
            for (int k = 0; k < 3; ++k) {
                const int nb = tris_[t].nbr[k];
                if (!tris_[nb].alive) continue;  // already in cavity
                if (conflicts(nb, p)) {
                    tris_[nb].alive = false;
                    stack_.push_back(nb);
                } else {
                    boundary.push_back({tris_[t].v[(k + 1) % 3], tris_[t].v[(k + 2) % 3], nb});
                }
            }
        }

        std::unordered_map<int, int> by_start;
        std::unordered_map<int, int> by_end;
        std::vector<int> created;
        created.reserve(boundary.size());
        for (const auto& e : boundary) {
            const int t = new_tri({e.u, e.w, p});
            created.push_back(t);
            by_start[e.u] = t;
            by_end[e.w] = t;
            // Link with the triangle outside the cavity.
            Tri& tri = tris_[t];
            const int opp = slot_of(tri, p);
            tri.nbr[opp] = e.outside;
            Tri& out = tris_[e.outside];
            for (int k = 0; k < 3; ++k) {
                const int a = out.v[(k + 1) % 3];
                const int b = out.v[(k + 2) % 3];
                if (a == e.w && b == e.u) out.nbr[k] = t;
            }
        }
        for (std::size_t i = 0; i < boundary.size(); ++i) {
            const auto& e = boundary[i];
            Tri& tri = tris_[created[i]];
            // Across (w, p) lies the new triangle starting at w; across (p, u) the one ending at u.
            tri.nbr[slot_of(tri, e.u)] = by_start.at(e.w);
            tri.nbr[slot_of(tri, e.w)] = by_end.at(e.u);
        }
        for (int t : cavity_) free_.push_back(t);
        last_ = created.front();
        for (int t : created)
            if (!tris_[t].is_ghost()) {
                last_ = t;
                break;
            }
    }

    static int slot_of(const Tri& t, int v) {
        for (int k = 0; k < 3; ++k)
            if (t.v[k] == v) return k;
        return -1;
    }

    std::span<const Vec2> pts_;
    std::vector<Tri> tris_;
    std::vector<int> free_;
    std::vector<int> cavity_;
    std::vector<int> stack_;
    int last_ = 0;
};

} // namespace

TriMesh delaunay(std::span<const Vec2> points) {
    if (points.size() < 3) throw DegenerateInput(fmt::format("need at least 3 points, got {}", points.size()));
    BBox box{points[0], points[0]};
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ArgumentError("non-finite point");
        box.min.x = std::min(box.min.x, p.x);
        box.min.y = std::min(box.min.y, p.y);
        box.max.x = std::max(box.max.x, p.x);
        box.max.y = std::max(box.max.y, p.y);
    }
    check_duplicates(points, 1e-12 * box.diameter());

    BowyerWatson bw(points);
    bw.run(hilbert_order(points, box));
    return TriMesh::from_triangles(std::vector<Vec2>(points.begin(), points.end()), bw.real_triangles(), true);
}

TriMesh clip_to_domain(const TriMesh& mesh, const DomainGeometry& geom) {
    std::vector<int> remap(mesh.node_count(), -1);
    std::vector<Vec2> nodes;
    std::vector<int> origin;
    std::vector<std::array<int, 3>> tris;
    const double tol = 1e-10 * geom.diameter();
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        if (!(geom.signed_distance(mesh.centroid(t)) < -tol)) continue;
        std::array<int, 3> v{};
        for (int k = 0; k < 3; ++k) {
            const int old = mesh.tris[t][k];
            if (remap[old] < 0) {
                remap[old] = static_cast<int>(nodes.size());
                nodes.push_back(mesh.nodes[old]);
                origin.push_back(mesh.origin.empty() ? old : mesh.origin[old]);
            }
            v[k] = remap[old];
        }
        tris.push_back(v);
    }
    if (tris.empty()) throw EmptyMesh("clipping to '" + geom.name() + "' removed every triangle");
    TriMesh out = TriMesh::from_triangles(std::move(nodes), std::move(tris));
    out.origin = std::move(origin);
    return out;
}

TriMesh structured_rect_mesh(int n, Vec2 lo, Vec2 hi) {
    if (n < 1) throw ArgumentError("structured mesh needs n >= 1");
    std::vector<Vec2> nodes;
    nodes.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            nodes.push_back({lo.x + (hi.x - lo.x) * i / n, lo.y + (hi.y - lo.y) * j / n});
    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = j * (n + 1) + i;
            const int v10 = v00 + 1;
            const int v01 = v00 + n + 1;
            const int v11 = v01 + 1;
            tris.push_back({v00, v10, v11});
            tris.push_back({v00, v11, v01});
        }
    }
    return TriMesh::from_triangles(std::move(nodes), std::move(tris));
}

} // namespace bubblemesh
