#include "bubblemesh/bubbles.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <fmt/format.h>

#include "bubblemesh/errors.hpp"

namespace bubblemesh {

namespace {

constexpr double kSupport = 1.5;

/// Uniform bucket grid over a point set; rebuilt whenever positions change.
class NeighborGrid {
public:
    NeighborGrid(std::span<const Vec2> pts, double cell) : cell_(cell) {
        lo_ = pts.empty() ? Vec2{} : pts[0];
        Vec2 hi = lo_;
        for (const auto& p : pts) {
            lo_.x = std::min(lo_.x, p.x);
            lo_.y = std::min(lo_.y, p.y);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
        }
        nx_ = static_cast<int>((hi.x - lo_.x) / cell_) + 1;
        ny_ = static_cast<int>((hi.y - lo_.y) / cell_) + 1;
        start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
        cell_of_.resize(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            cell_of_[i] = index(pts[i]);
            ++start_[cell_of_[i] + 1];
        }
        for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
        items_.resize(pts.size());
        std::vector<int> fill(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[cell_of_[i]]++] = static_cast<int>(i);
    }

    /// Visits every unordered pair in adjacent cells once, in a fixed order.
    template <class Fn>
    void for_each_pair(Fn&& fn) const {
        static constexpr int offsets[4][2] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};
        for (int cy = 0; cy < ny_; ++cy) {
            for (int cx = 0; cx < nx_; ++cx) {
                const int c = cy * nx_ + cx;
                for (int a = start_[c]; a < start_[c + 1]; ++a)
                    for (int b = a + 1; b < start_[c + 1]; ++b) fn(items_[a], items_[b]);
                for (const auto& o : offsets) {
                    const int ox = cx + o[0];
                    const int oy = cy + o[1];
                    if (ox < 0 || ox >= nx_ || oy >= ny_) continue;
                    const int d = oy * nx_ + ox;
                    for (int a = start_[c]; a < start_[c + 1]; ++a)
                        for (int b = start_[d]; b < start_[d + 1]; ++b) fn(items_[a], items_[b]);
                }
            }
        }
    }

    template <class Fn>
    void for_each_near(const Vec2& p, Fn&& fn) const {
        const int cx = static_cast<int>(std::floor((p.x - lo_.x) / cell_));
        const int cy = static_cast<int>(std::floor((p.y - lo_.y) / cell_));
        for (int y = cy - 1; y <= cy + 1; ++y) {
            if (y < 0 || y >= ny_) continue;
            for (int x = cx - 1; x <= cx + 1; ++x) {
                if (x < 0 || x >= nx_) continue;
                const int c = y * nx_ + x;
                for (int a = start_[c]; a < start_[c + 1]; ++a) fn(items_[a]);
            }
        }
    }

private:
    int index(const Vec2& p) const {
        const int cx = std::clamp(static_cast<int>((p.x - lo_.x) / cell_), 0, nx_ - 1);
        const int cy = std::clamp(static_cast<int>((p.y - lo_.y) / cell_), 0, ny_ - 1);
        return cy * nx_ + cx;
    }

    double cell_;
    Vec2 lo_;
    int nx_ = 1;
    int ny_ = 1;
    std::vector<int> start_;
    std::vector<int> items_;
    std::vector<int> cell_of_;
};

struct PairContext {
    std::vector<Vec2> pos;
    std::vector<double> size;
    double max_size = 0.0;
};

PairContext make_context(const BubbleSystem& sys) {
    PairContext ctx;
    ctx.pos = sys.positions();
    ctx.size.resize(ctx.pos.size());
    for (std::size_t i = 0; i < ctx.pos.size(); ++i) {
        ctx.size[i] = sys.size().evaluate(ctx.pos[i]);
        ctx.max_size = std::max(ctx.max_size, ctx.size[i]);
    }
    return ctx;
}

/// Calls fn(i, j, delta = p_i - p_j, dist, target) for every pair within the force support.
template <class Fn>
void for_each_force_pair(const PairContext& ctx, Fn&& fn) {
    if (ctx.pos.size() < 2) return;
    NeighborGrid grid(ctx.pos, kSupport * ctx.max_size);
    grid.for_each_pair([&](int a, int b) {
        const int i = std::min(a, b);
        const int j = std::max(a, b);
        const Vec2 d = ctx.pos[i] - ctx.pos[j];
        const double target = 0.5 * (ctx.size[i] + ctx.size[j]);
        const double dist2 = dot(d, d);
        if (dist2 > kSupport * kSupport * target * target) return;
        fn(i, j, d, std::sqrt(dist2), target);
    });
}

struct ForceState {
    std::vector<Vec2> force;
    double max_residual = 0.0;
    double max_abs_fusion = 0.0;
};

ForceState compute_forces(const BubbleSystem& sys, const PairContext& ctx) {
    const double k0 = sys.params().k0;
    ForceState st;
    st.force.assign(ctx.pos.size(), Vec2{});
    for_each_force_pair(ctx, [&](int i, int j, const Vec2& d, double dist, double target) {
        st.max_abs_fusion = std::max(st.max_abs_fusion, std::abs(fusion_degree(target, dist)));
        if (dist == 0.0) return;
        const double mag = interbubble_force_magnitude(dist / target, k0) * target;
        const Vec2 f = d * (mag / dist);
        st.force[i] += f;
        st.force[j] -= f;
    });
    for (std::size_t i = 0; i < sys.bubbles.size(); ++i) {
        const Bubble& b = sys.bubbles[i];
        double r = 0.0;
        if (b.mobility == Mobility::interior) {
            r = norm(st.force[i]);
        } else if (b.mobility == Mobility::boundary_slide) {
            const Vec2 t = sys.geom().loop_tangent(*b.boundary_id, b.track.s);
            r = std::abs(dot(st.force[i], t));
        }
        st.max_residual = std::max(st.max_residual, r / (k0 * ctx.size[i]));
    }
    return st;
}

double wrap(double s, double period) {
    s = std::fmod(s, period);
    return s < 0.0 ? s + period : s;
}

void keep_inside(const BubbleSystem& sys, Bubble& b, const Vec2& previous, double local_size) {
    const double margin = sys.params().interior_margin * local_size;
    if (sys.geom().signed_distance(b.pos) < -margin) return;
    const Vec2 q = sys.geom().project_to_boundary(b.pos);
    Vec2 inward = previous - q;
    const double len = norm(inward);
    Vec2 candidate = previous;
    if (len > 0.0) candidate = q + inward * (margin / len);
    if (!(sys.geom().signed_distance(candidate) < 0.0)) candidate = previous;
    b.pos = candidate;
    b.vel = {};
}

/// 1D subdivision of [0, length] into round(integral of 1/size) pieces; returns
/// the interior break points (and 0 when `include_start`).
std::vector<double> subdivide(const DomainGeometry& g, std::size_t loop, const SizeField& size, double s0,
                              double length, bool include_start) {
    // Resolve the smallest size along the piece with several samples.
    double smin = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 2048; ++k) smin = std::min(smin, size.evaluate(g.loop_point(loop, s0 + length * k / 2048.0)));
    const auto samples =
        static_cast<std::size_t>(std::clamp(std::ceil(16.0 * length / smin), 2048.0, 4.0e6));
    std::vector<double> cum(samples + 1, 0.0);
    const double ds = length / static_cast<double>(samples);
    for (std::size_t k = 0; k < samples; ++k)
        cum[k + 1] = cum[k] + ds / size.evaluate(g.loop_point(loop, s0 + (static_cast<double>(k) + 0.5) * ds));
    const double total = cum.back();
    const long pieces = std::max(include_start ? 3L : 1L, std::lround(total));
    std::vector<double> out;
    if (include_start) out.push_back(s0);
    for (long k = 1; k < pieces; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(pieces);
        const auto it = std::lower_bound(cum.begin(), cum.end(), target);
        const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cum.begin()));
        const double frac = (target - cum[idx - 1]) / (cum[idx] - cum[idx - 1]);
        out.push_back(s0 + (static_cast<double>(idx - 1) + frac) * ds);
    }
    return out;
}

double min_size_over_bbox(const DomainGeometry& g, const SizeField& size) {
    if (size.kind() == SizeKind::constant) return size.h();
    constexpr int n = 200;
    const BBox& b = g.bbox();
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const Vec2 p{b.min.x + (b.max.x - b.min.x) * i / n, b.min.y + (b.max.y - b.min.y) * j / n};
            m = std::min(m, size.evaluate(p));
        }
    if (!(m > 0.0)) throw ConfigError("size field must be positive over the domain");
    return m;
}

// Hexagonal lattice of the given pitch anchored at `origin`, clipped to [lo, hi].
template <class Visit>
void hex_lattice(Vec2 origin, Vec2 lo, Vec2 hi, double pitch, double tol, Visit&& visit) {
    const double row = pitch * std::sqrt(3.0) / 2.0;
    for (auto j = static_cast<long>(std::ceil((lo.y - origin.y) / row - 1e-9));; ++j) {
        const double y = origin.y + static_cast<double>(j) * row;
        if (y > hi.y + tol) break;
        const double shift = (j % 2) ? 0.5 * pitch : 0.0;
        for (auto i = static_cast<long>(std::ceil((lo.x - origin.x - shift) / pitch - 1e-9));; ++i) {
            const double x = origin.x + shift + static_cast<double>(i) * pitch;
            if (x > hi.x + tol) break;
            visit(Vec2{x, y});
        }
    }
}

// Splits square cells until each is at most a few local sizes wide and emits
// a candidate lattice finer than the smallest size in each leaf.
void graded_candidates(const DomainGeometry& geom, const SizeField& size, Vec2 origin, Vec2 lo, double side,
                       int depth, std::mt19937_64& rng, std::vector<Vec2>& out) {
    if (geom.signed_distance(lo + Vec2{0.5 * side, 0.5 * side}) > 0.75 * side) return;
    constexpr int n = 6;
    double smin = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) smin = std::min(smin, size.evaluate(lo + Vec2{side * i / n, side * j / n}));
    if (side > 8.0 * smin && depth < 30) {
        const double half = 0.5 * side;
        for (int q = 0; q < 4; ++q)
            graded_candidates(geom, size, origin, lo + Vec2{(q % 2) * half, (q / 2) * half}, half, depth + 1, rng,
                              out);
        return;
    }
    // Jitter within half a pitch so candidate spacings are not quantized.
    const Vec2 hi = lo + Vec2{side, side};
    const double pitch = 0.5 * smin;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    hex_lattice(origin, lo, hi, pitch, 0.0, [&](Vec2 p) {
        if (p.x >= hi.x || p.y >= hi.y) return;
        const double r = 0.5 * pitch * std::sqrt(unit(rng));
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        out.push_back(p + Vec2{r * std::cos(phi), r * std::sin(phi)});
    });
}

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using RPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using RBox = bg::model::box<RPoint>;
using RValue = std::pair<RPoint, double>;  // position, local size

// Poisson-disk selection with separation `spacing * (s_p + s_q) / 2`. Random
// sequential packing jams near 0.55 area coverage, which matches the density
// of a hexagonal lattice of pitch s at separation 0.78 s.
void seed_graded(BubbleSystem& sys, std::mt19937_64& rng) {
    constexpr double spacing = 0.66;
    const DomainGeometry& geom = sys.geom();
    const SizeField& size = sys.size();
    const BpmParams& prm = sys.params();
    const BBox& box = geom.bbox();
    const double side = std::max(box.max.x - box.min.x, box.max.y - box.min.y);
    std::vector<Vec2> cand;
    graded_candidates(geom, size, box.min, box.min, side, 0, rng, cand);
    for (std::size_t i = cand.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(cand[i - 1], cand[pick(rng)]);
    }

    bgi::rtree<RValue, bgi::rstar<16>> tree;
    for (const auto& b : sys.bubbles) tree.insert({RPoint(b.pos.x, b.pos.y), size.evaluate(b.pos)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RValue> near;
    for (const Vec2& c : cand) {
        const double local = size.evaluate(c);
        if (geom.signed_distance(c) >= -prm.seed_clearance * local) continue;
        // Neighbour sizes are assumed within a factor 2 of the local size.
        const double reach = 1.5 * spacing * local;
        near.clear();
        tree.query(bgi::intersects(RBox(RPoint(c.x - reach, c.y - reach), RPoint(c.x + reach, c.y + reach))),
                   std::back_inserter(near));
        const bool free = std::none_of(near.begin(), near.end(), [&](const RValue& v) {
            const Vec2 q{bg::get<0>(v.first), bg::get<1>(v.first)};
            return distance(c, q) < spacing * 0.5 * (local + v.second);
        });
        if (!free) continue;
        tree.insert({RPoint(c.x, c.y), local});
        const double r = prm.seed_jitter * local * std::sqrt(unit(rng));
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        const Vec2 p = c + Vec2{r * std::cos(phi), r * std::sin(phi)};
        if (geom.signed_distance(p) >= -prm.seed_clearance * local) continue;
        sys.bubbles.push_back({p, {}, Mobility::interior, std::nullopt, {}});
    }
}

void check_finite(const Bubble& b, double dt, int step) {
    if (!std::isfinite(b.pos.x) || !std::isfinite(b.pos.y) || !std::isfinite(b.vel.x) || !std::isfinite(b.vel.y))
        throw SimulationDivergence(fmt::format("bubble state became non-finite at step {} (dt = {})", step, dt));
}

} // namespace

std::string_view to_string(Mobility m) {
    switch (m) {
    case Mobility::fixed_corner: return "fixed_corner";
    case Mobility::boundary_slide: return "boundary_slide";
    case Mobility::interior: return "interior";
    }
    return "unknown";
}

BubbleSystem::BubbleSystem(const DomainGeometry& geom, const SizeField& size, BpmParams params)
    : geom_(&geom), size_(&size), params_(params) {}

std::size_t BubbleSystem::count(Mobility m) const {
    return static_cast<std::size_t>(
        std::count_if(bubbles.begin(), bubbles.end(), [m](const Bubble& b) { return b.mobility == m; }));
}

std::vector<Vec2> BubbleSystem::positions() const {
    std::vector<Vec2> out(bubbles.size());
    for (std::size_t i = 0; i < bubbles.size(); ++i) out[i] = bubbles[i].pos;
    return out;
}

double interbubble_force_magnitude(double w, double k0) {
    if (w < 0.0) throw ArgumentError(fmt::format("force argument w must be >= 0, got {}", w));
    if (w > kSupport) return 0.0;
    return k0 * ((1.25 * w - 2.375) * w * w + 1.125);
}

double fusion_degree(double l_target, double l_actual) {
    if (!(l_target > 0.0)) throw ArgumentError(fmt::format("target length must be positive, got {}", l_target));
    return 1.0 - l_actual / l_target;
}

BubbleSystem initialize(const DomainGeometry& geom, const SizeField& size, std::uint64_t seed, BpmParams params) {
    BubbleSystem sys(geom, size, params);

    for (const auto& c : geom.corners()) sys.bubbles.push_back({c, {}, Mobility::fixed_corner, std::nullopt, {}});

    for (std::size_t l = 0; l < geom.boundary_loops().size(); ++l) {
        const auto& loop = geom.boundary_loops()[l];
        if (std::holds_alternative<ArcLoop>(loop)) {
            const double len = geom.loop_length(l);
            for (double s : subdivide(geom, l, size, 0.0, len, true)) {
                Bubble b{geom.loop_point(l, s), {}, Mobility::boundary_slide, l, {s, 0.0, len, true}};
                sys.bubbles.push_back(b);
            }
            continue;
        }
        const auto& v = std::get<PolylineLoop>(loop).vertices;
        double s0 = 0.0;
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
            const double len = distance(v[k], v[k + 1]);
            const auto breaks = subdivide(geom, l, size, s0, len, false);
            // Keep sliding bubbles a fraction of the local spacing away from the corners.
            const double lo = breaks.empty() ? s0 : s0 + 0.1 * (breaks.front() - s0);
            const double hi = breaks.empty() ? s0 + len : s0 + len - 0.1 * (s0 + len - breaks.back());
            for (double s : breaks) {
                Bubble b{geom.loop_point(l, s), {}, Mobility::boundary_slide, l, {s, lo, hi, false}};
                sys.bubbles.push_back(b);
            }
            s0 += len;
        }
    }

    std::mt19937_64 rng(seed);
    if (size.kind() == SizeKind::constant) {
        // Jittered hexagonal lattice of pitch h anchored at the bounding-box corner.
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double h = size.h();
        hex_lattice(geom.bbox().min, geom.bbox().min, geom.bbox().max, h, 1e-12, [&](Vec2 c) {
            const double r = params.seed_jitter * h * std::sqrt(unit(rng));
            const double phi = 2.0 * std::numbers::pi * unit(rng);
            const Vec2 p = c + Vec2{r * std::cos(phi), r * std::sin(phi)};
            if (geom.signed_distance(p) < -params.seed_clearance * h)
                sys.bubbles.push_back({p, {}, Mobility::interior, std::nullopt, {}});
        });
    } else {
        min_size_over_bbox(geom, size);
        seed_graded(sys, rng);
    }
    return sys;
}

InnerLoopReport inner_loop(BubbleSystem& sys, int max_steps, double tol_force, const SnapshotFn& snapshot,
                           int snapshot_every) {
    if (max_steps < 1) throw ArgumentError("max_steps must be >= 1");
    const BpmParams& prm = sys.params();
    const double dt = prm.dt;
    const double c = prm.c_damp;

    InnerLoopReport report;
    PairContext ctx = make_context(sys);
    ForceState st = compute_forces(sys, ctx);
    for (const auto& b : sys.bubbles) report.max_speed = std::max(report.max_speed, norm(b.vel));

    while (st.max_residual >= tol_force * prm.k0 && report.steps_taken < max_steps) {
        ++report.steps_taken;
        for (std::size_t i = 0; i < sys.bubbles.size(); ++i) {
            Bubble& b = sys.bubbles[i];
            switch (b.mobility) {
            case Mobility::fixed_corner:
                break;
            case Mobility::interior: {
                const Vec2 previous = b.pos;
                b.vel += dt * (st.force[i] - c * b.vel);
                b.pos += dt * b.vel;
                check_finite(b, dt, report.steps_taken);
                keep_inside(sys, b, previous, ctx.size[i]);
                break;
            }
            case Mobility::boundary_slide: {
                const std::size_t loop = *b.boundary_id;
                const Vec2 t = sys.geom().loop_tangent(loop, b.track.s);
                double vs = dot(b.vel, t);
                vs += dt * (dot(st.force[i], t) - c * vs);
                double s = b.track.s + dt * vs;
                if (b.track.periodic) {
                    s = wrap(s, b.track.s_max);
                } else if (s < b.track.s_min || s > b.track.s_max) {
                    s = std::clamp(s, b.track.s_min, b.track.s_max);
                    vs = 0.0;
                }
                b.track.s = s;
                b.pos = sys.geom().loop_point(loop, s);
                b.vel = vs * sys.geom().loop_tangent(loop, s);
                check_finite(b, dt, report.steps_taken);
                break;
            }
            }
            report.max_speed = std::max(report.max_speed, norm(b.vel));
        }
        ctx = make_context(sys);
        st = compute_forces(sys, ctx);
        if (snapshot && snapshot_every > 0 && report.steps_taken % snapshot_every == 0)
            snapshot(report.steps_taken, sys);
    }
    report.max_residual_force = st.max_residual / prm.k0;
    report.max_abs_fusion_degree = st.max_abs_fusion;
    return report;
}

PairStats force_pair_fusion(const BubbleSystem& sys) {
    const PairContext ctx = make_context(sys);
    PairStats stats;
    double sum = 0.0;
    double sum2 = 0.0;
    std::size_t interior_pairs = 0;
    for_each_force_pair(ctx, [&](int i, int j, const Vec2&, double dist, double target) {
        const double cij = fusion_degree(target, dist);
        stats.max_abs = std::max(stats.max_abs, std::abs(cij));
        ++stats.pairs;
        if (sys.bubbles[i].mobility == Mobility::interior && sys.bubbles[j].mobility == Mobility::interior) {
            sum += cij;
            sum2 += cij * cij;
            ++interior_pairs;
        }
    });
    if (interior_pairs > 0) {
        stats.mean = sum / static_cast<double>(interior_pairs);
        stats.stddev = std::sqrt(std::max(0.0, sum2 / static_cast<double>(interior_pairs) - stats.mean * stats.mean));
    }
    return stats;
}

TriMesh triangulate_bubbles(const BubbleSystem& sys) {
    const auto pts = sys.positions();
    return clip_to_domain(delaunay(pts), sys.geom());
}

PairStats mesh_edge_fusion(const BubbleSystem& sys, const TriMesh& mesh) {
    PairStats stats;
    double sum = 0.0;
    double sum2 = 0.0;
    std::size_t interior_pairs = 0;
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const int a = mesh.edges[e].nodes[0];
        const int b = mesh.edges[e].nodes[1];
        const double target = sys.size().pair_target(mesh.nodes[a], mesh.nodes[b]);
        const double cij = fusion_degree(target, mesh.edge_length(e));
        stats.max_abs = std::max(stats.max_abs, std::abs(cij));
        ++stats.pairs;
        const auto& ba = sys.bubbles[static_cast<std::size_t>(mesh.origin[a])];
        const auto& bb = sys.bubbles[static_cast<std::size_t>(mesh.origin[b])];
        if (ba.mobility == Mobility::interior && bb.mobility == Mobility::interior) {
            sum += cij;
            sum2 += cij * cij;
            ++interior_pairs;
        }
    }
    if (interior_pairs > 0) {
        stats.mean = sum / static_cast<double>(interior_pairs);
        stats.stddev = std::sqrt(std::max(0.0, sum2 / static_cast<double>(interior_pairs) - stats.mean * stats.mean));
    }
    return stats;
}

namespace {

struct Adjustment {
    std::size_t deleted = 0;
    std::size_t inserted = 0;
};

// A sliding bubble halfway along the boundary between two sliders that share
// a track, or nothing when the pair does not.
std::optional<Bubble> boundary_midpoint(const BubbleSystem& sys, std::size_t i, std::size_t j) {
    const Bubble& a = sys.bubbles[i];
    const Bubble& b = sys.bubbles[j];
    if (a.mobility != Mobility::boundary_slide || b.mobility != Mobility::boundary_slide) return std::nullopt;
    if (a.boundary_id != b.boundary_id || a.track.s_min != b.track.s_min || a.track.s_max != b.track.s_max)
        return std::nullopt;
    const std::size_t loop = *a.boundary_id;
    double mid = 0.5 * (a.track.s + b.track.s);
    if (a.track.periodic) {
        const double len = sys.geom().loop_length(loop);
        if (std::abs(a.track.s - b.track.s) > 0.5 * len) mid = std::fmod(mid + 0.5 * len, len);
    }
    Bubble out = a;
    out.pos = sys.geom().loop_point(loop, mid);
    out.vel = {};
    out.track.s = mid;
    return out;
}

Adjustment adjust_population(BubbleSystem& sys, double epsilon, std::size_t limit) {
    const BpmParams& prm = sys.params();
    const std::size_t n = sys.bubbles.size();
    const TriMesh mesh = triangulate_bubbles(sys);
    const auto& pos = mesh.nodes;

    struct EdgeC {
        double c;
        int e;
    };
    std::vector<EdgeC> ranked;
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const auto& ed = mesh.edges[e];
        const double target = sys.size().pair_target(pos[ed.nodes[0]], pos[ed.nodes[1]]);
        ranked.push_back({fusion_degree(target, mesh.edge_length(e)), static_cast<int>(e)});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const EdgeC& a, const EdgeC& b) { return std::abs(a.c) > std::abs(b.c); });

    // Per-node total overlap, used to pick which endpoint of an overlapping edge goes.
    std::vector<double> overlap(mesh.node_count(), 0.0);
    std::vector<std::vector<int>> adj(mesh.node_count());
    for (const auto& r : ranked) {
        const auto& ed = mesh.edges[r.e];
        if (r.c > 0.0) overlap[ed.nodes[0]] += r.c, overlap[ed.nodes[1]] += r.c;
        adj[ed.nodes[0]].push_back(ed.nodes[1]);
        adj[ed.nodes[1]].push_back(ed.nodes[0]);
    }

    const double threshold = std::max(prm.adjust_floor, prm.adjust_ratio * epsilon);
    std::size_t budget = std::max<std::size_t>(1, limit);
    Adjustment adj_count;
    std::vector<char> touched(mesh.node_count(), 0);
    std::vector<char> remove(n, 0);
    std::vector<Vec2> added;
    std::vector<Bubble> added_boundary;

    auto is_interior = [&](int node) { return sys.bubbles[mesh.origin[node]].mobility == Mobility::interior; };
    auto touch = [&](int node) {
        touched[node] = 1;
        for (int j : adj[node]) touched[j] = 1;
    };

    for (const auto& r : ranked) {
        if (budget == 0 || std::abs(r.c) <= threshold) break;
        const auto& ed = mesh.edges[r.e];
        const int a = ed.nodes[0];
        const int b = ed.nodes[1];
        if (touched[a] || touched[b]) continue;
        if (r.c > 0.0) {
            int victim = -1;
            if (is_interior(a) && (!is_interior(b) || overlap[a] >= overlap[b])) victim = a;
            else if (is_interior(b)) victim = b;
            if (victim < 0) continue;
            remove[mesh.origin[victim]] = 1;
            touch(a);
            touch(b);
            ++adj_count.deleted;
        } else if (auto slider = boundary_midpoint(sys, mesh.origin[a], mesh.origin[b])) {
            added_boundary.push_back(*slider);
            touch(a);
            touch(b);
            ++adj_count.inserted;
        } else {
            // Fill the gap at the circumcentre of the larger incident triangle.
            Vec2 best = (pos[a] + pos[b]) * 0.5;
            double best_r = -1.0;
            for (int t : ed.tris) {
                if (t < 0) continue;
                const auto& v = mesh.tris[t];
                const Vec2 p0 = pos[v[0]], p1 = pos[v[1]], p2 = pos[v[2]];
                const Vec2 u = p1 - p0, w = p2 - p0;
                const double d = 2.0 * cross(u, w);
                const Vec2 cc = p0 + Vec2{(w.y * dot(u, u) - u.y * dot(w, w)) / d, (u.x * dot(w, w) - w.x * dot(u, u)) / d};
                const double rad = distance(cc, p0);
                if (rad > best_r) best_r = rad, best = cc;
            }
            const double local = sys.size().evaluate(best);
            if (!(sys.geom().signed_distance(best) < -prm.seed_clearance * local)) continue;
            added.push_back(best);
            touch(a);
            touch(b);
            ++adj_count.inserted;
        }
        --budget;
    }

    std::vector<Bubble> next;
    next.reserve(n - adj_count.deleted + added.size());
    for (std::size_t i = 0; i < n; ++i)
        if (!remove[i]) next.push_back(sys.bubbles[i]);
    for (const auto& p : added) next.push_back({p, {}, Mobility::interior, std::nullopt, {}});
    next.insert(next.end(), added_boundary.begin(), added_boundary.end());
    for (auto& b : next) b.vel = {};
    sys.bubbles = std::move(next);
    return adj_count;
}

OuterRound measure_round(const BubbleSystem& sys) {
    OuterRound r;
    r.bubbles = sys.bubbles.size();
    r.epsilon = mesh_edge_fusion(sys, triangulate_bubbles(sys)).max_abs;
    r.epsilon_force = force_pair_fusion(sys).max_abs;
    return r;
}

} // namespace

OuterLoopResult outer_loop(BubbleSystem sys, int max_rounds, const SnapshotFn& snapshot, int snapshot_every) {
    OuterLoopResult result{sys, {}, {}, 0};
    result.rounds.push_back(measure_round(sys));
    result.epsilon_history.push_back(result.rounds.back().epsilon);
    double best = result.rounds.back().epsilon;
    const auto full_budget = static_cast<std::size_t>(sys.params().churn * static_cast<double>(sys.bubbles.size()));
    std::size_t budget = full_budget;
    int stalled = 0;

    // Each round adjusts the best state found so far. A round that fails to
    // improve on it is rolled back and the next one makes half as many changes.
    for (int round = 1; round <= max_rounds && stalled < sys.params().max_stalled; ++round) {
        const Adjustment adj = adjust_population(sys, best, budget);
        const InnerLoopReport inner =
            inner_loop(sys, sys.params().max_inner_steps, sys.params().tol_force, snapshot, snapshot_every);
        OuterRound r = measure_round(sys);
        r.deleted = adj.deleted;
        r.inserted = adj.inserted;
        r.inner_steps = inner.steps_taken;
        result.rounds.push_back(r);
        result.epsilon_history.push_back(r.epsilon);
        if (r.epsilon < best) {
            best = r.epsilon;
            result.system = sys;
            result.best_round = static_cast<std::size_t>(round);
            budget = full_budget;
            stalled = 0;
        } else {
            sys = result.system;
            budget = std::max<std::size_t>(1, (adj.deleted + adj.inserted) / 2);
            ++stalled;
        }
    }
    return result;
}

BpmResult run_bpm(const DomainGeometry& geom, const SizeField& size, std::uint64_t seed, BpmParams params,
                  const SnapshotFn& snapshot, int snapshot_every) {
    BubbleSystem sys = initialize(geom, size, seed, params);
    if (snapshot) snapshot(0, sys);
    const InnerLoopReport first = inner_loop(sys, params.max_inner_steps, params.tol_force, snapshot, snapshot_every);
    OuterLoopResult outer = outer_loop(std::move(sys), params.max_rounds, snapshot, snapshot_every);
    TriMesh mesh = triangulate_bubbles(outer.system);
    return {std::move(outer.system), std::move(mesh), first, std::move(outer.rounds), std::move(outer.epsilon_history)};
}

} // namespace bubblemesh
