#include "bubblemesh/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "bubblemesh/errors.hpp"

namespace bubblemesh {

namespace {

struct SegmentHit {
    double dist2 = std::numeric_limits<double>::infinity();
    Vec2 point;
};

Vec2 closest_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return a;
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    if (t == 0.0) return a;
    if (t == 1.0) return b;
    return a + t * ab;
}

SegmentHit nearest_boundary_point(const std::vector<BoundaryLoop>& loops, const Vec2& p) {
    SegmentHit best;
    for (const auto& loop : loops) {
        const auto* poly = std::get_if<PolylineLoop>(&loop);
        if (!poly) continue;
        for (std::size_t i = 0; i + 1 < poly->vertices.size(); ++i) {
            const Vec2 q = closest_on_segment(poly->vertices[i], poly->vertices[i + 1], p);
            const Vec2 d = p - q;
            const double d2 = dot(d, d);
            if (d2 < best.dist2) best = {d2, q};
        }
    }
    return best;
}

std::vector<PolylineLoop> polylines_of(const std::vector<BoundaryLoop>& loops) {
    std::vector<PolylineLoop> out;
    for (const auto& loop : loops)
        if (const auto* poly = std::get_if<PolylineLoop>(&loop)) out.push_back(*poly);
    return out;
}

double signed_area(const std::vector<Vec2>& closed) {
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < closed.size(); ++i) a += cross(closed[i], closed[i + 1]);
    return 0.5 * a;
}

} // namespace

bool polygon_contains(const std::vector<PolylineLoop>& loops, const Vec2& p) {
    bool inside = false;
    for (const auto& loop : loops) {
        const auto& v = loop.vertices;
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            const Vec2& a = v[i];
            const Vec2& b = v[i + 1];
            if ((a.y > p.y) != (b.y > p.y)) {
                const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x) inside = !inside;
            }
        }
    }
    return inside;
}

DomainGeometry DomainGeometry::polygon(std::string name, std::vector<std::vector<Vec2>> loops) {
    if (loops.empty()) throw ConfigError("polygon domain '" + name + "' has no boundary loops");
    DomainGeometry g;
    g.name_ = std::move(name);
    g.bbox_ = {{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
               {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
    for (auto& loop : loops) {
        if (loop.size() >= 2 && loop.front() == loop.back()) loop.pop_back();
        if (loop.size() < 3)
            throw ConfigError("polygon loop in '" + g.name_ + "' needs at least 3 vertices");
        for (const auto& v : loop) {
            g.corners_.push_back(v);
            g.bbox_.min.x = std::min(g.bbox_.min.x, v.x);
            g.bbox_.min.y = std::min(g.bbox_.min.y, v.y);
            g.bbox_.max.x = std::max(g.bbox_.max.x, v.x);
            g.bbox_.max.y = std::max(g.bbox_.max.y, v.y);
        }
        loop.push_back(loop.front());
        g.loops_.emplace_back(PolylineLoop{std::move(loop)});
    }
    // Outer loop counterclockwise; the sign of the others is irrelevant to even-odd tests.
    auto& outer = std::get<PolylineLoop>(g.loops_.front()).vertices;
    if (signed_area(outer) < 0.0) std::reverse(outer.begin(), outer.end());
    return g;
}

DomainGeometry DomainGeometry::circle(std::string name, Vec2 center, double radius) {
    if (!(radius > 0.0)) throw ConfigError("circle radius must be positive");
    DomainGeometry g;
    g.name_ = std::move(name);
    g.loops_.emplace_back(ArcLoop{center, radius, 0.0, 2.0 * std::numbers::pi});
    g.bbox_ = {{center.x - radius, center.y - radius}, {center.x + radius, center.y + radius}};
    return g;
}

bool DomainGeometry::is_circle() const {
    return loops_.size() == 1 && std::holds_alternative<ArcLoop>(loops_.front());
}

double DomainGeometry::signed_distance(const Vec2& p) const {
    if (is_circle()) {
        const auto& arc = std::get<ArcLoop>(loops_.front());
        return distance(p, arc.center) - arc.radius;
    }
    const SegmentHit hit = nearest_boundary_point(loops_, p);
    const double d = std::sqrt(hit.dist2);
    if (d == 0.0) return 0.0;
    return polygon_contains(polylines_of(loops_), p) ? -d : d;
}

Vec2 DomainGeometry::project_to_boundary(const Vec2& p) const {
    if (is_circle()) {
        const auto& arc = std::get<ArcLoop>(loops_.front());
        const Vec2 r = p - arc.center;
        const double len = norm(r);
        if (len == 0.0) return arc.center + Vec2{arc.radius, 0.0};
        return arc.center + r * (arc.radius / len);
    }
    return nearest_boundary_point(loops_, p).point;
}

double DomainGeometry::loop_length(std::size_t loop) const {
    const auto& l = loops_.at(loop);
    if (const auto* arc = std::get_if<ArcLoop>(&l)) return arc->radius * arc->span;
    const auto& v = std::get<PolylineLoop>(l).vertices;
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) len += distance(v[i], v[i + 1]);
    return len;
}

Vec2 DomainGeometry::loop_point(std::size_t loop, double s) const {
    const auto& l = loops_.at(loop);
    if (const auto* arc = std::get_if<ArcLoop>(&l)) {
        const double t = arc->start_angle + s / arc->radius;
        return arc->center + Vec2{arc->radius * std::cos(t), arc->radius * std::sin(t)};
    }
    const auto& v = std::get<PolylineLoop>(l).vertices;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double len = distance(v[i], v[i + 1]);
        if (s <= len || i + 2 == v.size()) {
            const double t = std::clamp(s / len, 0.0, 1.0);
            return v[i] + t * (v[i + 1] - v[i]);
        }
        s -= len;
    }
    return v.back();
}

Vec2 DomainGeometry::loop_tangent(std::size_t loop, double s) const {
    const auto& l = loops_.at(loop);
    if (const auto* arc = std::get_if<ArcLoop>(&l)) {
        const double t = arc->start_angle + s / arc->radius;
        return {-std::sin(t), std::cos(t)};
    }
    const auto& v = std::get<PolylineLoop>(l).vertices;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double len = distance(v[i], v[i + 1]);
        if (s <= len || i + 2 == v.size()) return (v[i + 1] - v[i]) * (1.0 / len);
        s -= len;
    }
    return {1.0, 0.0};
}

DomainPreset parse_domain_preset(std::string_view name) {
    if (name == "equilateral_triangle") return DomainPreset::equilateral_triangle;
    if (name == "unit_circle") return DomainPreset::unit_circle;
    if (name == "regular_pentagon") return DomainPreset::regular_pentagon;
    if (name == "l_shape") return DomainPreset::l_shape;
    if (name == "square3") return DomainPreset::square3;
    throw ConfigError("unknown domain preset '" + std::string(name) + "'");
}

std::string_view to_string(DomainPreset preset) {
    switch (preset) {
    case DomainPreset::equilateral_triangle: return "equilateral_triangle";
    case DomainPreset::unit_circle: return "unit_circle";
    case DomainPreset::regular_pentagon: return "regular_pentagon";
    case DomainPreset::l_shape: return "l_shape";
    case DomainPreset::square3: return "square3";
    }
    return "unknown";
}

DomainGeometry preset_domain(DomainPreset preset) {
    const std::string name(to_string(preset));
    switch (preset) {
    case DomainPreset::equilateral_triangle:
        return DomainGeometry::polygon(name, {{{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}}});
    case DomainPreset::unit_circle:
        return DomainGeometry::circle(name, {0.0, 0.0}, 1.0);
    case DomainPreset::regular_pentagon: {
        // Circumradius 1, one vertex straight up.
        std::vector<Vec2> v;
        for (int k = 0; k < 5; ++k) {
            const double t = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / 5.0;
            v.push_back({std::cos(t), std::sin(t)});
        }
        v[0] = {0.0, 1.0};
        return DomainGeometry::polygon(name, {v});
    }
    case DomainPreset::l_shape:
        // (-1,1)^2 minus [0,1]x[-1,0]; re-entrant corner at the origin.
        return DomainGeometry::polygon(
            name, {{{-1.0, -1.0}, {0.0, -1.0}, {0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {-1.0, 1.0}}});
    case DomainPreset::square3:
        return DomainGeometry::polygon(name, {{{-3.0, -3.0}, {3.0, -3.0}, {3.0, 3.0}, {-3.0, 3.0}}});
    }
    throw ConfigError("unknown domain preset");
}

DomainGeometry preset_domain(std::string_view name) { return preset_domain(parse_domain_preset(name)); }

DomainGeometry load_polygon_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open polygon file " + path.string());
    std::vector<Vec2> loop;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Vec2 p;
        if (!(ls >> p.x >> p.y))
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'x y'");
        loop.push_back(p);
    }
    return DomainGeometry::polygon(path.stem().string(), {std::move(loop)});
}

} // namespace bubblemesh
