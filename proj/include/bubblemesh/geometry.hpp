#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bubblemesh/vec2.hpp"

namespace bubblemesh {

// Closed polyline; the last vertex repeats the first.
struct PolylineLoop {
    std::vector<Vec2> vertices;

    std::size_t segment_count() const { return vertices.size() - 1; }
};

// Circular arc spanning `span` radians counterclockwise from `start_angle`.
struct ArcLoop {
    Vec2 center;
    double radius = 1.0;
    double start_angle = 0.0;
    double span = 0.0;
};

using BoundaryLoop = std::variant<PolylineLoop, ArcLoop>;

enum class DomainPreset { equilateral_triangle, unit_circle, regular_pentagon, l_shape, square3 };

/// Planar domain described both by a signed distance function and by its
/// explicit boundary. Polygonal domains may have several loops (even-odd
/// containment); the circle is a single full arc.
class DomainGeometry {
public:
    static DomainGeometry polygon(std::string name, std::vector<std::vector<Vec2>> loops);
    static DomainGeometry circle(std::string name, Vec2 center, double radius);

    const std::string& name() const { return name_; }
    const std::vector<BoundaryLoop>& boundary_loops() const { return loops_; }
    const std::vector<Vec2>& corners() const { return corners_; }
    const BBox& bbox() const { return bbox_; }
    double diameter() const { return bbox_.diameter(); }
    bool is_circle() const;

    double signed_distance(const Vec2& p) const;
    Vec2 project_to_boundary(const Vec2& p) const;

    // Arc-length parametrisation of a boundary loop.
    double loop_length(std::size_t loop) const;
    Vec2 loop_point(std::size_t loop, double s) const;
    Vec2 loop_tangent(std::size_t loop, double s) const;

private:
    DomainGeometry() = default;

    std::string name_;
    std::vector<BoundaryLoop> loops_;
    std::vector<Vec2> corners_;
    BBox bbox_;
};

inline double signed_distance(const DomainGeometry& g, const Vec2& p) { return g.signed_distance(p); }
inline Vec2 project_to_boundary(const DomainGeometry& g, const Vec2& p) { return g.project_to_boundary(p); }

DomainPreset parse_domain_preset(std::string_view name);
std::string_view to_string(DomainPreset preset);
DomainGeometry preset_domain(DomainPreset preset);
DomainGeometry preset_domain(std::string_view name);

/// Reads one `x y` pair per line; the loop is closed implicitly.
/// Blank lines and lines starting with '#' are ignored.
DomainGeometry load_polygon_file(const std::filesystem::path& path);

/// Even-odd crossing test against polyline loops (boundary points may land on either side).
bool polygon_contains(const std::vector<PolylineLoop>& loops, const Vec2& p);

} // namespace bubblemesh
