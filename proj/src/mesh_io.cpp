#include "bubblemesh/mesh_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "bubblemesh/errors.hpp"

namespace bubblemesh {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

/// Next non-empty line with '#' comments stripped.
bool next_record(std::istream& in, std::istringstream& record) {
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        record.clear();
        record.str(line);
        return true;
    }
    return false;
}

} // namespace

void write_node_file(const TriMesh& mesh, const std::filesystem::path& path) {
    auto out = open_out(path);
    fmt::print(out, "{} 2 0 1\n", mesh.node_count());
    for (std::size_t i = 0; i < mesh.node_count(); ++i)
        fmt::print(out, "{} {:.17g} {:.17g} {}\n", i + 1, mesh.nodes[i].x, mesh.nodes[i].y,
                   mesh.boundary_flags[i] ? 1 : 0);
    finish(out, path);
}

void write_ele_file(const TriMesh& mesh, const std::filesystem::path& path) {
    auto out = open_out(path);
    fmt::print(out, "{} 3 0\n", mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t)
        fmt::print(out, "{} {} {} {}\n", t + 1, mesh.tris[t][0] + 1, mesh.tris[t][1] + 1, mesh.tris[t][2] + 1);
    finish(out, path);
}

TriMesh read_triangle_files(const std::filesystem::path& node_path, const std::filesystem::path& ele_path) {
    std::ifstream nin(node_path);
    if (!nin) throw IoError(fmt::format("cannot open '{}'", node_path.string()));
    std::istringstream rec;
    std::size_t count = 0;
    int dim = 0;
    int attrs = 0;
    int markers = 0;
    if (!next_record(nin, rec) || !(rec >> count >> dim)) throw IoError(fmt::format("'{}': bad header", node_path.string()));
    rec >> attrs >> markers;
    if (dim != 2) throw IoError(fmt::format("'{}': dimension must be 2", node_path.string()));

    std::vector<Vec2> nodes(count);
    long base = -1;
    for (std::size_t i = 0; i < count; ++i) {
        long idx = 0;
        Vec2 p;
        if (!next_record(nin, rec) || !(rec >> idx >> p.x >> p.y))
            throw IoError(fmt::format("'{}': truncated at node {}", node_path.string(), i));
        if (base < 0) base = idx;
        const long k = idx - base;
        if (k < 0 || static_cast<std::size_t>(k) >= count)
            throw IoError(fmt::format("'{}': node index {} out of range", node_path.string(), idx));
        nodes[k] = p;
    }

    std::ifstream ein(ele_path);
    if (!ein) throw IoError(fmt::format("cannot open '{}'", ele_path.string()));
    std::size_t ntri = 0;
    int per = 0;
    if (!next_record(ein, rec) || !(rec >> ntri >> per)) throw IoError(fmt::format("'{}': bad header", ele_path.string()));
    if (per != 3) throw IoError(fmt::format("'{}': only 3-node triangles are supported", ele_path.string()));
    std::vector<std::array<int, 3>> tris(ntri);
    for (std::size_t t = 0; t < ntri; ++t) {
        long idx = 0;
        long a = 0;
        long b = 0;
        long c = 0;
        if (!next_record(ein, rec) || !(rec >> idx >> a >> b >> c))
            throw IoError(fmt::format("'{}': truncated at triangle {}", ele_path.string(), t));
        tris[t] = {static_cast<int>(a - base), static_cast<int>(b - base), static_cast<int>(c - base)};
    }
    return TriMesh::from_triangles(std::move(nodes), std::move(tris));
}

void write_svg(const TriMesh& mesh, const std::filesystem::path& path) {
    const BBox box = mesh.bbox();
    const double span = std::max(box.max.x - box.min.x, box.max.y - box.min.y);
    const double scale = 800.0 / (span > 0.0 ? span : 1.0);
    const double pad = 10.0;
    const double width = (box.max.x - box.min.x) * scale + 2 * pad;
    const double height = (box.max.y - box.min.y) * scale + 2 * pad;
    auto sx = [&](double x) { return pad + (x - box.min.x) * scale; };
    auto sy = [&](double y) { return pad + (box.max.y - y) * scale; };

    auto out = open_out(path);
    fmt::print(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.1f}\" height=\"{:.1f}\">\n", width, height);
    fmt::print(out, "<g fill=\"none\" stroke=\"black\" stroke-width=\"0.5\">\n");
    for (const auto& e : mesh.edges) {
        const Vec2 a = mesh.nodes[e.nodes[0]];
        const Vec2 b = mesh.nodes[e.nodes[1]];
        fmt::print(out, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"{}/>\n", sx(a.x), sy(a.y), sx(b.x),
                   sy(b.y), e.on_boundary() ? " stroke=\"blue\" stroke-width=\"1\"" : "");
    }
    fmt::print(out, "</g>\n</svg>\n");
    finish(out, path);
}

void append_bubble_snapshot(std::ostream& out, int step, const BubbleSystem& sys) {
    fmt::print(out, "# step {}\n", step);
    for (const auto& b : sys.bubbles) fmt::print(out, "{:.17g} {:.17g} {}\n", b.pos.x, b.pos.y, to_string(b.mobility));
}

void write_values(std::span<const double> values, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (std::size_t i = 0; i < values.size(); ++i) fmt::print(out, "{} {:.17g}\n", i + 1, values[i]);
    finish(out, path);
}

} // namespace bubblemesh
