#pragma once

#include <filesystem>
#include <ostream>
#include <span>

#include "bubblemesh/bubbles.hpp"
#include "bubblemesh/triangulate.hpp"

namespace bubblemesh {

/// Triangle-style `.node` file: header `count 2 0 1`, then `index x y marker`
/// with 1-based indices; the marker is 1 for boundary nodes.
void write_node_file(const TriMesh& mesh, const std::filesystem::path& path);

/// Triangle-style `.ele` file: header `count 3 0`, then `index n1 n2 n3`, 1-based.
void write_ele_file(const TriMesh& mesh, const std::filesystem::path& path);

/// Reads a `.node`/`.ele` pair. Either 0- or 1-based numbering is accepted
/// (detected from the first node index), as Triangle itself allows.
TriMesh read_triangle_files(const std::filesystem::path& node_path, const std::filesystem::path& ele_path);

/// Static SVG of the mesh, y axis pointing up.
void write_svg(const TriMesh& mesh, const std::filesystem::path& path);

/// Appends one `x y mobility` line per bubble, preceded by a `# step <n>` line.
void append_bubble_snapshot(std::ostream& out, int step, const BubbleSystem& sys);

/// Writes `index value` lines (1-based) for a coefficient vector.
void write_values(std::span<const double> values, const std::filesystem::path& path);

} // namespace bubblemesh
