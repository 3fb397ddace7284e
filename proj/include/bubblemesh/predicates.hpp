#pragma once

#include "bubblemesh/vec2.hpp"

namespace bubblemesh::predicates {

// Both predicates return a value whose sign is exact: a fast floating-point
// evaluation is used when its error bound certifies the sign, otherwise the
// determinant is recomputed with exact expansion arithmetic.

/// > 0 if a, b, c are counterclockwise, < 0 if clockwise, 0 if collinear.
double orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

/// > 0 if d lies strictly inside the circle through counterclockwise a, b, c.
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

/// Exact-arithmetic versions (no filter); exposed for testing.
double orient2d_exact(const Vec2& a, const Vec2& b, const Vec2& c);
double incircle_exact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

} // namespace bubblemesh::predicates
