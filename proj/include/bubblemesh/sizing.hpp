#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "bubblemesh/vec2.hpp"

namespace bubblemesh {

/// Compiled arithmetic expression in x and y.
///
/// Grammar: `+ - * /`, unary minus, parentheses, numeric literals, the
/// variables `x` and `y`, and the functions `sqrt abs min max pow`.
class Expression {
public:
    static Expression parse(std::string_view text);

    double operator()(const Vec2& p) const;
    const std::string& text() const { return text_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

enum class SizeKind { constant, radial_ring, custom_expression };

/// Desired inter-bubble spacing d(x, y).
class SizeField {
public:
    static SizeField constant(double h);
    /// 0.1 inside radius 2, then growing with slope 0.2: `slope*|r - radius| + inner`.
    static SizeField radial_ring(double inner = 0.1, double radius = 2.0, double slope = 0.2);
    static SizeField expression(std::string_view text);

    /// Parses the CLI forms `<number>`, `radial-ring`, `expr:<text>`.
    static SizeField parse(std::string_view spec);

    SizeKind kind() const { return kind_; }
    double h() const { return h_; }
    std::string describe() const;

    double evaluate(const Vec2& p) const;
    double pair_target(const Vec2& p, const Vec2& q) const {
        return 0.5 * (evaluate(p) + evaluate(q));
    }

private:
    SizeKind kind_ = SizeKind::constant;
    double h_ = 0.1;
    double inner_ = 0.1;
    double radius_ = 2.0;
    double slope_ = 0.2;
    Expression expr_;
};

inline double evaluate(const SizeField& f, const Vec2& p) { return f.evaluate(p); }
inline double pair_target(const SizeField& f, const Vec2& p, const Vec2& q) { return f.pair_target(p, q); }

} // namespace bubblemesh
