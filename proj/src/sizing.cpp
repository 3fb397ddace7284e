#include "bubblemesh/sizing.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "bubblemesh/errors.hpp"

namespace bubblemesh {

struct Expression::Node {
    enum class Op { number, var_x, var_y, neg, add, sub, mul, div, sqrt, abs, min, max, pow };
    Op op = Op::number;
    double value = 0.0;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;

    double eval(const Vec2& p) const {
        switch (op) {
        case Op::number: return value;
        case Op::var_x: return p.x;
        case Op::var_y: return p.y;
        case Op::neg: return -a->eval(p);
        case Op::add: return a->eval(p) + b->eval(p);
        case Op::sub: return a->eval(p) - b->eval(p);
        case Op::mul: return a->eval(p) * b->eval(p);
        case Op::div: return a->eval(p) / b->eval(p);
        case Op::sqrt: return std::sqrt(a->eval(p));
        case Op::abs: return std::abs(a->eval(p));
        case Op::min: return std::min(a->eval(p), b->eval(p));
        case Op::max: return std::max(a->eval(p), b->eval(p));
        case Op::pow: return std::pow(a->eval(p), b->eval(p));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr, double value = 0.0) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    n->value = value;
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr parse_all() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError(fmt::format("size expression '{}': {} at offset {}", s_, why, pos_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(fmt::format("expected '{}'", c));
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::add, lhs, term());
            else if (accept('-')) lhs = make(Op::sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::mul, lhs, unary());
            else if (accept('/')) lhs = make(Op::div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Op::neg, unary());
        if (accept('+')) return unary();
        return primary();
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        if (accept('(')) {
            NodePtr n = expr();
            expect(')');
            return n;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string_view id = s_.substr(start, pos_ - start);
            if (id == "x") return make(Op::var_x);
            if (id == "y") return make(Op::var_y);
            if (id == "sqrt") return call1(Op::sqrt);
            if (id == "abs") return call1(Op::abs);
            if (id == "min") return call2(Op::min);
            if (id == "max") return call2(Op::max);
            if (id == "pow") return call2(Op::pow);
            pos_ = start;
            fail(fmt::format("unknown identifier '{}'", id));
        }
        fail("unexpected character");
    }

    NodePtr number() {
        const char* first = s_.data() + pos_;
        const char* last = s_.data() + s_.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc()) fail("bad number");
        pos_ += static_cast<std::size_t>(ptr - first);
        return make(Op::number, nullptr, nullptr, v);
    }

    NodePtr call1(Op op) {
        expect('(');
        NodePtr a = expr();
        expect(')');
        return make(op, a);
    }

    NodePtr call2(Op op) {
        expect('(');
        NodePtr a = expr();
        expect(',');
        NodePtr b = expr();
        expect(')');
        return make(op, a, b);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

double parse_positive(std::string_view text, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !(v > 0.0) || !std::isfinite(v))
        throw ConfigError(fmt::format("{} must be a positive number, got '{}'", what, text));
    return v;
}

} // namespace

Expression Expression::parse(std::string_view text) {
    Expression e;
    e.text_ = std::string(text);
    e.root_ = Parser(e.text_).parse_all();
    return e;
}

double Expression::operator()(const Vec2& p) const { return root_ ? root_->eval(p) : 0.0; }

SizeField SizeField::constant(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("constant size must be positive");
    SizeField f;
    f.kind_ = SizeKind::constant;
    f.h_ = h;
    return f;
}

SizeField SizeField::radial_ring(double inner, double radius, double slope) {
    if (!(inner > 0.0) || slope < 0.0) throw ConfigError("radial-ring size needs inner > 0, slope >= 0");
    SizeField f;
    f.kind_ = SizeKind::radial_ring;
    f.inner_ = inner;
    f.radius_ = radius;
    f.slope_ = slope;
    f.h_ = inner;
    return f;
}

SizeField SizeField::expression(std::string_view text) {
    SizeField f;
    f.kind_ = SizeKind::custom_expression;
    f.expr_ = Expression::parse(text);
    f.h_ = f.expr_({0.0, 0.0});
    return f;
}

SizeField SizeField::parse(std::string_view spec) {
    if (spec == "radial-ring" || spec == "radial_ring") return radial_ring();
    if (spec.starts_with("expr:")) return expression(spec.substr(5));
    return constant(parse_positive(spec, "size"));
}

std::string SizeField::describe() const {
    switch (kind_) {
    case SizeKind::constant: return fmt::format("{}", h_);
    case SizeKind::radial_ring: return "radial-ring";
    case SizeKind::custom_expression: return "expr:" + expr_.text();
    }
    return {};
}

double SizeField::evaluate(const Vec2& p) const {
    switch (kind_) {
    case SizeKind::constant: return h_;
    case SizeKind::radial_ring: {
        const double r = norm(p);
        return r < radius_ ? inner_ : slope_ * std::abs(r - radius_) + inner_;
    }
    case SizeKind::custom_expression: return expr_(p);
    }
    return h_;
}

} // namespace bubblemesh
