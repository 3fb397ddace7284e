#include "bubblemesh/predicates.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bubblemesh::predicates {

namespace {

// Nonoverlapping floating-point expansions, components in increasing magnitude.
using Expansion = std::vector<double>;

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleBound = (10.0 + 96.0 * kEps) * kEps;

inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    const double bv = s - a;
    const double av = s - bv;
    e = (a - av) + (b - bv);
}

inline void two_product(double a, double b, double& p, double& e) {
    p = a * b;
    e = std::fma(a, b, -p);
}

Expansion diff(double a, double b) {
    double s = 0.0;
    double e = 0.0;
    two_sum(a, -b, s, e);
    return {e, s};
}

Expansion add(const Expansion& x, const Expansion& y) {
    // Grow-expansion repeatedly: simple and exact, zero components dropped.
    Expansion h = x;
    for (double b : y) {
        Expansion next;
        next.reserve(h.size() + 1);
        double q = b;
        for (double hv : h) {
            double s = 0.0;
            double e = 0.0;
            two_sum(q, hv, s, e);
            if (e != 0.0) next.push_back(e);
            q = s;
        }
        if (q != 0.0 || next.empty()) next.push_back(q);
        h = std::move(next);
    }
    return h;
}

Expansion scale(const Expansion& x, double b) {
    Expansion h;
    h.reserve(2 * x.size());
    double q = 0.0;
    bool first = true;
    for (double xv : x) {
        double p = 0.0;
        double pe = 0.0;
        two_product(xv, b, p, pe);
        if (first) {
            if (pe != 0.0) h.push_back(pe);
            q = p;
            first = false;
            continue;
        }
        double s = 0.0;
        double e = 0.0;
        two_sum(q, pe, s, e);
        if (e != 0.0) h.push_back(e);
        double s2 = 0.0;
        double e2 = 0.0;
        two_sum(p, s, s2, e2);
        if (e2 != 0.0) h.push_back(e2);
        q = s2;
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    return h;
}

Expansion mul(const Expansion& x, const Expansion& y) {
    Expansion acc{0.0};
    for (double b : y) acc = add(acc, scale(x, b));
    return acc;
}

Expansion negate(Expansion x) {
    for (double& v : x) v = -v;
    return x;
}

double sign_of(const Expansion& x) {
    for (auto it = x.rbegin(); it != x.rend(); ++it)
        if (*it != 0.0) return *it;
    return 0.0;
}

} // namespace

double orient2d_exact(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Expansion acx = diff(a.x, c.x);
    const Expansion acy = diff(a.y, c.y);
    const Expansion bcx = diff(b.x, c.x);
    const Expansion bcy = diff(b.y, c.y);
    return sign_of(add(mul(acx, bcy), negate(mul(acy, bcx))));
}

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double left = (a.x - c.x) * (b.y - c.y);
    const double right = (a.y - c.y) * (b.x - c.x);
    const double det = left - right;
    const double bound = kOrientBound * (std::abs(left) + std::abs(right));
    if (det > bound || -det > bound) return det;
    return orient2d_exact(a, b, c);
}

double incircle_exact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const Expansion adx = diff(a.x, d.x), ady = diff(a.y, d.y);
    const Expansion bdx = diff(b.x, d.x), bdy = diff(b.y, d.y);
    const Expansion cdx = diff(c.x, d.x), cdy = diff(c.y, d.y);

    const Expansion alift = add(mul(adx, adx), mul(ady, ady));
    const Expansion blift = add(mul(bdx, bdx), mul(bdy, bdy));
    const Expansion clift = add(mul(cdx, cdx), mul(cdy, cdy));

    const Expansion bc = add(mul(bdx, cdy), negate(mul(bdy, cdx)));
    const Expansion ca = add(mul(cdx, ady), negate(mul(cdy, adx)));
    const Expansion ab = add(mul(adx, bdy), negate(mul(ady, bdx)));

    return sign_of(add(add(mul(alift, bc), mul(blift, ca)), mul(clift, ab)));
}

double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;

    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double alift = adx * adx + ady * ady;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double blift = bdx * bdx + bdy * bdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double clift = cdx * cdx + cdy * cdy;

    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    const double bound = kIncircleBound * permanent;
    if (det > bound || -det > bound) return det;
    return incircle_exact(a, b, c, d);
}

} // namespace bubblemesh::predicates
