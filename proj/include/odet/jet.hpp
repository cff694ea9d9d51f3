#pragma once

#include <cmath>

#include "odet/vec.hpp"

namespace odet {

/// Second-order jet (z, p, q, r, s, t) of a scalar function at a point:
/// value, first derivatives (d/dx, d/dy) and second derivatives
/// (d2/dx2, d2/dxdy, d2/dy2).
struct Jet2 {
    double z = 0.0;
    double p = 0.0;
    double q = 0.0;
    double r = 0.0;
    double s = 0.0;
    double t = 0.0;

    Vec2 gradient() const { return {p, q}; }
    SymForm2 hessian() const { return {r, s, t}; }

    bool finite() const {
        return std::isfinite(z) && std::isfinite(p) && std::isfinite(q) &&
               std::isfinite(r) && std::isfinite(s) && std::isfinite(t);
    }
};

inline Jet2 make_jet(double z, Vec2 grad, SymForm2 hess) {
    return {z, grad.x, grad.y, hess.a11, hess.a12, hess.a22};
}

} // namespace odet
