#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "odet/line_field.hpp"
#include "odet/vec.hpp"

namespace odet {

/// Rational coefficient data q(z) = num(z) / den(z), ascending powers.
/// Drives the analytic line-field fixtures built from quadratic
/// differentials q(z) dz^2.
struct RationalQ {
    std::vector<std::complex<double>> num{1.0};
    std::vector<std::complex<double>> den{1.0};

    std::complex<double> eval(std::complex<double> z) const {
        auto horner = [&](const std::vector<std::complex<double>>& c) {
            std::complex<double> acc = 0.0;
            for (size_t k = c.size(); k-- > 0;) acc = acc * z + c[k];
            return acc;
        };
        return horner(num) / horner(den);
    }

    static RationalQ monomial(int k) {
        RationalQ q;
        q.num.assign(k + 1, 0.0);
        q.num[k] = 1.0;
        return q;
    }
};

/// Trajectory directions of q dz^2: horizontal solves arg(q e^{2i theta}) = 0,
/// vertical solves = pi.
inline DirectionSampler qdiff_direction(RationalQ q, bool vertical) {
    return [q = std::move(q), vertical](Vec2 p) -> std::optional<double> {
        std::complex<double> v = q.eval({p.x, p.y});
        if (std::abs(v) < 1e-300 || !std::isfinite(std::abs(v))) return std::nullopt;
        double base = vertical ? kPi : 0.0;
        return wrap_line_angle(0.5 * (base - std::arg(v)));
    };
}

/// Same foliation in the inverted chart eta = 1/z, where the differential
/// becomes q(1/eta) / eta^4. Windings around eta = 0 measure the index at
/// infinity.
inline DirectionSampler qdiff_direction_inverted(RationalQ q, bool vertical) {
    return [q = std::move(q), vertical](Vec2 p) -> std::optional<double> {
        std::complex<double> eta(p.x, p.y);
        if (std::abs(eta) < 1e-300) return std::nullopt;
        std::complex<double> e2 = eta * eta;
        std::complex<double> v = q.eval(1.0 / eta) / (e2 * e2);
        if (std::abs(v) < 1e-300 || !std::isfinite(std::abs(v))) return std::nullopt;
        double base = vertical ? kPi : 0.0;
        return wrap_line_angle(0.5 * (base - std::arg(v)));
    };
}

/// Extend a line field on the closed unit disk to the whole plane by the
/// inversion z -> 1/conj(z): theta_out(w) = 2 arg(w) - theta_in(1/conj(w)).
/// A field tangent to the unit circle extends continuously.
inline DirectionSampler reflect_across_unit_circle(DirectionSampler inner) {
    return [inner = std::move(inner)](Vec2 p) -> std::optional<double> {
        double r2 = norm2(p);
        if (r2 <= 1.0) return inner(p);
        Vec2 mirrored{p.x / r2, p.y / r2}; // 1 / conj(z)
        auto t = inner(mirrored);
        if (!t) return std::nullopt;
        return wrap_line_angle(2.0 * std::atan2(p.y, p.x) - *t);
    };
}

/// Doubled field viewed in the chart at infinity: direction at eta
/// corresponds to the reflected field at w = 1/eta.
inline DirectionSampler reflected_field_at_infinity(DirectionSampler inner) {
    auto whole = reflect_across_unit_circle(std::move(inner));
    return [whole](Vec2 eta) -> std::optional<double> {
        double r2 = norm2(eta);
        if (r2 < 1e-300) return std::nullopt;
        Vec2 w{eta.x / r2, -eta.y / r2}; // 1 / eta
        auto t = whole(w);
        if (!t) return std::nullopt;
        // pull the line back through dw = -d(eta)/eta^2: theta += 2 arg(eta)
        return wrap_line_angle(*t + 2.0 * std::atan2(eta.y, eta.x));
    };
}

} // namespace odet
