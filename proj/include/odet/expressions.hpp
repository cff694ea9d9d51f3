#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "odet/errors.hpp"
#include "odet/jet.hpp"

namespace odet {

/// A closed-form scalar field: exact second-order jet at any point.
using AnalyticJet = std::function<Jet2(Vec2)>;

namespace expr {

inline AnalyticJet paraboloid(double c) {
    return [c](Vec2 v) -> Jet2 {
        return {v.x * v.x + v.y * v.y + c, 2.0 * v.x, 2.0 * v.y, 2.0, 0.0, 2.0};
    };
}

/// a - (x^2+y^2)/4, the radial torsion-type profile.
inline AnalyticJet serrin(double a) {
    return [a](Vec2 v) -> Jet2 {
        return {a - 0.25 * (v.x * v.x + v.y * v.y), -0.5 * v.x, -0.5 * v.y, -0.5, 0.0, -0.5};
    };
}

/// a - x^2/4 - y^2/16, profile of the stretched-Laplace example.
inline AnalyticJet aniso(double a) {
    return [a](Vec2 v) -> Jet2 {
        return {a - 0.25 * v.x * v.x - v.y * v.y / 16.0,
                -0.5 * v.x, -v.y / 8.0, -0.5, 0.0, -0.125};
    };
}

/// Re((x+iy)^n), harmonic for every n >= 0.
inline AnalyticJet harmonic_re(int n) {
    return [n](Vec2 v) -> Jet2 {
        std::complex<double> zc(v.x, v.y);
        std::complex<double> w0 = std::pow(zc, n);
        std::complex<double> w1 = (n >= 1) ? double(n) * std::pow(zc, n - 1)
                                           : std::complex<double>(0.0);
        std::complex<double> w2 = (n >= 2) ? double(n) * double(n - 1) * std::pow(zc, n - 2)
                                           : std::complex<double>(0.0);
        // d/dy of Re g = -Im g' for holomorphic g
        return {w0.real(), w1.real(), -w1.imag(), w2.real(), -w2.imag(), -w2.real()};
    };
}

inline AnalyticJet sum(AnalyticJet f, AnalyticJet g, double cf = 1.0, double cg = 1.0) {
    return [f = std::move(f), g = std::move(g), cf, cg](Vec2 v) -> Jet2 {
        Jet2 a = f(v), b = g(v);
        return {cf * a.z + cg * b.z, cf * a.p + cg * b.p, cf * a.q + cg * b.q,
                cf * a.r + cg * b.r, cf * a.s + cg * b.s, cf * a.t + cg * b.t};
    };
}

/// serrin(a) + eps * Re((x+iy)^n)
inline AnalyticJet serrin_perturbed(double a, double eps, int n) {
    return sum(serrin(a), harmonic_re(n), 1.0, eps);
}

inline AnalyticJet sinsin() {
    return [](Vec2 v) -> Jet2 {
        double sx = std::sin(v.x), cx = std::cos(v.x);
        double sy = std::sin(v.y), cy = std::cos(v.y);
        return {sx * sy, cx * sy, sx * cy, -sx * sy, cx * cy, -sx * sy};
    };
}

/// Spherical cap sqrt(R^2 - x^2 - y^2); valid for r < R.
inline AnalyticJet cap(double R) {
    return [R](Vec2 v) -> Jet2 {
        double s2 = R * R - v.x * v.x - v.y * v.y;
        double u = std::sqrt(s2);
        double u3 = u * u * u;
        return {u, -v.x / u, -v.y / u,
                -1.0 / u - v.x * v.x / u3, -v.x * v.y / u3, -1.0 / u - v.y * v.y / u3};
    };
}

/// c + a11 x^2 + 2 a12 xy + a22 y^2
inline AnalyticJet quadratic(double c, double a11, double a12, double a22) {
    return [=](Vec2 v) -> Jet2 {
        return {c + a11 * v.x * v.x + 2.0 * a12 * v.x * v.y + a22 * v.y * v.y,
                2.0 * (a11 * v.x + a12 * v.y), 2.0 * (a12 * v.x + a22 * v.y),
                2.0 * a11, 2.0 * a12, 2.0 * a22};
    };
}

/// Implicit disk R^2 - x^2 - y^2 (positive inside).
inline AnalyticJet disk(double R) { return quadratic(R * R, -1.0, 0.0, -1.0); }

/// Implicit ellipse 1 - x^2/a^2 - y^2/b^2 (positive inside).
inline AnalyticJet ellipse(double a, double b) {
    return quadratic(1.0, -1.0 / (a * a), 0.0, -1.0 / (b * b));
}

/// Pull back f along the affine map v -> A v + b (chain rule for the jet).
inline AnalyticJet affine_pullback(AnalyticJet f, Mat2 A, Vec2 b) {
    return [f = std::move(f), A, b](Vec2 v) -> Jet2 {
        Jet2 j = f(A.apply(v) + b);
        Vec2 g{j.p, j.q};
        SymForm2 H{j.r, j.s, j.t};
        // grad (f o m) = A^T grad f, Hess (f o m) = A^T Hess f A
        Vec2 gt{A.a * g.x + A.c * g.y, A.b * g.x + A.d * g.y};
        Vec2 h1 = H.apply({A.a, A.c});
        Vec2 h2 = H.apply({A.b, A.d});
        SymForm2 Ht{A.a * h1.x + A.c * h1.y,
                    A.a * h2.x + A.c * h2.y,
                    A.b * h2.x + A.d * h2.y};
        return make_jet(j.z, gt, Ht);
    };
}

} // namespace expr

/// "name(p1, p2)" -> name + numeric params. Bare names carry no params.
struct CallableSpec {
    std::string name;
    std::vector<double> params;
};

inline CallableSpec parse_callable(const std::string& text) {
    CallableSpec spec;
    auto open = text.find('(');
    if (open == std::string::npos) {
        spec.name = text;
        // trim
        while (!spec.name.empty() && std::isspace(static_cast<unsigned char>(spec.name.back())))
            spec.name.pop_back();
        return spec;
    }
    auto close = text.rfind(')');
    if (close == std::string::npos || close < open)
        throw ParseError("unbalanced parentheses in '" + text + "'");
    spec.name = text.substr(0, open);
    std::string args = text.substr(open + 1, close - open - 1);
    size_t pos = 0;
    while (pos < args.size()) {
        size_t comma = args.find(',', pos);
        std::string tok = args.substr(pos, comma == std::string::npos ? std::string::npos
                                                                      : comma - pos);
        size_t idx = 0;
        try {
            spec.params.push_back(std::stod(tok, &idx));
        } catch (const std::exception&) {
            throw ParseError("bad numeric argument '" + tok + "' in '" + text + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return spec;
}

/// Closed-form field registry used by config files.
inline AnalyticJet make_expression(const std::string& id) {
    CallableSpec c = parse_callable(id);
    auto arg = [&](size_t i, double dflt) {
        return i < c.params.size() ? c.params[i] : dflt;
    };
    if (c.name == "paraboloid") return expr::paraboloid(arg(0, 0.0));
    if (c.name == "serrin") return expr::serrin(arg(0, 1.0));
    if (c.name == "aniso") return expr::aniso(arg(0, 1.0));
    if (c.name == "serrin-perturbed")
        return expr::serrin_perturbed(arg(0, 1.0), arg(1, 0.01), int(arg(2, 3)));
    if (c.name == "harmonic-re") return expr::harmonic_re(int(arg(0, 3)));
    if (c.name == "sinsin") return expr::sinsin();
    if (c.name == "cap") return expr::cap(arg(0, 2.0));
    if (c.name == "quad")
        return expr::quadratic(arg(0, 0.0), arg(1, 1.0), arg(2, 0.0), arg(3, 1.0));
    if (c.name == "saddle") return expr::quadratic(arg(0, 0.0), 1.0, 0.0, -1.0);
    if (c.name == "disk") return expr::disk(arg(0, 1.0));
    if (c.name == "ellipse") return expr::ellipse(arg(0, 2.0), arg(1, 4.0));
    throw UnknownIdError("unknown expression id '" + c.name + "'");
}

} // namespace odet
