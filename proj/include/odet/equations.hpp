#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "odet/errors.hpp"
#include "odet/expressions.hpp"
#include "odet/jet.hpp"
#include "odet/quadrature.hpp"

namespace odet {

using JetFn = std::function<double(const Jet2&)>;
using SphereFn = std::function<double(Vec3)>;
using GradientFn = std::function<double(Vec2)>; // functions of (p, q)

enum class JetRegion { All, ConvexBranch };

/// Elliptic operator F(z, p, q, r, s, t) with its partial derivatives and
/// a description of the admissible jet region.
struct EquationDef {
    std::string id;
    JetFn F;
    JetFn Fr, Fs, Ft;
    JetFn Fz, Fp, Fq;
    bool depends_on_z = false;
    bool depends_on_pq = false;
    JetRegion region = JetRegion::All;
    std::string region_desc = "all finite jets";

    /// Optional convexified evaluation (value plus the six partials in
    /// z, p, q, r, s, t). Determinant-type operators supply it so Newton
    /// solvers keep a useful gradient off the convex branch; it agrees with
    /// F wherever the Hessian eigenvalues clear a small floor.
    std::function<double(const Jet2&, double dF[6])> projected;

    bool admissible(const Jet2& jet) const {
        if (!jet.finite()) return false;
        if (region == JetRegion::ConvexBranch)
            return jet.r > 0.0 && jet.r * jet.t - jet.s * jet.s > 0.0;
        return true;
    }

    /// Random jet inside the documented admissible region.
    Jet2 sample_admissible(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        Jet2 j{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
        if (region == JetRegion::ConvexBranch) {
            std::uniform_real_distribution<double> pos(0.2, 3.0);
            std::uniform_real_distribution<double> frac(-0.9, 0.9);
            j.r = pos(rng);
            j.t = pos(rng);
            j.s = frac(rng) * std::sqrt(j.r * j.t);
        }
        return j;
    }
};

inline void require_admissible(const EquationDef& eq, const Jet2& jet) {
    if (!eq.admissible(jet))
        throw InadmissibleJetError("jet outside admissible region of '" + eq.id + "' (" +
                                   eq.region_desc + ")");
}

inline double residual(const EquationDef& eq, const Jet2& jet) {
    require_admissible(eq, jet);
    return eq.F(jet);
}

/// 4 Fr Ft - Fs^2 at the jet; positive means elliptic there.
inline double ellipticity_margin(const EquationDef& eq, const Jet2& jet) {
    require_admissible(eq, jet);
    double fr = eq.Fr(jet), fs = eq.Fs(jet), ft = eq.Ft(jet);
    return 4.0 * fr * ft - fs * fs;
}

namespace detail {

inline JetFn zero_fn() {
    return [](const Jet2&) { return 0.0; };
}

// centered finite difference of F in one jet slot, for partials without a
// worthwhile closed form
inline JetFn fd_partial(JetFn F, double Jet2::* slot) {
    return [F = std::move(F), slot](const Jet2& jet) {
        double v = jet.*slot;
        double step = 1e-6 * std::max(1.0, std::abs(v));
        Jet2 a = jet, b = jet;
        a.*slot = v + step;
        b.*slot = v - step;
        return (F(a) - F(b)) / (2.0 * step);
    };
}

/// Convexified determinant of the Hessian block: eigenvalues below `floor`
/// are lifted and their deficit re-enters linearly, which keeps the value
/// bounded and the gradient nonvanishing on the concave side.
/// Returns the value; d_rst receives the partials in (r, s, t).
inline double det_plus(const Jet2& j, double floor_eig, double d_rst[3]) {
    SymForm2 H{j.r, j.s, j.t};
    double lo, hi;
    H.eigenvalues(lo, hi);
    double theta = 0.5 * std::atan2(2.0 * H.a12, H.a11 - H.a22);
    double c = std::cos(theta), s = std::sin(theta);
    // (c, s) spans the eigenvector of hi, the orthogonal one belongs to lo
    double vhi[3] = {c * c, 2.0 * c * s, s * s};
    double vlo[3] = {s * s, -2.0 * c * s, c * c};
    double mlo = std::max(lo, floor_eig), mhi = std::max(hi, floor_eig);
    double value = mlo * mhi + std::min(lo - floor_eig, 0.0) + std::min(hi - floor_eig, 0.0);
    double dlo = lo > floor_eig ? mhi : 1.0;
    double dhi = hi > floor_eig ? mlo : 1.0;
    for (int a = 0; a < 3; ++a) d_rst[a] = dlo * vlo[a] + dhi * vhi[a];
    return value;
}

} // namespace detail

// ---------------------------------------------------------------------------
// anisotropies
// ---------------------------------------------------------------------------

/// Positive 1-homogeneous norm H with the Hessian of V = H^2/2.
struct AnisotropyDef {
    std::string id;
    std::function<double(Vec2)> H;
    std::function<SymForm2(Vec2)> d2V;
};

/// Sampling check of positivity and 1-homogeneity.
inline void validate_anisotropy(const AnisotropyDef& aniso, int samples = 64) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> lam(0.1, 10.0);
    for (int k = 0; k < samples; ++k) {
        double a = ang(rng);
        Vec2 xi{std::cos(a), std::sin(a)};
        double h = aniso.H(xi);
        if (!(h > 0.0) || !std::isfinite(h))
            throw BadAnisotropyError("H not positive on the unit circle (id '" + aniso.id +
                                     "')");
        double l = lam(rng);
        double hl = aniso.H(l * xi);
        if (std::abs(hl - l * h) > 1e-8 * l * h)
            throw BadAnisotropyError("H fails 1-homogeneity sampling (id '" + aniso.id + "')");
    }
}

inline AnisotropyDef anisotropy_euclidean() {
    return {"euclidean", [](Vec2 xi) { return norm(xi); },
            [](Vec2) { return SymForm2::identity(); }};
}

/// H(xi) = sqrt(a^2 xi1^2 + b^2 xi2^2); d2V = diag(a^2, b^2).
inline AnisotropyDef anisotropy_ellipse(double a, double b) {
    return {"ellipse", [a, b](Vec2 xi) {
                return std::hypot(a * xi.x, b * xi.y);
            },
            [a, b](Vec2) { return SymForm2{a * a, 0.0, b * b}; }};
}

inline AnisotropyDef make_anisotropy(const std::string& id) {
    CallableSpec c = parse_callable(id);
    AnisotropyDef def;
    if (c.name == "euclidean")
        def = anisotropy_euclidean();
    else if (c.name == "ellipse")
        def = anisotropy_ellipse(c.params.size() > 0 ? c.params[0] : 1.0,
                                 c.params.size() > 1 ? c.params[1] : 2.0);
    else
        throw UnknownIdError("unknown anisotropy id '" + c.name + "'");
    validate_anisotropy(def);
    return def;
}

// ---------------------------------------------------------------------------
// sphere densities f and gradient weights W
// ---------------------------------------------------------------------------

inline SphereFn make_sphere_density(const std::string& id) {
    CallableSpec c = parse_callable(id);
    auto arg = [&](size_t i, double dflt) { return i < c.params.size() ? c.params[i] : dflt; };
    if (c.name == "constant") {
        double v = arg(0, 1.0);
        return [v](Vec3) { return v; };
    }
    if (c.name == "zonal") {
        double cc = arg(0, 0.5);
        return [cc](Vec3 x) { return 1.0 + cc * x.z; };
    }
    if (c.name == "zonal2") {
        double cc = arg(0, 0.5);
        return [cc](Vec3 x) { return 1.0 + cc * x.z * x.z; };
    }
    throw UnknownIdError("unknown sphere density id '" + c.name + "'");
}

/// W on the gradient plane from f on the upper hemisphere via the gnomonic
/// substitution W(p, q) = f((p, q, 1)/|(p, q, 1)|).
inline GradientFn gradient_weight_from_density(SphereFn f) {
    return [f = std::move(f)](Vec2 pq) {
        double n = std::sqrt(pq.x * pq.x + pq.y * pq.y + 1.0);
        return f({pq.x / n, pq.y / n, 1.0 / n});
    };
}

inline GradientFn make_gradient_weight(const std::string& id) {
    CallableSpec c = parse_callable(id);
    if (c.name == "constant") {
        double v = c.params.empty() ? 1.0 : c.params[0];
        return [v](Vec2) { return v; };
    }
    if (c.name == "from-f")
        throw ParseError("w = from-f requires a separate f key");
    return gradient_weight_from_density(make_sphere_density(id));
}

/// Quadrature estimate of the closure integral of x/f over the sphere;
/// a near-zero vector signals the solvability condition.
inline Vec3 minkowski_balance(const SphereFn& f, int n_polar = 64, int n_azimuth = 128) {
    return integrate_sphere_vec(
        [&](Vec3 x) -> Vec3 {
            double v = f(x);
            if (!(v > 0.0))
                throw NonPositiveFError("density f is not positive on the sphere");
            return {x.x / v, x.y / v, x.z / v};
        },
        n_polar, n_azimuth);
}

// ---------------------------------------------------------------------------
// operator catalog
// ---------------------------------------------------------------------------

inline EquationDef eq_serrin_laplace() {
    EquationDef eq;
    eq.id = "serrin-laplace";
    eq.F = [](const Jet2& j) { return j.r + j.t + 1.0; };
    eq.Fr = [](const Jet2&) { return 1.0; };
    eq.Fs = detail::zero_fn();
    eq.Ft = [](const Jet2&) { return 1.0; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::zero_fn();
    eq.Fq = detail::zero_fn();
    return eq;
}

inline EquationDef eq_aniso_linear() {
    EquationDef eq;
    eq.id = "aniso-linear";
    eq.F = [](const Jet2& j) { return j.r + 4.0 * j.t + 1.0; };
    eq.Fr = [](const Jet2&) { return 1.0; };
    eq.Fs = detail::zero_fn();
    eq.Ft = [](const Jet2&) { return 4.0; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::zero_fn();
    eq.Fq = detail::zero_fn();
    return eq;
}

inline EquationDef eq_monge_ampere_4() {
    EquationDef eq;
    eq.id = "monge-ampere-4";
    eq.F = [](const Jet2& j) { return j.r * j.t - j.s * j.s - 4.0; };
    eq.Fr = [](const Jet2& j) { return j.t; };
    eq.Fs = [](const Jet2& j) { return -2.0 * j.s; };
    eq.Ft = [](const Jet2& j) { return j.r; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::zero_fn();
    eq.Fq = detail::zero_fn();
    eq.region = JetRegion::ConvexBranch;
    eq.region_desc = "convex branch: r > 0 and rt - s^2 > 0";
    eq.projected = [](const Jet2& j, double dF[6]) {
        double d_rst[3];
        double v = detail::det_plus(j, 1e-6, d_rst) - 4.0;
        dF[0] = dF[1] = dF[2] = 0.0;
        dF[3] = d_rst[0];
        dF[4] = d_rst[1];
        dF[5] = d_rst[2];
        return v;
    };
    return eq;
}

/// det(D^2 u) = W(Du) (1 + |Du|^2)^2 on the convex branch.
inline EquationDef eq_minkowski_ma(GradientFn W) {
    EquationDef eq;
    eq.id = "minkowski-ma";
    eq.F = [W](const Jet2& j) {
        double g2 = 1.0 + j.p * j.p + j.q * j.q;
        return j.r * j.t - j.s * j.s - W({j.p, j.q}) * g2 * g2;
    };
    eq.Fr = [](const Jet2& j) { return j.t; };
    eq.Fs = [](const Jet2& j) { return -2.0 * j.s; };
    eq.Ft = [](const Jet2& j) { return j.r; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::fd_partial(eq.F, &Jet2::p);
    eq.Fq = detail::fd_partial(eq.F, &Jet2::q);
    eq.depends_on_pq = true;
    eq.region = JetRegion::ConvexBranch;
    eq.region_desc = "convex branch: r > 0 and rt - s^2 > 0";
    eq.projected = [W](const Jet2& j, double dF[6]) {
        double d_rst[3];
        double g2 = 1.0 + j.p * j.p + j.q * j.q;
        double v = detail::det_plus(j, 1e-6, d_rst) - W({j.p, j.q}) * g2 * g2;
        dF[0] = 0.0;
        double step = 1e-6;
        auto rhs = [&](double p, double q) {
            double gg = 1.0 + p * p + q * q;
            return W({p, q}) * gg * gg;
        };
        dF[1] = -(rhs(j.p + step, j.q) - rhs(j.p - step, j.q)) / (2.0 * step);
        dF[2] = -(rhs(j.p, j.q + step) - rhs(j.p, j.q - step)) / (2.0 * step);
        dF[3] = d_rst[0];
        dF[4] = d_rst[1];
        dF[5] = d_rst[2];
        return v;
    };
    return eq;
}

/// div(Du / sqrt(1 + |Du|^2)) = 2 W(Du).
inline EquationDef eq_pmc(GradientFn W) {
    EquationDef eq;
    eq.id = "pmc";
    eq.F = [W](const Jet2& j) {
        double g2 = 1.0 + j.p * j.p + j.q * j.q;
        double d = g2 * std::sqrt(g2);
        return ((1.0 + j.q * j.q) * j.r - 2.0 * j.p * j.q * j.s + (1.0 + j.p * j.p) * j.t) / d -
               2.0 * W({j.p, j.q});
    };
    eq.Fr = [](const Jet2& j) {
        double g2 = 1.0 + j.p * j.p + j.q * j.q;
        return (1.0 + j.q * j.q) / (g2 * std::sqrt(g2));
    };
    eq.Fs = [](const Jet2& j) {
        double g2 = 1.0 + j.p * j.p + j.q * j.q;
        return -2.0 * j.p * j.q / (g2 * std::sqrt(g2));
    };
    eq.Ft = [](const Jet2& j) {
        double g2 = 1.0 + j.p * j.p + j.q * j.q;
        return (1.0 + j.p * j.p) / (g2 * std::sqrt(g2));
    };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::fd_partial(eq.F, &Jet2::p);
    eq.Fq = detail::fd_partial(eq.F, &Jet2::q);
    eq.depends_on_pq = true;
    return eq;
}

/// Anisotropic Laplacian: trace(d2V(Du) D^2u) + c = 0.
inline EquationDef eq_aniso_q(AnisotropyDef aniso, double c = 1.0) {
    EquationDef eq;
    eq.id = "aniso-q";
    auto A = aniso.d2V;
    eq.F = [A, c](const Jet2& j) {
        SymForm2 a = A({j.p, j.q});
        return a.a11 * j.r + 2.0 * a.a12 * j.s + a.a22 * j.t + c;
    };
    eq.Fr = [A](const Jet2& j) { return A({j.p, j.q}).a11; };
    eq.Fs = [A](const Jet2& j) { return 2.0 * A({j.p, j.q}).a12; };
    eq.Ft = [A](const Jet2& j) { return A({j.p, j.q}).a22; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::fd_partial(eq.F, &Jet2::p);
    eq.Fq = detail::fd_partial(eq.F, &Jet2::q);
    eq.depends_on_pq = true;
    return eq;
}

/// Anisotropic determinant: det(d2V(Du) D^2u) - c = 0 on the convex branch.
inline EquationDef eq_aniso_r(AnisotropyDef aniso, double c = 4.0) {
    EquationDef eq;
    eq.id = "aniso-r";
    auto A = aniso.d2V;
    eq.F = [A, c](const Jet2& j) {
        SymForm2 a = A({j.p, j.q});
        return a.det() * (j.r * j.t - j.s * j.s) - c;
    };
    eq.Fr = [A](const Jet2& j) { return A({j.p, j.q}).det() * j.t; };
    eq.Fs = [A](const Jet2& j) { return -2.0 * A({j.p, j.q}).det() * j.s; };
    eq.Ft = [A](const Jet2& j) { return A({j.p, j.q}).det() * j.r; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::fd_partial(eq.F, &Jet2::p);
    eq.Fq = detail::fd_partial(eq.F, &Jet2::q);
    eq.depends_on_pq = true;
    eq.region = JetRegion::ConvexBranch;
    eq.region_desc = "convex branch: r > 0 and rt - s^2 > 0";
    eq.projected = [A, c](const Jet2& j, double dF[6]) {
        double d_rst[3];
        double da = A({j.p, j.q}).det();
        double v = da * detail::det_plus(j, 1e-6, d_rst) - c;
        dF[0] = dF[1] = dF[2] = 0.0; // quadratic-norm anisotropies have constant A
        dF[3] = da * d_rst[0];
        dF[4] = da * d_rst[1];
        dF[5] = da * d_rst[2];
        return v;
    };
    return eq;
}

/// r + t - c = 0; Poisson with constant right side, handy as a continuation
/// base (every paraboloid with trace c/2 solves it).
inline EquationDef eq_poisson(double c) {
    EquationDef eq;
    eq.id = "poisson";
    eq.F = [c](const Jet2& j) { return j.r + j.t - c; };
    eq.Fr = [](const Jet2&) { return 1.0; };
    eq.Fs = detail::zero_fn();
    eq.Ft = [](const Jet2&) { return 1.0; };
    eq.Fz = detail::zero_fn();
    eq.Fp = detail::zero_fn();
    eq.Fq = detail::zero_fn();
    return eq;
}

/// r + t - 2z = 0; the catalog's z-dependent member.
inline EquationDef eq_helmholtz_minus() {
    EquationDef eq;
    eq.id = "helmholtz-minus";
    eq.F = [](const Jet2& j) { return j.r + j.t - 2.0 * j.z; };
    eq.Fr = [](const Jet2&) { return 1.0; };
    eq.Fs = detail::zero_fn();
    eq.Ft = [](const Jet2&) { return 1.0; };
    eq.Fz = [](const Jet2&) { return -2.0; };
    eq.Fp = detail::zero_fn();
    eq.Fq = detail::zero_fn();
    eq.depends_on_z = true;
    return eq;
}

struct CatalogOptions {
    GradientFn W;                 // for minkowski-ma and pmc; default constant 1
    AnisotropyDef H;              // for aniso-q / aniso-r; default euclidean
    double aniso_q_constant = 1.0;
    double aniso_r_constant = 4.0;
};

inline std::vector<EquationDef> catalog(CatalogOptions opt = {}) {
    if (!opt.W) opt.W = [](Vec2) { return 1.0; };
    if (!opt.H.H) opt.H = anisotropy_euclidean();
    validate_anisotropy(opt.H);
    std::vector<EquationDef> eqs;
    eqs.push_back(eq_serrin_laplace());
    eqs.push_back(eq_aniso_linear());
    eqs.push_back(eq_monge_ampere_4());
    eqs.push_back(eq_minkowski_ma(opt.W));
    eqs.push_back(eq_pmc(opt.W));
    eqs.push_back(eq_aniso_q(opt.H, opt.aniso_q_constant));
    eqs.push_back(eq_aniso_r(opt.H, opt.aniso_r_constant));
    eqs.push_back(eq_helmholtz_minus());
    return eqs;
}

/// Options understood per id: "w" (gradient weight or sphere density id),
/// "h" (anisotropy id), "c" (right-hand constant).
struct EquationOptions {
    std::string w = "constant(1)";
    std::string h = "euclidean";
    double c_q = 1.0;
    double c_r = 4.0;
};

inline EquationDef make_equation(const std::string& id, const EquationOptions& opt = {}) {
    if (id == "serrin-laplace") return eq_serrin_laplace();
    if (id == "aniso-linear") return eq_aniso_linear();
    if (id == "monge-ampere-4") return eq_monge_ampere_4();
    if (id == "minkowski-ma") return eq_minkowski_ma(make_gradient_weight(opt.w));
    if (id == "pmc") return eq_pmc(make_gradient_weight(opt.w));
    if (id == "aniso-q") return eq_aniso_q(make_anisotropy(opt.h), opt.c_q);
    if (id == "aniso-r") return eq_aniso_r(make_anisotropy(opt.h), opt.c_r);
    if (id == "helmholtz-minus") return eq_helmholtz_minus();
    CallableSpec c = parse_callable(id);
    if (c.name == "poisson") return eq_poisson(c.params.empty() ? 0.0 : c.params[0]);
    throw UnknownIdError("unknown equation id '" + id + "'");
}

} // namespace odet
