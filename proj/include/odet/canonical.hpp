#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "odet/equations.hpp"
#include "odet/errors.hpp"
#include "odet/field.hpp"

namespace odet {

/// Index of a translated family member: alpha = (x, y, z, p, q), plus the
/// resolved parameter t, translation (a, b) and matched point (x*, y*).
/// The member satisfies u(x, y) = z and Du(x, y) = (p, q) at the base point.
struct FamilyIndex {
    std::array<double, 5> alpha{}; // (x, y, z, p, q)
    double t = 0.0;
    Vec2 shift{};
    Vec2 matched{};
    double matching_residual = 0.0;
};

enum class FamilyKind { Translation, Parametric };

/// One-parameter solution family with diffeomorphic gradients, closed under
/// translations of the plane. Translation kind: u_t = u0 + t (z-independent
/// equations). Parametric kind: caller supplies jets of u_t and of du_t/dt.
struct CanonicalFamily {
    std::string id;
    FamilyKind kind = FamilyKind::Translation;
    EquationDef equation;

    // jets of u_t and of the t-derivative at a point
    std::function<Jet2(Vec2, double)> member;
    std::function<Jet2(Vec2, double)> member_dt;

    // optional initial guess (x0, y0, t0) for the matching Newton solve;
    // returning nullopt means (z, p, q) is outside the achievable range
    std::function<std::optional<std::array<double, 3>>(double z, double p, double q)> init_hint;

    double sample_radius = 3.0; // box for property sampling
    double t_lo = -1.5, t_hi = 1.5;

    /// Jet of the family member indexed by `fi` at an arbitrary point.
    Jet2 member_jet_at(const FamilyIndex& fi, Vec2 point) const {
        return member(point + fi.shift, fi.t);
    }
};

/// Translation family from a base solution u0 (requires z-independent F).
inline CanonicalFamily make_translation_family(std::string id, AnalyticJet base,
                                               EquationDef eq) {
    if (eq.depends_on_z)
        throw Error("translation family '" + id + "' needs a z-independent equation");
    CanonicalFamily fam;
    fam.id = std::move(id);
    fam.kind = FamilyKind::Translation;
    fam.equation = std::move(eq);
    fam.member = [base](Vec2 v, double t) {
        Jet2 j = base(v);
        j.z += t;
        return j;
    };
    fam.member_dt = [](Vec2, double) { return Jet2{1.0, 0.0, 0.0, 0.0, 0.0, 0.0}; };
    return fam;
}

struct LookupOptions {
    double tol_rel = 1e-12;
    int max_iters = 50;
    double step_cap = 4.0; // trust-region cap on one Newton step
};

/// Solve the jet-matching conditions for the unique family member through
/// alpha = (x, y, z, p, q).
///
/// Translation kind inverts Du0(x*, y*) = (p, q) by damped Newton, then reads
/// off t and the shift. Parametric kind solves the full 3x3 system in
/// (x*, y*, t).
inline FamilyIndex lookup(const CanonicalFamily& fam, const std::array<double, 5>& alpha,
                          const LookupOptions& opt = {}) {
    const double x = alpha[0], y = alpha[1], z = alpha[2], p = alpha[3], q = alpha[4];
    const double scale = std::max({1.0, std::abs(z), std::abs(p), std::abs(q)});
    const double tol = opt.tol_rel * scale;

    Vec2 xs{0.0, 0.0};
    double t = 0.0;
    if (fam.init_hint) {
        auto hint = fam.init_hint(z, p, q);
        if (!hint)
            throw OutOfRangeError("(z, p, q) outside the achievable range of family '" +
                                  fam.id + "'");
        xs = {(*hint)[0], (*hint)[1]};
        t = (*hint)[2];
    }

    auto clip_step = [&](Vec2 d) {
        double n = norm(d);
        return n > opt.step_cap ? (opt.step_cap / n) * d : d;
    };

    if (fam.kind == FamilyKind::Translation) {
        Jet2 j = fam.member(xs, 0.0);
        double res = std::hypot(j.p - p, j.q - q);
        for (int it = 0; it < opt.max_iters && res > tol; ++it) {
            SymForm2 H = j.hessian();
            if (std::abs(H.det()) < 1e-14)
                throw OutOfRangeError("degenerate Hessian while inverting the gradient map");
            Vec2 rhs{p - j.p, q - j.q};
            Vec2 d = clip_step(H.mat().inverse().apply(rhs));
            // backtracking on the gradient-matching residual
            double lam = 1.0;
            for (int bt = 0; bt < 40; ++bt) {
                Jet2 jn = fam.member(xs + lam * d, 0.0);
                double rn = std::hypot(jn.p - p, jn.q - q);
                if (rn < res || rn <= tol) {
                    xs += lam * d;
                    j = jn;
                    res = rn;
                    break;
                }
                lam *= 0.5;
                if (bt == 39) throw NoConvergenceError("gradient inversion stalled");
            }
        }
        if (res > tol)
            throw NoConvergenceError("gradient inversion did not reach tolerance in family '" +
                                     fam.id + "'");
        FamilyIndex fi;
        fi.alpha = alpha;
        fi.matched = xs;
        fi.t = z - fam.member(xs, 0.0).z;
        fi.shift = xs - Vec2{x, y};
        fi.matching_residual = res;
        return fi;
    }

    // parametric: Newton on (u - z, u_x - p, u_y - q) in (x*, y*, t)
    auto system = [&](Vec2 v, double tt, double g[3]) {
        Jet2 j = fam.member(v, tt);
        g[0] = j.z - z;
        g[1] = j.p - p;
        g[2] = j.q - q;
        return j;
    };
    double g[3];
    Jet2 j = system(xs, t, g);
    double res = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    for (int it = 0; it < opt.max_iters && res > tol; ++it) {
        Jet2 dj = fam.member_dt(xs, t);
        // rows: d(value), d(u_x), d(u_y) by (x*, y*, t)
        double J[3][3] = {{j.p, j.q, dj.z}, {j.r, j.s, dj.p}, {j.s, j.t, dj.q}};
        double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                     J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                     J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        if (std::abs(det) < 1e-14)
            throw OutOfRangeError("singular matching system in family '" + fam.id + "'");
        auto solve3 = [&](int col) {
            double M[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) M[a][b] = J[a][b];
            for (int a = 0; a < 3; ++a) M[a][col] = -g[a];
            return (M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                    M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                    M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0])) /
                   det;
        };
        Vec2 dxy{solve3(0), solve3(1)};
        double dt = solve3(2);
        double dn = std::sqrt(norm2(dxy) + dt * dt);
        if (dn > opt.step_cap) {
            dxy = (opt.step_cap / dn) * dxy;
            dt *= opt.step_cap / dn;
        }
        double lam = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            double gn[3];
            Jet2 jn = system(xs + lam * dxy, t + lam * dt, gn);
            double rn = std::sqrt(gn[0] * gn[0] + gn[1] * gn[1] + gn[2] * gn[2]);
            if (rn < res || rn <= tol) {
                xs += lam * dxy;
                t += lam * dt;
                j = jn;
                for (int a = 0; a < 3; ++a) g[a] = gn[a];
                res = rn;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if (!accepted) throw NoConvergenceError("matching Newton stalled in '" + fam.id + "'");
    }
    if (res > tol)
        throw NoConvergenceError("matching Newton did not reach tolerance in '" + fam.id + "'");
    FamilyIndex fi;
    fi.alpha = alpha;
    fi.matched = xs;
    fi.t = t;
    fi.shift = xs - Vec2{x, y};
    fi.matching_residual = res;
    return fi;
}

/// Gamma(alpha): Hessian of the matched family member at (x, y).
inline SymForm2 gamma(const CanonicalFamily& fam, const std::array<double, 5>& alpha,
                      const LookupOptions& opt = {}) {
    FamilyIndex fi = lookup(fam, alpha, opt);
    return fam.member(fi.matched, fi.t).hessian();
}

inline SymForm2 gamma(const CanonicalFamily& fam, Vec2 point, const Jet2& jet_of_u,
                      const LookupOptions& opt = {}) {
    return gamma(fam, {point.x, point.y, jet_of_u.z, jet_of_u.p, jet_of_u.q}, opt);
}

// ---------------------------------------------------------------------------
// Lambda as a field
// ---------------------------------------------------------------------------

/// Symmetric-form field on a grid with a validity mask.
struct SymFormField {
    GridSpec grid;
    std::vector<SymForm2> form;
    std::vector<std::uint8_t> valid;

    static SymFormField empty(const GridSpec& g) {
        SymFormField f;
        f.grid = g;
        f.form.assign(g.count(), SymForm2{});
        f.valid.assign(g.count(), 0);
        return f;
    }
};

/// Per-node Lambda = Gamma(x, y, u, Du); the definiteness sign must be
/// consistent across the region.
inline SymFormField lambda_field(
    const CanonicalFamily& fam, const ScalarField& u,
    const std::function<bool(Vec2)>& region = nullptr) {
    SymFormField lam = SymFormField::empty(u.grid);
    int sign_seen = 0;
    for (int j = 0; j < u.grid.ny; ++j) {
        for (int i = 0; i < u.grid.nx; ++i) {
            Vec2 v = u.grid.node(i, j);
            if (region && !region(v)) continue;
            if (!u.has_closed_form() && !u.stencil_complete(i, j)) continue;
            if (!u.inside(i, j)) continue;
            Jet2 jet;
            try {
                jet = u.eval_jet(v);
            } catch (const OutOfDomainError&) {
                continue;
            }
            SymForm2 G;
            try {
                G = gamma(fam, v, jet);
            } catch (const OutOfRangeError&) {
                continue;
            }
            int s = G.definiteness_sign();
            if (s == 0)
                throw MixedSignatureError("Gamma indefinite at a node of family '" + fam.id +
                                          "'");
            if (sign_seen == 0) sign_seen = s;
            if (s != sign_seen)
                throw MixedSignatureError("Lambda changes definiteness sign across region");
            int k = u.grid.idx(i, j);
            lam.form[k] = G;
            lam.valid[k] = 1;
        }
    }
    return lam;
}

// ---------------------------------------------------------------------------
// Property (*) verification
// ---------------------------------------------------------------------------

struct PropertyStarReport {
    double det_min = 0.0;
    double det_max = 0.0;
    bool det_sign_consistent = true;
    double residual_max = 0.0;
    int injectivity_failures = 0;
    int uniqueness_checks = 0;
    int uniqueness_passed = 0;
    bool pass = false;
};

/// Sampled audit of the family's defining properties: one-signed
/// nondegenerate det(D^2 u_t), vanishing PDE residual, injective gradients
/// and (parametric kind) uniqueness of the jet-matching solve.
inline PropertyStarReport verify_property_star(const CanonicalFamily& fam, int budget = 200,
                                               std::uint64_t seed = 12345) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-fam.sample_radius, fam.sample_radius);
    std::uniform_real_distribution<double> ut(fam.t_lo, fam.t_hi);

    PropertyStarReport rep;
    rep.det_min = std::numeric_limits<double>::infinity();
    rep.det_max = -std::numeric_limits<double>::infinity();
    int pos = 0, neg = 0;

    for (int k = 0; k < budget; ++k) {
        Vec2 v{ux(rng), ux(rng)};
        double t = ut(rng);
        Jet2 j = fam.member(v, t);
        double d = j.hessian().det();
        rep.det_min = std::min(rep.det_min, d);
        rep.det_max = std::max(rep.det_max, d);
        (d > 0.0 ? pos : neg)++;
        rep.residual_max = std::max(rep.residual_max, std::abs(fam.equation.F(j)));
    }
    rep.det_sign_consistent = (pos == 0 || neg == 0);

    // injectivity of the gradient map at fixed t
    for (int k = 0; k < budget; ++k) {
        Vec2 v1{ux(rng), ux(rng)}, v2{ux(rng), ux(rng)};
        if (dist(v1, v2) < 1e-6) continue;
        double t = ut(rng);
        Jet2 j1 = fam.member(v1, t), j2 = fam.member(v2, t);
        double gd = std::hypot(j1.p - j2.p, j1.q - j2.q);
        if (gd < 1e-10 * (1.0 + std::hypot(j1.p, j1.q))) ++rep.injectivity_failures;
    }

    // uniqueness of the matching solve (meaningful for parametric kind)
    int checks = fam.kind == FamilyKind::Parametric ? std::max(8, budget / 16) : 8;
    std::uniform_real_distribution<double> jitter(-0.4, 0.4);
    for (int k = 0; k < checks; ++k) {
        Vec2 v{ux(rng), ux(rng)};
        double t = ut(rng);
        Jet2 j = fam.member(v, t);
        std::array<double, 5> alpha{v.x, v.y, j.z, j.p, j.q};
        ++rep.uniqueness_checks;
        try {
            FamilyIndex a = lookup(fam, alpha);
            bool ok = dist(a.matched, v) < 1e-6 && std::abs(a.t - t) < 1e-6;
            if (ok && fam.kind == FamilyKind::Parametric) {
                // a jittered start must land on the same solution
                CanonicalFamily jittered = fam;
                Vec2 dv{jitter(rng), jitter(rng)};
                double dt = jitter(rng);
                jittered.init_hint = [v, t, dv, dt](double, double, double)
                    -> std::optional<std::array<double, 3>> {
                    return std::array<double, 3>{v.x + dv.x, v.y + dv.y, t + dt};
                };
                FamilyIndex b = lookup(jittered, alpha);
                ok = dist(b.matched, a.matched) < 1e-6 && std::abs(b.t - a.t) < 1e-6;
            }
            if (ok) ++rep.uniqueness_passed;
        } catch (const Error&) {
            // counted as a failed check
        }
    }

    rep.pass = rep.det_sign_consistent && std::abs(rep.det_min) > 1e-12 &&
               rep.det_min * rep.det_max > 0.0 && rep.residual_max < 1e-8 &&
               rep.injectivity_failures == 0 && rep.uniqueness_passed == rep.uniqueness_checks;
    return rep;
}

// ---------------------------------------------------------------------------
// family registry
// ---------------------------------------------------------------------------

/// e^t cosh(x) cosh(y), a parametric family for r + t - 2z = 0.
/// Achievable range: z > 0, |p| < z, |q| < z.
inline CanonicalFamily make_exp_cosh_family() {
    CanonicalFamily fam;
    fam.id = "exp-cosh";
    fam.kind = FamilyKind::Parametric;
    fam.equation = eq_helmholtz_minus();
    fam.member = [](Vec2 v, double t) -> Jet2 {
        double e = std::exp(t);
        double cx = std::cosh(v.x), sx = std::sinh(v.x);
        double cy = std::cosh(v.y), sy = std::sinh(v.y);
        return {e * cx * cy, e * sx * cy, e * cx * sy, e * cx * cy, e * sx * sy, e * cx * cy};
    };
    fam.member_dt = fam.member; // d/dt multiplies by 1
    fam.init_hint = [](double z, double p, double q) -> std::optional<std::array<double, 3>> {
        if (!(z > 0.0) || std::abs(p) >= z || std::abs(q) >= z) return std::nullopt;
        double x0 = std::atanh(p / z), y0 = std::atanh(q / z);
        double t0 = std::log(z / (std::cosh(x0) * std::cosh(y0)));
        return std::array<double, 3>{x0, y0, t0};
    };
    fam.sample_radius = 2.0;
    fam.t_lo = -1.0;
    fam.t_hi = 1.0;
    return fam;
}

inline CanonicalFamily make_family(const std::string& id) {
    CallableSpec c = parse_callable(id);
    if (c.name == "serrin")
        return make_translation_family("serrin", expr::serrin(0.0), eq_serrin_laplace());
    if (c.name == "aniso")
        return make_translation_family("aniso", expr::aniso(0.0), eq_aniso_linear());
    if (c.name == "paraboloid")
        return make_translation_family("paraboloid", expr::paraboloid(0.0),
                                       eq_monge_ampere_4());
    if (c.name == "exp-cosh") return make_exp_cosh_family();
    throw UnknownIdError("unknown family id '" + c.name + "'");
}

} // namespace odet
