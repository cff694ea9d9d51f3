#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "odet/canonical.hpp"
#include "odet/errors.hpp"
#include "odet/field.hpp"
#include "odet/level_curve.hpp"
#include "odet/periodic_spline.hpp"

namespace odet {

/// Neumann data g as a function of the inner-normal direction: a monotone
/// angle table with a C1 periodic cubic interpolant.
class NeumannData {
public:
    NeumannData() = default;

    /// knots: strictly increasing nu-angles in [0, 2pi) with g values.
    NeumannData(std::vector<double> angles, std::vector<double> values, std::string provenance)
        : angles_(angles), values_(values), provenance_(std::move(provenance)),
          spline_(std::move(angles), std::move(values), 2.0 * kPi) {}

    /// Constant Neumann data (the classical case).
    static NeumannData constant(double c) {
        std::vector<double> a{0.0, 0.5 * kPi, kPi, 1.5 * kPi};
        std::vector<double> v(4, c);
        return NeumannData(std::move(a), std::move(v), "constant");
    }

    double value_at_angle(double phi) const { return spline_.value(phi); }
    double derivative_at_angle(double phi) const { return spline_.derivative(phi); }

    double operator()(Vec2 nu) const { return spline_.value(std::atan2(nu.y, nu.x)); }

    /// Differential (dg)_nu applied to a tangent vector w of the circle.
    double dg(Vec2 nu, Vec2 w) const {
        double phi = std::atan2(nu.y, nu.x);
        return spline_.derivative(phi) * dot(w, rot90(nu));
    }

    const std::vector<double>& angles() const { return angles_; }
    const std::vector<double>& values() const { return values_; }
    const std::string& provenance() const { return provenance_; }

    void write_csv(std::ostream& os) const {
        os << "angle,g,dg\n";
        for (size_t k = 0; k < angles_.size(); ++k)
            os << format_double(angles_[k]) << ',' << format_double(values_[k]) << ','
               << format_double(spline_.derivative(angles_[k])) << '\n';
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw ParseError("cannot open '" + path + "' for writing");
        write_csv(os);
    }

private:
    std::vector<double> angles_, values_;
    std::string provenance_;
    PeriodicSpline spline_;
};

struct ExtractOptions {
    double kappa_min = 1e-6;
    TraceOptions trace;
};

struct NeumannExtraction {
    NeumannData g;
    LevelCurve curve;
};

/// Read the natural Neumann data off a family member: trace its zero level,
/// require strict convexity, tabulate g = <nu, Du> against the nu-angle.
inline NeumannExtraction extract_neumann(const ScalarField& u0, const ExtractOptions& opt = {},
                                         const std::string& provenance = "") {
    NeumannExtraction out;
    out.curve = trace_zero_level(u0, opt.trace);
    const LevelCurve& c = out.curve;
    const int n = c.size();

    for (int k = 0; k < n; ++k)
        if (!(c.kappa[k] > opt.kappa_min))
            throw NotConvexError("zero level set is not strictly convex (kappa = " +
                                 std::to_string(c.kappa[k]) + ")");

    // the normal angle must wind exactly once
    double winding = 0.0;
    std::vector<double> phi(n);
    for (int k = 0; k < n; ++k) phi[k] = std::atan2(c.normal[k].y, c.normal[k].x);
    for (int k = 0; k < n; ++k)
        winding += wrap_to_pi(phi[(k + 1) % n] - phi[k]);
    if (std::abs(std::abs(winding) - 2.0 * kPi) > 1e-6)
        throw IncompleteCoverageError("normal map does not cover the circle exactly once");

    std::vector<std::pair<double, double>> table(n);
    for (int k = 0; k < n; ++k) {
        Jet2 j = u0.eval_jet(c.points[k]);
        double g = dot(c.normal[k], {j.p, j.q});
        double a = phi[k];
        if (a < 0.0) a += 2.0 * kPi;
        table[k] = {a, g};
    }
    std::sort(table.begin(), table.end());
    std::vector<double> angles, values;
    angles.reserve(n);
    values.reserve(n);
    for (auto& [a, g] : table) {
        if (!angles.empty() && a - angles.back() < 1e-12) continue;
        angles.push_back(a);
        values.push_back(g);
    }
    if (angles.size() < 8)
        throw IncompleteCoverageError("too few distinct normal angles for interpolation");
    out.g = NeumannData(std::move(angles), std::move(values),
                        provenance.empty() ? "extracted" : provenance);
    return out;
}

// ---------------------------------------------------------------------------
// boundary identities
// ---------------------------------------------------------------------------

/// Per-vertex residuals of the boundary identities of a vanishing solution:
/// tangential <w, Du>, curvature D2u(w,w) + kappa g(nu), and (when Neumann
/// data is supplied) the mixed identity D2u(w,nu) + kappa dg(w). Without g
/// the curvature identity uses <nu, Du> in its place, which holds for any
/// smooth function vanishing on the curve.
struct BoundaryIdentityTable {
    std::vector<double> tangential;
    std::vector<double> curvature;
    std::vector<double> mixed; // empty without Neumann data
    double tangential_max = 0.0;
    double curvature_max = 0.0;
    double mixed_max = 0.0;
};

inline BoundaryIdentityTable boundary_identities(const ScalarField& u, const LevelCurve& curve,
                                                 const NeumannData* g = nullptr) {
    BoundaryIdentityTable tbl;
    const int n = curve.size();
    tbl.tangential.resize(n);
    tbl.curvature.resize(n);
    if (g) tbl.mixed.resize(n);
    for (int k = 0; k < n; ++k) {
        Vec2 p = curve.points[k], w = curve.tangent[k], nu = curve.normal[k];
        double kap = curve.kappa[k];
        Jet2 j = u.eval_jet(p);
        Vec2 du{j.p, j.q};
        SymForm2 H = j.hessian();
        double G = g ? (*g)(nu) : dot(nu, du);
        tbl.tangential[k] = dot(w, du);
        tbl.curvature[k] = H(w, w) + kap * G;
        if (g) tbl.mixed[k] = H(w, nu) + kap * g->dg(nu, w);
        tbl.tangential_max = std::max(tbl.tangential_max, std::abs(tbl.tangential[k]));
        tbl.curvature_max = std::max(tbl.curvature_max, std::abs(tbl.curvature[k]));
        if (g) tbl.mixed_max = std::max(tbl.mixed_max, std::abs(tbl.mixed[k]));
    }
    return tbl;
}

// ---------------------------------------------------------------------------
// eigenvalue ratio at the boundary
// ---------------------------------------------------------------------------

struct LambdaRatio {
    double lambda = 0.0;        // kappa / kappa_xi
    double kappa = 0.0;
    double kappa_xi = 0.0;
    double eigen_relation_deviation = 0.0; // residual of the eigen relation at Y in {w, nu}
};

/// Quantifies whether the boundary tangent is an eigenline: compares
/// lambda = kappa/kappa_xi against the relation
/// lambda (D^2 u^xi)(w, Y) = (D^2 u)(w, Y) for Y in {w, nu}.
inline LambdaRatio eigen_lambda_ratio(const ScalarField& u, const CanonicalFamily& fam,
                                      const LevelCurve& curve, int vertex) {
    Vec2 p = curve.points[vertex], w = curve.tangent[vertex], nu = curve.normal[vertex];
    Jet2 j = u.eval_jet(p);
    FamilyIndex fi = lookup(fam, {p.x, p.y, 0.0, j.p, j.q});
    Jet2 jxi = fam.member_jet_at(fi, p);
    SymForm2 Hu = j.hessian(), Hxi = jxi.hessian();

    double denom = dot(nu, {jxi.p, jxi.q});
    if (std::abs(denom) < 1e-14)
        throw DegenerateGradientError("family member has degenerate gradient at the boundary");
    LambdaRatio out;
    out.kappa = curve.kappa[vertex];
    out.kappa_xi = -Hxi(w, w) / denom;
    if (!(out.kappa_xi > 0.0))
        throw NotConvexError("matched member's zero set is not convex at the vertex");
    out.lambda = out.kappa / out.kappa_xi;
    double dev_w = std::abs(out.lambda * Hxi(w, w) - Hu(w, w));
    double dev_n = std::abs(out.lambda * Hxi(w, nu) - Hu(w, nu));
    out.eigen_relation_deviation = std::max(dev_w, dev_n);
    return out;
}

// ---------------------------------------------------------------------------
// full audit of a candidate pair (u, Omega)
// ---------------------------------------------------------------------------

struct CheckTolerances {
    double pde = 1e-6;
    double dirichlet = 1e-6;
    double neumann = 1e-6;
    double canonicality = 1e-6;

    /// Defaults per the tolerance schema: closed forms 1e-6, grids 10 h^2.
    static CheckTolerances for_input(bool closed_form, double h) {
        CheckTolerances tol;
        if (!closed_form) {
            double t = 10.0 * h * h;
            tol = {t, t, t, t};
        }
        return tol;
    }
};

struct SolutionReport {
    double pde_residual_max = 0.0;
    double dirichlet_max = 0.0;
    double neumann_max = 0.0;
    double canonicality_score = 0.0;
    std::string verdict; // "canonical" or "non-canonical"
    CheckTolerances tolerances;
};

/// Residual audit of a candidate (u, Omega, g) against the equation and the
/// family's jet-matching comparison members.
inline SolutionReport check_solution(const ScalarField& u, const LevelCurve& curve,
                                     const EquationDef& eq, const CanonicalFamily& fam,
                                     const NeumannData& g,
                                     const CheckTolerances& tol = {}) {
    SolutionReport rep;
    rep.tolerances = tol;

    // PDE residual over interior sample nodes
    std::vector<Vec2> interior;
    const GridSpec& gr = u.grid;
    int stride = std::max(1, std::min(gr.nx, gr.ny) / 48);
    for (int j = 0; j < gr.ny; j += stride) {
        for (int i = 0; i < gr.nx; i += stride) {
            Vec2 v = gr.node(i, j);
            if (!curve.encloses(v)) continue;
            if (!u.has_closed_form() && !u.stencil_complete(i, j)) continue;
            if (!u.inside(i, j)) continue;
            Jet2 jet = u.eval_jet(v);
            if (!eq.admissible(jet)) continue;
            rep.pde_residual_max = std::max(rep.pde_residual_max, std::abs(eq.F(jet)));
            interior.push_back(v);
        }
    }

    const int n = curve.size();
    for (int k = 0; k < n; ++k) {
        Jet2 jet = u.eval_jet(curve.points[k]);
        rep.dirichlet_max = std::max(rep.dirichlet_max, std::abs(jet.z));
        double gnu = g(curve.normal[k]);
        rep.neumann_max =
            std::max(rep.neumann_max, std::abs(dot(curve.normal[k], {jet.p, jet.q}) - gnu));
    }

    // canonicality: compare u with jet-matched members sampled around the curve
    int n_xi = std::min(12, n);
    for (int m = 0; m < n_xi; ++m) {
        int k = (m * n) / n_xi;
        Vec2 p = curve.points[k];
        Jet2 jet = u.eval_jet(p);
        FamilyIndex fi;
        try {
            fi = lookup(fam, {p.x, p.y, jet.z, jet.p, jet.q});
        } catch (const Error&) {
            rep.canonicality_score = std::numeric_limits<double>::infinity();
            continue;
        }
        for (Vec2 qpt : interior) {
            double diff = std::abs(u.eval_jet(qpt).z - fam.member_jet_at(fi, qpt).z);
            rep.canonicality_score = std::max(rep.canonicality_score, diff);
        }
        for (int kk = 0; kk < n; kk += std::max(1, n / 32)) {
            Vec2 qpt = curve.points[kk];
            double diff = std::abs(u.eval_jet(qpt).z - fam.member_jet_at(fi, qpt).z);
            rep.canonicality_score = std::max(rep.canonicality_score, diff);
        }
    }

    bool ok = rep.pde_residual_max <= tol.pde && rep.dirichlet_max <= tol.dirichlet &&
              rep.neumann_max <= tol.neumann && rep.canonicality_score <= tol.canonicality;
    rep.verdict = ok ? "canonical" : "non-canonical";
    return rep;
}

} // namespace odet
