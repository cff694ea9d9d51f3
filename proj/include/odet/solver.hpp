#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "odet/equations.hpp"
#include "odet/errors.hpp"
#include "odet/field.hpp"

namespace odet {

struct SolverControls {
    double tolerance = 1e-10; // sup-norm of the row-equilibrated discrete residual
    int max_iters = 40;
    int max_backtracks = 40;
    int continuation_steps = 0; // 0 = direct Newton on the target operator
    double small_cell = 0.1;    // cut fraction below which a node is interpolated
};

/// Dirichlet problem on the region psi > 0 of an implicit function, sampled
/// on a covering grid. Boundary crossings are located by linear interpolation
/// of psi along grid edges (marching-squares style); boundary data is imposed
/// there through Shortley-Weller stencils. Nodes hugging the boundary closer
/// than `small_cell` of a spacing get an interpolation row between the
/// crossing and the next interior node, which keeps the system
/// well-conditioned without losing second-order accuracy.
struct DirichletProblem {
    EquationDef eq;
    std::optional<EquationDef> continuation_from;
    AnalyticJet domain_psi;
    std::function<double(Vec2)> boundary_data; // value at crossing points
    GridSpec grid;
    SolverControls controls;
};

struct SolveResult {
    ScalarField solution;
    std::vector<double> residual_history; // concatenated across continuation steps
    std::vector<int> step_offsets;        // start of each continuation step's history
    int newton_iterations = 0;
};

namespace detail {

// linear functional of the unknowns producing one jet slot at one node
struct SlotForm {
    std::vector<std::pair<int, double>> terms; // (unknown id, coefficient)
    double constant = 0.0;
};

enum class RowKind { Pde, Interp };

struct NodeStencil {
    Vec2 pos;
    int row = -1;
    RowKind kind = RowKind::Pde;
    SlotForm slot[6]; // z, p, q, r, s, t (PDE rows)
    // interpolation rows: u_C - (interp_coef * u_opp + interp_const) = 0
    int interp_col = -1;
    double interp_coef = 0.0;
    double interp_const = 0.0;
};

inline void add_term(SlotForm& f, int col, double c) {
    if (col >= 0) f.terms.emplace_back(col, c);
}

// clamp Hessian eigenvalues from below; keeps the linearization elliptic
// while damping walks an iterate back onto the convex branch
inline void clamp_convex(Jet2& j, double eps) {
    SymForm2 H{j.r, j.s, j.t};
    double lo, hi;
    H.eigenvalues(lo, hi);
    if (lo >= eps) return;
    double theta = 0.5 * std::atan2(2.0 * H.a12, H.a11 - H.a22);
    double c = std::cos(theta), s = std::sin(theta);
    Vec2 vhi{c, s}, vlo{-s, c};
    double add = eps - lo;
    j.r += add * vlo.x * vlo.x;
    j.s += add * vlo.x * vlo.y;
    j.t += add * vlo.y * vlo.y;
    if (hi < eps) {
        double add2 = eps - hi;
        j.r += add2 * vhi.x * vhi.x;
        j.s += add2 * vhi.x * vhi.y;
        j.t += add2 * vhi.y * vhi.y;
    }
}

} // namespace detail

/// Newton finite-difference solve of F[u] = 0 with Dirichlet data on a masked
/// grid. Second-order centered stencils inside, Shortley-Weller arms at cut
/// cells, analytic Jacobian rows from the operator's partials, damped Newton
/// with row equilibration, direct sparse LU linear solves.
inline SolveResult solve_dirichlet(const DirichletProblem& prob,
                                   const std::function<double(Vec2)>& initial_guess = {}) {
    const GridSpec& g = prob.grid;
    const double h = g.h;
    const SolverControls& ctl = prob.controls;

    std::vector<double> psi(g.count());
    std::vector<std::uint8_t> inside(g.count(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            int k = g.idx(i, j);
            psi[k] = prob.domain_psi(g.node(i, j)).z;
            inside[k] = psi[k] > 0.0 ? 1 : 0;
        }

    auto crossing = [&](int k_in, int k_out, Vec2 a, Vec2 b, double& alpha) -> Vec2 {
        alpha = psi[k_in] / (psi[k_in] - psi[k_out]);
        return a + alpha * (b - a);
    };

    // node classification: regular PDE rows, small-cell interpolation rows,
    // hard pins for slivers with no interior backup
    const int di4[4] = {1, -1, 0, 0}, dj4[4] = {0, 0, 1, -1};
    enum : std::uint8_t { kPde = 0, kInterp = 1, kPinned = 2 };
    std::vector<std::uint8_t> role(g.count(), kPde);
    std::vector<double> pinned_value(g.count(), 0.0);
    struct InterpInfo {
        int opp_i = 0, opp_j = 0;
        double alpha = 0.0;
        double b = 0.0;
    };
    std::vector<InterpInfo> interp_info(g.count());

    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int k = g.idx(i, j);
            if (!inside[k]) continue;
            double alpha_min = 2.0;
            int dir_min = -1;
            double b_min = 0.0;
            bool off_grid = false;
            for (int d = 0; d < 4; ++d) {
                int ii = i + di4[d], jj = j + dj4[d];
                if (!g.contains(ii, jj)) {
                    off_grid = true;
                    continue;
                }
                int kn = g.idx(ii, jj);
                if (inside[kn]) continue;
                double alpha;
                Vec2 cp = crossing(k, kn, g.node(i, j), g.node(ii, jj), alpha);
                if (alpha < alpha_min) {
                    alpha_min = alpha;
                    dir_min = d;
                    b_min = prob.boundary_data(cp);
                }
            }
            if (off_grid) {
                role[k] = kPinned;
                pinned_value[k] = prob.boundary_data(g.node(i, j));
                continue;
            }
            if (dir_min < 0 || alpha_min >= ctl.small_cell) continue; // regular PDE row
            int oi = i - di4[dir_min], oj = j - dj4[dir_min];
            if (g.contains(oi, oj) && inside[g.idx(oi, oj)]) {
                role[k] = kInterp;
                interp_info[k] = {oi, oj, alpha_min, b_min};
            } else {
                role[k] = kPinned;
                pinned_value[k] = b_min;
            }
        }
    }

    std::vector<int> unknown_of(g.count(), -1);
    int n_unknowns = 0;
    for (int k = 0; k < g.count(); ++k)
        if (inside[k] && role[k] != kPinned) unknown_of[k] = n_unknowns++;
    if (n_unknowns == 0) throw Error("no interior unknowns inside the domain");

    // assemble the per-node rows once; ghosts and pinned nodes feed constants
    std::vector<detail::NodeStencil> stencils;
    stencils.reserve(n_unknowns);

    auto sample_info = [&](int i, int j, Vec2 from, int k_from, double& arm, int& col,
                           double& cval) {
        if (g.contains(i, j) && inside[g.idx(i, j)]) {
            int kn = g.idx(i, j);
            arm = h;
            if (role[kn] == kPinned) {
                col = -1;
                cval = pinned_value[kn];
            } else {
                col = unknown_of[kn];
                cval = 0.0;
            }
            return;
        }
        int kn = g.contains(i, j) ? g.idx(i, j) : -1;
        if (kn >= 0) {
            double alpha;
            Vec2 cp = crossing(k_from, kn, from, g.node(i, j), alpha);
            arm = std::max(alpha, 1e-8) * h;
            col = -1;
            cval = prob.boundary_data(cp);
        } else {
            arm = h; // callers guarantee a covering grid with an outside ring
            col = -1;
            cval = 0.0;
        }
    };

    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int k = g.idx(i, j);
            if (unknown_of[k] < 0) continue;
            detail::NodeStencil st;
            st.pos = g.node(i, j);
            st.row = unknown_of[k];

            if (role[k] == kInterp) {
                st.kind = detail::RowKind::Interp;
                const InterpInfo& info = interp_info[k];
                int ko = g.idx(info.opp_i, info.opp_j);
                double denom = 1.0 + info.alpha;
                if (role[ko] == kPinned || unknown_of[ko] < 0) {
                    st.interp_col = -1;
                    st.interp_const = (info.b + info.alpha * pinned_value[ko]) / denom;
                } else {
                    st.interp_col = unknown_of[ko];
                    st.interp_coef = info.alpha / denom;
                    st.interp_const = info.b / denom;
                }
                stencils.push_back(std::move(st));
                continue;
            }

            detail::add_term(st.slot[0], unknown_of[k], 1.0); // z

            struct Arm { double len; int col; double cval; };
            auto arm_at = [&](int ii, int jj) {
                Arm a;
                sample_info(ii, jj, st.pos, k, a.len, a.col, a.cval);
                return a;
            };
            Arm xl = arm_at(i - 1, j), xr = arm_at(i + 1, j);
            Arm yl = arm_at(i, j - 1), yr = arm_at(i, j + 1);

            auto first_second = [&](const Arm& lo, const Arm& hi, detail::SlotForm& d1,
                                    detail::SlotForm& d2) {
                double hl = lo.len, hr = hi.len;
                // unequal-arm first derivative, exact on quadratics
                double cl = -hr / (hl * (hl + hr));
                double cc = (hr - hl) / (hl * hr);
                double cr = hl / (hr * (hl + hr));
                if (lo.col >= 0) detail::add_term(d1, lo.col, cl); else d1.constant += cl * lo.cval;
                detail::add_term(d1, unknown_of[k], cc);
                if (hi.col >= 0) detail::add_term(d1, hi.col, cr); else d1.constant += cr * hi.cval;
                // unequal-arm second derivative
                double sl = 2.0 / (hl * (hl + hr));
                double sc = -2.0 / (hl * hr);
                double sr = 2.0 / (hr * (hl + hr));
                if (lo.col >= 0) detail::add_term(d2, lo.col, sl); else d2.constant += sl * lo.cval;
                detail::add_term(d2, unknown_of[k], sc);
                if (hi.col >= 0) detail::add_term(d2, hi.col, sr); else d2.constant += sr * hi.cval;
            };
            first_second(xl, xr, st.slot[1], st.slot[3]); // p, r
            first_second(yl, yr, st.slot[2], st.slot[5]); // q, t

            // mixed derivative from the four diagonal samples; outside
            // diagonals are rebuilt by quadratic extrapolation along the
            // diagonal through the center and the opposite sample
            auto diag_sample = [&](int sx, int sy, detail::SlotForm& form, double weight) {
                int ii = i + sx, jj = j + sy;
                if (g.contains(ii, jj) && inside[g.idx(ii, jj)]) {
                    int kn = g.idx(ii, jj);
                    if (role[kn] == kPinned)
                        form.constant += weight * pinned_value[kn];
                    else
                        detail::add_term(form, unknown_of[kn], weight);
                    return;
                }
                int kn = g.contains(ii, jj) ? g.idx(ii, jj) : -1;
                double beta = 0.5;
                Vec2 cp = st.pos;
                if (kn >= 0) cp = crossing(k, kn, st.pos, g.node(ii, jj), beta);
                beta = std::max(beta, 1e-3);
                double b = prob.boundary_data(cp);
                int oi = i - sx, oj = j - sy;
                bool opp_ok = g.contains(oi, oj) && inside[g.idx(oi, oj)] &&
                              role[g.idx(oi, oj)] != kPinned && unknown_of[g.idx(oi, oj)] >= 0;
                if (opp_ok) {
                    // quadratic through opposite (-d), center (0), crossing (beta d)
                    double lm = (1.0 - beta) / (1.0 + beta);
                    double lc = -2.0 * (1.0 - beta) / beta;
                    double lp = 2.0 / (beta * (1.0 + beta));
                    detail::add_term(form, unknown_of[g.idx(oi, oj)], weight * lm);
                    detail::add_term(form, unknown_of[k], weight * lc);
                    form.constant += weight * lp * b;
                } else {
                    // linear extension through center and crossing
                    double lc = 1.0 - 1.0 / beta;
                    double lp = 1.0 / beta;
                    detail::add_term(form, unknown_of[k], weight * lc);
                    form.constant += weight * lp * b;
                }
            };
            double wdiag = 1.0 / (4.0 * h * h);
            diag_sample(+1, +1, st.slot[4], +wdiag);
            diag_sample(-1, -1, st.slot[4], +wdiag);
            diag_sample(-1, +1, st.slot[4], -wdiag);
            diag_sample(+1, -1, st.slot[4], -wdiag);

            stencils.push_back(std::move(st));
        }
    }

    // initial iterate
    Eigen::VectorXd u(n_unknowns);
    for (const auto& st : stencils)
        u[st.row] = initial_guess ? initial_guess(st.pos) : 0.0;

    auto jets_of = [&](const Eigen::VectorXd& vec, std::vector<Jet2>& jets) {
        jets.resize(stencils.size());
        for (size_t m = 0; m < stencils.size(); ++m) {
            if (stencils[m].kind != detail::RowKind::Pde) continue;
            double slot[6];
            for (int s = 0; s < 6; ++s) {
                double acc = stencils[m].slot[s].constant;
                for (auto& [col, c] : stencils[m].slot[s].terms) acc += c * vec[col];
                slot[s] = acc;
            }
            jets[m] = Jet2{slot[0], slot[1], slot[2], slot[3], slot[4], slot[5]};
        }
    };

    // row equilibration: cut-cell stencils carry O(1/(alpha h^2)) entries, so
    // each node's residual is measured against its own stencil scale (the
    // scaled system is algebraically identical)
    std::vector<double> row_weight(stencils.size(), 1.0);
    for (size_t m = 0; m < stencils.size(); ++m) {
        if (stencils[m].kind != detail::RowKind::Pde) continue;
        double cmax = 0.0;
        for (int s = 3; s < 6; ++s)
            for (auto& [col, c] : stencils[m].slot[s].terms)
                cmax = std::max(cmax, std::abs(c));
        row_weight[m] = 1.0 / std::max(1.0, 0.5 * cmax * h * h);
    }

    auto interp_residual = [&](const detail::NodeStencil& st, const Eigen::VectorXd& vec) {
        double rhs = st.interp_const;
        if (st.interp_col >= 0) rhs += st.interp_coef * vec[st.interp_col];
        return vec[st.row] - rhs;
    };

    SolveResult result;
    auto newton_solve = [&](const EquationDef& eq) {
        result.step_offsets.push_back(int(result.residual_history.size()));
        std::vector<Jet2> jets;
        jets_of(u, jets);

        // operators with a convexified evaluation run Newton on it: it agrees
        // with F on the admissible branch and keeps value and gradient sane
        // off it (eigenvalue floor with linear deficit)
        double dscratch[6];
        auto eval_value = [&](const Jet2& jet) {
            return eq.projected ? eq.projected(jet, dscratch) : eq.F(jet);
        };

        auto residual_norm = [&](const Eigen::VectorXd& vec, const std::vector<Jet2>& js) {
            double worst = 0.0;
            for (size_t m = 0; m < js.size(); ++m) {
                double v = stencils[m].kind == detail::RowKind::Pde
                               ? row_weight[m] * eval_value(js[m])
                               : interp_residual(stencils[m], vec);
                if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
                worst = std::max(worst, std::abs(v));
            }
            return worst;
        };

        double rnorm = residual_norm(u, jets);
        result.residual_history.push_back(rnorm);

        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        for (int it = 0; it < ctl.max_iters; ++it) {
            if (rnorm <= ctl.tolerance) return;

            std::vector<Eigen::Triplet<double>> trips;
            trips.reserve(stencils.size() * 12);
            Eigen::VectorXd rhs(n_unknowns);
            for (size_t m = 0; m < stencils.size(); ++m) {
                const detail::NodeStencil& st = stencils[m];
                if (st.kind == detail::RowKind::Interp) {
                    rhs[st.row] = -interp_residual(st, u);
                    trips.emplace_back(st.row, st.row, 1.0);
                    if (st.interp_col >= 0)
                        trips.emplace_back(st.row, st.interp_col, -st.interp_coef);
                    continue;
                }
                const Jet2& jet = jets[m];
                double w = row_weight[m];
                double dF[6];
                double val;
                if (eq.projected) {
                    val = eq.projected(jet, dF);
                } else {
                    Jet2 lin = jet;
                    if (eq.region == JetRegion::ConvexBranch) {
                        double hnorm = SymForm2{jet.r, jet.s, jet.t}.frobenius();
                        detail::clamp_convex(lin, std::max(1e-10, 1e-3 * hnorm));
                    }
                    val = eq.F(jet);
                    dF[0] = eq.Fz(lin);
                    dF[1] = eq.Fp(lin);
                    dF[2] = eq.Fq(lin);
                    dF[3] = eq.Fr(lin);
                    dF[4] = eq.Fs(lin);
                    dF[5] = eq.Ft(lin);
                }
                rhs[st.row] = -w * val;
                for (int s = 0; s < 6; ++s) {
                    if (dF[s] == 0.0) continue;
                    for (auto& [col, c] : st.slot[s].terms)
                        trips.emplace_back(st.row, col, w * dF[s] * c);
                }
            }
            Eigen::SparseMatrix<double> J(n_unknowns, n_unknowns);
            J.setFromTriplets(trips.begin(), trips.end());
            J.makeCompressed();
            lu.compute(J);
            if (lu.info() != Eigen::Success)
                throw NoConvergenceError("sparse factorization failed in '" + eq.id + "'");
            Eigen::VectorXd d = lu.solve(rhs);

            double lam = 1.0;
            bool accepted = false;
            std::vector<Jet2> jets_new;
            for (int bt = 0; bt < ctl.max_backtracks; ++bt) {
                Eigen::VectorXd u_new = u + lam * d;
                jets_of(u_new, jets_new);
                double rn = residual_norm(u_new, jets_new);
                if (rn < rnorm * (1.0 - 1e-4 * lam) || rn <= ctl.tolerance) {
                    u = std::move(u_new);
                    jets = std::move(jets_new);
                    rnorm = rn;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if (!accepted) {
                bool inadmissible = false;
                for (size_t m = 0; m < jets.size(); ++m)
                    if (stencils[m].kind == detail::RowKind::Pde &&
                        !eq.admissible(jets[m])) {
                        inadmissible = true;
                        break;
                    }
                if (inadmissible)
                    throw InadmissibleIterateError(
                        "iterate left the admissible region of '" + eq.id +
                        "' and damping stalled (configure continuation from an "
                        "admissible operator)");
                throw NoConvergenceError("Newton stalled in '" + eq.id + "'");
            }
            result.residual_history.push_back(rnorm);
            ++result.newton_iterations;
        }
        if (rnorm > ctl.tolerance)
            throw NoConvergenceError("Newton did not reach tolerance in '" + eq.id +
                                     "' (residual " + std::to_string(rnorm) + ")");

        // the projected residual converged; the converged iterate must also
        // sit inside the admissible region, where the projection is inactive
        for (size_t m = 0; m < jets.size(); ++m)
            if (stencils[m].kind == detail::RowKind::Pde && !eq.admissible(jets[m]))
                throw InadmissibleIterateError(
                    "converged iterate left the admissible region of '" + eq.id + "'");
    };

    if (prob.continuation_from && ctl.continuation_steps > 0) {
        const EquationDef& e0 = *prob.continuation_from;
        const EquationDef& e1 = prob.eq;
        for (int s = 0; s <= ctl.continuation_steps; ++s) {
            double c = double(s) / ctl.continuation_steps;
            EquationDef blend;
            blend.id = e1.id + "@c=" + std::to_string(c);
            auto mix = [c](const JetFn& a, const JetFn& b) -> JetFn {
                return [c, a, b](const Jet2& j) { return (1.0 - c) * a(j) + c * b(j); };
            };
            blend.F = mix(e0.F, e1.F);
            blend.Fz = mix(e0.Fz, e1.Fz);
            blend.Fp = mix(e0.Fp, e1.Fp);
            blend.Fq = mix(e0.Fq, e1.Fq);
            blend.Fr = mix(e0.Fr, e1.Fr);
            blend.Fs = mix(e0.Fs, e1.Fs);
            blend.Ft = mix(e0.Ft, e1.Ft);
            if (e0.projected || e1.projected) {
                auto part = [](const EquationDef& e) {
                    return [&e](const Jet2& j, double dF[6]) {
                        if (e.projected) return e.projected(j, dF);
                        dF[0] = e.Fz(j); dF[1] = e.Fp(j); dF[2] = e.Fq(j);
                        dF[3] = e.Fr(j); dF[4] = e.Fs(j); dF[5] = e.Ft(j);
                        return e.F(j);
                    };
                };
                blend.projected = [c, p0 = part(e0), p1 = part(e1)](const Jet2& j,
                                                                    double dF[6]) {
                    double d0[6], d1[6];
                    double v0 = p0(j, d0), v1 = p1(j, d1);
                    for (int a = 0; a < 6; ++a) dF[a] = (1.0 - c) * d0[a] + c * d1[a];
                    return (1.0 - c) * v0 + c * v1;
                };
            }
            blend.region = (c == 1.0) ? e1.region : e0.region;
            blend.region_desc = e1.region_desc;
            newton_solve(blend);
        }
    } else {
        newton_solve(prob.eq);
    }

    // pack the solution (pinned nodes carry their boundary value)
    std::vector<double> vals(g.count(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& st : stencils) {
        int i = int(std::lround((st.pos.x - g.origin.x) / h));
        int j = int(std::lround((st.pos.y - g.origin.y) / h));
        vals[g.idx(i, j)] = u[st.row];
    }
    for (int k = 0; k < g.count(); ++k)
        if (inside[k] && role[k] == kPinned) vals[k] = pinned_value[k];
    result.solution = ScalarField::from_values(g, std::move(vals));
    return result;
}

} // namespace odet
