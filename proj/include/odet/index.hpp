#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odet/canonical.hpp"
#include "odet/errors.hpp"
#include "odet/field.hpp"
#include "odet/level_curve.hpp"
#include "odet/line_field.hpp"

namespace odet {

// ---------------------------------------------------------------------------
// shape tensor S, comparison metric Lambda, deviation form sigma
// ---------------------------------------------------------------------------

/// Per-node shape tensor S = Lambda^{-1} D^2u together with its ingredients,
/// plus continuous evaluators for off-node work (loop sampling, refinement).
/// Lambda keeps the family's true Hessian sign; metric uses flip to the
/// positive-definite representative.
struct ShapeTensorField {
    GridSpec grid;
    std::vector<Mat2> S;
    SymFormField lambda;
    SymFormField hess;
    SymFormField sigma; // D^2u - Lambda
    std::vector<std::uint8_t> valid;

    std::function<std::optional<Mat2>(Vec2)> S_at;
    std::function<std::optional<SymForm2>(Vec2)> sigma_at;
    std::function<std::optional<SymForm2>(Vec2)> lambda_at;

    bool is_valid(int i, int j) const {
        return grid.contains(i, j) && valid[grid.idx(i, j)] != 0;
    }
};

inline Mat2 solve_shape_tensor(const SymForm2& lambda, const SymForm2& hess) {
    double det = lambda.det();
    if (std::abs(det) < 1e-300)
        throw SingularLambdaError("Lambda is singular; shape tensor undefined");
    return lambda.mat().inverse() * hess.mat();
}

/// Build S, Lambda, D^2u and sigma over the candidate's grid.
inline ShapeTensorField shape_tensor(const ScalarField& u, const CanonicalFamily& fam,
                                     const std::function<bool(Vec2)>& region = nullptr) {
    ShapeTensorField f;
    f.grid = u.grid;
    f.S.assign(f.grid.count(), Mat2{});
    f.lambda = SymFormField::empty(f.grid);
    f.hess = SymFormField::empty(f.grid);
    f.sigma = SymFormField::empty(f.grid);
    f.valid.assign(f.grid.count(), 0);

    int sign_seen = 0;
    for (int j = 0; j < f.grid.ny; ++j) {
        for (int i = 0; i < f.grid.nx; ++i) {
            Vec2 v = f.grid.node(i, j);
            if (region && !region(v)) continue;
            if (!u.inside(i, j)) continue;
            if (!u.has_closed_form() && !u.stencil_complete(i, j)) continue;
            Jet2 jet;
            SymForm2 G;
            try {
                jet = u.eval_jet(v);
                G = gamma(fam, v, jet);
            } catch (const Error&) {
                continue;
            }
            int s = G.definiteness_sign();
            if (s == 0) throw SingularLambdaError("Lambda indefinite at a node");
            if (sign_seen == 0) sign_seen = s;
            if (s != sign_seen)
                throw MixedSignatureError("Lambda changes definiteness sign across region");
            int k = f.grid.idx(i, j);
            f.lambda.form[k] = G;
            f.lambda.valid[k] = 1;
            f.hess.form[k] = jet.hessian();
            f.hess.valid[k] = 1;
            f.sigma.form[k] = jet.hessian() - G;
            f.sigma.valid[k] = 1;
            f.S[k] = solve_shape_tensor(G, jet.hessian());
            f.valid[k] = 1;
        }
    }

    auto u_ptr = std::make_shared<ScalarField>(u);
    auto fam_ptr = std::make_shared<CanonicalFamily>(fam);
    auto eval_pair = [u_ptr, fam_ptr](Vec2 p) -> std::optional<std::pair<SymForm2, SymForm2>> {
        try {
            Jet2 jet = u_ptr->eval_jet(p);
            SymForm2 G = gamma(*fam_ptr, p, jet);
            return std::make_pair(G, jet.hessian());
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    f.lambda_at = [eval_pair](Vec2 p) -> std::optional<SymForm2> {
        auto pr = eval_pair(p);
        if (!pr) return std::nullopt;
        return pr->first;
    };
    f.sigma_at = [eval_pair](Vec2 p) -> std::optional<SymForm2> {
        auto pr = eval_pair(p);
        if (!pr) return std::nullopt;
        return pr->second - pr->first;
    };
    f.S_at = [eval_pair](Vec2 p) -> std::optional<Mat2> {
        auto pr = eval_pair(p);
        if (!pr) return std::nullopt;
        return solve_shape_tensor(pr->first, pr->second);
    };
    return f;
}

// ---------------------------------------------------------------------------
// direction extraction
// ---------------------------------------------------------------------------

/// Eigen-directions of a (Lambda-self-adjoint, hence real-diagonalizable)
/// 2x2 tensor: angles for the larger and smaller eigenvalue. Empty when S is
/// numerically proportional to the identity.
inline std::optional<std::pair<double, double>> eigen_directions(const Mat2& S) {
    double tr = S.trace();
    double disc = (S.a - S.d) * (S.a - S.d) + 4.0 * S.b * S.c;
    double scale = S.frobenius();
    if (disc <= 1e-24 * std::max(1.0, scale * scale)) return std::nullopt;
    double sq = std::sqrt(std::max(0.0, disc));
    double l1 = 0.5 * (tr + sq), l2 = 0.5 * (tr - sq);
    auto dir_for = [&](double lam) -> Vec2 {
        Vec2 v1{S.b, lam - S.a};
        Vec2 v2{lam - S.d, S.c};
        return norm2(v1) >= norm2(v2) ? v1 : v2;
    };
    Vec2 d1 = dir_for(l1), d2 = dir_for(l2);
    if (norm2(d1) < 1e-200 || norm2(d2) < 1e-200) return std::nullopt;
    return std::make_pair(line_angle_of(d1), line_angle_of(d2));
}

/// Null directions of an indefinite symmetric form, as doubled-angle pair
/// (psi + eta, psi - eta); both halves are continuous line fields wherever
/// det(sigma) < 0.
inline std::optional<std::pair<double, double>> null_directions(const SymForm2& sig) {
    double A = 0.5 * (sig.a11 - sig.a22);
    double B = sig.a12;
    double C = 0.5 * (sig.a11 + sig.a22);
    double R = std::hypot(A, B);
    if (!(R > std::abs(C))) return std::nullopt; // det >= 0
    double psi = std::atan2(B, A);
    double eta = std::acos(std::clamp(-C / R, -1.0, 1.0));
    return std::make_pair(wrap_line_angle(0.5 * (psi + eta)),
                          wrap_line_angle(0.5 * (psi - eta)));
}

/// Eigenline fields of S (Z1 = larger eigenvalue). Nodes within the umbilic
/// threshold ||S - Id||_F <= tau are masked out.
inline std::pair<LineField, LineField> eigenline_fields(const ShapeTensorField& f,
                                                        double tau = 1e-4) {
    LineField z1 = LineField::empty(f.grid), z2 = LineField::empty(f.grid);
    for (int k = 0; k < f.grid.count(); ++k) {
        if (!f.valid[k]) continue;
        if ((f.S[k] - Mat2::identity()).frobenius() <= tau) continue;
        auto dirs = eigen_directions(f.S[k]);
        if (!dirs) continue;
        z1.theta[k] = dirs->first;
        z1.valid[k] = 1;
        z2.theta[k] = dirs->second;
        z2.valid[k] = 1;
    }
    return {z1, z2};
}

/// Null-line fields of sigma; nodes with det(sigma) >= 0 are masked out.
inline std::pair<LineField, LineField> null_line_fields(const ShapeTensorField& f) {
    LineField u = LineField::empty(f.grid), v = LineField::empty(f.grid);
    for (int k = 0; k < f.grid.count(); ++k) {
        if (!f.sigma.valid[k]) continue;
        auto dirs = null_directions(f.sigma.form[k]);
        if (!dirs) continue;
        u.theta[k] = dirs->first;
        u.valid[k] = 1;
        v.theta[k] = dirs->second;
        v.valid[k] = 1;
    }
    return {u, v};
}

/// Continuous eigenline sampler (0 = Z1, 1 = Z2) from the field evaluators.
inline DirectionSampler eigenline_sampler(const ShapeTensorField& f, int which,
                                          double tau = 0.0) {
    auto S_at = f.S_at;
    return [S_at, which, tau](Vec2 p) -> std::optional<double> {
        auto S = S_at(p);
        if (!S) return std::nullopt;
        if (tau > 0.0 && (*S - Mat2::identity()).frobenius() <= tau) return std::nullopt;
        auto dirs = eigen_directions(*S);
        if (!dirs) return std::nullopt;
        return which == 0 ? dirs->first : dirs->second;
    };
}

/// Continuous null-line sampler (0 = U, 1 = V).
inline DirectionSampler null_line_sampler(const ShapeTensorField& f, int which) {
    auto sigma_at = f.sigma_at;
    return [sigma_at, which](Vec2 p) -> std::optional<double> {
        auto sg = sigma_at(p);
        if (!sg) return std::nullopt;
        auto dirs = null_directions(*sg);
        if (!dirs) return std::nullopt;
        return which == 0 ? dirs->first : dirs->second;
    };
}

// ---------------------------------------------------------------------------
// winding index of a line field along a loop
// ---------------------------------------------------------------------------

struct LineIndexOptions {
    int initial_samples = 128;
    int max_samples = 1 << 16;
    double snap_tol = 0.1;
};

struct LineIndexResult {
    double raw = 0.0;      // accumulated doubled-angle / (4 pi)
    double snapped = 0.0;  // nearest multiple of 1/2 (when within snap_tol)
    bool snap_ok = false;
    double snap_distance = 0.0;
    int samples = 0;
};

inline std::vector<Vec2> circle_loop(Vec2 center, double radius, int n) {
    std::vector<Vec2> pts(n);
    for (int k = 0; k < n; ++k) {
        double a = 2.0 * kPi * k / n;
        pts[k] = center + radius * Vec2{std::cos(a), std::sin(a)};
    }
    return pts;
}

/// Winding of the doubled angle along a closed loop, divided by two.
/// Consecutive doubled-angle increments must stay below pi/2; the loop is
/// refined by midpoint insertion until they do.
inline LineIndexResult line_index(const DirectionSampler& field, std::vector<Vec2> loop,
                                  const LineIndexOptions& opt = {}) {
    if (loop.size() < 3) throw InsufficientSamplingError("loop needs at least 3 points");
    // densify to the initial sample count
    while (int(loop.size()) < opt.initial_samples) {
        std::vector<Vec2> dense;
        dense.reserve(loop.size() * 2);
        for (size_t k = 0; k < loop.size(); ++k) {
            dense.push_back(loop[k]);
            dense.push_back(0.5 * (loop[k] + loop[(k + 1) % loop.size()]));
        }
        loop = std::move(dense);
    }

    std::vector<double> th(loop.size());
    auto sample_all = [&]() {
        th.resize(loop.size());
        for (size_t k = 0; k < loop.size(); ++k) {
            auto v = field(loop[k]);
            if (!v)
                throw InsufficientSamplingError("line field undefined at a loop sample");
            th[k] = *v;
        }
    };
    sample_all();

    while (true) {
        double worst = 0.0;
        for (size_t k = 0; k < loop.size(); ++k) {
            double d2 = wrap_to_pi(2.0 * th[(k + 1) % loop.size()] - 2.0 * th[k]);
            worst = std::max(worst, std::abs(d2));
        }
        if (worst < 0.5 * kPi) break;
        if (int(loop.size()) * 2 > opt.max_samples)
            throw InsufficientSamplingError(
                "doubled-angle increments stay above pi/2 at maximum refinement");
        std::vector<Vec2> dense;
        dense.reserve(loop.size() * 2);
        for (size_t k = 0; k < loop.size(); ++k) {
            dense.push_back(loop[k]);
            dense.push_back(0.5 * (loop[k] + loop[(k + 1) % loop.size()]));
        }
        loop = std::move(dense);
        sample_all();
    }

    double acc = 0.0;
    for (size_t k = 0; k < loop.size(); ++k)
        acc += wrap_to_pi(2.0 * th[(k + 1) % loop.size()] - 2.0 * th[k]);

    LineIndexResult res;
    res.raw = acc / (4.0 * kPi);
    res.samples = int(loop.size());
    double snapped = std::round(res.raw * 2.0) / 2.0;
    res.snap_distance = std::abs(res.raw - snapped);
    res.snap_ok = res.snap_distance <= opt.snap_tol;
    res.snapped = res.snap_ok ? snapped : res.raw;
    return res;
}

// ---------------------------------------------------------------------------
// umbilic detection
// ---------------------------------------------------------------------------

struct UmbilicThresholds {
    double tau = 1e-4;              // ||S - Id||_F acceptance threshold
    double isolation_radius_factor = 3.0;  // loop radius floor, in grid spacings
    double wide_component_factor = 10.0;   // "identically canonical" trigger
    int refine_max_iters = 200;
    int loop_samples = 256;
};

struct Umbilic {
    Vec2 position;
    double s_deviation = 0.0;   // ||S - Id||_F after refinement
    double loop_radius = 0.0;
    bool boundary = false;
};

struct UmbilicSet {
    std::vector<Umbilic> points;
    bool identically_canonical = false;
    double below_threshold_fraction = 0.0;
};

namespace detail {

// Gauss-Newton on the components of sigma with a finite-difference Jacobian;
// near a degree-n zero this contracts linearly with rate (n-3)/(n-2).
inline Vec2 refine_umbilic(const std::function<std::optional<SymForm2>(Vec2)>& sigma_at,
                           Vec2 x0, double h, int max_iters) {
    auto value = [&](Vec2 x) -> std::optional<std::array<double, 3>> {
        auto s = sigma_at(x);
        if (!s) return std::nullopt;
        return std::array<double, 3>{s->a11, s->a12, s->a22};
    };
    Vec2 x = x0;
    auto v0 = value(x);
    if (!v0) return x0;
    double fx = std::sqrt((*v0)[0] * (*v0)[0] + (*v0)[1] * (*v0)[1] + (*v0)[2] * (*v0)[2]);
    const double delta = std::max(1e-7 * h, 1e-12);
    for (int it = 0; it < max_iters; ++it) {
        auto vxp = value({x.x + delta, x.y}), vxm = value({x.x - delta, x.y});
        auto vyp = value({x.x, x.y + delta}), vym = value({x.x, x.y - delta});
        if (!vxp || !vxm || !vyp || !vym) break;
        double J[3][2];
        for (int a = 0; a < 3; ++a) {
            J[a][0] = ((*vxp)[a] - (*vxm)[a]) / (2.0 * delta);
            J[a][1] = ((*vyp)[a] - (*vym)[a]) / (2.0 * delta);
        }
        auto vc = value(x);
        if (!vc) break;
        // normal equations of the 3x2 least-squares step
        double g11 = 0, g12 = 0, g22 = 0, b1 = 0, b2 = 0;
        for (int a = 0; a < 3; ++a) {
            g11 += J[a][0] * J[a][0];
            g12 += J[a][0] * J[a][1];
            g22 += J[a][1] * J[a][1];
            b1 += J[a][0] * (*vc)[a];
            b2 += J[a][1] * (*vc)[a];
        }
        double det = g11 * g22 - g12 * g12;
        if (std::abs(det) < 1e-300) break;
        Vec2 step{-(g22 * b1 - g12 * b2) / det, -(g11 * b2 - g12 * b1) / det};
        double sn = norm(step);
        if (sn > h) step = (h / sn) * step; // trust region of one cell
        double lam = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 20; ++bt) {
            auto vn = value(x + lam * step);
            if (vn) {
                double fn =
                    std::sqrt((*vn)[0] * (*vn)[0] + (*vn)[1] * (*vn)[1] + (*vn)[2] * (*vn)[2]);
                if (fn < fx) {
                    x += lam * step;
                    fx = fn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if (!accepted || norm(step) * lam < 1e-14 * std::max(1.0, norm(x))) break;
    }
    return x;
}

} // namespace detail

/// Locate isolated umbilics (S = Id) and flag wide sub-threshold components
/// as identically-canonical candidates.
///
/// Detection runs on node-wise local minima of ||S - Id||_F; each candidate
/// is refined by Gauss-Newton on sigma and accepted when the refined
/// deviation falls below tau.
inline UmbilicSet detect_umbilics(const ShapeTensorField& f,
                                  const UmbilicThresholds& thr = {},
                                  const LevelCurve* boundary = nullptr) {
    UmbilicSet out;
    const GridSpec& g = f.grid;
    const double h = g.h;

    std::vector<double> m(g.count(), std::numeric_limits<double>::infinity());
    int valid_count = 0, below_count = 0;
    for (int k = 0; k < g.count(); ++k) {
        if (!f.valid[k]) continue;
        m[k] = (f.S[k] - Mat2::identity()).frobenius();
        ++valid_count;
        if (m[k] <= thr.tau) ++below_count;
    }
    if (valid_count == 0) return out;
    out.below_threshold_fraction = double(below_count) / valid_count;

    // wide sub-threshold components: identically-canonical candidates
    const double wide_diameter = thr.wide_component_factor * thr.isolation_radius_factor * h;
    {
        std::vector<std::uint8_t> seen(g.count(), 0);
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                int k0 = g.idx(i, j);
                if (seen[k0] || !f.valid[k0] || m[k0] > thr.tau) continue;
                // BFS over the component, tracking its bounding box
                std::deque<std::pair<int, int>> queue{{i, j}};
                seen[k0] = 1;
                int ilo = i, ihi = i, jlo = j, jhi = j;
                while (!queue.empty()) {
                    auto [ci, cj] = queue.front();
                    queue.pop_front();
                    ilo = std::min(ilo, ci);
                    ihi = std::max(ihi, ci);
                    jlo = std::min(jlo, cj);
                    jhi = std::max(jhi, cj);
                    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
                    for (int d = 0; d < 4; ++d) {
                        int ni = ci + di[d], nj = cj + dj[d];
                        if (!g.contains(ni, nj)) continue;
                        int nk = g.idx(ni, nj);
                        if (seen[nk] || !f.valid[nk] || m[nk] > thr.tau) continue;
                        seen[nk] = 1;
                        queue.emplace_back(ni, nj);
                    }
                }
                double diam = std::hypot(double(ihi - ilo), double(jhi - jlo)) * h;
                if (diam > wide_diameter) out.identically_canonical = true;
            }
        }
    }
    if (out.identically_canonical) return out;

    // local minima of ||S - Id||_F (among valid neighbors) as refinement seeds
    std::vector<Vec2> seeds;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int k = g.idx(i, j);
            if (!f.valid[k]) continue;
            bool is_min = true;
            int valid_neighbors = 0;
            for (int dj = -1; dj <= 1 && is_min; ++dj)
                for (int di = -1; di <= 1 && is_min; ++di) {
                    if (di == 0 && dj == 0) continue;
                    if (!f.is_valid(i + di, j + dj)) continue;
                    ++valid_neighbors;
                    if (m[g.idx(i + di, j + dj)] < m[k]) is_min = false;
                }
            if (is_min && valid_neighbors >= 3) seeds.push_back(g.node(i, j));
        }
    }

    const double isolation = thr.isolation_radius_factor * h;
    for (Vec2 seed : seeds) {
        Vec2 x = detail::refine_umbilic(f.sigma_at, seed, h, thr.refine_max_iters);
        auto S = f.S_at(x);
        if (!S) continue;
        double dev = (*S - Mat2::identity()).frobenius();
        if (dev > thr.tau) continue;
        bool dup = false;
        for (auto& u : out.points)
            if (dist(u.position, x) < isolation) dup = true;
        if (dup) continue;
        Umbilic u;
        u.position = x;
        u.s_deviation = dev;
        if (boundary) {
            double dmin = std::numeric_limits<double>::infinity();
            for (int k = 0; k < boundary->size(); ++k)
                dmin = std::min(dmin, dist(boundary->points[k], x));
            u.boundary = dmin < isolation;
        }
        out.points.push_back(u);
    }
    return out;
}

/// Smallest loop radius >= floor on which det(sigma) < 0 at every sample.
inline double select_loop_radius(const ShapeTensorField& f, Vec2 center,
                                 const UmbilicThresholds& thr = {}) {
    const double floor_r = thr.isolation_radius_factor * f.grid.h;
    double r = floor_r;
    const double r_max = std::max(f.grid.nx, f.grid.ny) * f.grid.h;
    while (r < r_max) {
        bool ok = true;
        for (Vec2 p : circle_loop(center, r, thr.loop_samples)) {
            auto sg = f.sigma_at(p);
            if (!sg || !(sg->det() < 0.0)) {
                ok = false;
                break;
            }
        }
        if (ok) return r;
        r *= 1.3;
    }
    throw InsufficientSamplingError("no loop radius with det(sigma) < 0 everywhere");
}

// ---------------------------------------------------------------------------
// boundary singularities: half-loop winding with tangency continuation
// ---------------------------------------------------------------------------

/// Boundary index of a singularity sitting on (or within a few cells of) the
/// domain boundary: winding of the doubled angle along the inner circular arc
/// around it, closed along the boundary where the field is continued by the
/// curve tangent, divided by 4 pi. For a tangent field this equals one half
/// of the full-loop index.
inline LineIndexResult boundary_half_loop_index(const DirectionSampler& field,
                                                const LevelCurve& curve, Vec2 center,
                                                double radius,
                                                const LineIndexOptions& opt = {}) {
    const int m = std::max(opt.initial_samples, 256);

    // classify the circle samples by the side of the boundary they fall on
    std::vector<std::uint8_t> in(m);
    int inside_count = 0;
    for (int k = 0; k < m; ++k) {
        double a = 2.0 * kPi * k / m;
        in[k] = curve.encloses(center + radius * Vec2{std::cos(a), std::sin(a)}) ? 1 : 0;
        inside_count += in[k];
    }
    if (inside_count == 0 || inside_count == m)
        throw InsufficientSamplingError("half-loop circle does not straddle the boundary");

    // contiguous inside arc (wrap-aware): first index after an outside run
    int start = -1;
    for (int k = 0; k < m; ++k)
        if (!in[(k + m - 1) % m] && in[k]) {
            start = k;
            break;
        }
    if (start < 0) throw InsufficientSamplingError("could not segment the inside arc");

    std::vector<Vec2> arc;
    for (int k = start; in[k % m]; ++k) {
        double a = 2.0 * kPi * (k % m) / m;
        arc.push_back(center + radius * Vec2{std::cos(a), std::sin(a)});
        if (int(arc.size()) > m) break;
    }
    if (arc.size() < 8)
        throw InsufficientSamplingError("inside arc too short for the half-loop winding");

    // winding along the inner arc
    auto sample = [&](Vec2 p) {
        auto v = field(p);
        if (!v) throw InsufficientSamplingError("field undefined on the half-loop arc");
        return *v;
    };
    double acc = 0.0;
    {
        std::vector<double> th(arc.size());
        for (size_t k = 0; k < arc.size(); ++k) th[k] = sample(arc[k]);
        for (size_t k = 0; k + 1 < arc.size(); ++k) {
            double d2 = wrap_to_pi(2.0 * th[k + 1] - 2.0 * th[k]);
            if (std::abs(d2) >= 0.5 * kPi)
                throw InsufficientSamplingError("half-loop increments exceed pi/2");
            acc += d2;
        }
    }

    // close along the boundary through the singularity, continuing the field
    // by the curve tangent; walk from the arc's exit point back to its entry
    const int n = curve.size();
    auto nearest_vertex = [&](Vec2 p) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            double d = dist(curve.points[k], p);
            if (d < bd) {
                bd = d;
                best = k;
            }
        }
        return best;
    };
    int k_exit = nearest_vertex(arc.back());
    int k_entry = nearest_vertex(arc.front());

    // pick the walking direction whose path stays near the singularity
    auto path_ok = [&](int dir) {
        int steps = 0;
        for (int k = k_exit; k != k_entry; k = (k + dir + n) % n) {
            if (dist(curve.points[k], center) > 2.0 * radius) return false;
            if (++steps > n) return false;
        }
        return true;
    };
    int dir = path_ok(+1) ? +1 : (path_ok(-1) ? -1 : 0);
    if (dir == 0)
        throw InsufficientSamplingError("no short boundary path closes the half-loop");

    // bridge arc end -> first boundary vertex, walk tangents, bridge back
    double th_prev = sample(arc.back());
    auto push_angle = [&](double th) {
        double d2 = wrap_to_pi(2.0 * th - 2.0 * th_prev);
        if (std::abs(d2) >= 0.5 * kPi)
            throw InsufficientSamplingError("tangency continuation jump exceeds pi/2");
        acc += d2;
        th_prev = th;
    };
    for (int k = k_exit;; k = (k + dir + n) % n) {
        push_angle(line_angle_of(curve.tangent[k]));
        if (k == k_entry) break;
    }
    push_angle(sample(arc.front()));

    LineIndexResult res;
    res.raw = acc / (4.0 * kPi);
    res.samples = int(arc.size());
    double snapped = std::round(res.raw * 2.0) / 2.0;
    res.snap_distance = std::abs(res.raw - snapped);
    res.snap_ok = res.snap_distance <= opt.snap_tol;
    res.snapped = res.snap_ok ? snapped : res.raw;
    return res;
}

// ---------------------------------------------------------------------------
// bisection of null lines by eigenlines, in the |Lambda| metric
// ---------------------------------------------------------------------------

/// Map a direction into the Lambda-orthonormal frame (Cholesky transpose).
inline double metric_line_angle(const SymForm2& lambda_pos, double theta) {
    double l11 = std::sqrt(lambda_pos.a11);
    double l21 = lambda_pos.a12 / l11;
    double l22 = std::sqrt(std::max(1e-300, lambda_pos.a22 - l21 * l21));
    Vec2 d{std::cos(theta), std::sin(theta)};
    Vec2 td{l11 * d.x + l21 * d.y, l22 * d.y};
    return line_angle_of(td);
}

/// Deviation of the bisection identity 2 theta_Z1 = theta_U + theta_V (mod pi)
/// measured in the |Lambda| metric.
inline double bisection_deviation(const SymForm2& lambda, double th_z1, double th_u,
                                  double th_v) {
    SymForm2 pos = lambda.abs_definite();
    double z = metric_line_angle(pos, th_z1);
    double u = metric_line_angle(pos, th_u);
    double v = metric_line_angle(pos, th_v);
    double d = std::fmod(u + v - 2.0 * z, kPi);
    if (d <= -0.5 * kPi) d += kPi;
    if (d > 0.5 * kPi) d -= kPi;
    return std::abs(d);
}

/// Max bisection deviation over sample points.
inline double bisection_check(const ShapeTensorField& f, const std::vector<Vec2>& samples) {
    double worst = 0.0;
    for (Vec2 p : samples) {
        auto S = f.S_at(p);
        auto sg = f.sigma_at(p);
        auto lam = f.lambda_at(p);
        if (!S || !sg || !lam) continue;
        auto eig = eigen_directions(*S);
        auto nul = null_directions(*sg);
        if (!eig || !nul) continue;
        worst = std::max(worst, bisection_deviation(*lam, eig->first, nul->first, nul->second));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// boundary tangency
// ---------------------------------------------------------------------------

struct TangencyReport {
    int tangent_field = -1; // 0 = Z1, 1 = Z2, -1 = undecided / umbilic boundary
    std::vector<double> deviation; // per vertex, for the selected field
    double max_deviation = 0.0;
    double mean_deviation = 0.0;
    bool umbilic_boundary = false;
    int invalid_vertices = 0;
};

/// Mod-pi misalignment between the better-aligned eigenline field and the
/// boundary tangent; samples sit on an inner collar of the curve.
inline TangencyReport boundary_tangency(const DirectionSampler& z1, const DirectionSampler& z2,
                                        const LevelCurve& curve, double inward_offset = 0.0) {
    const int n = curve.size();
    std::vector<double> dev1, dev2;
    dev1.reserve(n);
    dev2.reserve(n);
    int invalid = 0;
    std::vector<double> chosen1(n, -1.0), chosen2(n, -1.0);
    for (int k = 0; k < n; ++k) {
        Vec2 p = curve.points[k] + inward_offset * curve.normal[k];
        double tw = line_angle_of(curve.tangent[k]);
        auto a = z1(p);
        auto b = z2(p);
        if (!a || !b) {
            ++invalid;
            continue;
        }
        chosen1[k] = std::abs(line_angle_diff(tw, *a));
        chosen2[k] = std::abs(line_angle_diff(tw, *b));
        dev1.push_back(chosen1[k]);
        dev2.push_back(chosen2[k]);
    }
    TangencyReport rep;
    rep.invalid_vertices = invalid;
    if (dev1.empty()) {
        rep.umbilic_boundary = true;
        return rep;
    }
    double mean1 = 0.0, mean2 = 0.0;
    for (double d : dev1) mean1 += d;
    for (double d : dev2) mean2 += d;
    mean1 /= dev1.size();
    mean2 /= dev2.size();
    rep.tangent_field = mean1 <= mean2 ? 0 : 1;
    const auto& chosen = rep.tangent_field == 0 ? chosen1 : chosen2;
    for (int k = 0; k < n; ++k) {
        if (chosen[k] < 0.0) continue;
        rep.deviation.push_back(chosen[k]);
        rep.max_deviation = std::max(rep.max_deviation, chosen[k]);
        rep.mean_deviation += chosen[k];
    }
    if (!rep.deviation.empty()) rep.mean_deviation /= rep.deviation.size();
    return rep;
}

// ---------------------------------------------------------------------------
// Poincare-Hopf audit
// ---------------------------------------------------------------------------

struct SingularityRecord {
    Vec2 position;
    double index = 0.0;
    int degree_estimate = 0;
};

struct PhAuditInput {
    std::vector<SingularityRecord> interior;
    std::vector<SingularityRecord> boundary; // with boundary (half) indices
    bool sphere = false;                     // closed-surface accounting
    bool tangency_assumed = false;
    std::optional<double> tangency_max;
    double tangency_threshold = 1e-3;
    double sum_tol = 0.1;
};

struct IndexReport {
    std::vector<SingularityRecord> interior;
    std::vector<SingularityRecord> boundary;
    double tangency_max = std::numeric_limits<double>::quiet_NaN();
    double disk_sum = 0.0;
    double sphere_sum = 0.0;
    bool applicable = false;
    bool contradiction = false;
    std::string not_applicable_reason;
};

/// Index accounting: on the sphere the indices must sum to 2; on a disk with
/// a boundary-tangent field the interior indices plus the boundary
/// (half) indices must sum to 1 (the doubled-surface identity). A sum that
/// misses the target with isolated singularities raises the contradiction
/// flag -- the numerical shadow of the uniqueness argument.
inline IndexReport ph_audit(const PhAuditInput& in) {
    IndexReport rep;
    rep.interior = in.interior;
    rep.boundary = in.boundary;
    double sum_int = 0.0, sum_bdry = 0.0;
    for (auto& s : in.interior) sum_int += s.index;
    for (auto& s : in.boundary) sum_bdry += s.index;

    if (in.sphere) {
        rep.sphere_sum = sum_int + sum_bdry;
        rep.applicable = true;
        rep.contradiction = std::abs(rep.sphere_sum - 2.0) > in.sum_tol;
        return rep;
    }

    if (in.tangency_max) rep.tangency_max = *in.tangency_max;
    bool tangent = in.tangency_assumed ||
                   (in.tangency_max && *in.tangency_max <= in.tangency_threshold);
    rep.disk_sum = sum_int + sum_bdry;
    rep.sphere_sum = 2.0 * rep.disk_sum;
    if (!tangent) {
        rep.not_applicable_reason = "not applicable -- field not tangent to the boundary";
        return rep;
    }
    rep.applicable = true;
    rep.contradiction = std::abs(rep.disk_sum - 1.0) > in.sum_tol;
    return rep;
}

} // namespace odet
