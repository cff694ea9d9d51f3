#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "odet/errors.hpp"
#include "odet/field.hpp"

namespace odet {

/// Closed polyline on the zero level of a field. Tangent w, inner normal nu
/// and curvature kappa come from the field's jets; the polyline runs
/// counterclockwise, so nu = rot90(w) points into the enclosed region.
struct LevelCurve {
    std::vector<Vec2> points;    // closed: points.front() == points.back()
    std::vector<double> arclen;  // cumulative, arclen[0] = 0
    std::vector<Vec2> tangent;   // unit w
    std::vector<Vec2> normal;    // unit nu, inner
    std::vector<double> kappa;   // curvature w.r.t. nu

    /// Vertex count excluding the duplicated closing point.
    int size() const { return int(points.size()) - 1; }

    double length() const { return arclen.empty() ? 0.0 : arclen.back(); }

    /// Even-odd point-in-polygon test.
    bool encloses(Vec2 p) const {
        bool in = false;
        for (size_t k = 0; k + 1 < points.size(); ++k) {
            Vec2 a = points[k], b = points[k + 1];
            if ((a.y > p.y) != (b.y > p.y)) {
                double xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if (p.x < xi) in = !in;
            }
        }
        return in;
    }

    double signed_area() const {
        double s = 0.0;
        for (size_t k = 0; k + 1 < points.size(); ++k)
            s += cross(points[k], points[k + 1]);
        return 0.5 * s;
    }
};

struct TraceOptions {
    double gradient_floor_rel = 1e-8; // relative to field value scale
    double polish_tol_rel = 1e-10;    // |u| <= tol * scale after polishing
};

namespace detail {

inline Vec2 polish_onto_zero(const ScalarField& f, Vec2 x, double tol_abs, double floor_abs) {
    for (int it = 0; it < 64; ++it) {
        Jet2 j = f.eval_jet(x);
        double g2 = j.p * j.p + j.q * j.q;
        if (std::sqrt(g2) < floor_abs)
            throw DegenerateGradientError("gradient below floor while polishing level curve");
        if (std::abs(j.z) <= tol_abs) return x;
        x -= (j.z / g2) * Vec2{j.p, j.q};
    }
    throw NoConvergenceError("level-curve polishing did not converge");
}

// Grid edge between node (i, j) and its +x (axis 0) or +y (axis 1) neighbor.
struct EdgeKey {
    int i = 0, j = 0, axis = 0;
    friend bool operator<(const EdgeKey& a, const EdgeKey& b) {
        if (a.i != b.i) return a.i < b.i;
        if (a.j != b.j) return a.j < b.j;
        return a.axis < b.axis;
    }
    friend bool operator==(const EdgeKey& a, const EdgeKey& b) {
        return a.i == b.i && a.j == b.j && a.axis == b.axis;
    }
};

} // namespace detail

/// Trace the zero level set of a field as a closed polyline.
///
/// Marching squares on the masked grid yields segment endpoints by linear
/// interpolation; segments are chained into loops; every vertex is then
/// Newton-polished onto u = 0 along the gradient and the polyline is
/// subdivided until vertex spacing <= h. When several closed components
/// exist, the one enclosing the largest area is returned.
inline LevelCurve trace_zero_level(const ScalarField& f, const TraceOptions& opt = {}) {
    const GridSpec& g = f.grid;
    const double scale = f.value_scale();
    const double floor_abs = opt.gradient_floor_rel * scale;
    const double polish_abs = opt.polish_tol_rel * scale;

    std::map<detail::EdgeKey, std::vector<detail::EdgeKey>> adj;
    auto edge_point = [&](const detail::EdgeKey& e) -> Vec2 {
        Vec2 a = g.node(e.i, e.j);
        Vec2 b = e.axis == 0 ? g.node(e.i + 1, e.j) : g.node(e.i, e.j + 1);
        double va = f.value_at(e.i, e.j);
        double vb = e.axis == 0 ? f.value_at(e.i + 1, e.j) : f.value_at(e.i, e.j + 1);
        double alpha = va / (va - vb);
        return a + alpha * (b - a);
    };
    auto add_segment = [&](detail::EdgeKey a, detail::EdgeKey b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    };

    bool any_sign_change = false;
    for (int j = 0; j + 1 < g.ny; ++j) {
        for (int i = 0; i + 1 < g.nx; ++i) {
            if (!(f.inside(i, j) && f.inside(i + 1, j) && f.inside(i, j + 1) &&
                  f.inside(i + 1, j + 1)))
                continue;
            double v00 = f.value_at(i, j), v10 = f.value_at(i + 1, j);
            double v01 = f.value_at(i, j + 1), v11 = f.value_at(i + 1, j + 1);
            int c = (v00 > 0.0 ? 1 : 0) | (v10 > 0.0 ? 2 : 0) | (v01 > 0.0 ? 4 : 0) |
                    (v11 > 0.0 ? 8 : 0);
            if (c == 0 || c == 15) continue;
            any_sign_change = true;
            detail::EdgeKey bottom{i, j, 0}, top{i, j + 1, 0};
            detail::EdgeKey left{i, j, 1}, right{i + 1, j, 1};
            switch (c) {
                case 1: case 14: add_segment(bottom, left); break;
                case 2: case 13: add_segment(bottom, right); break;
                case 4: case 11: add_segment(left, top); break;
                case 8: case 7: add_segment(right, top); break;
                case 3: case 12: add_segment(left, right); break;
                case 5: case 10: add_segment(bottom, top); break;
                case 6: case 9: {
                    // saddle cell: disambiguate with the center average
                    double vc = 0.25 * (v00 + v10 + v01 + v11);
                    if ((vc > 0.0) == ((c & 1) != 0)) {
                        add_segment(bottom, right);
                        add_segment(left, top);
                    } else {
                        add_segment(bottom, left);
                        add_segment(right, top);
                    }
                    break;
                }
            }
        }
    }

    if (!any_sign_change) throw NoZeroSetError("field has no sign change inside the mask");

    // walk degree-<=2 adjacency into loops
    std::map<detail::EdgeKey, bool> visited;
    std::vector<std::vector<detail::EdgeKey>> loops;
    bool open_chain_seen = false;
    for (const auto& [start, nbrs0] : adj) {
        if (visited[start]) continue;
        std::vector<detail::EdgeKey> chain{start};
        visited[start] = true;
        detail::EdgeKey prev = start, cur = start;
        bool closed = false;
        bool first_step = true;
        while (true) {
            bool advanced = false;
            for (const auto& nxt : adj[cur]) {
                if (!first_step && nxt == prev) continue;
                if (nxt == start && chain.size() >= 3) {
                    closed = true;
                    break;
                }
                if (!visited[nxt]) {
                    visited[nxt] = true;
                    chain.push_back(nxt);
                    prev = cur;
                    cur = nxt;
                    advanced = true;
                    break;
                }
            }
            first_step = false;
            if (closed || !advanced) break;
        }
        if (closed)
            loops.push_back(std::move(chain));
        else if (chain.size() > 2)
            open_chain_seen = true;
    }

    if (loops.empty()) {
        if (open_chain_seen)
            throw NotClosedError("zero level set exits the mask without closing");
        throw NoZeroSetError("no closed zero-level component found");
    }

    std::vector<Vec2> pts;
    double best_area = -1.0;
    for (auto& loop : loops) {
        std::vector<Vec2> cand;
        cand.reserve(loop.size());
        for (auto& e : loop) cand.push_back(edge_point(e));
        double area = 0.0;
        for (size_t k = 0; k < cand.size(); ++k)
            area += cross(cand[k], cand[(k + 1) % cand.size()]);
        area = std::abs(0.5 * area);
        if (area > best_area) {
            best_area = area;
            pts = std::move(cand);
        }
    }

    for (auto& p : pts) p = detail::polish_onto_zero(f, p, polish_abs, floor_abs);

    // drop near-duplicates, then subdivide until spacing <= h
    {
        std::vector<Vec2> dedup;
        for (auto& p : pts)
            if (dedup.empty() || dist(dedup.back(), p) > 1e-3 * g.h) dedup.push_back(p);
        while (dedup.size() > 1 && dist(dedup.back(), dedup.front()) <= 1e-3 * g.h)
            dedup.pop_back();
        pts = std::move(dedup);
    }
    if (pts.size() < 4) throw NoZeroSetError("traced loop degenerate");

    for (int pass = 0; pass < 8; ++pass) {
        std::vector<Vec2> refined;
        refined.reserve(pts.size() * 2);
        bool split = false;
        for (size_t k = 0; k < pts.size(); ++k) {
            Vec2 a = pts[k], b = pts[(k + 1) % pts.size()];
            refined.push_back(a);
            if (dist(a, b) > g.h) {
                refined.push_back(
                    detail::polish_onto_zero(f, 0.5 * (a + b), polish_abs, floor_abs));
                split = true;
            }
        }
        pts = std::move(refined);
        if (!split) break;
    }

    // counterclockwise: enclosed region on the left of travel
    double area2 = 0.0;
    for (size_t k = 0; k < pts.size(); ++k)
        area2 += cross(pts[k], pts[(k + 1) % pts.size()]);
    if (area2 < 0.0) std::reverse(pts.begin(), pts.end());

    LevelCurve curve;
    curve.points = pts;
    curve.points.push_back(pts.front());

    // inside sign: majority probe along the gradient at a few vertices
    int votes = 0, checked = 0;
    for (size_t k = 0; k < pts.size(); k += std::max<size_t>(1, pts.size() / 7)) {
        Jet2 j = f.eval_jet(pts[k]);
        double gn = norm({j.p, j.q});
        if (gn < floor_abs) continue;
        Vec2 probe = pts[k] + (0.25 * g.h / gn) * Vec2{j.p, j.q};
        votes += curve.encloses(probe) ? 1 : -1;
        ++checked;
    }
    if (checked == 0)
        throw DegenerateGradientError("gradient below floor on traced curve");
    const double sig = votes >= 0 ? 1.0 : -1.0;

    const int n = int(pts.size());
    curve.tangent.resize(n + 1);
    curve.normal.resize(n + 1);
    curve.kappa.resize(n + 1);
    curve.arclen.resize(n + 1);
    for (int k = 0; k < n; ++k) {
        Jet2 jk = f.eval_jet(pts[k]);
        double gn = norm({jk.p, jk.q});
        if (gn < floor_abs)
            throw DegenerateGradientError("gradient below floor on traced curve");
        Vec2 nu = (sig / gn) * Vec2{jk.p, jk.q};
        double num = jk.q * jk.q * jk.r - 2.0 * jk.p * jk.q * jk.s + jk.p * jk.p * jk.t;
        curve.normal[k] = nu;
        curve.tangent[k] = Vec2{nu.y, -nu.x};
        curve.kappa[k] = -num / (sig * gn * gn * gn);
    }
    curve.tangent[n] = curve.tangent[0];
    curve.normal[n] = curve.normal[0];
    curve.kappa[n] = curve.kappa[0];
    curve.arclen[0] = 0.0;
    for (int k = 1; k <= n; ++k)
        curve.arclen[k] = curve.arclen[k - 1] + dist(curve.points[k], curve.points[k - 1]);
    return curve;
}

} // namespace odet
