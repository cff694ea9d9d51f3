#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "odet/errors.hpp"
#include "odet/expressions.hpp"
#include "odet/jet.hpp"

namespace odet {

/// Uniform grid: node (i, j) sits at origin + (i*h, j*h), i in [0,nx), j in [0,ny).
struct GridSpec {
    Vec2 origin{0.0, 0.0};
    double h = 1.0;
    int nx = 0;
    int ny = 0;

    int count() const { return nx * ny; }
    int idx(int i, int j) const { return j * nx + i; }
    bool contains(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }
    Vec2 node(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
    Vec2 upper() const { return {origin.x + (nx - 1) * h, origin.y + (ny - 1) * h}; }

    /// Square grid covering [lo, hi]^2 with n nodes per side.
    static GridSpec square(double lo, double hi, int n) {
        return {{lo, lo}, (hi - lo) / (n - 1), n, n};
    }
    /// Grid covering the rectangle [xlo,xhi] x [ylo,yhi] at spacing <= h_max.
    static GridSpec cover(double xlo, double xhi, double ylo, double yhi, double h_max) {
        int nx = int(std::ceil((xhi - xlo) / h_max)) + 1;
        int ny = int(std::ceil((yhi - ylo) / h_max)) + 1;
        double h = std::max((xhi - xlo) / (nx - 1), (yhi - ylo) / (ny - 1));
        return {{xlo, ylo}, h, nx, ny};
    }
};

/// Scalar field on a masked grid, optionally backed by a closed form.
///
/// Grid jets use 4th-order centered stencils at nodes and tensor cubic
/// (4-point Lagrange) interpolation of the derivative values off-grid.
/// Fields with a closed form evaluate jets exactly and ignore the mask.
class ScalarField {
public:
    GridSpec grid;
    std::vector<double> values;     // row-major, NaN at masked-out nodes
    std::vector<std::uint8_t> mask; // 1 = inside
    AnalyticJet closed_form;        // optional

    ScalarField() = default;

    /// Sample a closed form onto a grid; keeps the exact evaluator.
    static ScalarField sample(const AnalyticJet& f, const GridSpec& g) {
        ScalarField field;
        field.grid = g;
        field.closed_form = f;
        field.values.resize(g.count());
        field.mask.assign(g.count(), 1);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                field.values[g.idx(i, j)] = f(g.node(i, j)).z;
        return field;
    }

    /// Grid-only field from values (NaN marks outside).
    static ScalarField from_values(const GridSpec& g, std::vector<double> vals) {
        ScalarField field;
        field.grid = g;
        field.values = std::move(vals);
        field.mask.resize(g.count());
        for (int k = 0; k < g.count(); ++k)
            field.mask[k] = std::isfinite(field.values[k]) ? 1 : 0;
        return field;
    }

    bool has_closed_form() const { return static_cast<bool>(closed_form); }

    bool inside(int i, int j) const {
        return grid.contains(i, j) && mask[grid.idx(i, j)] != 0;
    }

    double value_at(int i, int j) const { return values[grid.idx(i, j)]; }

    /// Characteristic value scale, used for relative tolerances.
    double value_scale() const {
        double m = 0.0;
        for (int k = 0; k < grid.count(); ++k)
            if (mask[k]) m = std::max(m, std::abs(values[k]));
        return m > 0.0 ? m : 1.0;
    }

    /// True if every node of the 5x5 block around (i, j) is inside the mask.
    bool stencil_complete(int i, int j) const {
        for (int dj = -2; dj <= 2; ++dj)
            for (int di = -2; di <= 2; ++di)
                if (!inside(i + di, j + dj)) return false;
        return true;
    }

    Jet2 eval_jet(Vec2 point) const {
        Jet2 jet = has_closed_form() ? closed_form(point) : grid_jet(point);
        if (!jet.finite())
            throw NonFiniteError("non-finite jet at (" + std::to_string(point.x) + ", " +
                                 std::to_string(point.y) + ")");
        return jet;
    }

private:
    // 4th-order centered stencils at node (i, j); requires a complete 5x5 block.
    Jet2 node_jet(int i, int j) const {
        const double h = grid.h;
        auto u = [&](int di, int dj) { return values[grid.idx(i + di, j + dj)]; };
        Jet2 jet;
        jet.z = u(0, 0);
        jet.p = (u(-2, 0) - 8.0 * u(-1, 0) + 8.0 * u(1, 0) - u(2, 0)) / (12.0 * h);
        jet.q = (u(0, -2) - 8.0 * u(0, -1) + 8.0 * u(0, 1) - u(0, 2)) / (12.0 * h);
        jet.r = (-u(-2, 0) + 16.0 * u(-1, 0) - 30.0 * u(0, 0) + 16.0 * u(1, 0) - u(2, 0)) /
                (12.0 * h * h);
        jet.t = (-u(0, -2) + 16.0 * u(0, -1) - 30.0 * u(0, 0) + 16.0 * u(0, 1) - u(0, 2)) /
                (12.0 * h * h);
        // cross derivative: tensor product of the two first-derivative stencils
        static const int off[4] = {-2, -1, 1, 2};
        static const double cf[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
        double s = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                s += cf[a] * cf[b] * u(off[a], off[b]);
        jet.s = s / (h * h);
        return jet;
    }

    Jet2 grid_jet(Vec2 point) const {
        const double h = grid.h;
        double fx = (point.x - grid.origin.x) / h;
        double fy = (point.y - grid.origin.y) / h;
        int i0 = int(std::floor(fx));
        int j0 = int(std::floor(fy));
        double tx = fx - i0, ty = fy - j0;

        // on-node queries take the direct stencil (needs a smaller margin)
        const double snap = 1e-12;
        if (std::abs(tx) < snap && std::abs(ty) < snap) {
            if (!stencil_complete(i0, j0))
                throw OutOfDomainError("finite-difference stencil incomplete at node");
            return node_jet(i0, j0);
        }
        if (std::abs(tx - 1.0) < snap) { ++i0; tx = 0.0; }
        if (std::abs(ty - 1.0) < snap) { ++j0; ty = 0.0; }

        // 4x4 block of derivative nodes, each needing its own 5x5 raw block
        for (int dj = -1; dj <= 2; ++dj)
            for (int di = -1; di <= 2; ++di)
                if (!stencil_complete(i0 + di, j0 + dj))
                    throw OutOfDomainError("interpolation block leaves the mask");

        double wx[4], wy[4];
        cubic_weights(tx, wx);
        cubic_weights(ty, wy);

        Jet2 jet{};
        for (int b = 0; b < 4; ++b) {
            for (int a = 0; a < 4; ++a) {
                double w = wx[a] * wy[b];
                if (w == 0.0) continue;
                Jet2 nj = node_jet(i0 + a - 1, j0 + b - 1);
                jet.z += w * nj.z;
                jet.p += w * nj.p;
                jet.q += w * nj.q;
                jet.r += w * nj.r;
                jet.s += w * nj.s;
                jet.t += w * nj.t;
            }
        }
        return jet;
    }

    // Lagrange cubic through offsets {-1, 0, 1, 2}, evaluated at t in [0, 1].
    static void cubic_weights(double t, double w[4]) {
        w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
        w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
        w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
    }
};

// ---------------------------------------------------------------------------
// CSV format: header "nx,ny,h,ox,oy" + one line of counts, then ny rows of
// nx comma-separated values (row j = y index j). NaN encodes masked-out nodes.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_field_csv(std::ostream& os, const ScalarField& f) {
    os << "nx,ny,h,ox,oy\n";
    os << f.grid.nx << ',' << f.grid.ny << ',' << format_double(f.grid.h) << ','
       << format_double(f.grid.origin.x) << ',' << format_double(f.grid.origin.y) << '\n';
    for (int j = 0; j < f.grid.ny; ++j) {
        for (int i = 0; i < f.grid.nx; ++i) {
            if (i) os << ',';
            os << (f.mask[f.grid.idx(i, j)] ? format_double(f.values[f.grid.idx(i, j)])
                                            : "nan");
        }
        os << '\n';
    }
}

inline ScalarField read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty field file");
    if (!std::getline(is, line)) throw ParseError("missing field header values");
    std::istringstream hdr(line);
    GridSpec g;
    char comma;
    if (!(hdr >> g.nx >> comma >> g.ny >> comma >> g.h >> comma >> g.origin.x >> comma >>
          g.origin.y))
        throw ParseError("bad field header '" + line + "'");
    if (g.nx <= 0 || g.ny <= 0 || g.h <= 0.0)
        throw ParseError("invalid grid in field header");
    std::vector<double> vals;
    vals.reserve(g.count());
    for (int j = 0; j < g.ny; ++j) {
        if (!std::getline(is, line)) throw ParseError("field file truncated");
        std::istringstream row(line);
        std::string tok;
        int count = 0;
        while (std::getline(row, tok, ',')) {
            if (tok == "nan" || tok == "NaN" || tok == "-nan")
                vals.push_back(std::numeric_limits<double>::quiet_NaN());
            else
                vals.push_back(std::stod(tok));
            ++count;
        }
        if (count != g.nx) throw ParseError("row " + std::to_string(j) + " has wrong width");
    }
    return ScalarField::from_values(g, std::move(vals));
}

inline void save_field(const std::string& path, const ScalarField& f) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open '" + path + "' for writing");
    write_field_csv(os, f);
}

inline ScalarField load_field(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open '" + path + "'");
    return read_field_csv(is);
}

} // namespace odet
