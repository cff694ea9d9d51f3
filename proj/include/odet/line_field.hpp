#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "odet/errors.hpp"
#include "odet/field.hpp"

namespace odet {

/// Unoriented direction field on a grid: per-node angle theta in [0, pi)
/// plus a validity mask.
struct LineField {
    GridSpec grid;
    std::vector<double> theta;         // [0, pi), meaningful only where valid
    std::vector<std::uint8_t> valid;

    static LineField empty(const GridSpec& g) {
        LineField lf;
        lf.grid = g;
        lf.theta.assign(g.count(), 0.0);
        lf.valid.assign(g.count(), 0);
        return lf;
    }

    bool is_valid(int i, int j) const {
        return grid.contains(i, j) && valid[grid.idx(i, j)] != 0;
    }

    void set(int i, int j, double angle) {
        theta[grid.idx(i, j)] = wrap_line_angle(angle);
        valid[grid.idx(i, j)] = 1;
    }
};

/// Point sampler of an unoriented direction; empty optional = not defined.
using DirectionSampler = std::function<std::optional<double>(Vec2)>;

/// Bilinear sampler in the doubled-angle representation: interpolating
/// (cos 2theta, sin 2theta) keeps the mod-pi structure continuous.
inline DirectionSampler make_sampler(const LineField& lf) {
    return [lf](Vec2 p) -> std::optional<double> {
        const GridSpec& g = lf.grid;
        double fx = (p.x - g.origin.x) / g.h;
        double fy = (p.y - g.origin.y) / g.h;
        int i0 = int(std::floor(fx));
        int j0 = int(std::floor(fy));
        if (i0 == g.nx - 1 && std::abs(fx - i0) < 1e-12) --i0;
        if (j0 == g.ny - 1 && std::abs(fy - j0) < 1e-12) --j0;
        if (!g.contains(i0, j0) || !g.contains(i0 + 1, j0 + 1)) return std::nullopt;
        double tx = fx - i0, ty = fy - j0;
        double cx = 0.0, sx = 0.0;
        const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
        const int di[4] = {0, 1, 0, 1}, dj[4] = {0, 0, 1, 1};
        for (int k = 0; k < 4; ++k) {
            int i = i0 + di[k], j = j0 + dj[k];
            if (!lf.is_valid(i, j)) return std::nullopt;
            double th2 = 2.0 * lf.theta[g.idx(i, j)];
            cx += w[k] * std::cos(th2);
            sx += w[k] * std::sin(th2);
        }
        if (cx * cx + sx * sx < 1e-20) return std::nullopt;
        return wrap_line_angle(0.5 * std::atan2(sx, cx));
    };
}

inline DirectionSampler constant_sampler(double theta) {
    double t = wrap_line_angle(theta);
    return [t](Vec2) -> std::optional<double> { return t; };
}

// ---------------------------------------------------------------------------
// CSV dump: "x,y,theta,valid" per node, row-major.
// ---------------------------------------------------------------------------

inline void write_line_field_csv(std::ostream& os, const LineField& lf) {
    os << "x,y,theta,valid\n";
    for (int j = 0; j < lf.grid.ny; ++j) {
        for (int i = 0; i < lf.grid.nx; ++i) {
            Vec2 p = lf.grid.node(i, j);
            int k = lf.grid.idx(i, j);
            os << format_double(p.x) << ',' << format_double(p.y) << ','
               << format_double(lf.valid[k] ? lf.theta[k] : 0.0) << ','
               << int(lf.valid[k]) << '\n';
        }
    }
}

inline void save_line_field(const std::string& path, const LineField& lf) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open '" + path + "' for writing");
    write_line_field_csv(os, lf);
}

inline LineField read_line_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty line-field file");
    struct Row { double x, y, theta; int valid; };
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        Row r;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%d", &r.x, &r.y, &r.theta, &r.valid) != 4)
            throw ParseError("bad line-field row '" + line + "'");
        rows.push_back(r);
    }
    if (rows.size() < 4) throw ParseError("line-field dump too small");
    // infer the grid: first row is the origin, x advances fastest
    GridSpec g;
    g.origin = {rows[0].x, rows[0].y};
    int nx = 1;
    while (nx < int(rows.size()) && rows[nx].y == rows[0].y) ++nx;
    g.nx = nx;
    if (rows.size() % nx != 0) throw ParseError("line-field dump is not a full grid");
    g.ny = int(rows.size()) / nx;
    g.h = nx > 1 ? rows[1].x - rows[0].x : (g.ny > 1 ? rows[nx].y - rows[0].y : 1.0);
    LineField lf = LineField::empty(g);
    for (size_t k = 0; k < rows.size(); ++k) {
        lf.theta[k] = wrap_line_angle(rows[k].theta);
        lf.valid[k] = rows[k].valid ? 1 : 0;
    }
    return lf;
}

inline LineField load_line_field(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open '" + path + "'");
    return read_line_field_csv(is);
}

} // namespace odet
