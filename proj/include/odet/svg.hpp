#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "odet/index.hpp"
#include "odet/level_curve.hpp"
#include "odet/line_field.hpp"
#include "odet/report.hpp"

namespace odet {

struct SvgOptions {
    double width_px = 800.0;
    double tick_fraction = 0.8; // tick length as a fraction of the cell
    double margin_px = 24.0;
};

/// Unoriented tick marks per valid node, optional boundary polyline and
/// singularity markers annotated with half-integer indices. Output is
/// deterministic for fixed input.
inline std::string render_svg(const LineField& lf, const LevelCurve* curve = nullptr,
                              const std::vector<SingularityRecord>* singularities = nullptr,
                              const SvgOptions& opt = {}) {
    const GridSpec& g = lf.grid;
    double xlo = g.origin.x, ylo = g.origin.y;
    double xhi = g.upper().x, yhi = g.upper().y;
    double span_x = std::max(xhi - xlo, 1e-12);
    double span_y = std::max(yhi - ylo, 1e-12);
    double scale = (opt.width_px - 2.0 * opt.margin_px) / span_x;
    double height_px = span_y * scale + 2.0 * opt.margin_px;

    auto X = [&](double x) { return opt.margin_px + (x - xlo) * scale; };
    auto Y = [&](double y) { return height_px - (opt.margin_px + (y - ylo) * scale); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(opt.width_px)
       << "\" height=\"" << format_double(height_px) << "\" viewBox=\"0 0 "
       << format_double(opt.width_px) << " " << format_double(height_px) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // ticks
    double half = 0.5 * opt.tick_fraction * g.h * scale;
    os << "<g stroke=\"#1f4e79\" stroke-width=\"1\">\n";
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int k = g.idx(i, j);
            if (!lf.valid[k]) continue;
            Vec2 p = g.node(i, j);
            double th = lf.theta[k];
            double dx = std::cos(th) * half, dy = std::sin(th) * half;
            double cx = X(p.x), cy = Y(p.y);
            os << "<line x1=\"" << format_double(cx - dx) << "\" y1=\""
               << format_double(cy + dy) << "\" x2=\"" << format_double(cx + dx)
               << "\" y2=\"" << format_double(cy - dy) << "\"/>\n";
        }
    }
    os << "</g>\n";

    if (curve && curve->points.size() > 1) {
        os << "<polyline fill=\"none\" stroke=\"#b02020\" stroke-width=\"1.5\" points=\"";
        for (size_t k = 0; k < curve->points.size(); ++k) {
            if (k) os << ' ';
            os << format_double(X(curve->points[k].x)) << ','
               << format_double(Y(curve->points[k].y));
        }
        os << "\"/>\n";
    }

    if (singularities && !singularities->empty()) {
        double total = 0.0;
        for (auto& s : *singularities) {
            total += s.index;
            double cx = X(s.position.x), cy = Y(s.position.y);
            os << "<circle cx=\"" << format_double(cx) << "\" cy=\"" << format_double(cy)
               << "\" r=\"5\" fill=\"none\" stroke=\"#b02020\" stroke-width=\"1.5\"/>\n";
            os << "<text x=\"" << format_double(cx + 8.0) << "\" y=\""
               << format_double(cy - 8.0)
               << "\" font-family=\"monospace\" font-size=\"14\" fill=\"#b02020\">"
               << format_half_integer(s.index) << "</text>\n";
        }
        os << "<text x=\"" << format_double(opt.margin_px) << "\" y=\""
           << format_double(18.0)
           << "\" font-family=\"monospace\" font-size=\"14\" fill=\"#303030\">indices sum: "
           << format_half_integer(total) << "</text>\n";
    }

    os << "</svg>\n";
    return os.str();
}

} // namespace odet
