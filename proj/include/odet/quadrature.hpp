#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "odet/vec.hpp"

namespace odet {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

/// Integrate F over the unit sphere with a product rule:
/// Gauss-Legendre in cos(polar) x trapezoid in azimuth.
inline Vec3 integrate_sphere_vec(const std::function<Vec3(Vec3)>& F, int n_polar = 64,
                                 int n_azimuth = 128) {
    std::vector<double> mu, wmu;
    gauss_legendre(n_polar, mu, wmu);
    const double dphi = 2.0 * kPi / n_azimuth;
    Vec3 acc;
    for (int i = 0; i < n_polar; ++i) {
        double m = mu[i];
        double rho = std::sqrt(std::max(0.0, 1.0 - m * m));
        for (int k = 0; k < n_azimuth; ++k) {
            double phi = k * dphi;
            Vec3 x{rho * std::cos(phi), rho * std::sin(phi), m};
            Vec3 v = F(x);
            double w = wmu[i] * dphi;
            acc.x += w * v.x;
            acc.y += w * v.y;
            acc.z += w * v.z;
        }
    }
    return acc;
}

} // namespace odet
