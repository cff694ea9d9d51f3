#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "odet/errors.hpp"
#include "odet/vec.hpp"

namespace odet {

/// Periodic cubic spline on strictly increasing knots in [0, period).
/// Natural C2 interpolant; second derivatives come from the cyclic
/// tridiagonal system solved with Sherman-Morrison.
class PeriodicSpline {
public:
    PeriodicSpline() = default;

    PeriodicSpline(std::vector<double> knots, std::vector<double> values, double period)
        : x_(std::move(knots)), y_(std::move(values)), period_(period) {
        const int n = int(x_.size());
        if (n < 3) throw Error("periodic spline needs at least 3 knots");
        for (int i = 0; i + 1 < n; ++i)
            if (!(x_[i] < x_[i + 1])) throw Error("spline knots must be strictly increasing");
        if (!(x_.back() - x_.front() < period_))
            throw Error("spline knots must span less than one period");
        solve_moments();
    }

    double period() const { return period_; }

    double value(double x) const { return eval(x).first; }
    double derivative(double x) const { return eval(x).second; }

private:
    std::vector<double> x_, y_, m_; // knots, values, second derivatives
    double period_ = 2.0 * kPi;

    double gap(int i) const {
        // spacing between knot i and i+1 (wrapping the last interval)
        const int n = int(x_.size());
        return i + 1 < n ? x_[i + 1] - x_[i] : period_ - x_.back() + x_.front();
    }

    void solve_moments() {
        const int n = int(x_.size());
        std::vector<double> a(n), b(n), c(n), d(n);
        for (int i = 0; i < n; ++i) {
            double hm = gap((i + n - 1) % n);
            double hp = gap(i);
            double ym = y_[(i + n - 1) % n], yp = y_[(i + 1) % n];
            a[i] = hm / 6.0;
            b[i] = (hm + hp) / 3.0;
            c[i] = hp / 6.0;
            d[i] = (yp - y_[i]) / hp - (y_[i] - ym) / hm;
        }
        m_ = solve_cyclic_tridiag(a, b, c, d);
    }

    // Thomas algorithm with Sherman-Morrison for the cyclic corner terms.
    static std::vector<double> solve_cyclic_tridiag(const std::vector<double>& a,
                                                    const std::vector<double>& b,
                                                    const std::vector<double>& c,
                                                    const std::vector<double>& d) {
        const int n = int(a.size());
        double alpha = a[0];    // corner (0, n-1)
        double beta = c[n - 1]; // corner (n-1, 0)
        double gamma = -b[0];

        std::vector<double> bb(b);
        bb[0] -= gamma;
        bb[n - 1] -= alpha * beta / gamma;

        auto tri = [&](const std::vector<double>& rhs) {
            std::vector<double> cp(n), dp(n), out(n);
            cp[0] = c[0] / bb[0];
            dp[0] = rhs[0] / bb[0];
            for (int i = 1; i < n; ++i) {
                double m = bb[i] - a[i] * cp[i - 1];
                cp[i] = c[i] / m;
                dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
            }
            out[n - 1] = dp[n - 1];
            for (int i = n - 2; i >= 0; --i) out[i] = dp[i] - cp[i] * out[i + 1];
            return out;
        };

        std::vector<double> u(n, 0.0);
        u[0] = gamma;
        u[n - 1] = beta;
        std::vector<double> sol_d = tri(d);
        std::vector<double> sol_u = tri(u);
        double fact = (sol_d[0] + alpha * sol_d[n - 1] / gamma) /
                      (1.0 + sol_u[0] + alpha * sol_u[n - 1] / gamma);
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) out[i] = sol_d[i] - fact * sol_u[i];
        return out;
    }

    std::pair<double, double> eval(double x) const {
        const int n = int(x_.size());
        // reduce into [x_[0], x_[0] + period)
        double xr = std::fmod(x - x_[0], period_);
        if (xr < 0.0) xr += period_;
        xr += x_[0];
        // locate interval (the wrap interval covers [x_[n-1], x_[0]+period))
        int i;
        if (xr >= x_[n - 1])
            i = n - 1;
        else
            i = int(std::upper_bound(x_.begin(), x_.end(), xr) - x_.begin()) - 1;
        int ip = (i + 1) % n;
        double h = gap(i);
        double t = xr - x_[i];
        double A = (h - t) / h, B = t / h;
        double yi = y_[i], yp = y_[ip], mi = m_[i], mp = m_[ip];
        double val = A * yi + B * yp +
                     ((A * A * A - A) * mi + (B * B * B - B) * mp) * h * h / 6.0;
        double der = (yp - yi) / h +
                     (-(3.0 * A * A - 1.0) * mi + (3.0 * B * B - 1.0) * mp) * h / 6.0;
        return {val, der};
    }
};

} // namespace odet
