#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "odet/expressions.hpp"
#include "odet/field.hpp"
#include "odet/level_curve.hpp"
#include "odet/line_field.hpp"

using namespace odet;

TEST_CASE("closed-form jets: paraboloid family member") {
    for (double t : {-1.0, 0.0, 4.0}) {
        Jet2 j = expr::paraboloid(t)({1.0, 0.0});
        CHECK(j.z == Catch::Approx(1.0 + t));
        CHECK(j.p == Catch::Approx(2.0));
        CHECK(j.q == Catch::Approx(0.0));
        CHECK(j.r == Catch::Approx(2.0));
        CHECK(j.s == Catch::Approx(0.0));
        CHECK(j.t == Catch::Approx(2.0));
    }
}

TEST_CASE("closed-form jets: stretched profile at the origin") {
    Jet2 j = expr::aniso(1.0)({0.0, 0.0});
    CHECK(j.z == 1.0);
    CHECK(j.p == 0.0);
    CHECK(j.q == 0.0);
    CHECK(j.r == -0.5);
    CHECK(j.s == 0.0);
    CHECK(j.t == -0.125);
}

TEST_CASE("grid jets match analytic jets of sin(x)sin(y)") {
    GridSpec g = GridSpec::square(-1.0, 1.0, 257); // h = 1/128
    ScalarField f = ScalarField::sample(expr::sinsin(), g);
    f.closed_form = nullptr; // force the finite-difference path

    Jet2 exact = expr::sinsin()({0.3, 0.4});
    Jet2 jg = f.eval_jet({0.3, 0.4});
    CHECK(std::abs(jg.z - exact.z) < 1e-6);
    CHECK(std::abs(jg.p - exact.p) < 1e-6);
    CHECK(std::abs(jg.q - exact.q) < 1e-6);
    CHECK(std::abs(jg.r - exact.r) < 1e-6);
    CHECK(std::abs(jg.s - exact.s) < 1e-6);
    CHECK(std::abs(jg.t - exact.t) < 1e-6);
}

TEST_CASE("grid jets converge at fourth order") {
    auto worst_err = [](int n) {
        GridSpec g = GridSpec::square(-1.0, 1.0, n);
        ScalarField f = ScalarField::sample(expr::sinsin(), g);
        f.closed_form = nullptr;
        Jet2 exact = expr::sinsin()({0.31, 0.17});
        Jet2 jg = f.eval_jet({0.31, 0.17});
        double e = 0.0;
        e = std::max(e, std::abs(jg.z - exact.z));
        e = std::max(e, std::abs(jg.p - exact.p));
        e = std::max(e, std::abs(jg.q - exact.q));
        e = std::max(e, std::abs(jg.r - exact.r));
        e = std::max(e, std::abs(jg.s - exact.s));
        e = std::max(e, std::abs(jg.t - exact.t));
        return e;
    };
    double e1 = worst_err(33);
    double e2 = worst_err(65);
    double e4 = worst_err(129);
    double order12 = std::log2(e1 / e2);
    double order24 = std::log2(e2 / e4);
    CHECK(order12 > 3.5);
    CHECK(order24 > 3.5);
}

TEST_CASE("jets commute with affine reparameterization (chain rule)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        AnalyticJet base = expr::quadratic(u(rng), u(rng), u(rng), u(rng));
        // v(x, y) = base(x, 2y)
        AnalyticJet pulled = expr::affine_pullback(base, Mat2{1, 0, 0, 2}, Vec2{0, 0});
        Vec2 p{u(rng), u(rng)};
        Jet2 jb = base({p.x, 2.0 * p.y});
        Jet2 jv = pulled(p);
        CHECK(jv.z == Catch::Approx(jb.z).margin(1e-14));
        CHECK(jv.p == Catch::Approx(jb.p).margin(1e-14));
        CHECK(jv.q == Catch::Approx(2.0 * jb.q).margin(1e-14));
        CHECK(jv.r == Catch::Approx(jb.r).margin(1e-14));
        CHECK(jv.s == Catch::Approx(2.0 * jb.s).margin(1e-14));
        CHECK(jv.t == Catch::Approx(4.0 * jb.t).margin(1e-14));
    }
}

TEST_CASE("out-of-domain and non-finite jet errors") {
    GridSpec g = GridSpec::square(-1.0, 1.0, 33);
    ScalarField f = ScalarField::sample(expr::sinsin(), g);
    f.closed_form = nullptr;
    CHECK_THROWS_AS(f.eval_jet({-0.999, 0.0}), OutOfDomainError);
    CHECK_THROWS_AS(f.eval_jet({2.5, 0.0}), OutOfDomainError);

    ScalarField bad = ScalarField::sample(expr::cap(1.0), GridSpec::square(-0.5, 0.5, 17));
    CHECK_THROWS_AS(bad.eval_jet({2.0, 0.0}), NonFiniteError);
}

TEST_CASE("unit circle trace: curvature, normal, closure") {
    GridSpec g = GridSpec::square(-1.4, 1.4, 141);
    ScalarField f = ScalarField::sample(expr::quadratic(1.0, -1.0, 0.0, -1.0), g);
    LevelCurve c = trace_zero_level(f);
    REQUIRE(c.size() > 50);
    CHECK(c.points.front().x == c.points.back().x);
    CHECK(c.points.front().y == c.points.back().y);
    for (int k = 0; k < c.size(); ++k) {
        Vec2 p = c.points[k];
        CHECK(std::abs(norm(p) - 1.0) < 1e-9);
        CHECK(std::abs(c.kappa[k] - 1.0) < 1e-8);
        // inner normal points to the origin
        CHECK(std::abs(c.normal[k].x + p.x) < 1e-8);
        CHECK(std::abs(c.normal[k].y + p.y) < 1e-8);
        CHECK(std::abs(dot(c.tangent[k], c.normal[k])) < 1e-12);
        // vertex spacing below the grid spacing
        CHECK(dist(c.points[k + 1], c.points[k]) <= g.h * (1.0 + 1e-9));
    }
}

TEST_CASE("ellipse trace matches the conic curvature oracle") {
    // oracle: kappa(tau) = a b / (a^2 sin^2 tau + b^2 cos^2 tau)^(3/2)
    const double a = 2.0, b = 4.0;
    auto conic_kappa = [&](double tau) {
        double d = a * a * std::sin(tau) * std::sin(tau) + b * b * std::cos(tau) * std::cos(tau);
        return a * b / std::pow(d, 1.5);
    };

    GridSpec g = GridSpec::square(-4.6, 4.6, 231);
    ScalarField f = ScalarField::sample(expr::aniso(1.0), g);
    LevelCurve c = trace_zero_level(f);
    for (int k = 0; k < c.size(); ++k) {
        Vec2 p = c.points[k];
        CHECK(std::abs(p.x * p.x / 4.0 + p.y * p.y / 16.0 - 1.0) < 1e-9);
        double tau = std::atan2(p.y / b, p.x / a);
        CHECK(c.kappa[k] == Catch::Approx(conic_kappa(tau)).epsilon(1e-7));
    }
    // frozen oracle values at the axis points
    CHECK(conic_kappa(0.0) == Catch::Approx(0.125));
    CHECK(conic_kappa(0.5 * kPi) == Catch::Approx(1.0));
}

TEST_CASE("positive field has no zero set") {
    GridSpec g = GridSpec::square(-1.0, 1.0, 41);
    ScalarField f = ScalarField::sample(expr::paraboloid(1.0), g);
    CHECK_THROWS_AS(trace_zero_level(f), NoZeroSetError);
}

TEST_CASE("strictly concave fields with a positive maximum trace convex curves") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> amp(0.4, 1.8);
    std::uniform_real_distribution<double> mix(-0.4, 0.4);
    for (int rep = 0; rep < 25; ++rep) {
        double a11 = -amp(rng), a22 = -amp(rng);
        double a12 = mix(rng) * std::sqrt(a11 * a22);
        AnalyticJet fexpr = expr::quadratic(1.0, a11, a12, a22);
        GridSpec g = GridSpec::square(-3.0, 3.0, 201);
        ScalarField f = ScalarField::sample(fexpr, g);
        LevelCurve c = trace_zero_level(f);
        for (int k = 0; k < c.size(); ++k) {
            CHECK(c.kappa[k] > 0.0);
            // traced vertices sit on the zero set and the frame is consistent
            Jet2 j = f.eval_jet(c.points[k]);
            CHECK(std::abs(j.z) < 1.5e-10 * f.value_scale());
            CHECK(std::abs(dot(c.tangent[k], {j.p, j.q})) < 1e-10);
        }
        // polyline chords align with the stored tangents
        for (int k = 0; k + 1 < c.size(); ++k) {
            Vec2 chord = normalized(c.points[k + 1] - c.points[k]);
            CHECK(dot(chord, c.tangent[k]) > 0.0);
        }
    }
}

TEST_CASE("line angle difference wraps mod pi") {
    CHECK(line_angle_diff(0.1, 0.2) == Catch::Approx(0.1));
    CHECK(line_angle_diff(3.1, 0.05) == Catch::Approx(0.05 - 3.1 + kPi));
    CHECK(line_angle_diff(3.1, 0.05) == Catch::Approx(0.0915926535).epsilon(1e-6));
    CHECK(line_angle_diff(0.0, 0.5 * kPi) == Catch::Approx(0.5 * kPi));
    CHECK(line_angle_diff(0.2, 0.2 + kPi) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("scalar field CSV round trip") {
    GridSpec g{{-1.0, -2.0}, 0.25, 9, 17};
    ScalarField f = ScalarField::sample(expr::quadratic(0.3, 1.0, 0.2, -0.5), g);
    // punch a masked hole
    f.mask[g.idx(4, 8)] = 0;
    f.values[g.idx(4, 8)] = std::numeric_limits<double>::quiet_NaN();

    std::ostringstream os;
    write_field_csv(os, f);
    std::istringstream is(os.str());
    ScalarField r = read_field_csv(is);
    REQUIRE(r.grid.nx == g.nx);
    REQUIRE(r.grid.ny == g.ny);
    CHECK(r.grid.h == Catch::Approx(g.h));
    CHECK(r.grid.origin.x == Catch::Approx(g.origin.x));
    for (int k = 0; k < g.count(); ++k) {
        CHECK(int(r.mask[k]) == int(f.mask[k]));
        if (f.mask[k]) CHECK(r.values[k] == f.values[k]); // to_chars round trip is exact
    }
}

TEST_CASE("line field sampler interpolates mod pi") {
    GridSpec g = GridSpec::square(0.0, 1.0, 5);
    LineField lf = LineField::empty(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) lf.set(i, j, 0.3);
    auto s = make_sampler(lf);
    auto v = s({0.4, 0.6});
    REQUIRE(v.has_value());
    CHECK(*v == Catch::Approx(0.3));
    CHECK_FALSE(s({1.7, 0.2}).has_value());

    // angles straddling the wrap: 0.05 and pi - 0.05 average to 0 mod pi
    LineField wf = LineField::empty(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) wf.set(i, j, (i % 2 == 0) ? 0.05 : kPi - 0.05);
    auto ws = make_sampler(wf);
    auto mid = ws({0.125, 0.0});
    REQUIRE(mid.has_value());
    CHECK(std::abs(line_angle_diff(0.0, *mid)) < 1e-9);
}
