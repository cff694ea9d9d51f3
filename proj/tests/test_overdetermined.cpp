#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "odet/expressions.hpp"
#include "odet/overdetermined.hpp"

using namespace odet;

namespace {

ScalarField torsion_field(double a, double halfwidth, int n) {
    return ScalarField::sample(expr::serrin(a), GridSpec::square(-halfwidth, halfwidth, n));
}

} // namespace

TEST_CASE("radial member yields constant Neumann data g = R/2") {
    for (double R : {0.5, 1.0, 2.0, 3.0}) {
        double a = 0.25 * R * R; // zero circle of radius R
        ScalarField u0 = torsion_field(a, 1.6 * R, 161);
        NeumannExtraction ex = extract_neumann(u0);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double v : ex.g.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        INFO("R = " << R);
        CHECK(hi - lo <= 1e-8);
        CHECK(lo == Catch::Approx(R / 2.0).margin(1e-9));
    }
}

TEST_CASE("stretched member: natural Neumann data at the axis normals") {
    ScalarField u0 = ScalarField::sample(expr::aniso(1.0), GridSpec::square(-4.6, 4.6, 231));
    NeumannExtraction ex = extract_neumann(u0);
    // at (2, 0): Du = (-1, 0), nu = (-1, 0), g = 1
    CHECK(ex.g({-1.0, 0.0}) == Catch::Approx(1.0).margin(1e-6));
    // at (0, 4): Du = (0, -1/2), nu = (0, -1), g = 1/2
    CHECK(ex.g({0.0, -1.0}) == Catch::Approx(0.5).margin(1e-6));
    // full circle coverage, monotone angles
    const auto& ang = ex.g.angles();
    REQUIRE(ang.size() > 32);
    for (size_t k = 1; k < ang.size(); ++k) CHECK(ang[k] > ang[k - 1]);
}

TEST_CASE("saddle level sets do not close") {
    ScalarField u0 = ScalarField::sample(expr::quadratic(1.0, 1.0, 0.0, -1.0),
                                         GridSpec::square(-2.0, 2.0, 81));
    CHECK_THROWS_AS(extract_neumann(u0), NotClosedError);
}

TEST_CASE("normal-angle monotonicity tracks convexity") {
    ScalarField u0 = torsion_field(1.0, 3.0, 151);
    NeumannExtraction ex = extract_neumann(u0);
    const LevelCurve& c = ex.curve;
    for (int k = 0; k < c.size(); ++k) {
        double a0 = std::atan2(c.normal[k].y, c.normal[k].x);
        double a1 = std::atan2(c.normal[(k + 1) % c.size()].y, c.normal[(k + 1) % c.size()].x);
        CHECK(wrap_to_pi(a1 - a0) > 0.0); // kappa > 0 everywhere
    }
}

TEST_CASE("boundary identities vanish for the stretched solution with its own data") {
    ScalarField u = ScalarField::sample(expr::aniso(1.0), GridSpec::square(-4.6, 4.6, 231));
    NeumannExtraction ex = extract_neumann(u);
    BoundaryIdentityTable tbl = boundary_identities(u, ex.curve, &ex.g);
    CHECK(tbl.tangential_max <= 1e-8);
    CHECK(tbl.curvature_max <= 1e-8);
    CHECK(tbl.mixed_max <= 2e-6); // dg comes from the spline fit
}

TEST_CASE("curvature identity for the radial solution with constant data") {
    ScalarField u = torsion_field(0.25, 1.5, 161); // zero circle R = 1
    LevelCurve curve = trace_zero_level(u);
    NeumannData g = NeumannData::constant(0.5);
    BoundaryIdentityTable tbl = boundary_identities(u, curve, &g);
    // (D^2 u)(w, w) = -1/2 and -kappa g = -1 * 1/2, identically
    CHECK(tbl.curvature_max <= 1e-9);
    CHECK(tbl.mixed_max <= 1e-9);
    for (double v : tbl.curvature) CHECK(std::abs(v) <= 1e-9);
}

TEST_CASE("intrinsic identities hold for arbitrary smooth vanishing functions") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> amp(0.4, 1.5);
    std::uniform_real_distribution<double> mix(-0.35, 0.35);
    for (int rep = 0; rep < 20; ++rep) {
        double a11 = -amp(rng), a22 = -amp(rng);
        double a12 = mix(rng) * std::sqrt(a11 * a22);
        ScalarField u = ScalarField::sample(expr::quadratic(1.0, a11, a12, a22),
                                            GridSpec::square(-3.2, 3.2, 161));
        LevelCurve curve = trace_zero_level(u);
        BoundaryIdentityTable tbl = boundary_identities(u, curve, nullptr);
        CHECK(tbl.tangential_max <= 1e-9);
        CHECK(tbl.curvature_max <= 1e-9);
        CHECK(tbl.mixed.empty());
    }
}

TEST_CASE("eigen ratio is 1 on a member's own boundary") {
    CanonicalFamily fam = make_family("serrin");
    ScalarField u = torsion_field(1.0, 3.0, 151); // member a = 1
    LevelCurve curve = trace_zero_level(u);
    for (int k = 0; k < curve.size(); k += std::max(1, curve.size() / 16)) {
        LambdaRatio lr = eigen_lambda_ratio(u, fam, curve, k);
        CHECK(lr.lambda == Catch::Approx(1.0).margin(1e-8));
        CHECK(lr.eigen_relation_deviation <= 1e-9);
    }
}

TEST_CASE("eigen ratio detects an unnatural pairing on the ellipse") {
    CanonicalFamily fam = make_family("serrin");
    ScalarField u = torsion_field(0.25, 2.6, 161); // torsion profile, zero circle R = 1
    ScalarField dom = ScalarField::sample(expr::ellipse(2.0, 1.0), GridSpec::square(-2.4, 2.4, 161));
    LevelCurve ellipse = trace_zero_level(dom);
    double worst = 0.0;
    for (int k = 0; k < ellipse.size(); k += std::max(1, ellipse.size() / 24)) {
        LambdaRatio lr = eigen_lambda_ratio(u, fam, ellipse, k);
        worst = std::max(worst, lr.eigen_relation_deviation);
    }
    CHECK(worst > 1e-3);
}

TEST_CASE("round trip: extracted data certifies its own source") {
    CanonicalFamily fam = make_family("aniso");
    ScalarField u = ScalarField::sample(expr::aniso(1.0), GridSpec::square(-4.6, 4.6, 231));
    NeumannExtraction ex = extract_neumann(u);
    SolutionReport rep = check_solution(u, ex.curve, eq_aniso_linear(), fam, ex.g);
    CHECK(rep.verdict == "canonical");
    CHECK(rep.pde_residual_max <= 1e-12);
    CHECK(rep.dirichlet_max <= 1e-9);
    CHECK(rep.neumann_max <= 1e-7);
    CHECK(rep.canonicality_score <= 1e-8);
}

TEST_CASE("radial solution with constant data on the circle is canonical") {
    CanonicalFamily fam = make_family("serrin");
    ScalarField u = torsion_field(0.25, 1.5, 161);
    LevelCurve circle = trace_zero_level(u);
    SolutionReport rep = check_solution(u, circle, eq_serrin_laplace(), fam,
                                        NeumannData::constant(0.5));
    CHECK(rep.verdict == "canonical");
}

TEST_CASE("radial solution on the wrong domain fails the Neumann check") {
    CanonicalFamily fam = make_family("serrin");
    ScalarField u = torsion_field(0.25, 2.6, 161);
    ScalarField dom = ScalarField::sample(expr::ellipse(2.0, 1.0), GridSpec::square(-2.4, 2.4, 161));
    LevelCurve ellipse = trace_zero_level(dom);
    SolutionReport rep = check_solution(u, ellipse, eq_serrin_laplace(), fam,
                                        NeumannData::constant(0.5));
    CHECK(rep.verdict == "non-canonical");
    CHECK(rep.neumann_max > 0.1);
    CHECK(rep.dirichlet_max > 0.1);
}

TEST_CASE("Neumann data CSV serialization") {
    ScalarField u0 = torsion_field(0.25, 1.5, 101);
    NeumannExtraction ex = extract_neumann(u0);
    std::ostringstream os;
    ex.g.write_csv(os);
    std::string text = os.str();
    CHECK(text.rfind("angle,g,dg\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == int(ex.g.angles().size()) + 1);
}

TEST_CASE("constant Neumann data has zero differential") {
    NeumannData g = NeumannData::constant(0.75);
    CHECK(g({1.0, 0.0}) == Catch::Approx(0.75));
    CHECK(g({0.0, -1.0}) == Catch::Approx(0.75));
    CHECK(g.dg({0.0, 1.0}, {1.0, 0.0}) == Catch::Approx(0.0).margin(1e-12));
}
