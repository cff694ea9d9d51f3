// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code = number of failures.

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "odet/cli.hpp"
#include "odet/expressions.hpp"
#include "odet/index.hpp"
#include "odet/overdetermined.hpp"
#include "odet/qdiff.hpp"
#include "odet/solver.hpp"

using namespace odet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail = "") {
    std::printf("%s  %2d  %s%s%s\n", pass ? "PASS" : "FAIL", criterion, name,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
    void note(const std::string& what) {
        if (detail.empty()) detail = what;
    }
};

GridSpec exact_grid_rect(double Bx, double By, double h) {
    int mx = int(std::ceil(Bx / h)), my = int(std::ceil(By / h));
    return {{-mx * h, -my * h}, h, 2 * mx + 1, 2 * my + 1};
}

GridSpec exact_grid(double B, double h) { return exact_grid_rect(B, B, h); }

double max_error_vs(const ScalarField& sol, const AnalyticJet& exact) {
    double worst = 0.0;
    for (int j = 0; j < sol.grid.ny; ++j)
        for (int i = 0; i < sol.grid.nx; ++i) {
            int k = sol.grid.idx(i, j);
            if (!sol.mask[k]) continue;
            worst = std::max(worst, std::abs(sol.values[k] - exact(sol.grid.node(i, j)).z));
        }
    return worst;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// --------------------------------------------------------------------------
// criterion 1: round trip of the stretched example
// --------------------------------------------------------------------------
void criterion_1() {
    Check c;
    try {
        ScalarField ua = ScalarField::sample(expr::aniso(1.0), GridSpec::square(-4.6, 4.6, 231));
        EquationDef eq = eq_aniso_linear();
        double res_max = 0.0;
        for (int j = 0; j < ua.grid.ny; ++j)
            for (int i = 0; i < ua.grid.nx; ++i)
                res_max = std::max(res_max, std::abs(eq.F(ua.eval_jet(ua.grid.node(i, j)))));
        c.require(res_max <= 1e-12, "closed-form residual " + fmt(res_max) + " > 1e-12");

        NeumannExtraction ex = extract_neumann(ua);
        double g_left = ex.g({-1.0, 0.0});
        double g_down = ex.g({0.0, -1.0});
        c.require(std::abs(g_left - 1.0) <= 1e-6, "g(-1,0) = " + fmt(g_left));
        c.require(std::abs(g_down - 0.5) <= 1e-6, "g(0,-1) = " + fmt(g_down));

        CanonicalFamily fam = make_family("aniso");
        SolutionReport rep = check_solution(ua, ex.curve, eq, fam, ex.g);
        c.require(rep.verdict == "canonical", "verdict '" + rep.verdict + "'");
        if (c.ok)
            c.note("residual " + fmt(res_max) + ", g(-1,0)-1 = " + fmt(g_left - 1.0) +
                   ", g(0,-1)-1/2 = " + fmt(g_down - 0.5));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(1, "round trip of the stretched closed form", c.ok, c.detail);
}

// --------------------------------------------------------------------------
// criterion 2: radial reduction to constant data g = R/2
// --------------------------------------------------------------------------
void criterion_2() {
    Check c;
    try {
        double worst = 0.0;
        for (double R : {0.5, 1.0, 2.0, 3.0}) {
            ScalarField u0 = ScalarField::sample(expr::serrin(0.25 * R * R),
                                                 GridSpec::square(-1.6 * R, 1.6 * R, 161));
            NeumannExtraction ex = extract_neumann(u0);
            for (double v : ex.g.values()) worst = std::max(worst, std::abs(v - R / 2.0));
        }
        c.require(worst <= 1e-8, "max |g - R/2| = " + fmt(worst));
        c.note("max |g - R/2| = " + fmt(worst));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(2, "radial members give constant data R/2", c.ok, c.detail);
}

// --------------------------------------------------------------------------
// criteria 3-5: index law, loop indefiniteness, bisection
// --------------------------------------------------------------------------
void criteria_3_4_5() {
    Check c3, c4, c5;
    try {
        CanonicalFamily fam = make_family("serrin");
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> uu(-1.6, 1.6);
        for (int n : {3, 4, 5}) {
            ScalarField u = ScalarField::sample(expr::serrin_perturbed(1.0, 0.01, n),
                                                GridSpec::square(-2.6, 2.6, 131));
            ShapeTensorField stf = shape_tensor(u, fam);
            UmbilicSet set = detect_umbilics(stf);
            c3.require(!set.identically_canonical, "canonical-region flag raised");
            c3.require(set.points.size() == 1,
                       "n=" + std::to_string(n) + ": " + std::to_string(set.points.size()) +
                           " umbilics");
            if (set.points.size() != 1) continue;
            Vec2 pos = set.points[0].position;
            c3.require(norm(pos) <= 1e-4, "n=" + std::to_string(n) +
                                              ": position error " + fmt(norm(pos)));

            double r = select_loop_radius(stf, pos);
            auto loop = circle_loop(pos, r, 256);
            double target = -(n - 2) / 2.0;
            DirectionSampler fields[4] = {eigenline_sampler(stf, 0), eigenline_sampler(stf, 1),
                                          null_line_sampler(stf, 0), null_line_sampler(stf, 1)};
            const char* names[4] = {"Z1", "Z2", "U", "V"};
            for (int f = 0; f < 4; ++f) {
                LineIndexResult li = line_index(fields[f], loop);
                c3.require(li.snap_ok && li.snapped == target,
                           std::string(names[f]) + " index " + fmt(li.snapped) + " (n=" +
                               std::to_string(n) + ")");
                c3.require(std::abs(li.raw - target) <= 0.05,
                           std::string(names[f]) + " raw winding off by " +
                               fmt(std::abs(li.raw - target)));
            }

            // criterion 4: the deviation form is indefinite on every loop sample
            for (Vec2 p : loop) {
                auto sg = stf.sigma_at(p);
                c4.require(sg.has_value() && sg->det() < 0.0,
                           "det sigma >= 0 on a loop sample (n=" + std::to_string(n) + ")");
            }

            // criterion 5: metric bisection on random valid nodes
            int found = 0;
            double worst_dev = 0.0;
            while (found < 334) {
                Vec2 p{uu(rng), uu(rng)};
                auto S = stf.S_at(p);
                auto sg = stf.sigma_at(p);
                auto lam = stf.lambda_at(p);
                if (!S || !sg || !lam) continue;
                auto eig = eigen_directions(*S);
                auto nul = null_directions(*sg);
                if (!eig || !nul) continue;
                ++found;
                worst_dev = std::max(
                    worst_dev, bisection_deviation(*lam, eig->first, nul->first, nul->second));
            }
            c5.require(worst_dev <= 1e-6,
                       "bisection deviation " + fmt(worst_dev) + " (n=" + std::to_string(n) + ")");
            if (c5.ok) c5.note("max deviation " + fmt(worst_dev));
        }
    } catch (const std::exception& e) {
        c3.require(false, e.what());
        c4.require(false, e.what());
        c5.require(false, e.what());
    }
    report(3, "umbilic location and the -(n-2)/2 index law", c3.ok, c3.detail);
    report(4, "det(sigma) < 0 on every index loop sample", c4.ok, c4.detail);
    report(5, "eigenlines bisect the null lines in the metric", c5.ok, c5.detail);
}

// --------------------------------------------------------------------------
// criterion 6: index sums on the sphere and the disk contradiction
// --------------------------------------------------------------------------
void criterion_6() {
    Check c;
    try {
        struct SphereCase {
            RationalQ q;
            std::vector<Vec2> zeros;
            const char* label;
        };
        double s = std::sqrt(0.3);
        RationalQ shifted;
        shifted.num = {0.3, 0.0, 1.0};
        std::vector<SphereCase> cases{{RationalQ::monomial(1), {{0, 0}}, "z dz^2"},
                                      {RationalQ::monomial(2), {{0, 0}}, "z^2 dz^2"},
                                      {shifted, {{0, s}, {0, -s}}, "(z^2+0.3) dz^2"}};
        for (auto& sc : cases) {
            PhAuditInput in;
            in.sphere = true;
            DirectionSampler base = qdiff_direction(sc.q, false);
            for (Vec2 z : sc.zeros) {
                LineIndexResult li = line_index(base, circle_loop(z, 0.18, 256));
                c.require(li.snap_ok, std::string(sc.label) + ": zero winding did not snap");
                in.interior.push_back({z, li.snapped, 0});
            }
            DirectionSampler inv = qdiff_direction_inverted(sc.q, false);
            LineIndexResult inf = line_index(inv, circle_loop({0, 0}, 0.2, 256));
            c.require(inf.snap_ok, std::string(sc.label) + ": winding at infinity did not snap");
            in.interior.push_back({{0, 0}, inf.snapped, 0});
            IndexReport rep = ph_audit(in);
            c.require(std::abs(rep.sphere_sum - 2.0) < 1e-12,
                      std::string(sc.label) + ": sphere sum " + fmt(rep.sphere_sum));
            c.require(!rep.contradiction, std::string(sc.label) + ": unexpected contradiction");
        }

        // disk audit of the pronged vertical foliation: one -1/2 singularity
        DirectionSampler vert = qdiff_direction(RationalQ::monomial(1), true);
        LineIndexResult li = line_index(vert, circle_loop({0, 0}, 0.5, 128));
        c.require(li.snap_ok && li.snapped == -0.5, "pronged interior index " + fmt(li.snapped));
        PhAuditInput in;
        in.interior.push_back({{0, 0}, li.snapped, 3});
        in.tangency_assumed = true;
        IndexReport rep = ph_audit(in);
        c.require(rep.applicable && rep.contradiction,
                  "disk audit did not flag the contradiction");
        c.require(std::abs(rep.disk_sum + 0.5) < 1e-12, "disk sum " + fmt(rep.disk_sum));
        if (c.ok) c.note("sphere sums 2, disk sum -1/2 flagged");
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(6, "index sums: sphere fixtures and the disk contradiction", c.ok, c.detail);
}

// --------------------------------------------------------------------------
// criterion 7: boundary identities on closed forms and solver grids
// --------------------------------------------------------------------------
void criterion_7() {
    Check c;
    try {
        // closed forms: the stretched member on its own traced boundary
        ScalarField ua = ScalarField::sample(expr::aniso(1.0), GridSpec::square(-4.6, 4.6, 231));
        NeumannExtraction ex = extract_neumann(ua);
        BoundaryIdentityTable closed = boundary_identities(ua, ex.curve, nullptr);
        c.require(closed.tangential_max <= 1e-8, "closed-form tangential residual " + fmt(closed.tangential_max));
        c.require(closed.curvature_max <= 1e-8, "closed-form curvature residual " + fmt(closed.curvature_max));

        // solver grids: the shifted spherical cap (a genuinely non-polynomial
        // solution) reproduced on a dilated disk; the identities are evaluated
        // on the unit circle, where the cap shifted by sqrt(3) vanishes
        ScalarField circle_src =
            ScalarField::sample(expr::disk(1.0), GridSpec::square(-1.1, 1.1, 221));
        LevelCurve circle = trace_zero_level(circle_src);

        const double shift = std::sqrt(3.0);
        double res[2];
        double hs[2] = {1.0 / 64.0, 1.0 / 128.0};
        for (int m = 0; m < 2; ++m) {
            double h = hs[m];
            DirichletProblem prob;
            prob.eq = eq_pmc([](Vec2) { return -0.5; });
            prob.domain_psi = expr::disk(1.4);
            prob.boundary_data = [shift](Vec2 p) {
                return std::sqrt(4.0 - p.x * p.x - p.y * p.y) - shift;
            };
            prob.grid = exact_grid(1.4 + 5.0 * h, h);
            double g0 = std::sqrt(4.0 - 1.4 * 1.4) - shift;
            SolveResult sol = solve_dirichlet(prob, [g0](Vec2) { return g0; });
            BoundaryIdentityTable tbl = boundary_identities(sol.solution, circle, nullptr);
            res[m] = std::max(tbl.tangential_max, tbl.curvature_max);
            c.require(res[m] <= 20.0 * h * h,
                      "grid residual " + fmt(res[m]) + " > 20 h^2 at h = 1/" +
                          std::to_string(int(1.0 / h)));
        }
        double ratio = res[0] / res[1];
        c.require(ratio >= 2.5 && ratio <= 6.4, "refinement ratio " + fmt(ratio));
        if (c.ok)
            c.note("closed " + fmt(std::max(closed.tangential_max, closed.curvature_max)) + ", grid " +
                   fmt(res[0]) + " -> " + fmt(res[1]) + ", ratio " + fmt(ratio));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(7, "boundary identities at the stated tolerances", c.ok, c.detail);
}

// --------------------------------------------------------------------------
// criterion 8: second-order solver convergence
// --------------------------------------------------------------------------
void criterion_8() {
    Check c;
    std::string orders;
    try {
        const double hs[3] = {1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0};
        // RMS error averaged over sub-cell grid shifts: the solutions are
        // scheme-exact in the interior, so the error is pure cut-cell noise
        // whose constant depends on the grid alignment; averaging shifts
        // recovers a stable convergence constant
        const double shifts[3][2] = {{0.0, 0.0}, {0.37, 0.23}, {0.71, 0.53}};
        auto rms_error = [](const ScalarField& sol, const AnalyticJet& exact) {
            double acc = 0.0;
            int n = 0;
            for (int j = 0; j < sol.grid.ny; ++j)
                for (int i = 0; i < sol.grid.nx; ++i) {
                    int k = sol.grid.idx(i, j);
                    if (!sol.mask[k]) continue;
                    double e = sol.values[k] - exact(sol.grid.node(i, j)).z;
                    acc += e * e;
                    ++n;
                }
            return std::sqrt(acc / n);
        };
        auto measured_order = [&](const std::function<double(double, Vec2)>& err_of) {
            double e[3];
            for (int m = 0; m < 3; ++m) {
                double prod = 1.0;
                for (auto& sh : shifts)
                    prod *= err_of(hs[m], Vec2{sh[0] * hs[m], sh[1] * hs[m]});
                e[m] = std::cbrt(prod);
            }
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (int m = 0; m < 3; ++m) {
                double x = std::log(hs[m]), y = std::log(e[m]);
                sx += x; sy += y; sxx += x * x; sxy += x * y;
            }
            return (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
        };
        auto shifted_grid = [](double Bx, double By, double h, Vec2 sh) {
            int mx = int(std::ceil(Bx / h)), my = int(std::ceil(By / h));
            return GridSpec{{-mx * h + sh.x, -my * h + sh.y}, h, 2 * mx + 1, 2 * my + 1};
        };

        double o1 = measured_order([&](double h, Vec2 sh) {
            DirichletProblem prob;
            prob.eq = eq_serrin_laplace();
            prob.domain_psi = expr::disk(1.0);
            prob.boundary_data = [](Vec2) { return 0.0; };
            prob.grid = shifted_grid(1.0 + 5.0 * h, 1.0 + 5.0 * h, h, sh);
            return rms_error(solve_dirichlet(prob).solution, expr::serrin(0.25));
        });
        c.require(o1 >= 1.8 && o1 <= 2.2, "torsion disk order " + fmt(o1));

        double o2 = measured_order([&](double h, Vec2 sh) {
            DirichletProblem prob;
            prob.eq = eq_aniso_linear();
            prob.domain_psi = expr::ellipse(2.0, 4.0);
            prob.boundary_data = [](Vec2) { return 0.0; };
            prob.grid = shifted_grid(2.0 + 5.0 * h, 4.0 + 5.0 * h, h, sh);
            return rms_error(solve_dirichlet(prob).solution, expr::aniso(1.0));
        });
        c.require(o2 >= 1.8 && o2 <= 2.2, "stretched ellipse order " + fmt(o2));

        double o3 = measured_order([&](double h, Vec2 sh) {
            DirichletProblem prob;
            prob.eq = eq_monge_ampere_4();
            prob.domain_psi = expr::disk(1.0);
            prob.boundary_data = [](Vec2 p) { return p.x * p.x + p.y * p.y; };
            prob.grid = shifted_grid(1.0 + 5.0 * h, 1.0 + 5.0 * h, h, sh);
            auto guess = [](Vec2 p) {
                return p.x * p.x + p.y * p.y +
                       0.1 * std::sin(2.0 * p.x) * std::sin(2.3 * p.y + 0.4);
            };
            return rms_error(solve_dirichlet(prob, guess).solution, expr::paraboloid(0.0));
        });
        c.require(o3 >= 1.8 && o3 <= 2.2, "Monge-Ampere disk order " + fmt(o3));
        orders = "orders " + fmt(o1) + ", " + fmt(o2) + ", " + fmt(o3);
        c.note(orders);
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(8, "solver converges at second order on the three problems", c.ok, c.detail);
}

// --------------------------------------------------------------------------
// criterion 9: rigidity margin of the scaled-Hessian comparison
// --------------------------------------------------------------------------
void criterion_9() {
    Check c;
    try {
        CanonicalFamily fam = make_family("paraboloid");
        EquationDef ma = eq_monge_ampere_4();
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> uz(-2.0, 2.0);

        const int n_bins = 9;
        double margins[n_bins];
        std::printf("      rigidity margin curve (|lambda-1| -> min |F|):\n");
        int jets_used = 0;
        for (int b = 0; b < n_bins; ++b) {
            double delta = 0.1 * (b + 1);
            double margin = std::numeric_limits<double>::infinity();
            for (double lam : {1.0 - delta, 1.0 + delta}) {
                for (int k = 0; k < 6; ++k) {
                    std::array<double, 5> alpha{uz(rng), uz(rng), uz(rng), uz(rng), uz(rng)};
                    SymForm2 G = gamma(fam, alpha);
                    Jet2 jet{alpha[2], alpha[3], alpha[4],
                             lam * G.a11, lam * G.a12, lam * G.a22};
                    if (!ma.admissible(jet)) continue;
                    margin = std::min(margin, std::abs(ma.F(jet)));
                    ++jets_used;
                }
            }
            margins[b] = margin;
            std::printf("        %.1f  %.6f\n", delta, margin);
        }
        c.require(jets_used >= 100, "only " + std::to_string(jets_used) + " admissible jets");
        for (int b = 0; b < n_bins; ++b)
            c.require(margins[b] > 0.0, "margin vanished at |lambda-1| = " +
                                            fmt(0.1 * (b + 1)));
        for (int b = 1; b < n_bins; ++b)
            c.require(margins[b] > margins[b - 1], "margin not monotone at bin " +
                                                       std::to_string(b));
        c.note("margin(0.1) = " + fmt(margins[0]) + ", margin(0.9) = " + fmt(margins[8]));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(9, "scaled-Hessian residual margin is positive and monotone", c.ok, c.detail);
}

// --------------------------------------------------------------------------
// criterion 10: byte-identical reruns of the scenario suite
// --------------------------------------------------------------------------
void criterion_10() {
    Check c;
    try {
        auto run_suite = [&](const fs::path& out) {
            fs::remove_all(out);
            struct Step {
                const char* sub;
                const char* cfg;
                int expect;
            };
            const Step steps[] = {{"verify-family", "verify_serrin.cfg", 0},
                                  {"extract-neumann", "extract_aniso.cfg", 0},
                                  {"check-solution", "check_aniso.cfg", 0},
                                  {"check-solution", "check_wrong_g.cfg", 1},
                                  {"index-audit", "audit_perturbed.cfg", 0},
                                  {"solve", "solve_serrin.cfg", 0}};
            for (const Step& s : steps) {
                cli::CliOptions opt;
                opt.config_path = std::string(ODET_SCENARIO_DIR) + "/" + s.cfg;
                opt.out_override = out.string();
                int rc = cli::run(s.sub, opt);
                c.require(rc == s.expect, std::string(s.cfg) + " exited " + std::to_string(rc));
            }
            // render against the audit artifacts
            fs::path cfg = out / "render.cfg";
            std::ofstream(cfg) << "[render]\nfield = " << (out / "z1.csv").string()
                               << "\ncurve = " << (out / "curve.csv").string()
                               << "\nreport = " << (out / "index_report.json").string() << "\n";
            cli::CliOptions opt;
            opt.config_path = cfg.string();
            opt.out_override = out.string();
            c.require(cli::run("render", opt) == 0, "render failed");
        };
        fs::path a = "acceptance_run_a", b = "acceptance_run_b";
        run_suite(a);
        run_suite(b);
        int compared = 0;
        for (auto& entry : fs::directory_iterator(a)) {
            fs::path pa = entry.path();
            if (pa.extension() == ".cfg") continue; // configs embed the out path
            fs::path pb = b / pa.filename();
            std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
            std::stringstream sa, sb;
            sa << fa.rdbuf();
            sb << fb.rdbuf();
            c.require(fb.good(), "missing artifact " + pb.string());
            c.require(sa.str() == sb.str(), "artifact differs: " + pa.filename().string());
            ++compared;
        }
        c.require(compared >= 10, "only " + std::to_string(compared) + " artifacts compared");
        c.note(std::to_string(compared) + " artifacts byte-identical");
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    report(10, "scenario suite reruns are byte-identical", c.ok, c.detail);
}

} // namespace

int main() {
    std::printf("acceptance criteria\n===================\n");
    criterion_1();
    criterion_2();
    criteria_3_4_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    std::printf("===================\n%s (%d failure%s)\n",
                g_failures == 0 ? "ALL CRITERIA PASS" : "CRITERIA FAILED", g_failures,
                g_failures == 1 ? "" : "s");
    return g_failures == 0 ? 0 : 1;
}
