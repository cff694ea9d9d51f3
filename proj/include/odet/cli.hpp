#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "odet/canonical.hpp"
#include "odet/config.hpp"
#include "odet/equations.hpp"
#include "odet/errors.hpp"
#include "odet/field.hpp"
#include "odet/index.hpp"
#include "odet/level_curve.hpp"
#include "odet/overdetermined.hpp"
#include "odet/report.hpp"
#include "odet/solver.hpp"
#include "odet/svg.hpp"

namespace odet::cli {

struct CliOptions {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    double tol_scale = 1.0;
    std::optional<int> grid_override;
};

namespace detail {

inline void write_curve_csv(std::ostream& os, const LevelCurve& c) {
    os << "x,y,s,wx,wy,nux,nuy,kappa\n";
    for (int k = 0; k <= c.size(); ++k)
        os << format_double(c.points[k].x) << ',' << format_double(c.points[k].y) << ','
           << format_double(c.arclen[k]) << ',' << format_double(c.tangent[k].x) << ','
           << format_double(c.tangent[k].y) << ',' << format_double(c.normal[k].x) << ','
           << format_double(c.normal[k].y) << ',' << format_double(c.kappa[k]) << '\n';
}

inline LevelCurve read_curve_points_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty curve file");
    LevelCurve c;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double x, y;
        if (std::sscanf(line.c_str(), "%lf,%lf", &x, &y) != 2)
            throw ParseError("bad curve row '" + line + "'");
        c.points.push_back({x, y});
    }
    return c;
}

/// Everything a subcommand needs, resolved from the config file.
struct Scenario {
    Config cfg;
    std::filesystem::path out;
    std::uint64_t seed = 42;
    double tol_scale = 1.0;
    int grid_override = 0;

    Scenario(const CliOptions& opt) : cfg(Config::parse_file(opt.config_path)) {
        std::string out_dir = !opt.out_override.empty()
                                  ? opt.out_override
                                  : cfg.get_or("scenario", "out", "out");
        out = out_dir;
        std::filesystem::create_directories(out);
        seed = opt.seed_override ? *opt.seed_override
                                 : std::uint64_t(cfg.get_int_or("scenario", "seed", 42));
        tol_scale = opt.tol_scale;
        if (opt.grid_override) grid_override = *opt.grid_override;
    }

    EquationDef equation() const {
        EquationOptions eopt;
        eopt.w = cfg.get_or("equation", "w", "constant(1)");
        eopt.h = cfg.get_or("equation", "h", "euclidean");
        eopt.c_q = cfg.get_double_or("equation", "c", 1.0);
        eopt.c_r = cfg.get_double_or("equation", "c", 4.0);
        return make_equation(cfg.get("equation", "id"), eopt);
    }

    CanonicalFamily family() const { return make_family(cfg.get("family", "id")); }

    double member_t() const { return cfg.get_double_or("family", "member_t", 1.0); }

    int grid_n() const {
        if (grid_override > 0) return grid_override;
        return cfg.get_int_or("domain", "grid", 129);
    }

    /// Implicit boundary field (positive inside), when the domain names one.
    std::optional<AnalyticJet> boundary_psi() const {
        std::string b = cfg.get_or("domain", "boundary", "candidate-zero");
        if (b == "candidate-zero") return std::nullopt;
        return make_expression(b);
    }

    double box_halfwidth() const {
        if (cfg.has("domain", "box")) return cfg.get_double("domain", "box");
        double pad = cfg.get_double_or("domain", "pad", 0.15);
        std::string b = cfg.get_or("domain", "boundary", "candidate-zero");
        CallableSpec c = parse_callable(b);
        if (c.name == "disk") return (1.0 + pad) * (c.params.empty() ? 1.0 : c.params[0]);
        if (c.name == "ellipse")
            return (1.0 + pad) * std::max(c.params.size() > 0 ? c.params[0] : 2.0,
                                          c.params.size() > 1 ? c.params[1] : 4.0);
        throw ConfigError(cfg.origin() +
                          ": [domain] needs an explicit 'box' for boundary = " + b);
    }

    GridSpec grid() const {
        double B = box_halfwidth();
        return GridSpec::square(-B, B, grid_n());
    }

    bool candidate_is_closed_form() const {
        return cfg.get_or("candidate", "kind", "expression") == "expression";
    }

    ScalarField candidate() const {
        std::string kind = cfg.get_or("candidate", "kind", "expression");
        if (kind == "expression")
            return ScalarField::sample(make_expression(cfg.get("candidate", "expr")), grid());
        if (kind == "grid") return load_field(cfg.get("candidate", "file"));
        if (kind == "solve") return solve_candidate().solution;
        throw ConfigError(cfg.origin() + ": unknown candidate kind '" + kind + "'");
    }

    SolveResult solve_candidate() const {
        DirichletProblem prob;
        prob.eq = equation();
        std::string cont = cfg.get_or("solver", "continuation", "");
        if (!cont.empty()) {
            EquationOptions eopt;
            prob.continuation_from = make_equation(cont, eopt);
            prob.controls.continuation_steps = cfg.get_int_or("solver", "steps", 4);
        }
        // the solve region may be wider than the audit curve (collar setups)
        if (cfg.has("solver", "domain")) {
            prob.domain_psi = make_expression(cfg.get("solver", "domain"));
        } else {
            auto psi = boundary_psi();
            if (!psi)
                throw ConfigError(cfg.origin() + ": solve needs an implicit [domain] boundary");
            prob.domain_psi = *psi;
        }
        prob.grid = grid();
        prob.controls.tolerance = cfg.get_double_or("solver", "tolerance", 1e-10);
        prob.controls.max_iters = cfg.get_int_or("solver", "max_iters", 40);

        std::string bd = cfg.get_or("solver", "boundary", "constant(0)");
        CallableSpec bc = parse_callable(bd);
        if (bc.name == "constant") {
            double v = bc.params.empty() ? 0.0 : bc.params[0];
            prob.boundary_data = [v](Vec2) { return v; };
        } else if (bc.name == "trace") {
            AnalyticJet tr = make_expression(cfg.get("solver", "trace"));
            prob.boundary_data = [tr](Vec2 p) { return tr(p).z; };
        } else {
            throw ConfigError(cfg.origin() + ": unknown solver boundary '" + bd + "'");
        }

        std::function<double(Vec2)> guess;
        if (cfg.has("solver", "initial")) {
            AnalyticJet g0 = make_expression(cfg.get("solver", "initial"));
            guess = [g0](Vec2 p) { return g0(p).z; };
        }
        return solve_dirichlet(prob, guess);
    }

    /// The audit curve: an explicit implicit-boundary, or the candidate's
    /// own zero level set.
    LevelCurve curve_for(const ScalarField& cand) const {
        auto psi = boundary_psi();
        if (psi) return trace_zero_level(ScalarField::sample(*psi, grid()));
        return trace_zero_level(cand);
    }

    NeumannData neumann(const CanonicalFamily& fam) const {
        std::string src = cfg.get_or("neumann", "source", "extract");
        CallableSpec c = parse_callable(src);
        if (c.name == "constant") return NeumannData::constant(c.params.empty() ? 0.5 : c.params[0]);
        if (c.name == "extract") {
            double t = member_t();
            auto member = [&fam, t](Vec2 v) { return fam.member(v, t); };
            ScalarField mf = ScalarField::sample(member, grid());
            return extract_neumann(mf).g;
        }
        throw ConfigError(cfg.origin() + ": unknown neumann source '" + src + "'");
    }

    CheckTolerances tolerances(bool closed_form, double h) const {
        CheckTolerances tol = CheckTolerances::for_input(closed_form, h);
        tol.pde = tol_scale * cfg.get_double_or("tolerances", "pde", tol.pde);
        tol.dirichlet = tol_scale * cfg.get_double_or("tolerances", "dirichlet", tol.dirichlet);
        tol.neumann = tol_scale * cfg.get_double_or("tolerances", "neumann", tol.neumann);
        tol.canonicality =
            tol_scale * cfg.get_double_or("tolerances", "canonicality", tol.canonicality);
        return tol;
    }

    UmbilicThresholds umbilic_thresholds(bool closed_form, double h) const {
        UmbilicThresholds thr;
        thr.tau = closed_form ? 1e-4 : std::max(1e-3, 10.0 * h * h);
        thr.tau = cfg.get_double_or("tolerances", "tau", thr.tau) * tol_scale;
        return thr;
    }

    double tangency_threshold() const {
        return tol_scale * cfg.get_double_or("tolerances", "tangency", 1e-3);
    }
};

inline IndexReport run_audit_pipeline(const Scenario& sc, const CanonicalFamily& fam,
                                      const ScalarField& cand, const LevelCurve& curve,
                                      bool closed_form, Json* artifacts = nullptr) {
    const double h = cand.grid.h;
    UmbilicThresholds thr = sc.umbilic_thresholds(closed_form, h);

    auto region = [&curve](Vec2 p) { return curve.encloses(p); };
    ShapeTensorField stf = shape_tensor(cand, fam, region);
    UmbilicSet umb = detect_umbilics(stf, thr, &curve);

    if (umb.identically_canonical) {
        IndexReport rep;
        rep.not_applicable_reason =
            "identically canonical region (re-check via the canonicality score)";
        return rep;
    }

    auto z1s = eigenline_sampler(stf, 0);
    auto z2s = eigenline_sampler(stf, 1);
    auto us = null_line_sampler(stf, 0);

    PhAuditInput audit;
    audit.tangency_threshold = sc.tangency_threshold();
    for (const Umbilic& u : umb.points) {
        if (!u.boundary) {
            double r = select_loop_radius(stf, u.position, thr);
            LineIndexResult li = line_index(us, circle_loop(u.position, r, 256));
            // doubled-radius cross-check: homotopic loops must agree
            std::optional<LineIndexResult> li2;
            try {
                li2 = line_index(us, circle_loop(u.position, 2.0 * r, 256));
            } catch (const InsufficientSamplingError&) {
                // the doubled loop may leave the region; the base loop stands
            }
            if (li2 && li.snap_ok && li2->snap_ok && li.snapped != li2->snapped)
                throw InsufficientSamplingError("winding disagrees between homotopic loops");
            SingularityRecord rec;
            rec.position = u.position;
            rec.index = li.snapped;
            rec.degree_estimate = int(std::lround(2.0 - 2.0 * li.snapped));
            audit.interior.push_back(rec);
        } else {
            double r = std::max(4.0 * h, thr.isolation_radius_factor * h);
            LineIndexResult li = boundary_half_loop_index(us, curve, u.position, r);
            SingularityRecord rec;
            rec.position = u.position;
            rec.index = li.snapped;
            rec.degree_estimate = int(std::lround(2.0 - 4.0 * li.snapped));
            audit.boundary.push_back(rec);
        }
    }

    double offset = closed_form ? 0.0 : 2.0 * h;
    TangencyReport tang = boundary_tangency(z1s, z2s, curve, offset);
    if (!tang.umbilic_boundary) audit.tangency_max = tang.max_deviation;

    IndexReport rep = ph_audit(audit);
    if (tang.umbilic_boundary)
        rep.not_applicable_reason = "umbilic boundary: eigenlines undefined along the curve";

    if (artifacts) {
        auto [z1, z2] = eigenline_fields(stf, thr.tau);
        auto [uf, vf] = null_line_fields(stf);
        save_line_field((sc.out / "z1.csv").string(), z1);
        save_line_field((sc.out / "z2.csv").string(), z2);
        save_line_field((sc.out / "u.csv").string(), uf);
        save_line_field((sc.out / "v.csv").string(), vf);
        (*artifacts)["lineFields"] = Json{"z1.csv", "z2.csv", "u.csv", "v.csv"};
        (*artifacts)["tangentField"] = tang.tangent_field;
    }
    return rep;
}

} // namespace detail

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

inline int run_verify_family(const detail::Scenario& sc) {
    CanonicalFamily fam = sc.family();
    int budget = sc.cfg.get_int_or("family", "budget", 200);
    PropertyStarReport rep = verify_property_star(fam, budget, sc.seed);
    write_json(sc.out / "family_report.json", to_json(rep));
    return rep.pass ? 0 : 1;
}

inline int run_extract_neumann(const detail::Scenario& sc) {
    CanonicalFamily fam = sc.family();
    double t = sc.member_t();
    auto member = [&fam, t](Vec2 v) { return fam.member(v, t); };
    ScalarField mf = ScalarField::sample(member, sc.grid());
    NeumannExtraction ex = extract_neumann(mf, {}, fam.id);
    std::ostringstream neumann_csv, curve_csv;
    ex.g.write_csv(neumann_csv);
    detail::write_curve_csv(curve_csv, ex.curve);
    atomic_write_file(sc.out / "neumann.csv", neumann_csv.str());
    atomic_write_file(sc.out / "curve.csv", curve_csv.str());
    return 0;
}

inline int run_check_solution(const detail::Scenario& sc) {
    EquationDef eq = sc.equation();
    CanonicalFamily fam = sc.family();
    ScalarField cand = sc.candidate();
    LevelCurve curve = sc.curve_for(cand);
    NeumannData g = sc.neumann(fam);
    bool closed = cand.has_closed_form();
    CheckTolerances tol = sc.tolerances(closed, cand.grid.h);
    SolutionReport rep = check_solution(cand, curve, eq, fam, g, tol);

    Json j = to_json(rep);
    if (rep.verdict != "canonical") {
        try {
            IndexReport audit = detail::run_audit_pipeline(sc, fam, cand, curve, closed);
            j["indexAudit"] = to_json(audit);
        } catch (const Error& e) {
            j["indexAudit"] = Json{{"error", e.what()}};
        }
    } else {
        j["indexAudit"] = nullptr;
    }
    write_json(sc.out / "solution_report.json", j);
    return rep.verdict == "canonical" ? 0 : 1;
}

inline int run_index_audit(const detail::Scenario& sc) {
    CanonicalFamily fam = sc.family();
    ScalarField cand = sc.candidate();
    LevelCurve curve = sc.curve_for(cand);
    bool closed = cand.has_closed_form();

    Json artifacts;
    IndexReport rep = detail::run_audit_pipeline(sc, fam, cand, curve, closed, &artifacts);
    Json j = to_json(rep);
    j["artifacts"] = artifacts;

    std::ostringstream curve_csv;
    detail::write_curve_csv(curve_csv, curve);
    atomic_write_file(sc.out / "curve.csv", curve_csv.str());
    write_json(sc.out / "index_report.json", j);
    return 0;
}

inline int run_solve(const detail::Scenario& sc) {
    Json log;
    try {
        SolveResult res = sc.solve_candidate();
        std::ostringstream os;
        write_field_csv(os, res.solution);
        atomic_write_file(sc.out / "solution.csv", os.str());
        log["residuals"] = res.residual_history;
        log["stepOffsets"] = res.step_offsets;
        log["newtonIterations"] = res.newton_iterations;
        log["converged"] = true;
        write_json(sc.out / "convergence.json", log);
        return 0;
    } catch (const NoConvergenceError& e) {
        log["converged"] = false;
        log["error"] = e.what();
        write_json(sc.out / "convergence.json", log);
        return 1;
    } catch (const InadmissibleIterateError& e) {
        log["converged"] = false;
        log["error"] = e.what();
        write_json(sc.out / "convergence.json", log);
        return 1;
    }
}

inline int run_render(const detail::Scenario& sc) {
    std::string field_path = sc.cfg.get_or("render", "field", (sc.out / "z1.csv").string());
    LineField lf = load_line_field(field_path);

    std::optional<LevelCurve> curve;
    if (sc.cfg.has("render", "curve"))
        curve = detail::read_curve_points_csv(sc.cfg.get("render", "curve"));

    std::vector<SingularityRecord> sing;
    if (sc.cfg.has("render", "report")) {
        std::ifstream is(sc.cfg.get("render", "report"));
        if (!is) throw ParseError("cannot open '" + sc.cfg.get("render", "report") + "'");
        Json j = Json::parse(is, nullptr, true);
        for (auto part : {"interior", "boundary"})
            if (j.contains(part))
                for (auto& e : j[part]) {
                    SingularityRecord r;
                    r.position = {e["x"].get<double>(), e["y"].get<double>()};
                    r.index = e["index"].get<double>();
                    sing.push_back(r);
                }
    }
    std::string svg =
        render_svg(lf, curve ? &*curve : nullptr, sing.empty() ? nullptr : &sing);
    atomic_write_file(sc.out / "field.svg", svg);
    return 0;
}

/// Dispatch a subcommand. Exit codes: 0 pass/completed, 1 check failure
/// (reports still written), 2 input error.
inline int run(const std::string& subcommand, const CliOptions& opt) {
    try {
        detail::Scenario sc(opt);
        if (subcommand == "verify-family") return run_verify_family(sc);
        if (subcommand == "extract-neumann") return run_extract_neumann(sc);
        if (subcommand == "check-solution") return run_check_solution(sc);
        if (subcommand == "index-audit") return run_index_audit(sc);
        if (subcommand == "solve") return run_solve(sc);
        if (subcommand == "render") return run_render(sc);
        std::cerr << "unknown subcommand '" << subcommand << "'\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownIdError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace odet::cli
