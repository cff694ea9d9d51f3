#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "odet/canonical.hpp"
#include "odet/errors.hpp"
#include "odet/index.hpp"
#include "odet/overdetermined.hpp"

namespace odet {

using Json = nlohmann::ordered_json;

/// Write-then-rename so readers never observe a partial artifact.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw ParseError("cannot open '" + tmp.string() + "' for writing");
        os << content;
    }
    std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    atomic_write_file(path, j.dump(2) + "\n");
}

/// "-1/2", "3/2", "2", ... for snapped half-integer indices.
inline std::string format_half_integer(double v) {
    long k = std::lround(2.0 * v);
    if (std::abs(2.0 * v - k) > 1e-9) return format_double(v);
    if (k % 2 == 0) return std::to_string(k / 2);
    return std::to_string(k) + "/2";
}

inline Json to_json(const PropertyStarReport& r) {
    return Json{{"detRange", Json{r.det_min, r.det_max}},
                {"residualMax", r.residual_max},
                {"injectivityFailures", r.injectivity_failures},
                {"uniquenessChecks",
                 Json{{"passed", r.uniqueness_passed}, {"total", r.uniqueness_checks}}},
                {"detSignConsistent", r.det_sign_consistent},
                {"pass", r.pass}};
}

inline Json to_json(const SolutionReport& r) {
    return Json{{"pdeResidualMax", r.pde_residual_max},
                {"dirichletMax", r.dirichlet_max},
                {"neumannMax", r.neumann_max},
                {"canonicalityScore", r.canonicality_score},
                {"verdict", r.verdict}};
}

inline Json to_json(const SingularityRecord& s) {
    return Json{{"x", s.position.x},
                {"y", s.position.y},
                {"index", s.index},
                {"degreeEstimate", s.degree_estimate}};
}

inline Json to_json(const IndexReport& r) {
    Json interior = Json::array();
    for (auto& s : r.interior) interior.push_back(to_json(s));
    Json boundary = Json::array();
    for (auto& s : r.boundary) boundary.push_back(to_json(s));
    Json j{{"interior", interior}, {"boundary", boundary}};
    if (std::isnan(r.tangency_max))
        j["tangencyMax"] = nullptr;
    else
        j["tangencyMax"] = r.tangency_max;
    j["diskSum"] = r.disk_sum;
    j["sphereSum"] = r.sphere_sum;
    j["contradiction"] = r.contradiction;
    j["notApplicableReason"] = r.not_applicable_reason;
    return j;
}

} // namespace odet
