#include <CLI11.hpp>

#include <optional>
#include <string>

#include "odet/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"overdetermined elliptic problem toolkit"};
    app.require_subcommand(1);

    odet::cli::CliOptions opt;
    std::uint64_t seed = 0;
    int grid = 0;
    bool seed_set = false, grid_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "scenario config file")->required();
        sub->add_option("--out", opt.out_override, "output directory override");
        sub->add_option("--seed", seed, "random seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--tol-scale", opt.tol_scale, "multiply all tolerances");
        sub->add_option("--grid", grid, "grid nodes per side override")
            ->each([&](const std::string&) { grid_set = true; });
    };

    const char* subs[] = {"verify-family", "extract-neumann", "check-solution",
                          "index-audit",   "solve",           "render"};
    const char* desc[] = {"audit a canonical family's defining properties",
                          "read natural Neumann data off a family member",
                          "audit a candidate (u, Omega, g) triple",
                          "shape-tensor line fields, indices and the index-sum audit",
                          "Newton finite-difference Dirichlet solve",
                          "render a line-field dump as SVG"};
    for (int k = 0; k < 6; ++k) add_common(app.add_subcommand(subs[k], desc[k]));

    CLI11_PARSE(app, argc, argv);

    if (seed_set) opt.seed_override = seed;
    if (grid_set) opt.grid_override = grid;
    return odet::cli::run(app.get_subcommands().front()->get_name(), opt);
}
