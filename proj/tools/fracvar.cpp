#include "fracvar/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"fracvar: fractional variational problems on a uniform grid"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a problem file and write results to an output directory");
    std::string problem, out_dir;
    std::size_t n_cells = 0;
    bool quiet = false;
    run->add_option("problem", problem, "Problem file (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--n-cells", n_cells, "Override grid.n_cells")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", quiet, "Suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fracvar::cli::kValidation;
    }

    // FRACVAR_SEED is reserved and ignored: every code path is deterministic.

    fracvar::cli::RunOptions opts;
    if (n_cells > 0) opts.n_cells = n_cells;
    opts.quiet = quiet;
    return fracvar::cli::run(problem, out_dir, opts);
}
