// Squares the single-layer matrix on refined spheres and reports timings,
// memory and the estimated error as CSV.

#include "h2mul/bench.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    h2mul::BenchConfig cfg;
    CLI::App app{"H2-matrix squaring benchmark"};
    app.add_option("--levels", cfg.levels, "sphere refinement levels (n = 8 * 4^level)")->delimiter(',');
    app.add_option("--eps", cfg.eps, "block-relative tolerance");
    app.add_option("--eta", cfg.eta, "admissibility parameter");
    app.add_option("--order", cfg.order, "interpolation order per axis");
    app.add_option("--leaf-size", cfg.leaf_size, "maximal leaf cluster size");
    app.add_option("--theta", cfg.theta, "level damping of the recompression weights");
    app.add_option("--seed", cfg.seed, "seed of the power iteration");
    app.add_option("--power-steps", cfg.power_steps, "power iteration steps for the error estimate");
    app.add_option("--threads", cfg.threads, "coarsen target blocks concurrently");
    app.add_flag("--dense-check", cfg.dense_check, "also compare against the dense square (small n only)");
    app.add_option("--out", cfg.out, "CSV output path");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "no progress output");
    CLI11_PARSE(app, argc, argv);

    try {
        cfg.validate();
        if (cfg.threads > 1)
            std::cerr << "note: " << cfg.threads
                      << " threads requested; timings are wall-clock and not comparable with single-threaded runs\n";
        const auto rows = h2mul::run_benchmark(cfg, quiet ? nullptr : &std::cerr);
        h2mul::emit_csv(rows, cfg.out);

        int status = 0;
        for (const auto& r : rows)
            if (!(r.rel_error <= 2.0 * cfg.eps)) {
                std::cerr << "error: n=" << r.n << " estimated error " << r.rel_error << " exceeds 2 * eps\n";
                status = 2;
            }
        return status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
