#ifndef H2MUL_BENCH_HPP
#define H2MUL_BENCH_HPP

#include "h2mul/compression.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace h2mul {

struct BenchConfig {
    std::vector<int> levels{3, 4, 5, 6};  // sphere refinement levels, n = 8 * 4^level
    Index leaf_size = 16;
    int order = 3;
    double eta = 1.0;
    double eps = 1e-4;
    double theta = 0.25;
    int power_steps = 10;
    std::uint64_t seed = 42;
    std::string out = "results.csv";
    int threads = 1;
    bool dense_check = false;  // compare against the dense square as well (n <= default_dense_limit)

    void validate() const;
};

struct BenchRow {
    Index n = 0;
    double row_s = 0.0;  // product representation, coarsening and row basis
    double col_s = 0.0;  // column basis and coupling matrices
    double mem_mb = 0.0;
    double rel_error = 0.0;  // power-iteration estimate of ||G^2 - Z||_2 / ||G^2||_2

    // diagnostics, not written to the CSV
    Index max_row_rank = 0;
    Index max_col_rank = 0;
    double dense_error = -1.0;  // exact spectral error when dense_check is set
};

/// Phases of one squaring, timed separately.
struct SquareResult {
    H2Matrix Z;
    double row_s = 0.0;
    double col_s = 0.0;
};

SquareResult timed_multiply(const H2Matrix& X, const H2Matrix& Y, std::shared_ptr<const BlockTree> target,
                            const TruncationControl& ctl, const CoarsenOptions& options = {});

/// Power-iteration estimate of ||X Y - Z||_2 / ||X Y||_2 from matrix-vector products only.
double estimate_product_error(const H2Matrix& X, const H2Matrix& Y, const H2Matrix& Z, int steps,
                              std::uint64_t seed);

/// 8 bytes per stored real in leaf, transfer, coupling and nearfield matrices; trees are not counted.
std::size_t memory_footprint(const H2Matrix& G);

BenchRow run_level(const BenchConfig& config, int level);
std::vector<BenchRow> run_benchmark(const BenchConfig& config, std::ostream* log = nullptr);

void emit_csv(const std::vector<BenchRow>& rows, std::ostream& out);
void emit_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace h2mul

#endif
