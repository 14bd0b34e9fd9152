#include "h2mul/bench.hpp"

#include "h2mul/interpolation.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace h2mul {

void BenchConfig::validate() const {
    if (levels.empty()) throw std::invalid_argument("bench: no refinement levels given");
    for (int l : levels)
        if (l < 0 || l > 12) throw std::invalid_argument("bench: refinement level out of range");
    if (leaf_size < 1 || order < 1 || power_steps < 1 || threads < 1)
        throw std::invalid_argument("bench: sizes and counts must be positive");
    if (!(eta > 0.0) || !(theta > 0.0)) throw std::invalid_argument("bench: eta and theta must be positive");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("bench: eps must lie in (0, 1)");
    if (dense_check)
        for (int l : levels)
            if (8 * (Index{1} << (2 * l)) > default_dense_limit)
                throw std::invalid_argument("bench: dense check requested above the dense limit");
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

SquareResult timed_multiply(const H2Matrix& X, const H2Matrix& Y, std::shared_ptr<const BlockTree> target,
                            const TruncationControl& ctl, const CoarsenOptions& options) {
    ctl.validate();
    TruncationControl rest = ctl;
    rest.target_eps = 0.75 * ctl.target_eps;

    SquareResult out;
    auto start = std::chrono::steady_clock::now();
    std::shared_ptr<ClusterBasis> rows;
    BlockwiseLowRank Z;
    {
        const ProductEngine engine(X, Y);
        Z = coarsen(engine, std::move(target), 0.25 * ctl.target_eps, options);
        rows = adaptive_row_basis(Z, rest);
    }
    out.row_s = seconds_since(start);

    start = std::chrono::steady_clock::now();
    auto cols = adaptive_col_basis(Z, rest);
    out.Z = project_onto_bases(Z, std::move(rows), std::move(cols));
    out.col_s = seconds_since(start);
    return out;
}

double estimate_product_error(const H2Matrix& X, const H2Matrix& Y, const H2Matrix& Z, int steps,
                              std::uint64_t seed) {
    const auto diff = [&](const Vector& x) -> Vector { return h2_matvec(X, h2_matvec(Y, x)) - h2_matvec(Z, x); };
    const auto diff_adj = [&](const Vector& y) -> Vector {
        return h2_matvec_adjoint(Y, h2_matvec_adjoint(X, y)) - h2_matvec_adjoint(Z, y);
    };
    const auto prod = [&](const Vector& x) -> Vector { return h2_matvec(X, h2_matvec(Y, x)); };
    const auto prod_adj = [&](const Vector& y) -> Vector { return h2_matvec_adjoint(Y, h2_matvec_adjoint(X, y)); };
    const double num = spectral_norm_lower_bound(diff, diff_adj, Y.cols(), steps, seed);
    const double den = spectral_norm_lower_bound(prod, prod_adj, Y.cols(), steps, seed);
    return den == 0.0 ? num : num / den;
}

std::size_t memory_footprint(const H2Matrix& G) {
    std::size_t reals = 0;
    auto basis = [&](const ClusterBasis* b) {
        if (!b) return;
        for (const auto& m : b->leaf) reals += m.size();
        for (const auto& m : b->transfer) reals += m.size();
    };
    basis(G.row_basis.get());
    if (G.col_basis != G.row_basis) basis(G.col_basis.get());
    for (const auto& m : G.coupling) reals += m.size();
    for (const auto& m : G.nearfield) reals += m.size();
    return 8 * reals;
}

BenchRow run_level(const BenchConfig& config, int level) {
    const auto mesh = build_sphere_mesh(level);
    auto tree = std::make_shared<const ClusterTree>(build_cluster_tree(mesh, config.leaf_size));
    auto blocks = build_block_tree(tree, tree, config.eta);
    const H2Matrix G = assemble_h2(mesh, blocks, single_layer_kernel, config.order);

    TruncationControl ctl;
    ctl.target_eps = config.eps;
    ctl.theta = config.theta;
    ctl.power_iterations = config.power_steps;
    ctl.seed = config.seed;
    const auto sq = timed_multiply(G, G, blocks, ctl, CoarsenOptions{config.threads});

    BenchRow row;
    row.n = tree->dimension();
    row.row_s = sq.row_s;
    row.col_s = sq.col_s;
    row.mem_mb = memory_footprint(sq.Z) / (1024.0 * 1024.0);
    row.rel_error = estimate_product_error(G, G, sq.Z, config.power_steps, config.seed);
    row.max_row_rank = sq.Z.row_basis->max_rank();
    row.max_col_rank = sq.Z.col_basis->max_rank();
    if (config.dense_check) {
        const Matrix D = to_dense(G);
        const Matrix P = D * D;
        Eigen::BDCSVD<Matrix> num(P - to_dense(sq.Z)), den(P);
        row.dense_error = num.singularValues()(0) / den.singularValues()(0);
    }
    return row;
}

std::vector<BenchRow> run_benchmark(const BenchConfig& config, std::ostream* log) {
    config.validate();
    std::vector<BenchRow> rows;
    for (int level : config.levels) {
        rows.push_back(run_level(config, level));
        if (log) {
            const auto& r = rows.back();
            *log << "n=" << r.n << " row_s=" << r.row_s << " col_s=" << r.col_s << " mem_mb=" << r.mem_mb
                 << " rel_error=" << r.rel_error << " max_rank=" << r.max_row_rank << "/" << r.max_col_rank;
            if (r.dense_error >= 0.0) *log << " dense_error=" << r.dense_error;
            *log << std::endl;
        }
    }
    return rows;
}

void emit_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
    out << "n,row_s,col_s,mem_mb,rel_error\n";
    out << std::setprecision(6);
    for (const auto& r : rows)
        out << r.n << ',' << r.row_s << ',' << r.col_s << ',' << r.mem_mb << ',' << r.rel_error << '\n';
}

void emit_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    emit_csv(rows, out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace h2mul
