#ifndef H2MUL_COMPRESSION_HPP
#define H2MUL_COMPRESSION_HPP

#include "h2mul/product.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace h2mul {

/// A * B^T with A of size rows x rank and B of size cols x rank.
struct LowRankBlock {
    Matrix A;
    Matrix B;

    Index rank() const { return A.cols(); }
    Index rows() const { return A.rows(); }
    Index cols() const { return B.rows(); }
    Matrix dense() const { return A * B.transpose(); }
};

struct TruncationControl {
    double target_eps = 1e-4;  // block-relative tolerance of the final result
    double theta = 0.25;       // level damping of the recompression weights
    double sigma = 2.0;        // maximal number of children per cluster
    int power_iterations = 10;
    std::uint64_t seed = 42;

    /// Pairwise tolerance for merging an m x n arrangement.
    double coarsen_eps(Index m, Index n) const { return target_eps / (2.0 * m * n); }
    double recompress_eps() const;
    void validate() const;
};

//
// Dense helpers
//

/// Lower bound for the spectral norm from power iteration on A^T A with a seeded random start.
double spectral_norm_lower_bound(const std::function<Vector(const Vector&)>& apply,
                                 const std::function<Vector(const Vector&)>& apply_adjoint,
                                 Index dim, int iterations = 10, std::uint64_t seed = 42);

double spectral_norm_lower_bound(const Matrix& A, int iterations = 10, std::uint64_t seed = 42);

/// Best approximation of A B^T keeping all singular values above eps * sigma_1.
LowRankBlock truncate(const Matrix& A, const Matrix& B, double eps);
LowRankBlock truncate(const LowRankBlock& block, double eps);

/// Merges an m x n arrangement of low-rank blocks: every row first, then the merged rows.
LowRankBlock agglomerate(const std::vector<std::vector<LowRankBlock>>& blocks, double eps);

//
// Blockwise low-rank matrix over a block tree: factored admissible leaves,
// dense inadmissible leaves.
//
struct BlockwiseLowRank {
    std::shared_ptr<const BlockTree> structure;
    std::vector<LowRankBlock> lowrank;  // indexed by block id
    std::vector<Matrix> dense;          // indexed by block id

    const BlockTree& blocks() const { return *structure; }
    Matrix to_dense(Index limit = default_dense_limit) const;
    Index stored_reals() const;
};

struct CoarsenOptions {
    int threads = 1;  // target leaves coarsened concurrently when > 1
};

/// Coarsens a materialized exact product onto `target`.
BlockwiseLowRank coarsen(const ProductEngine& engine, const ExactProduct& product,
                         std::shared_ptr<const BlockTree> target, double eps);

/// Same result without storing the exact product: accumulators are split on the fly.
BlockwiseLowRank coarsen(const ProductEngine& engine, std::shared_ptr<const BlockTree> target, double eps,
                         const CoarsenOptions& options = {});

/// Semi-uniform accumulator of a resolved block as one factorization (no truncation).
LowRankBlock to_lowrank(const ProductEngine& engine, const Accumulator& acc);

//
// Adaptive recompression
//
struct LocalError {
    int cluster;
    int block;
    double frobenius2;  // squared local projection error
    double spectral2;
};

struct RecompressionReport {
    std::vector<double> row_weight;  // ||G^c_b||_2 estimate per block (0 for non-admissible)
    std::vector<double> col_weight;
    std::vector<LocalError> row_errors;
    std::vector<LocalError> col_errors;
};

/// Isometric nested row basis with block-relative error eps * ||G|_b||_2 per admissible block.
std::shared_ptr<ClusterBasis> adaptive_row_basis(const BlockwiseLowRank& Z, const TruncationControl& ctl,
                                                 RecompressionReport* report = nullptr);
std::shared_ptr<ClusterBasis> adaptive_col_basis(const BlockwiseLowRank& Z, const TruncationControl& ctl,
                                                 RecompressionReport* report = nullptr);

/// Couplings V_t^T A (W_r^T B)^T and copied nearfield blocks.
H2Matrix project_onto_bases(const BlockwiseLowRank& Z, std::shared_ptr<const ClusterBasis> rows,
                            std::shared_ptr<const ClusterBasis> cols);

H2Matrix recompress(const BlockwiseLowRank& Z, const TruncationControl& ctl,
                    RecompressionReport* report = nullptr);

/// X * Y approximated on `target` with block-relative error below 2 * ctl.target_eps.
/// A quarter of the tolerance goes to coarsening, the rest to recompression.
H2Matrix multiply(const H2Matrix& X, const H2Matrix& Y, std::shared_ptr<const BlockTree> target,
                  const TruncationControl& ctl, const CoarsenOptions& options = {});

}  // namespace h2mul

#endif
