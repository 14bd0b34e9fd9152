#ifndef H2MUL_H2MATRIX_HPP
#define H2MUL_H2MATRIX_HPP

#include "h2mul/geometry.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace h2mul {

//
// Nested cluster basis: leaf matrices on leaf clusters, transfer matrices on
// every non-root cluster. transfer[c] maps the parent's coefficients to the
// child's, V_parent|_child = V_child * transfer[c], so it is rank(c) x rank(parent).
//
struct ClusterBasis {
    std::shared_ptr<const ClusterTree> tree;
    std::vector<Matrix> leaf;
    std::vector<Matrix> transfer;
    std::vector<Index> rank;

    ClusterBasis() = default;
    explicit ClusterBasis(std::shared_ptr<const ClusterTree> cluster_tree);

    const ClusterTree& clusters() const { return *tree; }
    Index max_rank() const;
};

/// Dense |t| x rank(t) matrix V_t reconstructed through the transfer matrices.
Matrix expand_basis(const ClusterBasis& basis, int cluster);

/// V_t^T * X for X with |t| rows, without forming V_t.
Matrix project_onto_basis(const ClusterBasis& basis, int cluster, const Matrix& X);

struct H2Matrix {
    std::shared_ptr<const BlockTree> structure;
    std::shared_ptr<const ClusterBasis> row_basis;
    std::shared_ptr<const ClusterBasis> col_basis;
    std::vector<Matrix> coupling;   // per admissible leaf, indexed by block id
    std::vector<Matrix> nearfield;  // per inadmissible leaf, indexed by block id

    const BlockTree& blocks() const { return *structure; }
    const ClusterTree& row_tree() const { return *structure->row_tree; }
    const ClusterTree& col_tree() const { return *structure->col_tree; }
    Index rows() const { return row_tree().dimension(); }
    Index cols() const { return col_tree().dimension(); }
};

// All vectors below are indexed in cluster-tree order.

Vector h2_matvec(const H2Matrix& G, const Vector& x);
Vector h2_matvec_adjoint(const H2Matrix& G, const Vector& x);

/// G|_{t x s} * X (or G|_{t x s}^T * X) for the block `block` = (t, s).
Matrix apply_block(const H2Matrix& G, int block, const Matrix& X, bool adjoint = false);

/// True if both trees have the same clusters with the same index ranges.
bool same_cluster_structure(const ClusterTree& a, const ClusterTree& b);

/// P_s = W_s^T V_s for all clusters s of the shared tree.
struct BasisProductMap {
    std::vector<Matrix> product;
    const Matrix& operator[](int cluster) const { return product[cluster]; }
};

BasisProductMap basis_products(const ClusterBasis& colbasis_x, const ClusterBasis& rowbasis_y);

inline constexpr Index default_dense_limit = 4096;

Matrix to_dense(const H2Matrix& G, Index limit = default_dense_limit);

/// Dense restriction G|_{t x s} of a single block.
Matrix block_to_dense(const H2Matrix& G, int block);

//
// Binary serialization (little-endian; see docs/h2matrix-format.md).
//
void save_h2(std::ostream& out, const H2Matrix& G);
H2Matrix load_h2(std::istream& in);
void save_h2(const std::string& path, const H2Matrix& G);
H2Matrix load_h2(const std::string& path);

}  // namespace h2mul

#endif
