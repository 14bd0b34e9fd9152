#ifndef H2MUL_BASIS_TREE_HPP
#define H2MUL_BASIS_TREE_HPP

#include "h2mul/h2matrix.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace h2mul {

//
// Basis trees represent |t| x q matrices of the form X|_{t x s} V_s S in
// O(k^3) per node. A node over cluster t yields
//
//   leaf:    (V_t C + N) M
//   stub:    V_t C M
//   branch:  [V_{t_i} E_{t_i} C + yield(child_i)]_i M
//
// where V is the cluster basis the tree is attached to. Nodes are immutable
// and shared between trees; every operation returns new nodes along the
// touched path. A null pointer is the zero tree. Absent C or N means zero,
// absent M means identity. C has `width` columns, M maps width -> cols().
//
struct BasisNode;
using BasisTree = std::shared_ptr<const BasisNode>;

struct BasisNode {
    enum class Kind { leaf, stub, branch };

    int cluster = 0;
    Kind kind = Kind::stub;
    Index width = 0;
    std::optional<Matrix> C;
    std::optional<Matrix> N;
    std::optional<Matrix> M;
    std::vector<BasisTree> children;  // branch only, one per cluster child, entries may be null

    Index cols() const { return M ? M->cols() : width; }
};

/// (C, 0, I) on a leaf cluster or (C, I) otherwise.
BasisTree uniform_node(const ClusterTree& tree, int cluster, Matrix C);

/// (0, N, I); the cluster must be a leaf.
BasisTree nearfield_node(const ClusterTree& tree, int cluster, Matrix N);

/// (0, I, null, ..., null): a subdivided zero tree with q columns.
BasisTree zero_branch(const ClusterTree& tree, int cluster, Index q);

Matrix yield(const ClusterBasis& basis, const BasisTree& node);

BasisTree mul(const BasisTree& node, const Matrix& X);
BasisTree finish(const BasisTree& node);
BasisTree split(const ClusterBasis& basis, const BasisTree& node);
BasisTree add(const ClusterBasis& basis, const BasisTree& a, const BasisTree& b);

/// The rows of yield(node) belonging to the child cluster in slot `slot`.
BasisTree restrict_rows(const ClusterBasis& basis, const BasisTree& node, int slot);

/// yield(node) * post + V_t * K, without forming the intermediate trees.
/// Either of post and K may be null.
Matrix yield_into(const ClusterBasis& basis, const BasisNode* node, int cluster, Index cols,
                  const Matrix* post, const Matrix* K);

/// Number of nodes and number of stored reals (C, N and M entries) of a tree.
struct BasisTreeSize {
    Index nodes = 0;
    Index reals = 0;
};
BasisTreeSize basis_tree_size(const BasisTree& node);

}  // namespace h2mul

#endif
