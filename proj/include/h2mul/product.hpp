#ifndef H2MUL_PRODUCT_HPP
#define H2MUL_PRODUCT_HPP

#include "h2mul/basis_tree.hpp"
#include "h2mul/h2matrix.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace h2mul {

//
// An H2 matrix seen either as itself or as its transpose. The transposed view
// swaps row and column trees and bases and transposes coupling and nearfield
// matrices; block ids are shared with the underlying matrix.
//
class OperandView {
public:
    OperandView(const H2Matrix& matrix, bool transposed) : m_(&matrix), transposed_(transposed) {}

    const H2Matrix& matrix() const { return *m_; }
    bool transposed() const { return transposed_; }

    const BlockTree& blocks() const { return m_->blocks(); }
    const ClusterTree& row_tree() const { return transposed_ ? m_->col_tree() : m_->row_tree(); }
    const ClusterTree& col_tree() const { return transposed_ ? m_->row_tree() : m_->col_tree(); }
    const ClusterBasis& row_basis() const { return transposed_ ? *m_->col_basis : *m_->row_basis; }
    const ClusterBasis& col_basis() const { return transposed_ ? *m_->row_basis : *m_->col_basis; }

    int row(int block) const { return transposed_ ? blocks()[block].col : blocks()[block].row; }
    int col(int block) const { return transposed_ ? blocks()[block].row : blocks()[block].col; }
    BlockKind kind(int block) const { return blocks()[block].kind; }

    Matrix coupling(int block) const;
    Matrix nearfield(int block) const;

    /// view|_{row x col} * Z for Z with |col| rows.
    Matrix apply(int block, const Matrix& Z) const;

private:
    const H2Matrix* m_;
    bool transposed_;
};

//
// Adds view|_{t x s} * U_s * S to a basis tree over t, where U is the row
// basis of the right-hand factor (transfers `inner`) and P[s] = W_s^T U_s with
// W the column basis of the view (`transpose_P` reads the map transposed).
//
struct ProductSide {
    OperandView view;
    const ClusterBasis* inner;
    const BasisProductMap* P;
    bool transpose_P;
};

BasisTree addproduct(const ProductSide& side, int block, const Matrix& S, BasisTree alpha);

//
// Accumulator for the product block (t, r):
//   yield(alpha) W_{Y,r}^T + V_{X,t} yield(beta)^T + N + sum_{(x,y) in pending} X|_x Y|_y
//
struct Accumulator {
    int row = 0;
    int col = 0;
    BasisTree alpha;
    BasisTree beta;
    std::optional<Matrix> N;
    std::vector<std::pair<int, int>> pending;  // (block of X, block of Y), both subdivided
    bool nearfield = false;                    // some inadmissible product reached this block
};

class ProductEngine {
public:
    ProductEngine(const H2Matrix& X, const H2Matrix& Y);

    const H2Matrix& X() const { return *x_; }
    const H2Matrix& Y() const { return *y_; }
    const BasisProductMap& products() const { return P_; }
    const ClusterTree& row_tree() const { return x_->row_tree(); }
    const ClusterTree& col_tree() const { return y_->col_tree(); }
    const ClusterBasis& row_basis() const { return *x_->row_basis; }
    const ClusterBasis& col_basis() const { return *y_->col_basis; }

    /// Accumulator of the root block holding the whole product.
    Accumulator root() const;

    /// Adds X|_{xblock} * Y|_{yblock}; the blocks must share the middle cluster.
    void accumulate(Accumulator& acc, int xblock, int yblock) const;

    /// Children in block-tree order: chil(t) (or t) times chil(r) (or r).
    std::vector<Accumulator> split(const Accumulator& acc) const;

    /// Resolves pending products of a block whose clusters are both leaves.
    void drain(Accumulator& acc) const;

    /// Dense |t| x |r| matrix of the accumulator; pending products are expanded densely.
    Matrix dense(const Accumulator& acc) const;

    /// The semi-uniform factors yield(alpha) and yield(beta) as dense matrices.
    Matrix alpha_yield(const Accumulator& acc) const;
    Matrix beta_yield(const Accumulator& acc) const;

private:
    ProductSide row_side() const;
    ProductSide col_side() const;

    const H2Matrix* x_;
    const H2Matrix* y_;
    BasisProductMap P_;
};

//
// Structural product tree over triples (t, s, r) and the induced block tree.
//
struct ProductNode {
    int row, middle, col;
    int xblock, yblock;
    int parent;
    int induced;  // block of the induced tree this triple contributes to
    std::vector<int> children;
    bool admissible;  // (t, s) or (s, r) is an admissible leaf
    bool is_leaf() const { return children.empty(); }
};

struct ProductTree {
    std::vector<ProductNode> nodes;
    std::shared_ptr<const BlockTree> induced;  // admissible leaves = L+, inadmissible leaves = L-
};

ProductTree build_product_tree(const BlockTree& xblocks, const BlockTree& yblocks);

struct AdmissibilityReport {
    Index checked = 0;
    Index violations = 0;
    double worst_ratio = 0.0;  // max over checked nodes of eta/(eta+1) dist / max diam
};

/// Checks eta/(eta+1) dist(t, r) < max diam(t, s, r) for every subdivided product node.
AdmissibilityReport check_product_admissibility(const BlockTree& xblocks, const BlockTree& yblocks,
                                        const ProductTree& product);

//
// Exact product with every induced leaf resolved.
//
struct ExactProduct {
    std::shared_ptr<const BlockTree> induced;
    std::vector<Accumulator> leaf;  // indexed by induced block id, set on leaves
};

ExactProduct exact_product(const ProductEngine& engine);
Matrix to_dense(const ProductEngine& engine, const ExactProduct& product, Index limit = default_dense_limit);

}  // namespace h2mul

#endif
