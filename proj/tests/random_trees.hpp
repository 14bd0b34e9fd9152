#ifndef H2MUL_TESTS_RANDOM_TREES_HPP
#define H2MUL_TESTS_RANDOM_TREES_HPP

// Random cluster bases and basis trees together with a literal evaluation of
// the yield definition, for property tests of the basis-tree algebra.

#include "oracles.hpp"

#include "h2mul/basis_tree.hpp"

#include <random>

namespace oracle {

struct RandomBasis {
    std::shared_ptr<const h2mul::ClusterTree> tree;
    h2mul::ClusterBasis basis;
};

// Cluster tree of `points` random points with depth <= max_depth and ranks in [1, max_rank].
inline RandomBasis random_basis(std::mt19937_64& rng, int max_depth, Index max_rank) {
    std::uniform_int_distribution<Index> npts(8, 64);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<Index> rk(1, max_rank);
    const Index n = npts(rng);
    std::vector<h2mul::Vec3> pts(n);
    for (auto& p : pts) p = h2mul::Vec3(u(rng), u(rng), u(rng));
    // leaf size chosen so that the depth stays bounded
    Index leaf = std::max<Index>(1, n >> max_depth);
    auto tree = std::make_shared<h2mul::ClusterTree>(h2mul::build_cluster_tree(pts, leaf));
    while (tree->depth > max_depth) {
        ++leaf;
        tree = std::make_shared<h2mul::ClusterTree>(h2mul::build_cluster_tree(pts, leaf));
    }
    RandomBasis rb{tree, h2mul::ClusterBasis(tree)};
    for (int c = 0; c < tree->size(); ++c) rb.basis.rank[c] = rk(rng);
    for (int c = 0; c < tree->size(); ++c) {
        const auto& cl = (*tree)[c];
        if (cl.is_leaf()) rb.basis.leaf[c] = random_matrix(cl.size(), rb.basis.rank[c], rng);
        if (cl.parent >= 0) rb.basis.transfer[c] = random_matrix(rb.basis.rank[c], rb.basis.rank[cl.parent], rng);
    }
    return rb;
}

// V_t assembled by the stacking rule, written independently of expand_basis.
inline Matrix stacked_basis(const h2mul::ClusterBasis& basis, int c) {
    const auto& tree = basis.clusters();
    const auto& cl = tree[c];
    if (cl.is_leaf()) return basis.leaf[c];
    Matrix V(cl.size(), basis.rank[c]);
    Index row = 0;
    for (int child : cl.children) {
        const Matrix part = stacked_basis(basis, child) * basis.transfer[child];
        V.middleRows(row, part.rows()) = part;
        row += part.rows();
    }
    return V;
}

// The yield definition evaluated literally.
inline Matrix literal_yield(const h2mul::ClusterBasis& basis, const h2mul::BasisNode* node, int c, Index cols) {
    const auto& tree = basis.clusters();
    const auto& cl = tree[c];
    if (!node) return Matrix::Zero(cl.size(), cols);
    const Index w = node->width;
    const Matrix C = node->C ? *node->C : Matrix::Zero(basis.rank[c], w);
    const Matrix M = node->M ? *node->M : Matrix::Identity(w, w);
    Matrix inner;
    using Kind = h2mul::BasisNode::Kind;
    if (node->kind == Kind::leaf) {
        const Matrix N = node->N ? *node->N : Matrix::Zero(cl.size(), w);
        inner = stacked_basis(basis, c) * C + N;
    } else if (node->kind == Kind::stub) {
        inner = stacked_basis(basis, c) * C;
    } else {
        inner.resize(cl.size(), w);
        for (std::size_t i = 0; i < cl.children.size(); ++i) {
            const int child = cl.children[i];
            inner.middleRows(tree[child].begin - cl.begin, tree[child].size()) =
                stacked_basis(basis, child) * basis.transfer[child] * C +
                literal_yield(basis, node->children[i].get(), child, w);
        }
    }
    return inner * M;
}

inline h2mul::BasisTree random_basis_tree(const h2mul::ClusterBasis& basis, int c, Index cols,
                                          std::mt19937_64& rng, Index max_width, double density = 0.7) {
    std::bernoulli_distribution coin(0.5), keep(density);
    std::uniform_int_distribution<Index> wd(1, max_width);
    const auto& tree = basis.clusters();
    const auto& cl = tree[c];
    auto node = std::make_shared<h2mul::BasisNode>();
    node->cluster = c;
    const bool with_M = coin(rng);
    node->width = with_M ? wd(rng) : cols;
    if (with_M) node->M = random_matrix(node->width, cols, rng);
    if (keep(rng)) node->C = random_matrix(basis.rank[c], node->width, rng);
    using Kind = h2mul::BasisNode::Kind;
    if (cl.is_leaf()) {
        node->kind = Kind::leaf;
        if (keep(rng)) node->N = random_matrix(cl.size(), node->width, rng);
    } else if (coin(rng)) {
        node->kind = Kind::stub;
    } else {
        node->kind = Kind::branch;
        for (int child : cl.children)
            node->children.push_back(keep(rng) ? random_basis_tree(basis, child, node->width, rng, max_width, density)
                                               : nullptr);
    }
    return node;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace oracle

#endif
