#include "h2mul/basis_tree.hpp"

#include <stdexcept>

namespace h2mul {

namespace {

using Kind = BasisNode::Kind;

std::optional<Matrix> times(const std::optional<Matrix>& A, const std::optional<Matrix>& M) {
    if (!A) return std::nullopt;
    if (!M) return A;
    return Matrix(*A * *M);
}

std::optional<Matrix> sum(std::optional<Matrix> a, const std::optional<Matrix>& b) {
    if (!a) return b;
    if (b) *a += *b;
    return a;
}

void check_cluster(const ClusterTree& tree, int cluster) {
    if (cluster < 0 || cluster >= tree.size()) throw std::out_of_range("basis tree: cluster out of range");
}

}  // namespace

BasisTree uniform_node(const ClusterTree& tree, int cluster, Matrix C) {
    check_cluster(tree, cluster);
    auto node = std::make_shared<BasisNode>();
    node->cluster = cluster;
    node->kind = tree[cluster].is_leaf() ? Kind::leaf : Kind::stub;
    node->width = C.cols();
    node->C = std::move(C);
    return node;
}

BasisTree nearfield_node(const ClusterTree& tree, int cluster, Matrix N) {
    check_cluster(tree, cluster);
    if (!tree[cluster].is_leaf()) throw std::invalid_argument("nearfield node on a non-leaf cluster");
    if (N.rows() != tree[cluster].size()) throw std::invalid_argument("nearfield node: row count mismatch");
    auto node = std::make_shared<BasisNode>();
    node->cluster = cluster;
    node->kind = Kind::leaf;
    node->width = N.cols();
    node->N = std::move(N);
    return node;
}

BasisTree zero_branch(const ClusterTree& tree, int cluster, Index q) {
    check_cluster(tree, cluster);
    if (tree[cluster].is_leaf()) throw std::invalid_argument("zero branch on a leaf cluster");
    auto node = std::make_shared<BasisNode>();
    node->cluster = cluster;
    node->kind = Kind::branch;
    node->width = q;
    node->children.resize(tree[cluster].children.size());
    return node;
}

//
// yield
//

Matrix yield_into(const ClusterBasis& basis, const BasisNode* node, int cluster, Index cols,
                  const Matrix* post, const Matrix* K) {
    const auto& tree = basis.clusters();
    const auto& cl = tree[cluster];

    std::optional<Matrix> total;  // M * post
    if (node && node->M) total = post ? Matrix(*node->M * *post) : *node->M;
    else if (post) total = *post;

    std::optional<Matrix> coef;  // C * total + K
    if (node && node->C) coef = total ? Matrix(*node->C * *total) : *node->C;
    if (K) coef = sum(std::move(coef), *K);

    if (cl.is_leaf()) {
        Matrix out = coef ? Matrix(basis.leaf[cluster] * *coef) : Matrix::Zero(cl.size(), cols);
        if (node && node->N) out.noalias() += total ? Matrix(*node->N * *total) : *node->N;
        return out;
    }

    Matrix out(cl.size(), cols);
    const bool branch = node && node->kind == Kind::branch;
    for (std::size_t i = 0; i < cl.children.size(); ++i) {
        const int child = cl.children[i];
        const auto& cc = tree[child];
        const BasisNode* sub = branch ? node->children[i].get() : nullptr;
        std::optional<Matrix> Kc;
        if (coef) Kc = basis.transfer[child] * *coef;
        out.middleRows(cc.begin - cl.begin, cc.size()) =
            yield_into(basis, sub, child, cols, sub && total ? &*total : nullptr, Kc ? &*Kc : nullptr);
    }
    return out;
}

Matrix yield(const ClusterBasis& basis, const BasisTree& node) {
    if (!node) throw std::invalid_argument("yield of the empty tree needs a cluster and a width");
    return yield_into(basis, node.get(), node->cluster, node->cols(), nullptr, nullptr);
}

//
// transformations
//

BasisTree mul(const BasisTree& node, const Matrix& X) {
    if (!node) return nullptr;
    if (X.rows() != node->cols()) throw std::invalid_argument("mul: dimension mismatch");
    auto out = std::make_shared<BasisNode>(*node);
    out->M = node->M ? Matrix(*node->M * X) : X;
    return out;
}

BasisTree finish(const BasisTree& node) {
    if (!node || !node->M) return node;
    auto out = std::make_shared<BasisNode>();
    out->cluster = node->cluster;
    out->kind = node->kind;
    out->width = node->M->cols();
    out->C = times(node->C, node->M);
    out->N = times(node->N, node->M);
    out->children.reserve(node->children.size());
    for (const auto& child : node->children) out->children.push_back(mul(child, *node->M));
    return out;
}

BasisTree split(const ClusterBasis& basis, const BasisTree& node) {
    if (!node) return nullptr;
    if (node->kind == Kind::branch) return node;
    if (node->kind == Kind::leaf) throw std::invalid_argument("split: leaf clusters cannot be split");

    const auto& tree = basis.clusters();
    auto out = std::make_shared<BasisNode>();
    out->cluster = node->cluster;
    out->kind = Kind::branch;
    out->width = node->cols();
    const auto CM = times(node->C, node->M);
    for (int child : tree[node->cluster].children)
        out->children.push_back(CM ? uniform_node(tree, child, basis.transfer[child] * *CM) : nullptr);
    return out;
}

BasisTree add(const ClusterBasis& basis, const BasisTree& a, const BasisTree& b) {
    if (!a) return b;
    if (!b) return a;
    if (a->cluster != b->cluster) throw std::invalid_argument("add: basis trees over different clusters");
    if (a->cols() != b->cols()) throw std::invalid_argument("add: column counts differ");
    if ((a->kind == Kind::leaf) != (b->kind == Kind::leaf))
        throw std::invalid_argument("add: leaf node combined with a non-leaf node");

    auto out = std::make_shared<BasisNode>();
    out->cluster = a->cluster;
    out->width = a->cols();
    out->C = sum(times(a->C, a->M), times(b->C, b->M));

    if (a->kind == Kind::leaf) {
        out->kind = Kind::leaf;
        out->N = sum(times(a->N, a->M), times(b->N, b->M));
        return out;
    }
    if (a->kind == Kind::stub && b->kind == Kind::stub) {
        out->kind = Kind::stub;
        return out;
    }

    out->kind = Kind::branch;
    const auto m = basis.clusters()[a->cluster].children.size();
    out->children.resize(m);
    auto pushed = [](const BasisNode& n, std::size_t i) {
        return n.M ? mul(n.children[i], *n.M) : n.children[i];
    };
    for (std::size_t i = 0; i < m; ++i) {
        if (a->kind == Kind::branch && b->kind == Kind::branch)
            out->children[i] = add(basis, pushed(*a, i), pushed(*b, i));
        else
            out->children[i] = pushed(a->kind == Kind::branch ? *a : *b, i);
    }
    return out;
}

BasisTree restrict_rows(const ClusterBasis& basis, const BasisTree& node, int slot) {
    if (!node) return nullptr;
    if (node->kind == Kind::leaf) throw std::invalid_argument("restrict_rows: leaf clusters have no children");
    const auto& tree = basis.clusters();
    const int child = tree[node->cluster].children.at(slot);

    const auto CM = times(node->C, node->M);
    std::optional<Matrix> inherited;
    if (CM) inherited = basis.transfer[child] * *CM;

    if (node->kind == Kind::stub) return inherited ? uniform_node(tree, child, std::move(*inherited)) : nullptr;

    const auto& sub = node->children[slot];
    if (!sub) return inherited ? uniform_node(tree, child, std::move(*inherited)) : nullptr;
    BasisTree hat = finish(node->M ? mul(sub, *node->M) : sub);
    if (!inherited) return hat;
    auto out = std::make_shared<BasisNode>(*hat);
    out->C = sum(std::move(inherited), hat->C);
    return out;
}

BasisTreeSize basis_tree_size(const BasisTree& node) {
    BasisTreeSize size;
    if (!node) return size;
    size.nodes = 1;
    if (node->C) size.reals += node->C->size();
    if (node->N) size.reals += node->N->size();
    if (node->M) size.reals += node->M->size();
    for (const auto& child : node->children) {
        const auto s = basis_tree_size(child);
        size.nodes += s.nodes;
        size.reals += s.reals;
    }
    return size;
}

}  // namespace h2mul
