#include "random_trees.hpp"

#include <doctest.h>

using namespace h2mul;
using oracle::literal_yield;
using oracle::random_basis_tree;
using oracle::rel_diff;

namespace {

Matrix Y(const ClusterBasis& basis, const BasisTree& node, int c, Index cols) {
    return yield_into(basis, node.get(), c, cols, nullptr, nullptr);
}

int random_cluster(const ClusterTree& tree, std::mt19937_64& rng, bool non_leaf) {
    std::vector<int> candidates;
    for (int c = 0; c < tree.size(); ++c)
        if (!non_leaf || !tree[c].is_leaf()) candidates.push_back(c);
    return candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
}

}  // namespace

TEST_CASE("trivial basis trees") {
    std::mt19937_64 rng(1);
    const auto rb = oracle::random_basis(rng, 2, 4);
    const auto& tree = *rb.tree;
    const int leaf = tree.size() - 1;
    REQUIRE(tree[leaf].is_leaf());
    const Index k = rb.basis.rank[leaf];

    const auto zero = uniform_node(tree, leaf, Matrix::Zero(k, 3));
    CHECK(yield(rb.basis, zero).norm() == 0.0);
    CHECK(yield(rb.basis, uniform_node(tree, leaf, Matrix::Identity(k, k))) == rb.basis.leaf[leaf]);
    CHECK(yield(rb.basis, mul(zero, Matrix::Zero(3, 2))).cols() == 2);

    const Matrix C = oracle::random_matrix(k, 3, rng);
    const Matrix N = oracle::random_matrix(tree[leaf].size(), 3, rng);
    const Matrix M = oracle::random_matrix(3, 3, rng);
    auto node = std::make_shared<BasisNode>();
    node->cluster = leaf;
    node->kind = BasisNode::Kind::leaf;
    node->width = 3;
    node->C = C;
    node->N = N;
    node->M = M;
    const auto f = finish(node);
    CHECK(!f->M);
    CHECK(rel_diff(*f->C, C * M) == 0.0);
    CHECK(rel_diff(*f->N, N * M) == 0.0);

    CHECK(add(rb.basis, nullptr, nullptr) == nullptr);
    CHECK(add(rb.basis, zero, nullptr) == zero);
    CHECK_THROWS(split(rb.basis, node));
    CHECK_THROWS(restrict_rows(rb.basis, node, 0));
    CHECK_THROWS(nearfield_node(tree, 0, Matrix::Zero(tree[0].size(), 1)));
}

TEST_CASE("yield matches the literal definition") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const auto rb = oracle::random_basis(rng, 4, 8);
        const int c = random_cluster(*rb.tree, rng, false);
        const auto node = random_basis_tree(rb.basis, c, 5, rng, 8);
        CHECK(rel_diff(yield(rb.basis, node), literal_yield(rb.basis, node.get(), c, 5)) < 1e-12);
    }
}

TEST_CASE("mul, finish, split and restrict preserve yields") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        const auto rb = oracle::random_basis(rng, 4, 8);
        const auto& basis = rb.basis;
        const int c = random_cluster(*rb.tree, rng, true);
        const auto node = random_basis_tree(basis, c, 4, rng, 8);
        const Matrix ref = literal_yield(basis, node.get(), c, 4);

        const Matrix X = oracle::random_matrix(4, 3, rng);
        const Matrix Z = oracle::random_matrix(3, 6, rng);
        CHECK(rel_diff(Y(basis, mul(node, X), c, 3), ref * X) < 1e-12);
        CHECK(rel_diff(Y(basis, mul(mul(node, X), Z), c, 6), ref * X * Z) < 1e-12);

        const auto f = finish(node);
        CHECK(!f->M);
        CHECK(rel_diff(literal_yield(basis, f.get(), c, 4), ref) < 1e-12);
        CHECK(finish(f) == f);

        if (node->kind == BasisNode::Kind::stub) {
            const auto s = split(basis, node);
            CHECK(s->kind == BasisNode::Kind::branch);
            CHECK(s->children.size() == (*rb.tree)[c].children.size());
            CHECK(rel_diff(literal_yield(basis, s.get(), c, 4), ref) < 1e-12);
        }

        const auto& cl = (*rb.tree)[c];
        for (std::size_t i = 0; i < cl.children.size(); ++i) {
            const int child = cl.children[i];
            const auto& cc = (*rb.tree)[child];
            const auto part = restrict_rows(basis, node, static_cast<int>(i));
            CHECK(rel_diff(Y(basis, part, child, 4), ref.middleRows(cc.begin - cl.begin, cc.size())) < 1e-12);
        }
    }
}

TEST_CASE("add is additive on yields") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 80; ++trial) {
        const auto rb = oracle::random_basis(rng, 4, 8);
        const auto& basis = rb.basis;
        const int c = random_cluster(*rb.tree, rng, false);
        const auto a = random_basis_tree(basis, c, 3, rng, 8);
        const auto b = random_basis_tree(basis, c, 3, rng, 8);
        const auto d = random_basis_tree(basis, c, 3, rng, 8);
        const Matrix ya = literal_yield(basis, a.get(), c, 3);
        const Matrix yb = literal_yield(basis, b.get(), c, 3);
        const Matrix yd = literal_yield(basis, d.get(), c, 3);
        CHECK(rel_diff(Y(basis, add(basis, a, b), c, 3), ya + yb) < 1e-12);
        CHECK(rel_diff(Y(basis, add(basis, add(basis, a, b), d), c, 3),
                       Y(basis, add(basis, a, add(basis, b, d)), c, 3)) < 1e-12);
    }
}

TEST_CASE("operations share untouched subtrees") {
    std::mt19937_64 rng(5);
    const auto rb = oracle::random_basis(rng, 3, 4);
    const int root = 0;
    auto branch = zero_branch(*rb.tree, root, 2);
    auto child = uniform_node(*rb.tree, 1, oracle::random_matrix(rb.basis.rank[1], 2, rng));
    auto node = std::make_shared<BasisNode>(*branch);
    node->children[0] = child;
    const auto m = mul(BasisTree(node), Matrix::Identity(2, 2));
    CHECK(m->children[0] == child);
    const auto sum = add(rb.basis, uniform_node(*rb.tree, root, Matrix::Zero(rb.basis.rank[0], 2)), node);
    CHECK(sum->children[0] == child);
    CHECK(basis_tree_size(node).nodes == 2);
}
