#include "oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <random>
#include <sstream>

using namespace h2mul;

TEST_CASE("matvec and adjoint agree with the dense matrix") {
    const auto p = oracle::sphere_problem(3, 1.0, 3);
    const Matrix D = to_dense(p.G);
    std::mt19937_64 rng(7);
    const Vector x = oracle::random_matrix(p.G.cols(), 1, rng);
    CHECK((h2_matvec(p.G, x) - D * x).norm() <= 1e-13 * (D * x).norm());
    CHECK((h2_matvec_adjoint(p.G, x) - D.transpose() * x).norm() <= 1e-13 * (D * x).norm());
    CHECK_THROWS(h2_matvec(p.G, Vector::Zero(3)));
}

TEST_CASE("apply_block matches dense sub-blocks") {
    const auto p = oracle::sphere_problem(3, 1.0, 3);
    const Matrix D = to_dense(p.G);
    std::mt19937_64 rng(11);
    for (int b = 0; b < p.blocks->size(); b += 7) {
        const auto& blk = (*p.blocks)[b];
        const auto& t = (*p.tree)[blk.row];
        const auto& s = (*p.tree)[blk.col];
        const Matrix sub = D.block(t.begin, s.begin, t.size(), s.size());
        CHECK((block_to_dense(p.G, b) - sub).norm() <= 1e-13 * (1.0 + sub.norm()));
        const Matrix X = oracle::random_matrix(s.size(), 3, rng);
        CHECK((apply_block(p.G, b, X) - sub * X).norm() <= 1e-13 * (1.0 + (sub * X).norm()));
        const Matrix Y = oracle::random_matrix(t.size(), 2, rng);
        CHECK((apply_block(p.G, b, Y, true) - sub.transpose() * Y).norm() <= 1e-13 * (1.0 + (sub.transpose() * Y).norm()));
    }
}

TEST_CASE("projection and basis products") {
    const auto p = oracle::sphere_problem(3, 1.0, 3);
    const auto& V = *p.G.row_basis;
    const auto& W = *p.G.col_basis;
    std::mt19937_64 rng(3);
    const auto P = basis_products(W, V);
    for (int c = 0; c < p.tree->size(); ++c) {
        const Matrix Vc = expand_basis(V, c);
        const Matrix Wc = expand_basis(W, c);
        const Matrix X = oracle::random_matrix(Vc.rows(), 2, rng);
        CHECK((project_onto_basis(V, c, X) - Vc.transpose() * X).norm() <= 1e-12 * (1.0 + X.norm() * Vc.norm()));
        const Matrix ref = Wc.transpose() * Vc;
        CHECK((P[c] - ref).norm() <= 1e-12 * (1.0 + ref.norm()));
    }
    CHECK(V.max_rank() == 27);
}

TEST_CASE("binary serialization round trip") {
    const auto p = oracle::sphere_problem(2, 1.0, 2, 8);
    std::stringstream buffer(std::ios::in | std::ios::out | std::ios::binary);
    save_h2(buffer, p.G);
    const H2Matrix back = load_h2(buffer);
    REQUIRE(back.blocks().size() == p.blocks->size());
    CHECK(back.row_tree().size() == p.tree->size());
    CHECK(&back.row_tree() == &back.col_tree());
    CHECK((to_dense(back) - to_dense(p.G)).norm() == 0.0);
    for (int c = 0; c < p.tree->size(); ++c) {
        CHECK(back.row_tree()[c].subtree_end == (*p.tree)[c].subtree_end);
        CHECK(back.row_tree()[c].children == (*p.tree)[c].children);
    }

    std::stringstream garbage("not an h2 file");
    CHECK_THROWS(load_h2(garbage));
    std::string truncated = buffer.str().substr(0, 200);
    std::stringstream cut(truncated);
    CHECK_THROWS(load_h2(cut));
}

TEST_CASE("dense conversion refuses large matrices") {
    const auto p = oracle::sphere_problem(2, 1.0, 2, 8);
    CHECK_THROWS_AS(to_dense(p.G, 100), std::length_error);
}
