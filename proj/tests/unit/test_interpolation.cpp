#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace h2mul;

TEST_CASE("chebyshev points and lagrange cardinality") {
    const auto x = chebyshev_points(-1.0, 3.0, 5);
    REQUIRE(x.size() == 5);
    for (double v : x) CHECK((v > -1.0 && v < 3.0));
    for (std::size_t j = 0; j < x.size(); ++j) {
        const auto l = lagrange_values(x, x[j]);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(l[i] == doctest::Approx(i == j ? 1.0 : 0.0));
    }
    // partition of unity and exactness for degree m-1
    const auto l = lagrange_values(x, 0.37);
    double sum = 0.0, cube = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += l[i];
        cube += l[i] * x[i] * x[i] * x[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(cube == doctest::Approx(0.37 * 0.37 * 0.37).epsilon(1e-13));
    CHECK_THROWS(chebyshev_points(0.0, 1.0, 0));
}

TEST_CASE("interpolation basis is nested") {
    const auto mesh = build_sphere_mesh(3);
    auto tree = std::make_shared<ClusterTree>(build_cluster_tree(mesh, 16));
    const InterpolationScheme scheme(*tree, 3);
    const auto basis = build_interpolation_basis(tree, mesh, scheme);
    for (int c = 0; c < tree->size(); ++c) {
        const Matrix direct = oracle::direct_basis(mesh, *tree, scheme, c);
        const Matrix nested = expand_basis(basis, c);
        CHECK((direct - nested).norm() <= 1e-12 * direct.norm());
    }
}

TEST_CASE("interpolated matrix approximates the galerkin matrix") {
    const auto p = oracle::sphere_problem(3, 1.0, 4);
    const Matrix dense = oracle::galerkin_dense(p.mesh, *p.tree, *p.tree);
    const Matrix approx = to_dense(p.G);
    const double rel = oracle::spectral_norm(dense - approx) / oracle::spectral_norm(dense);
    CHECK(rel < 1e-3);
    // nearfield is exact
    for (int b : p.blocks->leaves()) {
        const auto& blk = (*p.blocks)[b];
        if (blk.kind != BlockKind::inadmissible) continue;
        const auto& t = (*p.tree)[blk.row];
        const auto& s = (*p.tree)[blk.col];
        CHECK((p.G.nearfield[b] - dense.block(t.begin, s.begin, t.size(), s.size())).norm() == 0.0);
    }
}

TEST_CASE("approximation improves with the order") {
    double previous = 1.0;
    for (int order : {2, 3, 4}) {
        const auto p = oracle::sphere_problem(2, 1.0, order, 8);
        const Matrix dense = oracle::galerkin_dense(p.mesh, *p.tree, *p.tree);
        const double rel = (dense - to_dense(p.G)).norm() / dense.norm();
        CHECK(rel < previous);
        previous = rel;
    }
}
