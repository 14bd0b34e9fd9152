#include "h2mul/interpolation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace h2mul {

std::vector<double> chebyshev_points(double a, double b, int m) {
    if (m < 1) throw std::invalid_argument("interpolation order must be positive");
    if (b < a) throw std::invalid_argument("interval bounds out of order");
    std::vector<double> x(m);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int j = 0; j < m; ++j)
        x[j] = (half == 0.0) ? a : mid + half * std::cos((2.0 * j + 1.0) * std::numbers::pi / (2.0 * m));
    return x;
}

std::vector<double> lagrange_values(const std::vector<double>& nodes, double x) {
    const auto m = nodes.size();
    std::vector<double> values(m, 1.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < m; ++i)
            if (i != j) values[j] *= (x - nodes[i]) / (nodes[j] - nodes[i]);
    return values;
}

double single_layer_kernel(const Vec3& x, const Vec3& y) {
    const double r = (x - y).norm();
    return r == 0.0 ? 0.0 : 1.0 / (4.0 * std::numbers::pi * r);
}

InterpolationScheme::InterpolationScheme(const ClusterTree& tree, int order) : order_(order) {
    if (order < 1) throw std::invalid_argument("interpolation order must be positive");
    const double root_diam = tree.root().box.diameter();
    const double min_width = 1e-6 * (root_diam > 0.0 ? root_diam : 1.0);

    boxes_.resize(tree.size());
    points_.resize(tree.size());
    for (int c = 0; c < tree.size(); ++c) {
        BoundingBox box = tree[c].box;
        for (int d = 0; d < 3; ++d) {
            if (box.upper[d] - box.lower[d] < min_width) {
                const double center = 0.5 * (box.lower[d] + box.upper[d]);
                box.lower[d] = center - 0.5 * min_width;
                box.upper[d] = center + 0.5 * min_width;
            }
            points_[c][d] = chebyshev_points(box.lower[d], box.upper[d], order);
        }
        boxes_[c] = box;
    }
}

Vec3 InterpolationScheme::point(int cluster, Index nu) const {
    const auto& p = points_[cluster];
    const Index m = order_;
    return {p[0][nu % m], p[1][(nu / m) % m], p[2][nu / (m * m)]};
}

std::vector<Vec3> InterpolationScheme::points(int cluster) const {
    std::vector<Vec3> out(rank());
    for (Index nu = 0; nu < rank(); ++nu) out[nu] = point(cluster, nu);
    return out;
}

Vector InterpolationScheme::lagrange(int cluster, const Vec3& x) const {
    const auto& p = points_[cluster];
    const auto l0 = lagrange_values(p[0], x[0]);
    const auto l1 = lagrange_values(p[1], x[1]);
    const auto l2 = lagrange_values(p[2], x[2]);
    const Index m = order_;
    Vector out(rank());
    for (Index i2 = 0; i2 < m; ++i2)
        for (Index i1 = 0; i1 < m; ++i1)
            for (Index i0 = 0; i0 < m; ++i0) out[i0 + m * (i1 + m * i2)] = l0[i0] * l1[i1] * l2[i2];
    return out;
}

Matrix InterpolationScheme::transfer(int parent, int child) const {
    const Index m = order_;
    // one-dimensional factors: axis[d](i', i) = l_{parent,i}(x_{child,i'})
    std::array<Matrix, 3> axis;
    for (int d = 0; d < 3; ++d) {
        axis[d].resize(m, m);
        for (Index ic = 0; ic < m; ++ic) {
            const auto l = lagrange_values(points_[parent][d], points_[child][d][ic]);
            for (Index ip = 0; ip < m; ++ip) axis[d](ic, ip) = l[ip];
        }
    }
    Matrix E(rank(), rank());
    for (Index nu_c = 0; nu_c < rank(); ++nu_c) {
        const Index c0 = nu_c % m, c1 = (nu_c / m) % m, c2 = nu_c / (m * m);
        for (Index nu_p = 0; nu_p < rank(); ++nu_p) {
            const Index p0 = nu_p % m, p1 = (nu_p / m) % m, p2 = nu_p / (m * m);
            E(nu_c, nu_p) = axis[0](c0, p0) * axis[1](c1, p1) * axis[2](c2, p2);
        }
    }
    return E;
}

Matrix transfer_matrix(const InterpolationScheme& scheme, int parent, int child) {
    return scheme.transfer(parent, child);
}

ClusterBasis build_interpolation_basis(std::shared_ptr<const ClusterTree> tree,
                                       const TriangleMesh& mesh,
                                       const InterpolationScheme& scheme) {
    ClusterBasis basis(tree);
    const auto& ct = *tree;
    const Index k = scheme.rank();
    for (int c = 0; c < ct.size(); ++c) {
        const auto& cluster = ct[c];
        basis.rank[c] = k;
        if (cluster.parent >= 0) basis.transfer[c] = scheme.transfer(cluster.parent, c);
        if (cluster.is_leaf()) {
            Matrix V(cluster.size(), k);
            for (Index pos = cluster.begin; pos < cluster.end; ++pos) {
                const Index i = ct.index_at[pos];
                V.row(pos - cluster.begin) = mesh.areas[i] * scheme.lagrange(c, mesh.midpoints[i]).transpose();
            }
            basis.leaf[c] = std::move(V);
        }
    }
    return basis;
}

H2Matrix assemble_h2(const TriangleMesh& mesh, std::shared_ptr<const BlockTree> blocks,
                     const Kernel& kernel, int order) {
    const auto& rows = *blocks->row_tree;
    const auto& cols = *blocks->col_tree;
    if (rows.dimension() != mesh.size() || cols.dimension() != mesh.size())
        throw std::invalid_argument("cluster trees do not match the mesh");

    const InterpolationScheme row_scheme(rows, order);
    const InterpolationScheme col_scheme(cols, order);

    H2Matrix G;
    G.structure = blocks;
    G.row_basis = std::make_shared<ClusterBasis>(build_interpolation_basis(blocks->row_tree, mesh, row_scheme));
    G.col_basis = std::make_shared<ClusterBasis>(build_interpolation_basis(blocks->col_tree, mesh, col_scheme));
    G.coupling.resize(blocks->size());
    G.nearfield.resize(blocks->size());

    for (int b = 0; b < blocks->size(); ++b) {
        const auto& blk = (*blocks)[b];
        if (blk.kind == BlockKind::admissible) {
            const auto xi = row_scheme.points(blk.row);
            const auto yj = col_scheme.points(blk.col);
            Matrix S(xi.size(), yj.size());
            for (std::size_t nu = 0; nu < xi.size(); ++nu)
                for (std::size_t mu = 0; mu < yj.size(); ++mu) S(nu, mu) = kernel(xi[nu], yj[mu]);
            G.coupling[b] = std::move(S);
        } else if (blk.kind == BlockKind::inadmissible) {
            const auto& t = rows[blk.row];
            const auto& s = cols[blk.col];
            Matrix N(t.size(), s.size());
            for (Index p = t.begin; p < t.end; ++p) {
                const Index i = rows.index_at[p];
                for (Index q = s.begin; q < s.end; ++q) {
                    const Index j = cols.index_at[q];
                    N(p - t.begin, q - s.begin) =
                        (i == j) ? 0.0 : mesh.areas[i] * mesh.areas[j] * kernel(mesh.midpoints[i], mesh.midpoints[j]);
                }
            }
            G.nearfield[b] = std::move(N);
        }
    }
    return G;
}

}  // namespace h2mul
