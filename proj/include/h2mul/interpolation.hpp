#ifndef H2MUL_INTERPOLATION_HPP
#define H2MUL_INTERPOLATION_HPP

#include "h2mul/geometry.hpp"
#include "h2mul/h2matrix.hpp"

#include <functional>
#include <vector>

namespace h2mul {

/// Chebyshev points of the first kind on [a, b]; a degenerate interval yields m copies of a.
std::vector<double> chebyshev_points(double a, double b, int m);

/// Values of all Lagrange polynomials for `nodes` at x.
std::vector<double> lagrange_values(const std::vector<double>& nodes, double x);

using Kernel = std::function<double(const Vec3&, const Vec3&)>;

/// 1 / (4 pi |x - y|), zero on the diagonal.
double single_layer_kernel(const Vec3& x, const Vec3& y);

//
// Tensor-product Chebyshev interpolation attached to the clusters of one tree.
//
// Every cluster interpolates on its bounding box; axes thinner than a small
// fraction of the root diameter are widened so that the interpolation points
// stay distinct.
//
class InterpolationScheme {
public:
    InterpolationScheme(const ClusterTree& tree, int order);

    int order() const { return order_; }
    Index rank() const { return static_cast<Index>(order_) * order_ * order_; }

    const BoundingBox& box(int cluster) const { return boxes_[cluster]; }
    const std::vector<double>& axis_points(int cluster, int axis) const {
        return points_[cluster][axis];
    }

    Vec3 point(int cluster, Index nu) const;
    std::vector<Vec3> points(int cluster) const;

    /// l_{t,nu}(x) for all nu.
    Vector lagrange(int cluster, const Vec3& x) const;

    /// (nu', nu) entry l_{parent,nu}(xi_{child,nu'}).
    Matrix transfer(int parent, int child) const;

private:
    int order_;
    std::vector<BoundingBox> boxes_;
    std::vector<std::array<std::vector<double>, 3>> points_;
};

Matrix transfer_matrix(const InterpolationScheme& scheme, int parent, int child);

/// Interpolation basis for `tree`: area-weighted Lagrange values at triangle midpoints.
ClusterBasis build_interpolation_basis(std::shared_ptr<const ClusterTree> tree,
                                       const TriangleMesh& mesh,
                                       const InterpolationScheme& scheme);

/// H2 approximation of the midpoint-rule Galerkin matrix g_ij = a_i a_j g(m_i, m_j).
H2Matrix assemble_h2(const TriangleMesh& mesh, std::shared_ptr<const BlockTree> blocks,
                     const Kernel& kernel, int order);

}  // namespace h2mul

#endif
