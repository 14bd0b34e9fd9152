#ifndef H2MUL_TYPES_HPP
#define H2MUL_TYPES_HPP

#include <Eigen/Dense>

namespace h2mul {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

}  // namespace h2mul

#endif
