#include "nh/elasticity.hpp"

#include "nh/errors.hpp"

namespace nh {

LameParameters lame_parameters(double youngs_modulus, double poisson_ratio) {
    if (!(youngs_modulus > 0.0)) throw ParameterError("Young's modulus must be positive");
    if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) throw ParameterError("Poisson ratio must lie in (0, 0.5)");
    LameParameters p;
    p.mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
    p.lambda = youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    return p;
}

Eigen::MatrixXd isotropic_stiffness(int dim, double youngs_modulus, double poisson_ratio) {
    if (dim != 2 && dim != 3) throw ParameterError("elasticity is defined for 2D and 3D only");
    const auto [mu, lambda] = lame_parameters(youngs_modulus, poisson_ratio);
    const int s = voigt_size(dim);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(s, s);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) c(i, j) = lambda;
        c(i, i) += 2.0 * mu;
    }
    for (int i = dim; i < s; ++i) c(i, i) = 2.0 * mu;
    return c;
}

}  // namespace nh
