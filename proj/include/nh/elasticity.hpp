#pragma once

// Symmetric-tensor bookkeeping for linear elasticity.
//
// Strains and stresses are stored as vectors in Voigt component order
// (2D: 11, 22, 12; 3D: 11, 22, 33, 12, 23, 31) with the shear entries scaled
// by sqrt(2) (Mandel scaling). With that scaling sigma = C eps and
// sigma : eps = sigma_v . eps_v hold with a symmetric C, and the isotropic
// matrix has the familiar form [[l+2m, l, 0], [l, l+2m, 0], [0, 0, 2m]].

#include <array>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

namespace nh {

constexpr int voigt_size(int dim) { return dim == 2 ? 3 : (dim == 3 ? 6 : 1); }

/// Tensor index pair (i, j) of each Voigt slot.
inline std::pair<int, int> voigt_pair(int dim, int slot) {
    static constexpr std::array<std::pair<int, int>, 3> p2{{{0, 0}, {1, 1}, {0, 1}}};
    static constexpr std::array<std::pair<int, int>, 6> p3{{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {2, 0}}};
    return dim == 2 ? p2[slot] : p3[slot];
}

/// Weight that maps a tensor component to its Voigt slot: 1 on the diagonal, sqrt(2) for shears.
inline double voigt_weight(int dim, int slot) { return slot < dim ? 1.0 : std::sqrt(2.0); }

struct LameParameters {
    double mu = 0.0;
    double lambda = 0.0;
};

/// mu = E / (2(1+eta)), lambda = E eta / ((1+eta)(1-2eta)); requires E > 0, eta in (0, 0.5).
LameParameters lame_parameters(double youngs_modulus, double poisson_ratio);

/// Isotropic stiffness in Voigt order with Mandel shear scaling.
Eigen::MatrixXd isotropic_stiffness(int dim, double youngs_modulus, double poisson_ratio);

/// Fill `out` (voigt_size x dim*(dim+1)) with the strain of each P1 vector basis
/// function of a simplex; column a*dim + c belongs to vertex a, component c.
template <class Grads>
void strain_operator(int dim, const Grads& grads, Eigen::MatrixXd& out) {
    const int s = voigt_size(dim);
    out.setZero(s, dim * (dim + 1));
    for (int a = 0; a <= dim; ++a)
        for (int c = 0; c < dim; ++c) {
            const int col = a * dim + c;
            for (int slot = 0; slot < s; ++slot) {
                const auto [i, j] = voigt_pair(dim, slot);
                // eps_ij of phi e_c = (delta_ic d_j phi + delta_jc d_i phi) / 2
                double e = 0.0;
                if (i == c) e += 0.5 * grads[a][j];
                if (j == c) e += 0.5 * grads[a][i];
                out(slot, col) = voigt_weight(dim, slot) * e;
            }
        }
}

}  // namespace nh
