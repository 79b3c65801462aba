#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nh/fem.hpp"
#include "nh/grid.hpp"

namespace nh {

/// Effective coefficients of one coarse cell: d x d permeability and Voigt
/// (Mandel-scaled) stiffness.
struct EffectiveTensors {
    Eigen::MatrixXd permeability;
    Eigen::MatrixXd stiffness;
};

/// Restriction of a nodal fine-grid field to one coarse cell. The local grid is
/// the unit cell with N_l fine cells per axis; nodes on shared faces appear in
/// every patch that touches them.
struct CellPatch {
    std::size_t cell = 0;
    StructuredGrid grid;
    std::vector<double> values;
};

/// Fine cells per coarse cell along each axis; throws if the grids do not nest.
int patch_resolution(const StructuredGrid& fine, const StructuredGrid& coarse);

std::vector<CellPatch> extract_patches(const StructuredGrid& fine, std::span<const double> field,
                                       const StructuredGrid& coarse);

/// Cell-centred pixel values of a patch (mean of the 2^d corner nodes of every fine cell),
/// laid out with axis 0 fastest. This is the N_l^d image fed to the surrogate.
std::vector<double> patch_pixels(const CellPatch& patch);

/// Effective permeability from the d linear-Dirichlet cell problems
/// -div(k grad psi_j) = 0, psi_j = x_j on the boundary;
/// k*_{lj} = |K|^-1 int k d(psi_l)/dx_j. Unsymmetrized.
Eigen::MatrixXd effective_permeability_raw(const StructuredGrid& local, const ElementCoefficients& coeffs);

/// Symmetrized (k* + k*^T) / 2 of the above, from nodal patch values.
Eigen::MatrixXd effective_permeability(const CellPatch& patch);

/// Effective stiffness from the d(d+1)/2 cell problems with boundary
/// displacement Lambda^(rs) x (shear cases scaled by sqrt(2) for Mandel form);
/// C*_{ab} = |K|^-1 int eps(phi_a) : C : eps(phi_b).
Eigen::MatrixXd effective_elasticity(const StructuredGrid& local, const ElementCoefficients& coeffs);

/// From nodal Young's modulus values and a constant Poisson ratio.
Eigen::MatrixXd effective_elasticity(const CellPatch& patch, double poisson_ratio);

/// Both tensors for every coarse cell, ordered by cell index (axis 0 fastest).
/// Cells are independent; `threads` > 1 splits them across worker threads.
std::vector<EffectiveTensors> homogenize_domain(const StructuredGrid& fine, std::span<const double> permeability,
                                                std::span<const double> youngs_modulus,
                                                const StructuredGrid& coarse, double poisson_ratio,
                                                int threads = 1);

// Flat upper-triangle (row-major) encoding used by files and the surrogate.
inline constexpr int triangle_size(int n) { return n * (n + 1) / 2; }
std::vector<double> upper_triangle(const Eigen::MatrixXd& m);
Eigen::MatrixXd from_upper_triangle(std::span<const double> values, int n);

enum class Target { Permeability, Elasticity };

/// Matrix size of the target tensor: d for permeability, the Voigt size for elasticity.
int target_matrix_size(Target t, int dim);
/// Length of the flattened target: 3/6 in 2D, 6/21 in 3D.
int target_outputs(Target t, int dim);
const char* target_name(Target t);
Target parse_target(std::string_view name);

}  // namespace nh
