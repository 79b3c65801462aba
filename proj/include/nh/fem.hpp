#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nh/grid.hpp"

namespace nh {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Piecewise-constant coefficients, one tensor per simplex.
/// Permeability is stored as a row-major d x d tensor, stiffness as a row-major
/// Voigt matrix (see elasticity.hpp). Either may be empty if unused.
struct ElementCoefficients {
    int dim = 0;
    std::vector<double> permeability;
    std::vector<double> stiffness;

    std::size_t element_count() const;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> permeability_at(
        std::size_t e) const;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> stiffness_at(
        std::size_t e) const;
};

/// Element value = arithmetic mean of the vertex values.
std::vector<double> element_average(const StructuredGrid& grid, std::span<const double> nodal);

/// Isotropic coefficients from nodal k and E fields (either span may be empty).
ElementCoefficients nodal_coefficients(const StructuredGrid& grid, std::span<const double> permeability,
                                       std::span<const double> youngs_modulus, double poisson_ratio);

/// Coefficients from one tensor pair per grid cell, shared by the cell's simplices.
/// `cell_permeability[c]` is d x d, `cell_stiffness[c]` is Voigt-sized.
ElementCoefficients cellwise_coefficients(const StructuredGrid& grid,
                                          const std::vector<Eigen::MatrixXd>& cell_permeability,
                                          const std::vector<Eigen::MatrixXd>& cell_stiffness);

struct BiotConstants {
    double biot_modulus = 1.0;      // M
    double biot_coefficient = 1.0;  // alpha
    double fluid_viscosity = 1.0;   // nu_f
    double source = 0.0;            // f

    void validate() const;
};

/// Matrices of the bilinear forms; pressure uses one dof per node, displacement
/// d dofs per node interleaved (node * d + component).
struct Forms {
    SparseMatrix A;  // a(u, v) = int C eps(u) : eps(v)
    SparseMatrix B;  // b(p, q) = int k / nu_f grad p . grad q
    SparseMatrix M;  // m(p, q) = int p q / M
    SparseMatrix D;  // d(u, q) = int alpha div u q          (rows: pressure)
    SparseMatrix G;  // g(v, p) = int alpha v . grad p       (rows: displacement)
    Vector F;        // l(q) = int f q
};

SparseMatrix assemble_diffusion(const StructuredGrid& grid, const ElementCoefficients& coeffs, double scale = 1.0);
/// Consistent P1 mass matrix, or its row-sum diagonal when `lumped`.
SparseMatrix assemble_mass(const StructuredGrid& grid, double scale = 1.0, bool lumped = false);
SparseMatrix assemble_elasticity(const StructuredGrid& grid, const ElementCoefficients& coeffs);
/// Returns {D, G}.
std::pair<SparseMatrix, SparseMatrix> assemble_coupling(const StructuredGrid& grid, double alpha);
Vector assemble_load(const StructuredGrid& grid, double source);

Forms assemble_forms(const StructuredGrid& grid, const ElementCoefficients& coeffs, const BiotConstants& constants);

/// Nodal-field convenience overload: coefficients averaged per element.
Forms assemble_forms(const StructuredGrid& grid, std::span<const double> permeability,
                     std::span<const double> youngs_modulus, double poisson_ratio, const BiotConstants& constants);

// ---------------------------------------------------------------------------
// Boundary conditions

struct BoundaryCondition {
    enum class Kind { FixedValue, FixedComponent, Natural };
    Kind kind = Kind::Natural;
    Face face = Face::Left;
    double value = 0.0;
    int component = 0;  // FixedComponent only

    static BoundaryCondition fixed(Face f, double v) { return {Kind::FixedValue, f, v, 0}; }
    static BoundaryCondition fixed_component(Face f, int c, double v) { return {Kind::FixedComponent, f, v, c}; }
    static BoundaryCondition natural(Face f) { return {Kind::Natural, f, 0.0, 0}; }
};

/// Prescribed values keyed by global dof.
struct DirichletSet {
    std::vector<std::size_t> dofs;  // sorted, unique
    std::vector<double> values;

    std::size_t size() const noexcept { return dofs.size(); }
    void add(std::size_t dof, double value);  // later additions override earlier ones
    void merge(const DirichletSet& other);
};

/// Resolve conditions on a field with `components` dofs per node starting at `offset`.
/// FixedValue constrains every component. Conflicting values on a shared node keep
/// the last-listed condition and log a warning.
DirichletSet collect_dirichlet(const StructuredGrid& grid, std::span<const BoundaryCondition> bcs, int components,
                               std::size_t offset = 0);

/// A matrix with Dirichlet rows and columns eliminated (identity on constrained dofs).
class ConstrainedSystem {
public:
    ConstrainedSystem(const SparseMatrix& matrix, DirichletSet constraints);

    const SparseMatrix& matrix() const noexcept { return reduced_; }
    const DirichletSet& constraints() const noexcept { return constraints_; }

    /// rhs with the constrained columns moved over and constrained entries set to their values.
    Vector rhs(const Vector& b) const;
    /// Same, with a different set of prescribed values on the same dofs.
    Vector rhs(const Vector& b, std::span<const double> values) const;

private:
    SparseMatrix reduced_;
    SparseMatrix lifting_;  // free rows x constrained columns of the original matrix
    DirichletSet constraints_;
};

// ---------------------------------------------------------------------------
// Linear solves

enum class SolverKind {
    Auto,      // direct: LDLT when symmetric, LU otherwise
    Cholesky,  // sparse LDLT
    LU,        // sparse LU
    CG,        // conjugate gradient + incomplete Cholesky
    BiCGSTAB,  // BiCGSTAB + ILUT
};

struct SolveOptions {
    double tolerance = 1e-8;  // on ||Ax - b|| / ||b||
    int max_iterations = 20000;
    SolverKind kind = SolverKind::Auto;
    bool symmetric = false;  // hint for Auto
};

/// Relative residual ||Ax - b|| / ||b|| (absolute when b = 0).
double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Solve Ax = b. Throws NumericError carrying the achieved residual when the
/// tolerance is not met.
Vector linear_solve(const SparseMatrix& a, const Vector& b, const SolveOptions& options = {});

/// Factor once, solve many right-hand sides.
class Factorization {
public:
    Factorization(const SparseMatrix& a, bool symmetric, double tolerance = 1e-8);
    ~Factorization();
    Factorization(Factorization&&) noexcept;
    Factorization& operator=(Factorization&&) noexcept;

    Vector solve(const Vector& b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace nh
