#include "nh/fem.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <spdlog/spdlog.h>

#include "nh/elasticity.hpp"
#include "nh/errors.hpp"

namespace nh {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::size_t ElementCoefficients::element_count() const {
    if (!permeability.empty()) return permeability.size() / static_cast<std::size_t>(dim * dim);
    const auto s = static_cast<std::size_t>(voigt_size(dim));
    return stiffness.size() / (s * s);
}

RowMajorMap ElementCoefficients::permeability_at(std::size_t e) const {
    return RowMajorMap(permeability.data() + e * dim * dim, dim, dim);
}

RowMajorMap ElementCoefficients::stiffness_at(std::size_t e) const {
    const int s = voigt_size(dim);
    return RowMajorMap(stiffness.data() + e * s * s, s, s);
}

std::vector<double> element_average(const StructuredGrid& grid, std::span<const double> nodal) {
    if (nodal.size() != grid.node_count()) throw ParameterError("nodal array does not match grid node count");
    const int d = grid.dim();
    std::vector<double> out(grid.element_count());
    for (std::size_t e = 0; e < out.size(); ++e) {
        const Element el = grid.element(e);
        double s = 0.0;
        for (int a = 0; a <= d; ++a) s += nodal[el.nodes[a]];
        out[e] = s / (d + 1);
    }
    return out;
}

ElementCoefficients nodal_coefficients(const StructuredGrid& grid, std::span<const double> permeability,
                                       std::span<const double> youngs_modulus, double poisson_ratio) {
    const int d = grid.dim();
    ElementCoefficients c;
    c.dim = d;
    if (!permeability.empty()) {
        for (double k : permeability)
            if (!(k > 0.0)) throw ParameterError("permeability must be positive at every node");
        const auto ke = element_average(grid, permeability);
        c.permeability.assign(ke.size() * d * d, 0.0);
        for (std::size_t e = 0; e < ke.size(); ++e)
            for (int i = 0; i < d; ++i) c.permeability[e * d * d + i * d + i] = ke[e];
    }
    if (!youngs_modulus.empty()) {
        for (double v : youngs_modulus)
            if (!(v > 0.0)) throw ParameterError("elastic modulus must be positive at every node");
        const auto ee = element_average(grid, youngs_modulus);
        // stiffness is linear in E at fixed Poisson ratio
        const Eigen::MatrixXd unit = isotropic_stiffness(d, 1.0, poisson_ratio);
        const int s = voigt_size(d);
        c.stiffness.resize(ee.size() * s * s);
        for (std::size_t e = 0; e < ee.size(); ++e)
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) c.stiffness[(e * s + i) * s + j] = ee[e] * unit(i, j);
    }
    return c;
}

ElementCoefficients cellwise_coefficients(const StructuredGrid& grid,
                                          const std::vector<Eigen::MatrixXd>& cell_permeability,
                                          const std::vector<Eigen::MatrixXd>& cell_stiffness) {
    const int d = grid.dim();
    const int s = voigt_size(d);
    const auto per_cell = static_cast<std::size_t>(grid.simplices_per_cell());
    ElementCoefficients c;
    c.dim = d;
    if (!cell_permeability.empty()) {
        if (cell_permeability.size() != grid.cell_count())
            throw ParameterError("need one permeability tensor per coarse cell");
        c.permeability.resize(grid.element_count() * d * d);
        for (std::size_t e = 0; e < grid.element_count(); ++e) {
            const auto& k = cell_permeability[e / per_cell];
            if (k.rows() != d || k.cols() != d) throw ParameterError("permeability tensor has wrong size");
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) c.permeability[e * d * d + i * d + j] = k(i, j);
        }
    }
    if (!cell_stiffness.empty()) {
        if (cell_stiffness.size() != grid.cell_count())
            throw ParameterError("need one stiffness tensor per coarse cell");
        c.stiffness.resize(grid.element_count() * s * s);
        for (std::size_t e = 0; e < grid.element_count(); ++e) {
            const auto& C = cell_stiffness[e / per_cell];
            if (C.rows() != s || C.cols() != s) throw ParameterError("stiffness tensor has wrong size");
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) c.stiffness[(e * s + i) * s + j] = C(i, j);
        }
    }
    return c;
}

void BiotConstants::validate() const {
    if (!(biot_modulus > 0.0)) throw ParameterError("Biot modulus must be positive");
    if (!(fluid_viscosity > 0.0)) throw ParameterError("fluid viscosity must be positive");
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols, const Triplets& t) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

void check_coefficients(const StructuredGrid& grid, const ElementCoefficients& c) {
    if (c.dim != grid.dim()) throw ParameterError("coefficient dimension does not match grid");
    if (c.element_count() != grid.element_count())
        throw ParameterError("coefficient count does not match grid element count");
}

}  // namespace

SparseMatrix assemble_diffusion(const StructuredGrid& grid, const ElementCoefficients& coeffs, double scale) {
    check_coefficients(grid, coeffs);
    if (coeffs.permeability.empty()) throw ParameterError("permeability coefficients missing");
    const int d = grid.dim();
    const auto n = static_cast<Eigen::Index>(grid.node_count());
    Triplets t;
    t.reserve(grid.element_count() * (d + 1) * (d + 1));
    Eigen::Vector3d ga, gb;
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const Element el = grid.element(e);
        const SimplexShape& sh = grid.shape(el.permutation);
        const auto k = coeffs.permeability_at(e);
        for (int a = 0; a <= d; ++a) {
            Eigen::VectorXd kg = k * Eigen::Map<const Eigen::VectorXd>(sh.grads[a].data(), d);
            for (int b = 0; b <= d; ++b) {
                double v = 0.0;
                for (int i = 0; i < d; ++i) v += kg[i] * sh.grads[b][i];
                t.emplace_back(el.nodes[a], el.nodes[b], scale * sh.volume * v);
            }
        }
    }
    return from_triplets(n, n, t);
}

SparseMatrix assemble_mass(const StructuredGrid& grid, double scale, bool lumped) {
    const int d = grid.dim();
    const auto n = static_cast<Eigen::Index>(grid.node_count());
    Triplets t;
    t.reserve(grid.element_count() * (d + 1) * (d + 1));
    const double denom = (d + 1.0) * (d + 2.0);
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const Element el = grid.element(e);
        const double vol = grid.shape(el.permutation).volume;
        for (int a = 0; a <= d; ++a)
            for (int b = 0; b <= d; ++b)
                if (lumped) {
                    if (a == b) t.emplace_back(el.nodes[a], el.nodes[a], scale * vol / (d + 1.0));
                } else {
                    t.emplace_back(el.nodes[a], el.nodes[b], scale * vol * (a == b ? 2.0 : 1.0) / denom);
                }
    }
    return from_triplets(n, n, t);
}

SparseMatrix assemble_elasticity(const StructuredGrid& grid, const ElementCoefficients& coeffs) {
    check_coefficients(grid, coeffs);
    if (coeffs.stiffness.empty()) throw ParameterError("stiffness coefficients missing");
    const int d = grid.dim();
    const auto n = static_cast<Eigen::Index>(grid.node_count() * d);
    const int local = d * (d + 1);
    Triplets t;
    t.reserve(grid.element_count() * local * local);
    Eigen::MatrixXd strain;
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const Element el = grid.element(e);
        const SimplexShape& sh = grid.shape(el.permutation);
        strain_operator(d, sh.grads, strain);
        const Eigen::MatrixXd ke = sh.volume * strain.transpose() * coeffs.stiffness_at(e) * strain;
        for (int i = 0; i < local; ++i)
            for (int j = 0; j < local; ++j)
                t.emplace_back(el.nodes[i / d] * d + i % d, el.nodes[j / d] * d + j % d, ke(i, j));
    }
    return from_triplets(n, n, t);
}

std::pair<SparseMatrix, SparseMatrix> assemble_coupling(const StructuredGrid& grid, double alpha) {
    const int d = grid.dim();
    const auto np = static_cast<Eigen::Index>(grid.node_count());
    const auto nu = np * d;
    Triplets td, tg;
    td.reserve(grid.element_count() * (d + 1) * (d + 1) * d);
    tg.reserve(td.capacity());
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const Element el = grid.element(e);
        const SimplexShape& sh = grid.shape(el.permutation);
        const double w = alpha * sh.volume / (d + 1);  // int of a P1 basis function over the simplex
        for (int a = 0; a <= d; ++a)
            for (int b = 0; b <= d; ++b)
                for (int c = 0; c < d; ++c) {
                    // d: int alpha d_c(phi_b) phi_a ; g: int alpha phi_a d_c(phi_b)
                    td.emplace_back(el.nodes[a], el.nodes[b] * d + c, w * sh.grads[b][c]);
                    tg.emplace_back(el.nodes[a] * d + c, el.nodes[b], w * sh.grads[b][c]);
                }
    }
    return {from_triplets(np, nu, td), from_triplets(nu, np, tg)};
}

Vector assemble_load(const StructuredGrid& grid, double source) {
    const int d = grid.dim();
    Vector f = Vector::Zero(static_cast<Eigen::Index>(grid.node_count()));
    if (source == 0.0) return f;
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const Element el = grid.element(e);
        const double w = source * grid.shape(el.permutation).volume / (d + 1);
        for (int a = 0; a <= d; ++a) f[static_cast<Eigen::Index>(el.nodes[a])] += w;
    }
    return f;
}

Forms assemble_forms(const StructuredGrid& grid, const ElementCoefficients& coeffs, const BiotConstants& constants) {
    constants.validate();
    Forms f;
    f.A = assemble_elasticity(grid, coeffs);
    f.B = assemble_diffusion(grid, coeffs, 1.0 / constants.fluid_viscosity);
    f.M = assemble_mass(grid, 1.0 / constants.biot_modulus);
    std::tie(f.D, f.G) = assemble_coupling(grid, constants.biot_coefficient);
    f.F = assemble_load(grid, constants.source);
    return f;
}

Forms assemble_forms(const StructuredGrid& grid, std::span<const double> permeability,
                     std::span<const double> youngs_modulus, double poisson_ratio, const BiotConstants& constants) {
    if (permeability.size() != grid.node_count() || youngs_modulus.size() != grid.node_count())
        throw ParameterError("field arrays must match grid node count");
    return assemble_forms(grid, nodal_coefficients(grid, permeability, youngs_modulus, poisson_ratio), constants);
}

// ---------------------------------------------------------------------------

void DirichletSet::add(std::size_t dof, double value) {
    auto it = std::lower_bound(dofs.begin(), dofs.end(), dof);
    const auto pos = static_cast<std::size_t>(it - dofs.begin());
    if (it != dofs.end() && *it == dof) {
        values[pos] = value;
    } else {
        dofs.insert(it, dof);
        values.insert(values.begin() + static_cast<std::ptrdiff_t>(pos), value);
    }
}

void DirichletSet::merge(const DirichletSet& other) {
    for (std::size_t i = 0; i < other.size(); ++i) add(other.dofs[i], other.values[i]);
}

DirichletSet collect_dirichlet(const StructuredGrid& grid, std::span<const BoundaryCondition> bcs, int components,
                               std::size_t offset) {
    std::vector<double> value(grid.node_count() * components, 0.0);
    std::vector<int> owner(grid.node_count() * components, -1);
    std::size_t conflicts = 0;
    for (std::size_t b = 0; b < bcs.size(); ++b) {
        const auto& bc = bcs[b];
        if (bc.kind == BoundaryCondition::Kind::Natural) continue;
        if (bc.kind == BoundaryCondition::Kind::FixedComponent && (bc.component < 0 || bc.component >= components))
            throw ParameterError("boundary condition component out of range");
        for (std::size_t node : grid.boundary_nodes(bc.face)) {
            for (int c = 0; c < components; ++c) {
                if (bc.kind == BoundaryCondition::Kind::FixedComponent && c != bc.component) continue;
                const std::size_t dof = node * components + c;
                if (owner[dof] >= 0 && value[dof] != bc.value) ++conflicts;
                owner[dof] = static_cast<int>(b);
                value[dof] = bc.value;
            }
        }
    }
    if (conflicts > 0)
        spdlog::warn("{} boundary dofs received conflicting Dirichlet values; last-listed condition wins", conflicts);
    DirichletSet out;
    for (std::size_t dof = 0; dof < owner.size(); ++dof)
        if (owner[dof] >= 0) {
            out.dofs.push_back(offset + dof);
            out.values.push_back(value[dof]);
        }
    return out;
}

ConstrainedSystem::ConstrainedSystem(const SparseMatrix& matrix, DirichletSet constraints)
    : constraints_(std::move(constraints)) {
    const Eigen::Index n = matrix.rows();
    if (matrix.cols() != n) throw ParameterError("Dirichlet elimination needs a square matrix");
    std::vector<Eigen::Index> fixed_pos(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        if (constraints_.dofs[i] >= static_cast<std::size_t>(n)) throw ParameterError("Dirichlet dof out of range");
        fixed_pos[constraints_.dofs[i]] = static_cast<Eigen::Index>(i);
    }
    Triplets kept, lift;
    kept.reserve(static_cast<std::size_t>(matrix.nonZeros()));
    for (Eigen::Index col = 0; col < matrix.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
            const auto row = it.row();
            if (fixed_pos[row] >= 0) continue;
            if (fixed_pos[col] >= 0)
                lift.emplace_back(row, fixed_pos[col], it.value());
            else
                kept.emplace_back(row, col, it.value());
        }
    for (std::size_t dof : constraints_.dofs) kept.emplace_back(dof, dof, 1.0);
    reduced_ = from_triplets(n, n, kept);
    lifting_ = from_triplets(n, static_cast<Eigen::Index>(constraints_.size()), lift);
}

Vector ConstrainedSystem::rhs(const Vector& b) const { return rhs(b, constraints_.values); }

Vector ConstrainedSystem::rhs(const Vector& b, std::span<const double> values) const {
    if (b.size() != reduced_.rows()) throw ParameterError("rhs length does not match system");
    if (values.size() != constraints_.size()) throw ParameterError("need one value per constrained dof");
    const Eigen::Map<const Vector> g(values.data(), static_cast<Eigen::Index>(values.size()));
    Vector out = b - lifting_ * g;
    for (std::size_t i = 0; i < constraints_.size(); ++i)
        out[static_cast<Eigen::Index>(constraints_.dofs[i])] = values[i];
    return out;
}

// ---------------------------------------------------------------------------

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
    const double r = (a * x - b).norm();
    const double nb = b.norm();
    return nb > 0.0 ? r / nb : r;
}

namespace {

template <class Solver>
Vector iterative(const SparseMatrix& a, const Vector& b, const SolveOptions& o, const char* name) {
    Solver s;
    s.setTolerance(o.tolerance * 0.5);
    s.setMaxIterations(o.max_iterations);
    s.compute(a);
    if (s.info() != Eigen::Success) throw NumericError(std::string(name) + ": preconditioner setup failed");
    Vector x = s.solve(b);
    const double res = relative_residual(a, x, b);
    if (!x.allFinite() || res > o.tolerance)
        throw NumericError(std::string(name) + " did not converge within " + std::to_string(o.max_iterations) +
                               " iterations (relative residual " + std::to_string(res) + ")",
                           res);
    return x;
}

}  // namespace

Vector linear_solve(const SparseMatrix& a, const Vector& b, const SolveOptions& options) {
    if (a.rows() != a.cols()) throw ParameterError("linear_solve: matrix must be square");
    if (a.rows() != b.size()) throw ParameterError("linear_solve: rhs length mismatch");
    if (b.norm() == 0.0) return Vector::Zero(b.size());
    switch (options.kind) {
        case SolverKind::CG:
            return iterative<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                                                      Eigen::IncompleteCholesky<double>>>(a, b, options, "CG");
        case SolverKind::BiCGSTAB:
            return iterative<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>>(a, b, options, "BiCGSTAB");
        default: {
            const bool sym = options.kind == SolverKind::Cholesky ||
                             (options.kind == SolverKind::Auto && options.symmetric);
            return Factorization(a, sym, options.tolerance).solve(b);
        }
    }
}

struct Factorization::Impl {
    SparseMatrix a;
    bool symmetric = false;
    double tolerance = 1e-8;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
};

Factorization::Factorization(const SparseMatrix& a, bool symmetric, double tolerance)
    : impl_(std::make_unique<Impl>()) {
    impl_->a = a;
    impl_->symmetric = symmetric;
    impl_->tolerance = tolerance;
    if (symmetric) {
        impl_->ldlt.compute(a);
        if (impl_->ldlt.info() != Eigen::Success) throw NumericError("sparse LDLT factorization failed");
    } else {
        impl_->lu.analyzePattern(a);
        impl_->lu.factorize(a);
        if (impl_->lu.info() != Eigen::Success)
            throw NumericError("sparse LU factorization failed: " + impl_->lu.lastErrorMessage());
    }
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Vector Factorization::solve(const Vector& b) const {
    if (b.size() != impl_->a.rows()) throw ParameterError("rhs length does not match factorized system");
    if (b.norm() == 0.0) return Vector::Zero(b.size());
    Vector x = impl_->symmetric ? Vector(impl_->ldlt.solve(b)) : Vector(impl_->lu.solve(b));
    double res = relative_residual(impl_->a, x, b);
    // one step of iterative refinement before giving up
    if (res > impl_->tolerance && x.allFinite()) {
        const Vector r = b - impl_->a * x;
        x += impl_->symmetric ? Vector(impl_->ldlt.solve(r)) : Vector(impl_->lu.solve(r));
        res = relative_residual(impl_->a, x, b);
    }
    if (!x.allFinite() || res > impl_->tolerance)
        throw NumericError("direct solve missed tolerance (relative residual " + std::to_string(res) + ")", res);
    return x;
}

}  // namespace nh
