#include "nh/homogenize.hpp"

#include <cmath>
#include <string>

#include "nh/elasticity.hpp"
#include "nh/errors.hpp"
#include "nh/parallel.hpp"

namespace nh {

int patch_resolution(const StructuredGrid& fine, const StructuredGrid& coarse) {
    if (fine.dim() != coarse.dim()) throw ParameterError("fine and coarse grids differ in dimension");
    int ratio = -1;
    for (int a = 0; a < fine.dim(); ++a) {
        if (std::abs(fine.extent(a) - coarse.extent(a)) > 1e-12)
            throw ParameterError("fine and coarse grids cover different boxes");
        if (fine.cells(a) % coarse.cells(a) != 0)
            throw ParameterError("fine cells per axis (" + std::to_string(fine.cells(a)) +
                                 ") not divisible by coarse cells per axis (" + std::to_string(coarse.cells(a)) + ")");
        const int r = fine.cells(a) / coarse.cells(a);
        if (ratio >= 0 && r != ratio) throw ParameterError("coarse cells must contain the same number of fine cells per axis");
        ratio = r;
    }
    return ratio;
}

std::vector<CellPatch> extract_patches(const StructuredGrid& fine, std::span<const double> field,
                                       const StructuredGrid& coarse) {
    if (field.size() != fine.node_count()) throw ParameterError("field does not match fine grid");
    const int nl = patch_resolution(fine, coarse);
    const int d = fine.dim();
    const StructuredGrid local(std::vector<int>(static_cast<std::size_t>(d), nl));
    std::vector<CellPatch> patches(coarse.cell_count());
    for (std::size_t c = 0; c < coarse.cell_count(); ++c) {
        const Index3 ci = coarse.cell_index(c);
        CellPatch& p = patches[c];
        p.cell = c;
        p.grid = local;
        p.values.resize(local.node_count());
        for (std::size_t n = 0; n < local.node_count(); ++n) {
            Index3 li = local.node_index(n);
            for (int a = 0; a < d; ++a) li[a] += ci[a] * nl;
            p.values[n] = field[fine.node_id(li)];
        }
    }
    return patches;
}

std::vector<double> patch_pixels(const CellPatch& patch) {
    const StructuredGrid& g = patch.grid;
    const int d = g.dim();
    const int corners = 1 << d;
    std::vector<double> out(g.cell_count());
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
        const Index3 base = g.cell_index(c);
        double s = 0.0;
        for (int k = 0; k < corners; ++k) {
            Index3 v = base;
            for (int a = 0; a < d; ++a) v[a] += (k >> a) & 1;
            s += patch.values[g.node_id(v)];
        }
        out[c] = s / corners;
    }
    return out;
}

namespace {

DirichletSet whole_boundary(const StructuredGrid& g, int components) {
    DirichletSet set;
    for (std::size_t n = 0; n < g.node_count(); ++n)
        if (g.on_boundary(n))
            for (int c = 0; c < components; ++c) {
                set.dofs.push_back(n * components + c);
                set.values.push_back(0.0);
            }
    return set;
}

}  // namespace

Eigen::MatrixXd effective_permeability_raw(const StructuredGrid& local, const ElementCoefficients& coeffs) {
    const int d = local.dim();
    const SparseMatrix k = assemble_diffusion(local, coeffs);
    const ConstrainedSystem sys(k, whole_boundary(local, 1));
    const Factorization solver(sys.matrix(), true, 1e-12);

    const Vector zero = Vector::Zero(k.rows());
    std::vector<double> bc(sys.constraints().size());
    Eigen::MatrixXd kstar = Eigen::MatrixXd::Zero(d, d);
    for (int l = 0; l < d; ++l) {
        for (std::size_t i = 0; i < bc.size(); ++i) bc[i] = local.node_coord(sys.constraints().dofs[i])[l];
        const Vector psi = solver.solve(sys.rhs(zero, bc));
        for (std::size_t e = 0; e < local.element_count(); ++e) {
            const Element el = local.element(e);
            const SimplexShape& sh = local.shape(el.permutation);
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
            for (int a = 0; a <= d; ++a)
                for (int j = 0; j < d; ++j) grad[j] += psi[static_cast<Eigen::Index>(el.nodes[a])] * sh.grads[a][j];
            // flux-weighted gradient: (k grad psi_l)_j for tensor coefficients, k d_j psi_l for scalar ones
            const Eigen::VectorXd flux = coeffs.permeability_at(e) * grad;
            kstar.row(l) += sh.volume * flux.transpose();
        }
    }
    return kstar / local.volume();
}

Eigen::MatrixXd effective_permeability(const CellPatch& patch) {
    for (double v : patch.values)
        if (!(v > 0.0)) throw ParameterError("cell " + std::to_string(patch.cell) + ": permeability must be positive");
    const auto coeffs = nodal_coefficients(patch.grid, patch.values, {}, 0.25);
    try {
        const Eigen::MatrixXd raw = effective_permeability_raw(patch.grid, coeffs);
        return 0.5 * (raw + raw.transpose());
    } catch (const NumericError& e) {
        throw NumericError("cell " + std::to_string(patch.cell) + ": " + e.what(), e.residual());
    }
}

Eigen::MatrixXd effective_elasticity(const StructuredGrid& local, const ElementCoefficients& coeffs) {
    const int d = local.dim();
    const int s = voigt_size(d);
    const SparseMatrix a = assemble_elasticity(local, coeffs);
    const ConstrainedSystem sys(a, whole_boundary(local, d));
    const Factorization solver(sys.matrix(), true, 1e-12);

    const Vector zero = Vector::Zero(a.rows());
    std::vector<double> bc(sys.constraints().size());
    std::vector<Vector> solutions;
    for (int slot = 0; slot < s; ++slot) {
        const auto [r, q] = voigt_pair(d, slot);
        // phi = w Lambda^(rq) x, Lambda^(rq) = (e_r e_q^T + e_q e_r^T) / 2
        const double w = voigt_weight(d, slot);
        for (std::size_t i = 0; i < bc.size(); ++i) {
            const std::size_t dof = sys.constraints().dofs[i];
            const Point3 x = local.node_coord(dof / d);
            const int comp = static_cast<int>(dof % d);
            double v = 0.0;
            if (comp == r) v += 0.5 * w * x[q];
            if (comp == q) v += 0.5 * w * x[r];
            bc[i] = v;
        }
        solutions.push_back(solver.solve(sys.rhs(zero, bc)));
    }

    Eigen::MatrixXd cstar = Eigen::MatrixXd::Zero(s, s);
    Eigen::MatrixXd strain_op;
    Eigen::VectorXd local_u(d * (d + 1));
    Eigen::MatrixXd strains(s, s);
    for (std::size_t e = 0; e < local.element_count(); ++e) {
        const Element el = local.element(e);
        const SimplexShape& sh = local.shape(el.permutation);
        strain_operator(d, sh.grads, strain_op);
        for (int slot = 0; slot < s; ++slot) {
            for (int v = 0; v <= d; ++v)
                for (int c = 0; c < d; ++c)
                    local_u[v * d + c] = solutions[slot][static_cast<Eigen::Index>(el.nodes[v] * d + c)];
            strains.col(slot) = strain_op * local_u;
        }
        cstar += sh.volume * strains.transpose() * coeffs.stiffness_at(e) * strains;
    }
    return cstar / local.volume();
}

Eigen::MatrixXd effective_elasticity(const CellPatch& patch, double poisson_ratio) {
    if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) throw ParameterError("Poisson ratio must lie in (0, 0.5)");
    for (double v : patch.values)
        if (!(v > 0.0)) throw ParameterError("cell " + std::to_string(patch.cell) + ": elastic modulus must be positive");
    const auto coeffs = nodal_coefficients(patch.grid, {}, patch.values, poisson_ratio);
    try {
        const Eigen::MatrixXd c = effective_elasticity(patch.grid, coeffs);
        return 0.5 * (c + c.transpose());
    } catch (const NumericError& e) {
        throw NumericError("cell " + std::to_string(patch.cell) + ": " + e.what(), e.residual());
    }
}

std::vector<EffectiveTensors> homogenize_domain(const StructuredGrid& fine, std::span<const double> permeability,
                                                std::span<const double> youngs_modulus,
                                                const StructuredGrid& coarse, double poisson_ratio, int threads) {
    const auto kp = extract_patches(fine, permeability, coarse);
    const auto ep = extract_patches(fine, youngs_modulus, coarse);
    std::vector<EffectiveTensors> out(coarse.cell_count());
    parallel_for(out.size(), threads, [&](std::size_t c) {
        out[c].permeability = effective_permeability(kp[c]);
        out[c].stiffness = effective_elasticity(ep[c], poisson_ratio);
    });
    return out;
}

std::vector<double> upper_triangle(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(triangle_size(static_cast<int>(m.rows()))));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

Eigen::MatrixXd from_upper_triangle(std::span<const double> values, int n) {
    if (static_cast<int>(values.size()) != triangle_size(n)) throw ParameterError("upper-triangle length mismatch");
    Eigen::MatrixXd m(n, n);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) m(i, j) = m(j, i) = values[k++];
    return m;
}

int target_matrix_size(Target t, int dim) { return t == Target::Permeability ? dim : voigt_size(dim); }

int target_outputs(Target t, int dim) { return triangle_size(target_matrix_size(t, dim)); }

const char* target_name(Target t) { return t == Target::Permeability ? "permeability" : "elasticity"; }

Target parse_target(std::string_view name) {
    if (name == "permeability" || name == "k" || name == "perm") return Target::Permeability;
    if (name == "elasticity" || name == "E" || name == "C" || name == "elast") return Target::Elasticity;
    throw ParameterError("unknown target '" + std::string(name) + "' (expected permeability or elasticity)");
}

}  // namespace nh
