#include "nh/poro.hpp"

#include <cmath>
#include <string>

#include "nh/errors.hpp"

namespace nh {

void TimeStepping::validate() const {
    if (!(t_max > 0.0)) throw ParameterError("T_max must be positive");
    if (n_steps < 1) throw ParameterError("number of time steps must be positive");
}

PoroBoundary PoroBoundary::standard(int dim, double inlet) {
    PoroBoundary b;
    b.pressure.push_back(BoundaryCondition::fixed(Face::Top, inlet));
    b.displacement.push_back(BoundaryCondition::fixed_component(Face::Left, 0, 0.0));
    b.displacement.push_back(BoundaryCondition::fixed_component(Face::Bottom, 1, 0.0));
    if (dim == 3) b.displacement.push_back(BoundaryCondition::fixed_component(Face::Back, 2, 0.0));
    return b;
}

namespace {

SparseMatrix block_system(const Forms& f, double tau) {
    const Eigen::Index np = f.B.rows(), nu = f.A.rows();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(f.B.nonZeros() + f.M.nonZeros() + f.D.nonZeros() + f.G.nonZeros() +
                                       f.A.nonZeros()));
    auto add = [&](const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0, double s) {
        for (Eigen::Index col = 0; col < m.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(m, col); it; ++it) t.emplace_back(r0 + it.row(), c0 + col, s * it.value());
    };
    add(f.M, 0, 0, 1.0 / tau);
    add(f.B, 0, 0, 1.0);
    add(f.D, 0, np, 1.0 / tau);
    add(f.G, np, 0, 1.0);
    add(f.A, np, np, 1.0);
    SparseMatrix k(np + nu, np + nu);
    k.setFromTriplets(t.begin(), t.end());
    k.makeCompressed();
    return k;
}

}  // namespace

std::vector<PoroState> solve_poroelasticity(const StructuredGrid& grid, const ElementCoefficients& coeffs,
                                            const BiotConstants& constants, const PoroBoundary& bcs,
                                            const TimeStepping& ts) {
    ts.validate();
    const int d = grid.dim();
    Forms forms = assemble_forms(grid, coeffs, constants);
    if (ts.lumped_mass) forms.M = assemble_mass(grid, 1.0 / constants.biot_modulus, true);
    const double tau = ts.step();
    const auto np = static_cast<Eigen::Index>(grid.node_count());
    const Eigen::Index nu = np * d;

    DirichletSet constraints = collect_dirichlet(grid, bcs.pressure, 1, 0);
    constraints.merge(collect_dirichlet(grid, bcs.displacement, d, static_cast<std::size_t>(np)));
    const ConstrainedSystem sys(block_system(forms, tau), constraints);
    const Factorization solver(sys.matrix(), false, 1e-8);

    std::vector<PoroState> states;
    states.reserve(static_cast<std::size_t>(ts.n_steps) + 1);
    PoroState s0;
    s0.pressure.assign(static_cast<std::size_t>(np), ts.p_initial);
    s0.displacement.assign(static_cast<std::size_t>(nu), 0.0);
    // consistent initial displacement: A u0 = -G p0 (zero for uniform p0 and natural traction)
    if (ts.p_initial != 0.0) {
        const Vector p0 = Vector::Constant(np, ts.p_initial);
        const ConstrainedSystem elastic(forms.A, collect_dirichlet(grid, bcs.displacement, d, 0));
        const Vector u0 = linear_solve(elastic.matrix(), elastic.rhs(-(forms.G * p0)), {.symmetric = true});
        s0.displacement.assign(u0.data(), u0.data() + u0.size());
    }
    states.push_back(s0);

    Vector p = Eigen::Map<const Vector>(s0.pressure.data(), np);
    Vector u = Eigen::Map<const Vector>(s0.displacement.data(), nu);
    Vector rhs(np + nu);
    for (int n = 1; n <= ts.n_steps; ++n) {
        rhs.head(np) = forms.F + (forms.M * p + forms.D * u) / tau;
        rhs.tail(nu).setZero();
        Vector x;
        try {
            x = solver.solve(sys.rhs(rhs));
        } catch (const NumericError& e) {
            throw NumericError("time step " + std::to_string(n) + ": " + e.what(), e.residual());
        }
        p = x.head(np);
        u = x.tail(nu);
        PoroState s;
        s.time = n * tau;
        s.pressure.assign(p.data(), p.data() + np);
        s.displacement.assign(u.data(), u.data() + nu);
        states.push_back(std::move(s));
    }
    return states;
}

std::vector<PoroState> solve_fine(const StructuredGrid& grid, std::span<const double> permeability,
                                  std::span<const double> youngs_modulus, double poisson_ratio,
                                  const BiotConstants& constants, const PoroBoundary& bcs, const TimeStepping& ts) {
    if (permeability.size() != grid.node_count() || youngs_modulus.size() != grid.node_count())
        throw ParameterError("field arrays must match grid node count");
    return solve_poroelasticity(grid, nodal_coefficients(grid, permeability, youngs_modulus, poisson_ratio),
                                constants, bcs, ts);
}

namespace {

void require_spd(const Eigen::MatrixXd& m, const char* what, std::size_t cell) {
    const double scale = std::max(m.norm(), 1e-300);
    const bool symmetric = (m - m.transpose()).norm() <= 1e-8 * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (!symmetric || llt.info() != Eigen::Success)
        throw ParameterError(std::string("effective ") + what + " tensor of coarse cell " + std::to_string(cell) +
                             " is not symmetric positive definite");
}

}  // namespace

std::vector<PoroState> solve_coarse(const StructuredGrid& coarse, const std::vector<EffectiveTensors>& effective,
                                    const BiotConstants& constants, const PoroBoundary& bcs, const TimeStepping& ts) {
    if (effective.size() != coarse.cell_count())
        throw ParameterError("need one effective tensor pair per coarse cell (" + std::to_string(coarse.cell_count()) +
                             "), got " + std::to_string(effective.size()));
    std::vector<Eigen::MatrixXd> k, c;
    k.reserve(effective.size());
    c.reserve(effective.size());
    for (std::size_t i = 0; i < effective.size(); ++i) {
        require_spd(effective[i].permeability, "permeability", i);
        require_spd(effective[i].stiffness, "elasticity", i);
        k.push_back(effective[i].permeability);
        c.push_back(effective[i].stiffness);
    }
    return solve_poroelasticity(coarse, cellwise_coefficients(coarse, k, c), constants, bcs, ts);
}

PoroState prolongate_state(const StructuredGrid& coarse, const PoroState& state, const StructuredGrid& fine) {
    PoroState out;
    out.time = state.time;
    out.pressure = prolongate(coarse, state.pressure, fine, 1);
    out.displacement = prolongate(coarse, state.displacement, fine, coarse.dim());
    return out;
}

ErrorReport relative_errors(const StructuredGrid& grid, const ElementCoefficients& coeffs, const PoroState& reference,
                            const PoroState& approx) {
    const int d = grid.dim();
    const auto np = static_cast<Eigen::Index>(grid.node_count());
    if (reference.pressure.size() != static_cast<std::size_t>(np) || approx.pressure.size() != reference.pressure.size() ||
        reference.displacement.size() != static_cast<std::size_t>(np * d) ||
        approx.displacement.size() != reference.displacement.size())
        throw ParameterError("states do not match the comparison grid");

    const SparseMatrix mass = assemble_mass(grid);
    const SparseMatrix diffusion = assemble_diffusion(grid, coeffs);
    const SparseMatrix stiffness = assemble_elasticity(grid, coeffs);

    const Eigen::Map<const Vector> pf(reference.pressure.data(), np), pc(approx.pressure.data(), np);
    const Eigen::Map<const Vector> uf(reference.displacement.data(), np * d), uc(approx.displacement.data(), np * d);
    const Vector ep = pf - pc, eu = uf - uc;

    auto quad = [](const SparseMatrix& m, const Vector& x) { return x.dot(m * x); };
    auto vector_l2 = [&](const Vector& x) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
            Vector comp(np);
            for (Eigen::Index n = 0; n < np; ++n) comp[n] = x[n * d + c];
            s += quad(mass, comp);
        }
        return s;
    };
    auto ratio = [](double num, double den, const char* what) {
        if (!(den > 0.0)) throw NumericError(std::string("reference ") + what + " norm is zero; relative error undefined");
        return 100.0 * std::sqrt(std::max(num, 0.0) / den);
    };

    ErrorReport r;
    r.p_l2 = ratio(quad(mass, ep), quad(mass, pf), "pressure L2");
    r.p_energy = ratio(quad(diffusion, ep), quad(diffusion, pf), "pressure energy");
    r.u_l2 = ratio(vector_l2(eu), vector_l2(uf), "displacement L2");
    r.u_energy = ratio(quad(stiffness, eu), quad(stiffness, uf), "displacement energy");
    return r;
}

ErrorReport error_norms(const StructuredGrid& fine, const PoroState& fine_state, const StructuredGrid& coarse,
                        const PoroState& coarse_state, const ElementCoefficients& fine_coeffs) {
    return relative_errors(fine, fine_coeffs, fine_state, prolongate_state(coarse, coarse_state, fine));
}

}  // namespace nh
