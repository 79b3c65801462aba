#include <gtest/gtest.h>

#include <cmath>

#include "nh/errors.hpp"
#include "nh/homogenize.hpp"
#include "nh/poro.hpp"
#include "nh/random_field.hpp"

using namespace nh;

namespace {

PropertyFields desk_field(const StructuredGrid& g, std::uint64_t seed) {
    const auto b = build_kl_basis(g, CovarianceSpec{2.0, std::vector<double>(g.dim(), 0.2)});
    return field_to_properties(sample_field(b, seed));
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Exact P1 L2 norm squared by per-triangle formula |T|/12 (sum e_a^2 + (sum e_a)^2).
double p1_l2_squared(const StructuredGrid& g, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        const Element el = g.element(e);
        double sq = 0.0, sum = 0.0;
        for (int a = 0; a < 3; ++a) {
            sq += v[el.nodes[a]] * v[el.nodes[a]];
            sum += v[el.nodes[a]];
        }
        s += g.shape(el.permutation).volume / 12.0 * (sq + sum * sum);
    }
    return s;
}

}  // namespace

TEST(Poro, ZeroDataGivesZeroStateAtEveryStep) {
    for (int d : {2, 3}) {
        const auto g = StructuredGrid::unit(d, d == 2 ? 8 : 3);
        const auto f = desk_field(g, 1);
        TimeStepping ts;
        ts.p_inlet = 0.0;
        const auto states = solve_fine(g, f.permeability, f.elastic_modulus, 0.25, BiotConstants{},
                                       PoroBoundary::standard(d, 0.0), ts);
        ASSERT_EQ(states.size(), 21u);
        for (const auto& s : states) {
            EXPECT_EQ(max_abs(s.pressure), 0.0);
            EXPECT_EQ(max_abs(s.displacement), 0.0);
        }
        EXPECT_DOUBLE_EQ(states.back().time, 0.001);
    }
}

TEST(Poro, SteadyLimitIsDiscreteHarmonic) {
    const auto g = StructuredGrid::unit(2, 10);
    const std::vector<double> k(g.node_count(), 1.0), e(g.node_count(), 10.0);
    PoroBoundary bcs = PoroBoundary::standard(2, 1.0);
    bcs.pressure.push_back(BoundaryCondition::fixed(Face::Bottom, 0.0));
    TimeStepping ts;
    ts.t_max = 1e4;
    ts.n_steps = 10;
    const auto states = solve_fine(g, k, e, 0.25, BiotConstants{}, bcs, ts);

    const SparseMatrix b = assemble_diffusion(g, nodal_coefficients(g, k, {}, 0.25));
    const ConstrainedSystem sys(b, collect_dirichlet(g, bcs.pressure, 1));
    const Vector lap = linear_solve(sys.matrix(), sys.rhs(Vector::Zero(g.node_count())));
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        EXPECT_NEAR(states.back().pressure[n], lap[n], 1e-8);
        EXPECT_NEAR(lap[n], g.node_coord(n)[1], 1e-10);  // and that is p = y
    }
}

TEST(Poro, ImplicitEulerIsFirstOrderInTime) {
    const auto g = StructuredGrid::unit(2, 8);
    const auto f = desk_field(g, 2);
    std::vector<std::vector<double>> finals;
    for (int n : {5, 10, 20, 40}) {
        TimeStepping ts;
        ts.t_max = 0.05;
        ts.n_steps = n;
        finals.push_back(solve_fine(g, f.permeability, f.elastic_modulus, 0.25, BiotConstants{},
                                    PoroBoundary::standard(2, 1.0), ts)
                             .back()
                             .pressure);
    }
    auto diff = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t i = 0; i < finals[a].size(); ++i) s += std::pow(finals[a][i] - finals[b][i], 2);
        return std::sqrt(s);
    };
    for (std::size_t i = 0; i + 2 < finals.size(); ++i) {
        const double rate = std::log2(diff(i, i + 1) / diff(i + 1, i + 2));
        EXPECT_GE(rate, 0.8) << i;
        EXPECT_LE(rate, 1.2) << i;
    }
}

// Consistent mass only keeps p in [0, 1] once tau is large against h^2 (at the
// default tau that means the desk fine grid); lumped mass keeps it on any grid.
TEST(Poro, PressureObeysMaximumPrinciple) {
    for (const auto& [n, lumped] : {std::pair{128, false}, std::pair{16, true}, std::pair{8, true}}) {
        const auto g = StructuredGrid::unit(2, n);
        const auto f = desk_field(g, 3);
        TimeStepping ts;
        ts.lumped_mass = lumped;
        const auto states = solve_fine(g, f.permeability, f.elastic_modulus, 0.25, BiotConstants{},
                                       PoroBoundary::standard(2, 1.0), ts);
        double lo = 1.0, hi = 0.0;
        for (const auto& s : states)
            for (double p : s.pressure) {
                lo = std::min(lo, p);
                hi = std::max(hi, p);
            }
        EXPECT_GE(lo, -1e-10) << n;
        EXPECT_LE(hi, 1.0 + 1e-10) << n;
    }
}

TEST(Poro, UniformInitialPressureIsAnEquilibrium) {
    const auto g = StructuredGrid::unit(2, 6);
    const auto f = desk_field(g, 4);
    TimeStepping ts;
    ts.p_initial = 1.0;
    const auto states = solve_fine(g, f.permeability, f.elastic_modulus, 0.25, BiotConstants{},
                                   PoroBoundary::standard(2, 1.0), ts);
    // a uniform pressure exerts no force and matches the inlet: nothing moves
    for (const auto& s : states) {
        for (double p : s.pressure) EXPECT_NEAR(p, 1.0, 1e-9);
        EXPECT_LT(max_abs(s.displacement), 1e-12);
    }
}

TEST(Poro, RejectsBadSteppingAndConstants) {
    TimeStepping ts;
    ts.n_steps = 0;
    EXPECT_THROW(ts.validate(), ParameterError);
    ts.n_steps = 10;
    ts.t_max = -1.0;
    EXPECT_THROW(ts.validate(), ParameterError);
}

TEST(ErrorNorms, IdenticalStatesGiveZero) {
    const auto g = StructuredGrid::unit(2, 8);
    const auto f = desk_field(g, 5);
    const auto s = solve_fine(g, f.permeability, f.elastic_modulus, 0.25, BiotConstants{}, PoroBoundary::standard(2, 1.0),
                              TimeStepping{})
                       .back();
    const auto r = relative_errors(g, nodal_coefficients(g, f.permeability, f.elastic_modulus, 0.25), s, s);
    EXPECT_EQ(r.p_l2, 0.0);
    EXPECT_EQ(r.p_energy, 0.0);
    EXPECT_EQ(r.u_l2, 0.0);
    EXPECT_EQ(r.u_energy, 0.0);
}

TEST(ErrorNorms, TenPercentScalingAndIndependentQuadrature) {
    const auto g = StructuredGrid::unit(2, 6);
    const auto f = desk_field(g, 6);
    const auto coeffs = nodal_coefficients(g, f.permeability, f.elastic_modulus, 0.25);
    PoroState ref, approx;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        const auto x = g.node_coord(n);
        ref.pressure.push_back(1.0 + x[0] * x[1]);
        ref.displacement.push_back(x[0] - 0.3 * x[1]);
        ref.displacement.push_back(0.2 * x[0] * x[0]);
    }
    approx = ref;
    for (auto& v : approx.pressure) v *= 1.1;
    for (auto& v : approx.displacement) v *= 1.1;
    const auto r = relative_errors(g, coeffs, ref, approx);
    EXPECT_NEAR(r.p_l2, 10.0, 1e-10);
    EXPECT_NEAR(r.p_energy, 10.0, 1e-10);
    EXPECT_NEAR(r.u_l2, 10.0, 1e-10);
    EXPECT_NEAR(r.u_energy, 10.0, 1e-10);

    // a non-uniform perturbation against hand-evaluated integrals
    approx = ref;
    std::vector<double> e(g.node_count());
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        approx.pressure[n] += std::sin(static_cast<double>(n));
        e[n] = -std::sin(static_cast<double>(n));
    }
    const double expect = 100.0 * std::sqrt(p1_l2_squared(g, e) / p1_l2_squared(g, ref.pressure));
    EXPECT_NEAR(relative_errors(g, coeffs, ref, approx).p_l2, expect, 1e-12 * expect);
}

TEST(ErrorNorms, ZeroReferenceNormThrows) {
    const auto g = StructuredGrid::unit(2, 4);
    const auto coeffs = nodal_coefficients(g, std::vector<double>(g.node_count(), 1.0),
                                           std::vector<double>(g.node_count(), 1.0), 0.25);
    PoroState s;
    s.pressure.assign(g.node_count(), 1.0);  // constant: zero energy norm
    s.displacement.assign(g.node_count() * 2, 1.0);
    EXPECT_THROW(relative_errors(g, coeffs, s, s), NumericError);
}

TEST(Coarse, HomogeneousEffectiveTensorsReproduceDirectCoarseSolve) {
    const auto fine = StructuredGrid::unit(2, 32), coarse = StructuredGrid::unit(2, 8);
    const std::vector<double> kf(fine.node_count(), 2.0), ef(fine.node_count(), 10.0);
    const auto eff = homogenize_domain(fine, kf, ef, coarse, 0.25);
    const auto bcs = PoroBoundary::standard(2, 1.0);
    const auto cs = solve_coarse(coarse, eff, BiotConstants{}, bcs, TimeStepping{}).back();
    const std::vector<double> kc(coarse.node_count(), 2.0), ec(coarse.node_count(), 10.0);
    const auto direct = solve_fine(coarse, kc, ec, 0.25, BiotConstants{}, bcs, TimeStepping{}).back();
    for (std::size_t i = 0; i < cs.pressure.size(); ++i) EXPECT_NEAR(cs.pressure[i], direct.pressure[i], 1e-8);
    for (std::size_t i = 0; i < cs.displacement.size(); ++i) EXPECT_NEAR(cs.displacement[i], direct.displacement[i], 1e-8);
}

TEST(Coarse, ZeroInletGivesZeroSolution) {
    const auto coarse = StructuredGrid::unit(2, 4);
    std::vector<EffectiveTensors> eff(coarse.cell_count(),
                                      {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(3, 3) * 5.0});
    TimeStepping ts;
    ts.p_inlet = 0.0;
    const auto s = solve_coarse(coarse, eff, BiotConstants{}, PoroBoundary::standard(2, 0.0), ts).back();
    EXPECT_EQ(max_abs(s.pressure), 0.0);
    EXPECT_EQ(max_abs(s.displacement), 0.0);
}

TEST(Coarse, NonSpdTensorNamesTheCell) {
    const auto coarse = StructuredGrid::unit(2, 3);
    std::vector<EffectiveTensors> eff(coarse.cell_count(),
                                      {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(3, 3)});
    eff[5].permeability(1, 1) = -0.5;
    try {
        solve_coarse(coarse, eff, BiotConstants{}, PoroBoundary::standard(2, 1.0), TimeStepping{});
        FAIL() << "expected ParameterError";
    } catch (const ParameterError& e) {
        EXPECT_NE(std::string(e.what()).find("cell 5"), std::string::npos) << e.what();
    }
    eff[5].permeability(1, 1) = 1.0;
    eff[2].stiffness(0, 1) = 0.5;  // asymmetric
    EXPECT_THROW(solve_coarse(coarse, eff, BiotConstants{}, PoroBoundary::standard(2, 1.0), TimeStepping{}),
                 ParameterError);
    eff.pop_back();
    EXPECT_THROW(solve_coarse(coarse, eff, BiotConstants{}, PoroBoundary::standard(2, 1.0), TimeStepping{}),
                 ParameterError);
}

TEST(Coarse, EnergyErrorDoesNotGrowUnderCoarseRefinement) {
    const auto fine = StructuredGrid::unit(2, 80);
    const auto f = desk_field(fine, 1001);
    const auto bcs = PoroBoundary::standard(2, 1.0);
    const auto fs = solve_fine(fine, f.permeability, f.elastic_modulus, 0.25, BiotConstants{}, bcs, TimeStepping{}).back();
    const auto coeffs = nodal_coefficients(fine, f.permeability, f.elastic_modulus, 0.25);
    std::vector<ErrorReport> r;
    for (int nc : {5, 10}) {
        const auto coarse = StructuredGrid::unit(2, nc);
        const auto eff = homogenize_domain(fine, f.permeability, f.elastic_modulus, coarse, 0.25);
        const auto cs = solve_coarse(coarse, eff, BiotConstants{}, bcs, TimeStepping{}).back();
        r.push_back(error_norms(fine, fs, coarse, cs, coeffs));
    }
    EXPECT_LE(r[1].p_energy, 1.05 * r[0].p_energy);
    EXPECT_LE(r[1].u_energy, 1.05 * r[0].u_energy);
}
