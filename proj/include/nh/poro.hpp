#pragma once

#include <span>
#include <vector>

#include "nh/fem.hpp"
#include "nh/grid.hpp"
#include "nh/homogenize.hpp"

namespace nh {

struct TimeStepping {
    double t_max = 0.001;
    int n_steps = 20;
    double p_initial = 0.0;  // p_0
    double p_inlet = 1.0;    // p_1
    bool lumped_mass = false;  // row-sum lumping of the storage term

    double step() const { return t_max / n_steps; }
    void validate() const;
};

/// Boundary data of the coupled problem. Faces not listed are natural
/// (zero flux for p, zero traction for u).
struct PoroBoundary {
    std::vector<BoundaryCondition> pressure;
    std::vector<BoundaryCondition> displacement;

    /// Rollers on left/bottom (and back in 3D), p = inlet on top.
    static PoroBoundary standard(int dim, double inlet);
};

struct PoroState {
    double time = 0.0;
    std::vector<double> pressure;      // one value per node
    std::vector<double> displacement;  // d values per node, interleaved
};

/// Implicit Euler in time, monolithic in (p, u):
///   [M/tau + B, D/tau] [p]^{n+1}   [F + (M p^n + D u^n)/tau]
///   [G,         A    ] [u]       = [0                      ]
/// Returns the initial state followed by one state per step.
std::vector<PoroState> solve_poroelasticity(const StructuredGrid& grid, const ElementCoefficients& coeffs,
                                            const BiotConstants& constants, const PoroBoundary& bcs,
                                            const TimeStepping& ts);

/// Fine-grid solve from nodal k and E with a constant Poisson ratio.
std::vector<PoroState> solve_fine(const StructuredGrid& grid, std::span<const double> permeability,
                                  std::span<const double> youngs_modulus, double poisson_ratio,
                                  const BiotConstants& constants, const PoroBoundary& bcs, const TimeStepping& ts);

/// Coarse-grid solve with one effective tensor pair per coarse cell. Throws
/// ParameterError naming the first cell whose tensor is not symmetric positive definite.
std::vector<PoroState> solve_coarse(const StructuredGrid& coarse, const std::vector<EffectiveTensors>& effective,
                                    const BiotConstants& constants, const PoroBoundary& bcs, const TimeStepping& ts);

/// Relative errors in percent.
struct ErrorReport {
    double p_l2 = 0.0;
    double p_energy = 0.0;
    double u_l2 = 0.0;
    double u_energy = 0.0;
};

/// Errors of `approx` against `reference`, both nodal on `grid`:
///   e_p L2^2     = int (p_f - p)^2 / int p_f^2
///   e_p energy^2 = int k grad e . grad e / int k grad p_f . grad p_f
///   e_u L2^2     = int |u_f - u|^2 / int |u_f|^2
///   e_u energy^2 = int sigma(e) : eps(e) / int sigma(u_f) : eps(u_f)
/// with k and C taken from `coeffs`. A zero reference norm throws NumericError.
ErrorReport relative_errors(const StructuredGrid& grid, const ElementCoefficients& coeffs, const PoroState& reference,
                            const PoroState& approx);

/// Interpolates the coarse state onto the fine grid, then compares.
ErrorReport error_norms(const StructuredGrid& fine, const PoroState& fine_state, const StructuredGrid& coarse,
                        const PoroState& coarse_state, const ElementCoefficients& fine_coeffs);

/// Coarse state expressed on fine nodes by P1 interpolation.
PoroState prolongate_state(const StructuredGrid& coarse, const PoroState& state, const StructuredGrid& fine);

}  // namespace nh
