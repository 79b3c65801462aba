#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nh/grid.hpp"

namespace nh {

/// Separable squared-exponential covariance
/// R(x,y) = sigma2 * exp(-sum_i |x_i - y_i|^2 / (2 l_i^2)).
struct CovarianceSpec {
    double sigma2 = 2.0;
    std::vector<double> correlation_lengths_sq;  // l_i^2, one per axis

    int dim() const noexcept { return static_cast<int>(correlation_lengths_sq.size()); }
    void validate() const;
    double operator()(const Point3& x, const Point3& y) const;
};

inline constexpr double kDefaultEnergyFraction = 0.95;
inline constexpr std::size_t kMaxKlModes = 512;

/// Truncated discrete Karhunen-Loeve basis on the nodes of a structured grid.
/// Modes are tensor products of per-axis eigenvectors and are kept implicit;
/// `mode()` materializes one on demand.
class KLBasis {
public:
    KLBasis() = default;

    const StructuredGrid& grid() const noexcept { return grid_; }
    std::size_t mode_count() const noexcept { return eigenvalues_.size(); }
    std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
    double energy_fraction() const noexcept { return energy_fraction_; }
    /// Fraction of the total (non-discarded) eigenvalue mass actually retained.
    double captured_energy() const noexcept { return captured_; }

    std::vector<double> mode(std::size_t k) const;

    /// out = sum_k weights[k] * phi_k, over the first weights.size() modes.
    void combine(std::span<const double> weights, std::vector<double>& out) const;

private:
    friend KLBasis build_kl_basis(const StructuredGrid&, const CovarianceSpec&, double, std::size_t);

    StructuredGrid grid_;
    std::vector<double> eigenvalues_;
    std::vector<Index3> mode_axes_;                 // per-axis eigenvector index of each mode
    std::array<Eigen::MatrixXd, 3> axis_vectors_;   // columns are orthonormal 1D eigenvectors
    double energy_fraction_ = 1.0;
    double captured_ = 1.0;
};

/// Eigen-decompose the covariance restricted to the grid nodes, using the
/// Kronecker structure: d dense 1D eigenproblems instead of one N x N problem.
/// Eigenvalues below 1e-12 * lambda_1 are dropped, then the basis is cut at the
/// smallest count reaching `energy_fraction` of the remaining mass, capped at `max_modes`.
KLBasis build_kl_basis(const StructuredGrid& grid, const CovarianceSpec& cov,
                       double energy_fraction = kDefaultEnergyFraction, std::size_t max_modes = kMaxKlModes);

struct FieldRealization {
    std::vector<double> values;        // nodal Y
    std::uint64_t seed = 0;
    std::vector<double> coefficients;  // nu_k
};

/// Y = sum_k sqrt(lambda_k) nu_k phi_k with nu_k ~ N(0,1) drawn from `seed`.
FieldRealization sample_field(const KLBasis& basis, std::uint64_t seed);

/// Same expansion with caller-supplied coefficients.
FieldRealization realize_field(const KLBasis& basis, std::vector<double> coefficients);

struct PropertyFields {
    std::vector<double> permeability;     // k = exp(Y)
    std::vector<double> elastic_modulus;  // E = max(E_bar + alpha Y, 1e-3 E_bar)
    double base_modulus = 10.0;
    double randomness_strength = 1.0;
};

inline constexpr double kDefaultBaseModulus = 10.0;
inline constexpr double kDefaultRandomness = 1.0;
inline constexpr double kModulusFloorFactor = 1e-3;

PropertyFields field_to_properties(const FieldRealization& y, double base_modulus = kDefaultBaseModulus,
                                   double randomness_strength = kDefaultRandomness);

}  // namespace nh
