#include "nh/random_field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "nh/errors.hpp"
#include "nh/rng.hpp"

namespace nh {

void CovarianceSpec::validate() const {
    if (!(sigma2 > 0.0)) throw ParameterError("covariance variance sigma2 must be positive");
    if (dim() < 1 || dim() > 3) throw ParameterError("covariance needs 1 to 3 correlation lengths");
    for (double l2 : correlation_lengths_sq)
        if (!(l2 > 0.0)) throw ParameterError("correlation lengths must be positive");
}

double CovarianceSpec::operator()(const Point3& x, const Point3& y) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
        const double dx = x[i] - y[i];
        s += dx * dx / (2.0 * correlation_lengths_sq[i]);
    }
    return sigma2 * std::exp(-s);
}

namespace {

struct AxisSpectrum {
    Eigen::VectorXd values;   // descending, clamped at 0
    Eigen::MatrixXd vectors;  // matching columns
};

AxisSpectrum axis_spectrum(const StructuredGrid& grid, int axis, double l2) {
    const int n = grid.nodes(axis);
    const double h = grid.spacing(axis);
    Eigen::MatrixXd r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double dx = (i - j) * h;
            r(i, j) = std::exp(-dx * dx / (2.0 * l2));
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    if (es.info() != Eigen::Success)
        throw NumericError("KL eigensolver did not converge on axis " + std::to_string(axis));
    AxisSpectrum out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (int k = 0; k < n; ++k) {
        const int src = n - 1 - k;  // Eigen sorts ascending
        out.values[k] = std::max(es.eigenvalues()[src], 0.0);
        Eigen::VectorXd v = es.eigenvectors().col(src);
        // fix the sign so the basis does not depend on the LAPACK-style sign choice
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        out.vectors.col(k) = v;
    }
    return out;
}

}  // namespace

KLBasis build_kl_basis(const StructuredGrid& grid, const CovarianceSpec& cov, double energy_fraction,
                       std::size_t max_modes) {
    cov.validate();
    if (cov.dim() != grid.dim())
        throw ParameterError("covariance dimension does not match grid dimension");
    if (!(energy_fraction > 0.0 && energy_fraction <= 1.0))
        throw ParameterError("energy_fraction must lie in (0, 1]");
    if (max_modes == 0) throw ParameterError("max_modes must be positive");

    const int d = grid.dim();
    std::array<AxisSpectrum, 3> axes;
    for (int a = 0; a < d; ++a) axes[a] = axis_spectrum(grid, a, cov.correlation_lengths_sq[a]);

    struct Candidate {
        double value;
        Index3 idx;
    };
    std::vector<Candidate> all;
    all.reserve(grid.node_count());
    Index3 idx{0, 0, 0};
    const std::array<int, 3> n{grid.nodes(0), grid.nodes(1), grid.nodes(2)};
    for (idx[2] = 0; idx[2] < (d > 2 ? n[2] : 1); ++idx[2])
        for (idx[1] = 0; idx[1] < (d > 1 ? n[1] : 1); ++idx[1])
            for (idx[0] = 0; idx[0] < n[0]; ++idx[0]) {
                double v = cov.sigma2;
                for (int a = 0; a < d; ++a) v *= axes[a].values[idx[a]];
                all.push_back({v, idx});
            }
    // ties broken by axis indices so ordering is platform independent
    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (a.value != b.value) return a.value > b.value;
        return std::lexicographical_compare(a.idx.rbegin(), a.idx.rend(), b.idx.rbegin(), b.idx.rend());
    });

    const double lambda1 = all.front().value;
    if (!(lambda1 > 0.0)) throw NumericError("covariance has no positive eigenvalue");
    const double cutoff = 1e-12 * lambda1;
    std::size_t kept = 0;
    double total = 0.0;
    while (kept < all.size() && all[kept].value >= cutoff) total += all[kept++].value;

    KLBasis basis;
    basis.grid_ = grid;
    basis.energy_fraction_ = energy_fraction;
    double acc = 0.0;
    for (std::size_t k = 0; k < kept && basis.eigenvalues_.size() < max_modes; ++k) {
        basis.eigenvalues_.push_back(all[k].value);
        basis.mode_axes_.push_back(all[k].idx);
        acc += all[k].value;
        if (acc >= energy_fraction * total) break;
    }
    basis.captured_ = acc / total;
    if (basis.eigenvalues_.size() == max_modes && acc < energy_fraction * total)
        spdlog::warn("KL basis capped at {} modes, captures {:.4f} of the variance", max_modes, basis.captured_);

    for (int a = 0; a < d; ++a) {
        // keep only the axis vectors that appear in some retained mode
        int used = 0;
        for (const auto& m : basis.mode_axes_) used = std::max(used, m[a] + 1);
        basis.axis_vectors_[a] = axes[a].vectors.leftCols(used);
    }
    for (int a = d; a < 3; ++a) basis.axis_vectors_[a] = Eigen::MatrixXd::Ones(1, 1);
    return basis;
}

std::vector<double> KLBasis::mode(std::size_t k) const {
    if (k >= mode_count()) throw ParameterError("KL mode index out of range");
    std::vector<double> w(k + 1, 0.0);
    w[k] = 1.0;
    std::vector<double> out;
    combine(w, out);
    return out;
}

void KLBasis::combine(std::span<const double> weights, std::vector<double>& out) const {
    if (weights.size() > mode_count()) throw ParameterError("more KL weights than modes");
    const int nx = grid_.nodes(0), ny = grid_.nodes(1), nz = grid_.nodes(2);
    out.assign(grid_.node_count(), 0.0);
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double c = weights[k];
        if (c == 0.0) continue;
        const Index3& m = mode_axes_[k];
        const double* vx = axis_vectors_[0].col(m[0]).data();
        const double* vy = axis_vectors_[1].col(m[1]).data();
        const double* vz = axis_vectors_[2].col(m[2]).data();
        double* dst = out.data();
        for (int iz = 0; iz < nz; ++iz) {
            const double wz = c * vz[iz];
            for (int iy = 0; iy < ny; ++iy) {
                const double wy = wz * vy[iy];
                for (int ix = 0; ix < nx; ++ix) *dst++ += wy * vx[ix];
            }
        }
    }
}

FieldRealization realize_field(const KLBasis& basis, std::vector<double> coefficients) {
    if (coefficients.size() != basis.mode_count())
        throw ParameterError("coefficient count must equal KL mode count");
    std::vector<double> weights(coefficients.size());
    for (std::size_t k = 0; k < weights.size(); ++k)
        weights[k] = std::sqrt(basis.eigenvalues()[k]) * coefficients[k];
    FieldRealization r;
    basis.combine(weights, r.values);
    r.coefficients = std::move(coefficients);
    return r;
}

FieldRealization sample_field(const KLBasis& basis, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> nu(basis.mode_count());
    for (auto& v : nu) v = rng.normal();
    FieldRealization r = realize_field(basis, std::move(nu));
    r.seed = seed;
    return r;
}

PropertyFields field_to_properties(const FieldRealization& y, double base_modulus, double randomness_strength) {
    if (!(base_modulus > 0.0)) throw ParameterError("base modulus must be positive");
    if (!(randomness_strength > 0.0)) throw ParameterError("randomness strength must be positive");
    PropertyFields p;
    p.base_modulus = base_modulus;
    p.randomness_strength = randomness_strength;
    p.permeability.resize(y.values.size());
    p.elastic_modulus.resize(y.values.size());
    const double floor = kModulusFloorFactor * base_modulus;
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < y.values.size(); ++i) {
        p.permeability[i] = std::exp(y.values[i]);
        const double e = base_modulus + randomness_strength * y.values[i];
        if (e < floor) ++clamped;
        p.elastic_modulus[i] = std::max(e, floor);
    }
    if (clamped > 0) spdlog::warn("elastic modulus clamped at {} on {} nodes", floor, clamped);
    return p;
}

}  // namespace nh
