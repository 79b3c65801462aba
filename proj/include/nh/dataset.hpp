#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "nh/grid.hpp"
#include "nh/homogenize.hpp"

namespace nh {

/// Min-max scaling: one global range for the inputs, one range per output component.
/// A zero-width range is flagged as degenerate and maps every value to 0.
struct Scaler {
    double input_min = 0.0;
    double input_max = 1.0;
    bool input_degenerate = false;
    std::vector<double> output_min;
    std::vector<double> output_max;
    std::vector<std::uint8_t> output_degenerate;

    std::size_t output_count() const noexcept { return output_min.size(); }

    /// Fit to raw inputs (any number of samples, concatenated) and raw outputs
    /// (rows of `outputs` values each).
    static Scaler fit(std::span<const double> inputs, std::span<const double> outputs, std::size_t outputs_per_sample);

    void scale_input(std::span<double> x) const;
    void scale_output(std::span<double> y) const;
    /// Inverse of scale_output. Degenerate components come back as their constant value.
    void unscale_output(std::span<double> y) const;

    bool operator==(const Scaler&) const = default;
};

struct Sample {
    std::uint64_t id = 0;           // realization * N_c + cell
    std::uint32_t realization = 0;
    std::uint32_t cell = 0;
    std::vector<double> x;          // N_l^d scaled pixels, axis 0 fastest
    std::vector<double> y;          // scaled upper-triangle tensor entries

    bool operator==(const Sample&) const = default;
};

/// Unscaled sample as produced by homogenization.
struct RawSample {
    std::uint32_t realization = 0;
    std::uint32_t cell = 0;
    std::vector<double> pixels;
    std::vector<double> targets;
};

struct Dataset {
    int dim = 2;
    int patch_resolution = 0;    // N_l
    std::size_t cells = 0;       // N_c
    Target target = Target::Permeability;
    Scaler scaler;
    std::vector<Sample> samples;

    std::size_t input_size() const;
    std::size_t output_size() const { return static_cast<std::size_t>(target_outputs(target, dim)); }
    bool operator==(const Dataset&) const = default;
};

/// Raw samples of one realization from its nodal field (k for permeability,
/// E for elasticity) and the already computed tensors of every coarse cell.
std::vector<RawSample> collect_samples(const StructuredGrid& fine, const StructuredGrid& coarse,
                                       std::uint32_t realization, std::span<const double> field,
                                       const std::vector<EffectiveTensors>& tensors, Target target);

/// Fit the scaler on all samples, then scale. Samples are stored sorted by id.
Dataset make_dataset(int dim, int patch_resolution, std::size_t cells, Target target, std::vector<RawSample> raw);

/// Homogenize every realization and build the dataset in one go.
/// `fields[l]` is the nodal k (permeability target) or E (elasticity target) of realization l.
Dataset build_dataset(const StructuredGrid& fine, const StructuredGrid& coarse,
                      const std::vector<std::vector<double>>& fields, Target target, double poisson_ratio,
                      int threads = 1);

struct SplitSpec {
    double test_fraction = 0.6;
    double train_fraction = 0.8;  // of the non-test remainder
    std::uint64_t seed = 0;

    void validate() const;
};

/// Indices into Dataset::samples.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Seeded shuffle, then train = floor(r_train * n_rest), val = n_rest - train,
/// test = rest, with n_rest = floor((1 - test_fraction) * n).
Split split_dataset(std::size_t n, const SplitSpec& spec);

namespace io {

inline constexpr char kDatasetMagic[] = "NHDS";
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(std::ostream& os, const Dataset& ds);
Dataset read_dataset(std::istream& is);
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace io
}  // namespace nh
