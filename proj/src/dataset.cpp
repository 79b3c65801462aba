#include "nh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "nh/binary_io.hpp"
#include "nh/errors.hpp"
#include "nh/parallel.hpp"
#include "nh/rng.hpp"

namespace nh {

namespace {

bool zero_range(double lo, double hi) {
    return !(hi - lo > 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)}));
}

}  // namespace

Scaler Scaler::fit(std::span<const double> inputs, std::span<const double> outputs, std::size_t outputs_per_sample) {
    if (inputs.empty() || outputs.empty() || outputs_per_sample == 0 || outputs.size() % outputs_per_sample != 0)
        throw ParameterError("scaler needs non-empty inputs and whole output rows");
    Scaler s;
    const auto [lo, hi] = std::minmax_element(inputs.begin(), inputs.end());
    s.input_min = *lo;
    s.input_max = *hi;
    s.input_degenerate = zero_range(s.input_min, s.input_max);
    if (s.input_degenerate) spdlog::warn("input range is degenerate ({}); inputs map to 0", s.input_min);

    const std::size_t m = outputs_per_sample;
    s.output_min.assign(outputs.begin(), outputs.begin() + static_cast<std::ptrdiff_t>(m));
    s.output_max = s.output_min;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        s.output_min[i % m] = std::min(s.output_min[i % m], outputs[i]);
        s.output_max[i % m] = std::max(s.output_max[i % m], outputs[i]);
    }
    s.output_degenerate.resize(m);
    for (std::size_t c = 0; c < m; ++c) {
        s.output_degenerate[c] = zero_range(s.output_min[c], s.output_max[c]);
        if (s.output_degenerate[c]) spdlog::warn("output component {} has zero range; mapped to 0", c);
    }
    return s;
}

void Scaler::scale_input(std::span<double> x) const {
    if (input_degenerate) {
        std::fill(x.begin(), x.end(), 0.0);
        return;
    }
    const double inv = 1.0 / (input_max - input_min);
    for (double& v : x) v = (v - input_min) * inv;
}

void Scaler::scale_output(std::span<double> y) const {
    if (y.size() != output_count()) throw ParameterError("output vector length does not match scaler");
    for (std::size_t c = 0; c < y.size(); ++c)
        y[c] = output_degenerate[c] ? 0.0 : (y[c] - output_min[c]) / (output_max[c] - output_min[c]);
}

void Scaler::unscale_output(std::span<double> y) const {
    if (y.size() != output_count()) throw ParameterError("output vector length does not match scaler");
    for (std::size_t c = 0; c < y.size(); ++c)
        y[c] = output_degenerate[c] ? 0.5 * (output_min[c] + output_max[c])
                                    : output_min[c] + y[c] * (output_max[c] - output_min[c]);
}

std::size_t Dataset::input_size() const {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(patch_resolution);
    return n;
}

std::vector<RawSample> collect_samples(const StructuredGrid& fine, const StructuredGrid& coarse,
                                       std::uint32_t realization, std::span<const double> field,
                                       const std::vector<EffectiveTensors>& tensors, Target target) {
    if (tensors.size() != coarse.cell_count()) throw ParameterError("need one tensor pair per coarse cell");
    const auto patches = extract_patches(fine, field, coarse);
    std::vector<RawSample> out(patches.size());
    for (std::size_t c = 0; c < patches.size(); ++c) {
        out[c].realization = realization;
        out[c].cell = static_cast<std::uint32_t>(c);
        out[c].pixels = patch_pixels(patches[c]);
        out[c].targets = upper_triangle(target == Target::Permeability ? tensors[c].permeability : tensors[c].stiffness);
    }
    return out;
}

Dataset make_dataset(int dim, int patch_resolution, std::size_t cells, Target target, std::vector<RawSample> raw) {
    if (raw.empty()) throw ParameterError("dataset needs at least one sample");
    Dataset ds;
    ds.dim = dim;
    ds.patch_resolution = patch_resolution;
    ds.cells = cells;
    ds.target = target;
    const std::size_t nin = ds.input_size(), nout = ds.output_size();

    std::vector<double> inputs, outputs;
    inputs.reserve(raw.size() * nin);
    outputs.reserve(raw.size() * nout);
    for (const auto& r : raw) {
        if (r.pixels.size() != nin || r.targets.size() != nout)
            throw ParameterError("sample (" + std::to_string(r.realization) + ", " + std::to_string(r.cell) +
                                 ") has the wrong input or output length");
        if (r.cell >= cells) throw ParameterError("cell index out of range");
        inputs.insert(inputs.end(), r.pixels.begin(), r.pixels.end());
        outputs.insert(outputs.end(), r.targets.begin(), r.targets.end());
    }
    ds.scaler = Scaler::fit(inputs, outputs, nout);

    ds.samples.reserve(raw.size());
    for (auto& r : raw) {
        Sample s;
        s.realization = r.realization;
        s.cell = r.cell;
        s.id = static_cast<std::uint64_t>(r.realization) * cells + r.cell;
        s.x = std::move(r.pixels);
        s.y = std::move(r.targets);
        ds.scaler.scale_input(s.x);
        ds.scaler.scale_output(s.y);
        ds.samples.push_back(std::move(s));
    }
    std::sort(ds.samples.begin(), ds.samples.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < ds.samples.size(); ++i)
        if (ds.samples[i].id == ds.samples[i - 1].id)
            throw ParameterError("duplicate sample id " + std::to_string(ds.samples[i].id));
    return ds;
}

Dataset build_dataset(const StructuredGrid& fine, const StructuredGrid& coarse,
                      const std::vector<std::vector<double>>& fields, Target target, double poisson_ratio,
                      int threads) {
    if (fields.empty()) throw ParameterError("need at least one realization");
    const int nl = patch_resolution(fine, coarse);
    std::vector<std::vector<RawSample>> per(fields.size());
    parallel_for(fields.size(), threads, [&](std::size_t l) {
        const auto patches = extract_patches(fine, fields[l], coarse);
        std::vector<EffectiveTensors> tensors(patches.size());
        for (std::size_t c = 0; c < patches.size(); ++c) {
            if (target == Target::Permeability)
                tensors[c].permeability = effective_permeability(patches[c]);
            else
                tensors[c].stiffness = effective_elasticity(patches[c], poisson_ratio);
        }
        per[l] = collect_samples(fine, coarse, static_cast<std::uint32_t>(l), fields[l], tensors, target);
    });
    std::vector<RawSample> raw;
    for (auto& v : per)
        for (auto& r : v) raw.push_back(std::move(r));
    return make_dataset(fine.dim(), nl, coarse.cell_count(), target, std::move(raw));
}

void SplitSpec::validate() const {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ParameterError("test fraction must lie in [0, 1)");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ParameterError("train fraction must lie in (0, 1]");
}

Split split_dataset(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(std::span<std::size_t>(order));
    // small epsilon so that e.g. 0.4 * 1280 does not floor to 511 through round-off
    const auto n_rest = static_cast<std::size_t>(std::floor((1.0 - spec.test_fraction) * n + 1e-9));
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * n_rest + 1e-9));
    Split s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.val.assign(order.begin() + n_train, order.begin() + n_rest);
    s.test.assign(order.begin() + n_rest, order.end());
    return s;
}

namespace io {

void write_dataset(std::ostream& os, const Dataset& ds) {
    const std::size_t nin = ds.input_size(), nout = ds.output_size();
    if (ds.scaler.output_count() != nout) throw ParameterError("scaler does not match dataset outputs");
    put_magic(os, kDatasetMagic);
    put_u32(os, kDatasetVersion);
    put_u64(os, ds.samples.size());
    put_u32(os, static_cast<std::uint32_t>(ds.patch_resolution));
    put_u8(os, static_cast<std::uint8_t>(ds.dim));
    put_u32(os, static_cast<std::uint32_t>(nout));
    put_u8(os, ds.target == Target::Permeability ? 0 : 1);
    put_u64(os, ds.cells);

    put_f64(os, ds.scaler.input_min);
    put_f64(os, ds.scaler.input_max);
    put_u8(os, ds.scaler.input_degenerate ? 1 : 0);
    for (std::size_t c = 0; c < nout; ++c) {
        put_f64(os, ds.scaler.output_min[c]);
        put_f64(os, ds.scaler.output_max[c]);
        put_u8(os, ds.scaler.output_degenerate[c]);
    }

    for (const auto& s : ds.samples) {
        if (s.x.size() != nin || s.y.size() != nout) throw ParameterError("sample size mismatch while writing");
        put_u64(os, s.id);
        put_u32(os, s.realization);
        put_u32(os, s.cell);
        for (double v : s.x) put_f64(os, v);
        for (double v : s.y) put_f64(os, v);
    }
}

Dataset read_dataset(std::istream& is) {
    expect_magic(is, kDatasetMagic);
    const auto version = get_u32(is, "NHDS version");
    if (version != kDatasetVersion) throw FormatError("unsupported NHDS version " + std::to_string(version));
    Dataset ds;
    const auto count = get_u64(is, "NHDS sample count");
    ds.patch_resolution = static_cast<int>(get_u32(is, "NHDS N_l"));
    ds.dim = get_u8(is, "NHDS dim");
    const auto nout = get_u32(is, "NHDS output count");
    const auto target = get_u8(is, "NHDS target");
    ds.cells = get_u64(is, "NHDS cell count");
    if (ds.dim != 2 && ds.dim != 3) throw FormatError("NHDS dim must be 2 or 3");
    if (target > 1) throw FormatError("NHDS target must be 0 or 1");
    if (ds.patch_resolution < 1 || ds.patch_resolution > 4096) throw FormatError("NHDS N_l out of range");
    ds.target = target == 0 ? Target::Permeability : Target::Elasticity;
    if (nout != ds.output_size()) throw FormatError("NHDS output count does not match dim and target");

    ds.scaler.input_min = get_f64(is, "NHDS scaler");
    ds.scaler.input_max = get_f64(is, "NHDS scaler");
    ds.scaler.input_degenerate = get_u8(is, "NHDS scaler") != 0;
    ds.scaler.output_min.resize(nout);
    ds.scaler.output_max.resize(nout);
    ds.scaler.output_degenerate.resize(nout);
    for (std::size_t c = 0; c < nout; ++c) {
        ds.scaler.output_min[c] = get_f64(is, "NHDS scaler");
        ds.scaler.output_max[c] = get_f64(is, "NHDS scaler");
        ds.scaler.output_degenerate[c] = get_u8(is, "NHDS scaler");
    }

    const std::size_t nin = ds.input_size();
    if (count > (std::size_t{1} << 40) / (nin + nout + 2)) throw FormatError("NHDS sample count too large");
    ds.samples.resize(count);
    for (auto& s : ds.samples) {
        s.id = get_u64(is, "NHDS sample");
        s.realization = get_u32(is, "NHDS sample");
        s.cell = get_u32(is, "NHDS sample");
        s.x.resize(nin);
        s.y.resize(nout);
        for (double& v : s.x) v = get_f64(is, "NHDS sample input");
        for (double& v : s.y) v = get_f64(is, "NHDS sample output");
    }
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_dataset(os, ds);
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open '" + path.string() + "'");
    return read_dataset(is);
}

}  // namespace io
}  // namespace nh
