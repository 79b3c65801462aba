#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

#include "nh/dataset.hpp"
#include "nh/errors.hpp"
#include "nh/random_field.hpp"

using namespace nh;

namespace {

// Little-endian byte builder, independent of the library's writer.
struct Bytes {
    std::string s;
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
};

std::vector<RawSample> synthetic_raw(std::uint32_t realizations, std::uint32_t cells) {
    std::vector<RawSample> raw;
    for (std::uint32_t l = 0; l < realizations; ++l)
        for (std::uint32_t c = 0; c < cells; ++c) {
            RawSample r{l, c, {}, {}};
            for (int i = 0; i < 4; ++i) r.pixels.push_back(0.5 + l + 0.1 * c + 0.01 * i);
            r.targets = {1.0 + l * c, 0.3 * c - l, 7.0};  // last component constant
            raw.push_back(r);
        }
    std::reverse(raw.begin(), raw.end());
    return raw;
}

}  // namespace

TEST(Scaler, RangesAndExactInverse) {
    const std::vector<double> x{2.0, 4.0, 3.0, 6.0}, y{1.0, 5.0, 3.0, 5.0, 9.0, 5.0};
    const Scaler s = Scaler::fit(x, y, 2);
    EXPECT_EQ(s.input_min, 2.0);
    EXPECT_EQ(s.input_max, 6.0);
    ASSERT_EQ(s.output_count(), 2u);
    EXPECT_EQ(s.output_degenerate[0], 0);
    EXPECT_EQ(s.output_degenerate[1], 1);

    std::vector<double> xs = x;
    s.scale_input(xs);
    EXPECT_EQ(xs, (std::vector<double>{0.0, 0.5, 0.25, 1.0}));

    std::vector<double> row{3.0, 5.0};
    s.scale_output(row);
    EXPECT_DOUBLE_EQ(row[0], 0.25);
    EXPECT_EQ(row[1], 0.0);
    s.unscale_output(row);
    EXPECT_NEAR(row[0], 3.0, 1e-12);
    EXPECT_EQ(row[1], 5.0);
}

TEST(Scaler, RoundTripOnRandomData) {
    std::vector<double> y(300);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(0.37 * i) * (1.0 + i % 3) + 1e3 * (i % 3 == 2);
    const Scaler s = Scaler::fit(std::vector<double>{0.0, 1.0}, y, 3);
    for (std::size_t r = 0; r < 100; ++r) {
        std::vector<double> row(y.begin() + r * 3, y.begin() + r * 3 + 3);
        s.scale_output(row);
        for (double v : row) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        s.unscale_output(row);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(row[c], y[r * 3 + c], 1e-12 * std::max(1.0, std::abs(y[r * 3 + c])));
    }
}

TEST(Dataset, IdsAreUniqueAndSorted) {
    const auto ds = make_dataset(2, 2, 5, Target::Permeability, synthetic_raw(4, 5));
    ASSERT_EQ(ds.samples.size(), 20u);
    std::set<std::uint64_t> ids;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        EXPECT_EQ(s.id, static_cast<std::uint64_t>(s.realization) * 5 + s.cell);
        EXPECT_EQ(s.id, i);
        ids.insert(s.id);
        for (double v : s.x) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_EQ(s.y[2], 0.0);  // degenerate component
    }
    EXPECT_EQ(ids.size(), 20u);
    EXPECT_EQ(ds.input_size(), 4u);
    EXPECT_EQ(ds.output_size(), 3u);
}

TEST(Dataset, BuiltFromFieldsMatchesHomogenization) {
    const auto fine = StructuredGrid::unit(2, 8), coarse = StructuredGrid::unit(2, 2);
    const auto basis = build_kl_basis(fine, CovarianceSpec{2.0, {0.2, 0.2}});
    std::vector<std::vector<double>> fields;
    for (std::uint64_t s : {1u, 2u}) fields.push_back(field_to_properties(sample_field(basis, s)).permeability);
    const auto ds = build_dataset(fine, coarse, fields, Target::Permeability, 0.25, 2);
    ASSERT_EQ(ds.samples.size(), 8u);
    EXPECT_EQ(ds.patch_resolution, 4);
    EXPECT_EQ(ds.input_size(), 16u);
    // unscaled targets reproduce the direct tensor of that cell
    const auto direct = homogenize_domain(fine, fields[1], std::vector<double>(fine.node_count(), 10.0), coarse, 0.25);
    std::vector<double> y = ds.samples[6].y;
    ds.scaler.unscale_output(y);
    const auto expect = upper_triangle(direct[2].permeability);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(y[c], expect[c], 1e-12);
    EXPECT_EQ(ds, build_dataset(fine, coarse, fields, Target::Permeability, 0.25, 1));
}

TEST(Split, FullScaleAndDeskSizes) {
    const SplitSpec spec{0.6, 0.8, 3};
    const auto a = split_dataset(10000, spec);
    EXPECT_EQ(a.train.size(), 3200u);
    EXPECT_EQ(a.val.size(), 800u);
    EXPECT_EQ(a.test.size(), 6000u);
    const auto b = split_dataset(1280, spec);
    EXPECT_EQ(b.train.size(), 409u);
    EXPECT_EQ(b.val.size(), 103u);
    EXPECT_EQ(b.test.size(), 768u);
}

TEST(Split, DeterministicPartition) {
    const SplitSpec spec{0.6, 0.8, 11};
    const auto a = split_dataset(257, spec), b = split_dataset(257, spec);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
    std::vector<std::size_t> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(257);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(all, expect);
    EXPECT_NE(split_dataset(257, SplitSpec{0.6, 0.8, 12}).train, a.train);
    EXPECT_THROW(split_dataset(10, SplitSpec{1.5, 0.8, 0}), ParameterError);
}

TEST(DatasetIo, RoundTripIsExact) {
    const auto ds = make_dataset(2, 2, 5, Target::Permeability, synthetic_raw(3, 5));
    std::stringstream ss;
    io::write_dataset(ss, ds);
    EXPECT_EQ(io::read_dataset(ss), ds);
}

TEST(DatasetIo, TruncationAndBadMagicAreFormatErrors) {
    const auto ds = make_dataset(2, 2, 5, Target::Permeability, synthetic_raw(2, 5));
    std::stringstream ss;
    io::write_dataset(ss, ds);
    const std::string s = ss.str();
    std::stringstream cut(s.substr(0, s.size() - 5));
    EXPECT_THROW(io::read_dataset(cut), FormatError);
    std::string bad = s;
    bad[1] = 'X';
    std::stringstream b(bad);
    EXPECT_THROW(io::read_dataset(b), FormatError);
    EXPECT_THROW(io::read_dataset(std::filesystem::path("/nonexistent/x.nhds")), MissingInputError);
}

TEST(DatasetIo, HandBuiltFileParses) {
    Bytes f;
    f.s = "NHDS";
    f.le(1, 4);   // version
    f.le(1, 8);   // samples
    f.le(1, 4);   // N_l
    f.le(2, 1);   // dim
    f.le(6, 4);   // outputs
    f.le(1, 1);   // elasticity
    f.le(1, 8);   // N_c
    f.f64(0.5);
    f.f64(2.5);
    f.le(0, 1);
    for (int c = 0; c < 6; ++c) {
        f.f64(c);
        f.f64(c + 1.0);
        f.le(0, 1);
    }
    f.le(0, 8);  // id
    f.le(0, 4);
    f.le(0, 4);
    f.f64(0.75);
    for (int c = 0; c < 6; ++c) f.f64(0.125 * c);
    std::stringstream ss(f.s);
    const Dataset ds = io::read_dataset(ss);
    EXPECT_EQ(ds.target, Target::Elasticity);
    EXPECT_EQ(ds.dim, 2);
    EXPECT_EQ(ds.cells, 1u);
    EXPECT_EQ(ds.scaler.input_max, 2.5);
    EXPECT_EQ(ds.scaler.output_max[5], 6.0);
    ASSERT_EQ(ds.samples.size(), 1u);
    EXPECT_EQ(ds.samples[0].x, std::vector<double>{0.75});
    EXPECT_EQ(ds.samples[0].y[5], 0.625);
    std::stringstream back;
    io::write_dataset(back, ds);
    EXPECT_EQ(back.str(), f.s);
}
