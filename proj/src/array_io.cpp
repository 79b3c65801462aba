#include "nh/array_io.hpp"

#include <fstream>
#include <functional>
#include <numeric>

#include "nh/binary_io.hpp"
#include "nh/errors.hpp"

namespace nh {

namespace {
std::size_t product(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

NdArray::NdArray(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (product(shape) != data.size()) throw ParameterError("NdArray: shape does not match data size");
}

NdArray::NdArray(std::vector<std::size_t> s) : shape(std::move(s)), data(product(shape), 0.0) {}

namespace io {

void write_array(std::ostream& os, const NdArray& a) {
    if (a.ndim() > 255) throw ParameterError("NHAR supports at most 255 dimensions");
    if (product(a.shape) != a.data.size()) throw ParameterError("NHAR: shape does not match data size");
    put_magic(os, kArrayMagic);
    put_u32(os, kArrayVersion);
    put_u8(os, kDtypeF64);
    put_u8(os, static_cast<std::uint8_t>(a.ndim()));
    for (auto d : a.shape) put_u64(os, d);
    for (double v : a.data) put_f64(os, v);
}

NdArray read_array(std::istream& is) {
    expect_magic(is, kArrayMagic);
    const auto version = get_u32(is, "NHAR version");
    if (version != kArrayVersion) throw FormatError("unsupported NHAR version " + std::to_string(version));
    const auto dtype = get_u8(is, "NHAR dtype");
    if (dtype != kDtypeF64) throw FormatError("unsupported NHAR dtype " + std::to_string(dtype));
    const auto ndim = get_u8(is, "NHAR ndim");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = get_u64(is, "NHAR dims");
    // guard against absurd sizes in corrupted headers before allocating
    std::size_t n = 1;
    for (auto d : shape) {
        if (d != 0 && n > (std::size_t{1} << 40) / d) throw FormatError("NHAR dims too large");
        n *= d;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = get_f64(is, "NHAR payload");
    return NdArray(std::move(shape), std::move(data));
}

void write_array(const std::filesystem::path& path, const NdArray& a) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_array(os, a);
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

NdArray read_array(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open '" + path.string() + "'");
    return read_array(is);
}

}  // namespace io
}  // namespace nh
