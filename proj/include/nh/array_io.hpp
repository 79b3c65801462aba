#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace nh {

/// Dense row-major float64 array, the unit of the NHAR file format.
struct NdArray {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    NdArray() = default;
    NdArray(std::vector<std::size_t> s, std::vector<double> d);
    explicit NdArray(std::vector<std::size_t> s);

    std::size_t size() const noexcept { return data.size(); }
    std::size_t ndim() const noexcept { return shape.size(); }
    bool operator==(const NdArray&) const = default;
};

namespace io {

inline constexpr char kArrayMagic[] = "NHAR";
inline constexpr std::uint32_t kArrayVersion = 1;
inline constexpr std::uint8_t kDtypeF64 = 0;

/// Header size in bytes for an array with `ndim` dimensions.
constexpr std::size_t array_header_size(std::size_t ndim) { return 4 + 4 + 1 + 1 + 8 * ndim; }

void write_array(std::ostream& os, const NdArray& a);
NdArray read_array(std::istream& is);

void write_array(const std::filesystem::path& path, const NdArray& a);
NdArray read_array(const std::filesystem::path& path);

}  // namespace io
}  // namespace nh
