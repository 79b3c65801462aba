#pragma once

// Little-endian primitive encoding shared by the NHAR / NHDS / NHNN formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "nh/errors.hpp"

namespace nh::io {

template <class UInt>
inline void put_le(std::ostream& os, UInt v) {
    static_assert(std::is_unsigned_v<UInt>);
    char buf[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    os.write(buf, sizeof(UInt));
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_le(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline void put_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

template <class UInt>
inline UInt get_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(UInt)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(UInt)))
        throw FormatError(std::string("unexpected end of file while reading ") + what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
}

inline std::uint8_t get_u8(std::istream& is, const char* what) { return get_le<std::uint8_t>(is, what); }
inline std::uint32_t get_u32(std::istream& is, const char* what) { return get_le<std::uint32_t>(is, what); }
inline std::uint64_t get_u64(std::istream& is, const char* what) { return get_le<std::uint64_t>(is, what); }
inline double get_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(get_le<std::uint64_t>(is, what));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic)
        throw FormatError("bad magic: expected '" + std::string(magic) + "'");
}

}  // namespace nh::io
