#pragma once

// Little-endian primitives for the versioned binary formats (NGAN, NARM,
// NIMG). Readers throw FormatError on truncation so callers never see a
// partially filled value.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "neutrosim/error.hpp"

namespace neutrosim::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

inline void write_magic(std::ostream& out, std::string_view magic) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
    std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, const std::string& module) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw FormatError(module, "truncated payload");
}

inline void expect_magic(std::istream& in, std::string_view magic, const std::string& module) {
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (static_cast<std::size_t>(in.gcount()) != magic.size() || got != magic)
        throw FormatError(module, "malformed header: expected magic '" + std::string(magic) + "'");
}

inline std::uint32_t read_u32(std::istream& in, const std::string& module) {
    std::uint32_t v;
    read_exact(in, reinterpret_cast<char*>(&v), sizeof v, module);
    return to_little(v);
}

inline double read_f64(std::istream& in, const std::string& module) {
    std::uint64_t bits;
    read_exact(in, reinterpret_cast<char*>(&bits), sizeof bits, module);
    return std::bit_cast<double>(to_little(bits));
}

inline void expect_eof(std::istream& in, const std::string& module) {
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(module, "trailing bytes after payload");
}

}  // namespace neutrosim::io
