#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "maflow/errors.hpp"

// Little-endian fixed-width encoding shared by the params and checkpoint
// containers.
namespace maflow::binary {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
    write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
    const auto offset = static_cast<long long>(in.tellg());
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw FormatError(std::string("truncated input while reading ") + what + " at byte offset " +
                          std::to_string(offset));
    }
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    read_exact(in, reinterpret_cast<char*>(&v), sizeof v, what);
    return to_little(v);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
    std::uint64_t v = 0;
    read_exact(in, reinterpret_cast<char*>(&v), sizeof v, what);
    return to_little(v);
}

inline double read_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(read_u64(in, what));
}

inline std::string read_string(std::istream& in, const char* what, std::uint64_t max_len = 1u << 26) {
    const auto n = read_u64(in, what);
    if (n > max_len) throw FormatError(std::string("implausible length for ") + what);
    std::string s(n, '\0');
    read_exact(in, s.data(), n, what);
    return s;
}

}  // namespace maflow::binary
