#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cog/errors.hpp"

// Little-endian primitive readers/writers. Reads throw IoError::Truncated on
// short input rather than returning partial data.

namespace cog::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

template <typename V>
inline void write_raw(std::ostream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_raw(out, v); }
inline void write_u16(std::ostream& out, std::uint16_t v) { write_raw(out, v); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, v); }
inline void write_i64(std::ostream& out, std::int64_t v) { write_raw(out, v); }
inline void write_f32(std::ostream& out, float v) { write_raw(out, v); }
inline void write_f64(std::ostream& out, double v) { write_raw(out, v); }

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void write_string(std::ostream& out, const std::string& s) {
    if (s.size() > 0xFFFF) throw IoError(IoError::Kind::BadValue, "string too long to serialize");
    write_u16(out, static_cast<std::uint16_t>(s.size()));
    write_bytes(out, s.data(), s.size());
}

inline void read_exact(std::istream& in, void* data, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw IoError(IoError::Kind::Truncated,
                      std::string("truncated input while reading ") + what);
    }
}

template <typename V>
inline V read_raw(std::istream& in, const char* what) {
    V v;
    read_exact(in, &v, sizeof(V), what);
    return v;
}

inline std::uint8_t read_u8(std::istream& in, const char* what) { return read_raw<std::uint8_t>(in, what); }
inline std::uint16_t read_u16(std::istream& in, const char* what) { return read_raw<std::uint16_t>(in, what); }
inline std::uint32_t read_u32(std::istream& in, const char* what) { return read_raw<std::uint32_t>(in, what); }
inline std::uint64_t read_u64(std::istream& in, const char* what) { return read_raw<std::uint64_t>(in, what); }
inline std::int64_t read_i64(std::istream& in, const char* what) { return read_raw<std::int64_t>(in, what); }
inline float read_f32(std::istream& in, const char* what) { return read_raw<float>(in, what); }
inline double read_f64(std::istream& in, const char* what) { return read_raw<double>(in, what); }

inline std::string read_string(std::istream& in, const char* what) {
    const std::uint16_t n = read_u16(in, what);
    std::string s(n, '\0');
    if (n) read_exact(in, s.data(), n, what);
    return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* format) {
    char got[4];
    read_exact(in, got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0) {
        throw IoError(IoError::Kind::BadMagic,
                      std::string("bad magic for ") + format + " file");
    }
}

}  // namespace cog::io
