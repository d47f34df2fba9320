#pragma once

// Little-endian binary readers/writers shared by every on-disk format.

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "rw/errors.hpp"

namespace rw::io {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw FormatError("write failed");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("truncated file");
}

// Host is little-endian on every platform we target; static_assert guards the port.
inline void host_endianness_check() {
    static const std::uint16_t probe = 0x0102;
    std::uint8_t b;
    std::memcpy(&b, &probe, 1);
    if (b != 0x02) throw FormatError("big-endian host unsupported by file formats");
}

template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_arithmetic_v<T>);
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    static_assert(std::is_arithmetic_v<T>);
    T v;
    read_bytes(is, &v, sizeof(T));
    return v;
}

inline void write_magic(std::ostream& os, const char magic[4]) {
    write_bytes(os, magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
    char got[4];
    read_bytes(is, got, 4);
    if (std::memcmp(got, magic, 4) != 0)
        throw FormatError("bad magic for " + what + " (expected " + std::string(magic, 4) + ")");
}

inline void write_f64_array(std::ostream& os, const double* p, std::size_t n) {
    write_bytes(os, p, n * sizeof(double));
}

inline void read_f64_array(std::istream& is, double* p, std::size_t n) {
    read_bytes(is, p, n * sizeof(double));
}

inline void write_vec(std::ostream& os, const Eigen::VectorXd& v) {
    write_f64_array(os, v.data(), static_cast<std::size_t>(v.size()));
}

inline void read_vec(std::istream& is, Eigen::VectorXd& v) {
    read_f64_array(is, v.data(), static_cast<std::size_t>(v.size()));
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw UsageError("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("cannot open for reading: " + path);
    return is;
}

}  // namespace rw::io
