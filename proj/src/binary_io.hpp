#pragma once

// Host-endian binary helpers for the private on-disk index formats.

#include "reflectrag/errors.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace reflectrag::detail {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw InputError("truncated index file");
    }
    return value;
}

inline void write_string(std::ostream& out, std::string_view s) {
    write_pod<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const auto size = read_pod<std::uint64_t>(in);
    if (size > (std::uint64_t{1} << 32)) {
        throw InputError("corrupt index file: string length " + std::to_string(size));
    }
    std::string s(size, '\0');
    if (size > 0 && !in.read(s.data(), static_cast<std::streamsize>(size))) {
        throw InputError("truncated index file");
    }
    return s;
}

inline void write_header(std::ostream& out, std::string_view magic, std::uint32_t version) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    write_pod(out, version);
}

inline void expect_header(std::istream& in, std::string_view magic, std::uint32_t version) {
    std::string found(magic.size(), '\0');
    if (!in.read(found.data(), static_cast<std::streamsize>(found.size())) || found != magic) {
        throw InputError("not an index file of the expected kind (bad magic)");
    }
    const auto found_version = read_pod<std::uint32_t>(in);
    if (found_version != version) {
        throw InputError("unsupported index format version " + std::to_string(found_version) +
                         " (expected " + std::to_string(version) + ")");
    }
}

} // namespace reflectrag::detail
