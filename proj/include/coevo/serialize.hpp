#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace coevo::bin {

// little-endian scalar packing into a byte buffer; this code assumes a
// little-endian host (checked once at startup of the readers)

inline bool host_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

template <typename T>
void append(std::string& buf, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void append_str(std::string& buf, const std::string& s) {
    append<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
    buf.append(s);
}

/// Cursor over a byte buffer; every read checks bounds and reports
/// truncation distinctly from content errors.
struct Reader {
    const std::string& buf;
    size_t pos = 0;

    template <typename T>
    T read() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos + sizeof(T) > buf.size())
            throw std::runtime_error("truncated file: wanted " + std::to_string(sizeof(T)) +
                                     " bytes at offset " + std::to_string(pos));
        T v;
        std::memcpy(&v, buf.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }

    std::string read_str() {
        auto n = read<std::uint32_t>();
        if (pos + n > buf.size()) throw std::runtime_error("truncated file: string overruns end");
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

/// CRC-32 (IEEE 802.3 polynomial, reflected).
inline std::uint32_t crc32(const char* data, size_t n, std::uint32_t seed = 0) {
    static const auto table = [] {
        std::uint32_t t[256];
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        struct Table {
            std::uint32_t v[256];
        } out{};
        for (int i = 0; i < 256; ++i) out.v[i] = t[i];
        return out;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i)
        c = table.v[(c ^ static_cast<unsigned char>(data[i])) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

inline std::uint32_t crc32(const std::string& s) { return crc32(s.data(), s.size()); }

}  // namespace coevo::bin
