#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cvsstext {

// 64-bit FNV-1a. Used for content addressing (vocab/manifest/checkpoint
// digests and report filenames), not for security.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline std::string content_digest(std::string_view bytes) {
    return to_hex(fnv1a64(bytes));
}

}  // namespace cvsstext
