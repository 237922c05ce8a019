#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "glyphforge/core/tensor.hpp"

namespace glyphforge {

// FNV-1a 64-bit. Used for manifest content hashes and fixture cache keys.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline uint64_t fnv1a64(const std::vector<uint8_t>& b) { return fnv1a64(b.data(), b.size()); }

inline uint64_t fnv1a64(const Tensor& t) {
    uint64_t h = fnv1a64(t.v.data(), t.v.size() * sizeof(float));
    int shape[3] = {t.h, t.w, t.c};
    return fnv1a64(shape, sizeof(shape), h);
}

inline std::string hex64(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; i--) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace glyphforge
