#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace ptlab {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

// FNV-1a over a byte range; chainable via the h argument.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = kFnvOffset) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

// 16 lowercase hex digits; the form recorded in manifests and sidecars.
std::string digest_hex(uint64_t h);

inline uint64_t bytes_digest(const void* data, size_t len) { return fnv1a64(data, len); }

// Digest of a file's contents. Throws std::runtime_error if unreadable.
uint64_t file_digest(const std::string& path);

// Algorithm tag written next to every digest for forward compatibility.
inline const char* digest_algorithm() { return "fnv1a-64"; }

}  // namespace ptlab
