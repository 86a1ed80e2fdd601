#include "ptlab/digest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ptlab {

std::string digest_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path);
    uint64_t h = kFnvOffset;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::streamsize got = in.gcount();
        if (got > 0) h = fnv1a64(buf.data(), static_cast<size_t>(got), h);
    }
    return h;
}

}  // namespace ptlab
