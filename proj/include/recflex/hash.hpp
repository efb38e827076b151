#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace recflex {

using Digest = std::array<std::uint8_t, 32>;

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t len) {
        if (EVP_DigestUpdate(ctx_, data, len) != 1)
            throw std::runtime_error("sha256 update failed");
    }
    void update(const std::string& s) { update(s.data(), s.size()); }

    Digest finish() {
        Digest d{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, d.data(), &len) != 1 || len != d.size())
            throw std::runtime_error("sha256 final failed");
        return d;
    }

private:
    EVP_MD_CTX* ctx_;
};

inline Digest sha256_bytes(const std::string& data) {
    Sha256 h;
    h.update(data);
    return h.finish();
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Digest sha256_file(const std::string& path) {
    return sha256_bytes(read_file_bytes(path));
}

inline std::string hex(const Digest& d) {
    static const char* k = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : d) {
        out.push_back(k[b >> 4]);
        out.push_back(k[b & 0xf]);
    }
    return out;
}

// Content fingerprint of a set of source files plus a reader-configuration
// string; used to decide whether a corpus cache is still valid.
inline Digest fingerprint_sources(const std::vector<std::string>& paths,
                                  const std::string& config) {
    Sha256 h;
    for (const auto& p : paths) {
        std::string bytes = read_file_bytes(p);
        std::uint64_t n = bytes.size();
        h.update(&n, sizeof(n));
        h.update(bytes);
    }
    h.update(config);
    return h.finish();
}

}  // namespace recflex
