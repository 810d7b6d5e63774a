#include "bclab/hash.hpp"

#include <openssl/sha.h>

#include <stdexcept>

namespace bclab {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

bool Hash256::is_zero() const {
    for (auto b : bytes)
        if (b != 0) return false;
    return true;
}

std::string Hash256::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

Hash256 Hash256::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw std::invalid_argument("hash must be 64 hex characters");
    Hash256 h;
    for (std::size_t i = 0; i < 32; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit in hash");
        h.bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return h;
}

Hash256 sha256(std::span<const std::uint8_t> data) {
    Hash256 h;
    SHA256(data.data(), data.size(), h.bytes.data());
    return h;
}

Hash256 sha256(std::string_view data) {
    return sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

}  // namespace bclab
