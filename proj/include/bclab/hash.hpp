#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace bclab {

/// 32-byte digest, stored in the byte order SHA-256 produces it.
struct Hash256 {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Hash256&) const = default;

    [[nodiscard]] bool is_zero() const;
    [[nodiscard]] std::string hex() const;
    /// Parses 64 hex characters; throws std::invalid_argument otherwise.
    static Hash256 from_hex(std::string_view hex);
};

Hash256 sha256(std::span<const std::uint8_t> data);
Hash256 sha256(std::string_view data);

}  // namespace bclab

template <>
struct std::hash<bclab::Hash256> {
    std::size_t operator()(const bclab::Hash256& h) const noexcept {
        // Digest bytes are already uniformly distributed.
        std::size_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | h.bytes[i];
        return v;
    }
};
