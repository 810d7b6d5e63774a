#include "bclab/random.hpp"

#include "bclab/hash.hpp"

#include <string>

namespace bclab {

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    std::string material = std::to_string(seed);
    material += '/';
    material += name;
    Hash256 h = sha256(material);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h.bytes[i];
    return v;
}

}  // namespace bclab
