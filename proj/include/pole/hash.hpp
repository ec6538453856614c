#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "pole/bytes.hpp"

namespace pole {

// FIPS 180-4 SHA-256, the chain's only hash primitive.
class Sha256 {
  public:
    Sha256();
    void update(std::span<const std::uint8_t> data);
    Hash256 finish();

  private:
    void compress(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint8_t buf_[64];
    std::size_t buflen_ = 0;
    std::uint64_t total_ = 0;
};

Hash256 sha256(std::span<const std::uint8_t> data);
Hash256 sha256(const std::string& s);

// First 8 bytes of sha256 over a tag and a few values, used to derive
// independent RNG seeds from one top-level seed.
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace pole
