#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pole/bytes.hpp"
#include "pole/fe.hpp"

namespace pole::sml {

// Raised when decryption under the supplied functional keys fails, which
// signals query vectors inconsistent with the keys (the cheating case).
struct SmlDecryptFailed : std::runtime_error {
    explicit SmlDecryptFailed(const std::string& what) : std::runtime_error(what) {}
};

// I query vectors of D weights, each weight k bits, derived from a block
// hash. Regenerating from source_hash reproduces z bit-exactly.
struct SmlWeights {
    int k = 0;
    Hash256 source_hash{};
    std::vector<std::vector<std::uint32_t>> z;

    std::size_t queries() const { return z.size(); }
    std::size_t dim() const { return z.empty() ? 0 : z.front().size(); }
};

// For query vector i: primary = hash XOR rotl(hash, i) on the 256-bit word,
// repeated until k*D bits are available; weight j takes bits [(j-1)k, jk),
// most significant bit first.
SmlWeights generate_sml(const Hash256& phs, std::size_t dim, std::size_t queries, int k);

// Canonical form (k, I, D, source_hash, packed k-bit weights); byte equality
// of this form is the block-verification binding check.
Bytes serialize(const SmlWeights& weights);
SmlWeights parse_weights(ByteReader& r);
SmlWeights deserialize_weights(std::span<const std::uint8_t> bytes);

// Decrypted inner products, offset-corrected and rescaled to approximate
// <x, z> in original feature units. One FunctionalKey per query vector.
std::vector<double> apply_sml(const SmlWeights& weights, const fe::GroupParams& params,
                              const fe::Ciphertext& ct, const std::vector<fe::FunctionalKey>& fkeys,
                              const fe::Discretization& disc);

std::vector<std::vector<double>> apply_sml_batch(const SmlWeights& weights, const fe::GroupParams& params,
                                                 const std::vector<fe::Ciphertext>& cts,
                                                 const std::vector<fe::FunctionalKey>& fkeys,
                                                 const fe::Discretization& disc);

// Plaintext route: discretizes x and takes exact integer inner products with
// the query vectors, then applies the same offset correction and rescaling.
// Produces bit-identical features to the decrypt route.
std::vector<double> apply_sml_plaintext(const SmlWeights& weights, std::span<const double> x,
                                        const fe::Discretization& disc);

std::vector<std::vector<double>> apply_sml_plaintext_batch(const SmlWeights& weights,
                                                           const std::vector<std::vector<double>>& xs,
                                                           const fe::Discretization& disc);

// Inner-product search bound D * (2^k - 1) * xmax for decrypt callers.
std::uint64_t decrypt_bound(std::size_t dim, int k, std::uint32_t xmax);

}  // namespace pole::sml
