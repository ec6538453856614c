#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pole/bytes.hpp"
#include "pole/rng.hpp"

namespace pole::fe {

// Thrown by decrypt_inner_product when no exponent in [0, bound] matches:
// wrong functional key, wrong query vector, or a tampered ciphertext.
struct LogNotFound : std::runtime_error {
    explicit LogNotFound(const std::string& what) : std::runtime_error(what) {}
};

// DDH group: the order-p subgroup of Z_q^* with q = 2p+1 a safe prime.
struct GroupParams {
    std::uint64_t p = 0;  // prime subgroup order, lambda bits
    std::uint64_t q = 0;  // ambient field modulus, q = 2p+1
    std::uint64_t g = 0;  // generator of the order-p subgroup
    int lambda = 0;
};

struct MasterKeys {
    std::vector<std::uint64_t> s;  // master secret, D components in Z_p
    std::vector<std::uint64_t> h;  // master public key, h_i = g^{s_i}
    std::size_t dim() const { return s.size(); }
};

// (D+1)-component encryption of one discretized feature vector.
struct Ciphertext {
    std::uint64_t ct0 = 0;           // g^r
    std::vector<std::uint64_t> ct;   // ct_i = h_i^r * g^{x_i}
    std::size_t dim() const { return ct.size(); }
};

// eta = <s, z> mod p for the stored query vector z.
struct FunctionalKey {
    std::uint64_t eta = 0;
    std::vector<std::uint32_t> z;
};

// Discretization applied before encryption; carried in the task record so
// every node maps reals to Z_p the same way.
struct Discretization {
    double scale = 1.0;
    std::uint32_t offset = 0;
    std::uint32_t xmax = 255;
};

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m);
std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m);
std::uint64_t invmod(std::uint64_t a, std::uint64_t prime_m);
bool is_prime(std::uint64_t n);

// Safe-prime group generation, deterministic per seed. lambda in [16, 62].
GroupParams group_gen(int lambda, std::uint64_t seed);

MasterKeys keygen(const GroupParams& params, std::size_t dim, std::uint64_t seed);

// x_i -> clamp(round(x_i * scale) + offset, 0, xmax). Rejects non-finite input.
std::vector<std::uint32_t> discretize(std::span<const double> x, const Discretization& disc);

Ciphertext encrypt_with_randomness(const MasterKeys& keys, const GroupParams& params,
                                   std::span<const std::uint32_t> xt, std::uint64_t r);

// r is drawn uniformly from Z_p using r_seed.
Ciphertext encrypt(const MasterKeys& keys, const GroupParams& params,
                   std::span<const std::uint32_t> xt, std::uint64_t r_seed);

FunctionalKey derive_functional_key(const GroupParams& params, const MasterKeys& keys,
                                    std::vector<std::uint32_t> z);

// Recovers <x, z> as the discrete log base g of prod ct_j^{z_j} / ct0^eta,
// searched over [0, bound] by baby-step giant-step.
std::uint64_t decrypt_inner_product(const GroupParams& params, const Ciphertext& ct,
                                    std::span<const std::uint32_t> z, const FunctionalKey& fkey,
                                    std::uint64_t bound);

Bytes serialize(const GroupParams& params);
GroupParams parse_group_params(ByteReader& r);
Bytes serialize(const MasterKeys& keys);
Bytes serialize(const Ciphertext& ct);
void write_ciphertext(ByteWriter& w, const Ciphertext& ct);
Ciphertext parse_ciphertext(ByteReader& r);
Bytes serialize(const FunctionalKey& fkey);
void write_functional_key(ByteWriter& w, const FunctionalKey& fkey);
FunctionalKey parse_functional_key(ByteReader& r);

}  // namespace pole::fe
