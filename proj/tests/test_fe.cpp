#include "doctest.h"

#include <numeric>

#include "pole/fe.hpp"
#include "pole/hash.hpp"
#include "pole/rng.hpp"

using namespace pole;
using namespace pole::fe;

namespace {

// independent oracle: plaintext inner product in plain integers
std::uint64_t dot(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::uint64_t(a[i]) * b[i];
    return acc;
}

// independent oracle: discrete log by linear scan, for small bounds
std::int64_t dlog_linear(const GroupParams& p, std::uint64_t target, std::uint64_t bound) {
    std::uint64_t cur = 1;
    for (std::uint64_t v = 0; v <= bound; ++v) {
        if (cur == target) return static_cast<std::int64_t>(v);
        cur = mulmod(cur, p.g, p.q);
    }
    return -1;
}

std::vector<std::uint32_t> random_vec(Rng& rng, std::size_t n, std::uint32_t max_inclusive) {
    std::vector<std::uint32_t> v(n);
    for (auto& x : v) x = static_cast<std::uint32_t>(rng.below(max_inclusive + 1));
    return v;
}

}  // namespace

TEST_CASE("group_gen yields a verified safe-prime group") {
    GroupParams p = group_gen(16, 7);
    CHECK(is_prime(p.p));
    CHECK(is_prime(p.q));
    CHECK(p.q == 2 * p.p + 1);
    CHECK((p.p >> 15) == 1);  // 16-bit
    CHECK(p.g != 1);
    CHECK(powmod(p.g, p.p, p.q) == 1);

    GroupParams p2 = group_gen(16, 7);
    CHECK(p2.p == p.p);
    CHECK(p2.q == p.q);
    CHECK(p2.g == p.g);

    GroupParams p3 = group_gen(16, 8);
    CHECK((p3.p != p.p || p3.g != p.g));

    GroupParams p32 = group_gen(32, 1);
    CHECK(is_prime(p32.p));
    CHECK(is_prime(p32.q));
    CHECK((p32.p >> 31) == 1);
    CHECK(powmod(p32.g, p32.p, p32.q) == 1);

    CHECK_THROWS_AS(group_gen(8, 1), std::invalid_argument);
}

TEST_CASE("keygen dimensions and definitional h_i = g^{s_i}") {
    GroupParams p = group_gen(20, 3);
    MasterKeys keys = keygen(p, 4, 11);
    REQUIRE(keys.s.size() == 4);
    REQUIRE(keys.h.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(keys.s[i] < p.p);
        CHECK(keys.h[i] == powmod(p.g, keys.s[i], p.q));
    }
    // zero exponent maps to the identity
    MasterKeys forced = keys;
    forced.s[2] = 0;
    forced.h[2] = powmod(p.g, 0, p.q);
    CHECK(forced.h[2] == 1);
}

TEST_CASE("discretize maps, clamps and rejects non-finite input") {
    Discretization d{100.0, 128, 255};
    std::vector<double> x{0.0, 0.0};
    CHECK(discretize(x, d) == std::vector<std::uint32_t>{128, 128});
    std::vector<double> x2{1.0, -1.0};
    CHECK(discretize(x2, d) == std::vector<std::uint32_t>{228, 28});
    std::vector<double> x3{10.0};
    CHECK(discretize(x3, d) == std::vector<std::uint32_t>{255});
    std::vector<double> x4{-10.0};
    CHECK(discretize(x4, d) == std::vector<std::uint32_t>{0});
    std::vector<double> bad{std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(discretize(bad, d), std::invalid_argument);
}

TEST_CASE("encrypt structure: zero vector and zero randomness") {
    GroupParams p = group_gen(24, 5);
    MasterKeys keys = keygen(p, 3, 6);

    std::vector<std::uint32_t> zeros{0, 0, 0};
    Ciphertext c = encrypt_with_randomness(keys, p, zeros, 12345 % p.p);
    // g^0 = 1 so ct_i = h_i^r
    std::uint64_t r = 12345 % p.p;
    for (std::size_t i = 0; i < 3; ++i) CHECK(c.ct[i] == powmod(keys.h[i], r, p.q));

    std::vector<std::uint32_t> xt{5, 7, 9};
    Ciphertext c0 = encrypt_with_randomness(keys, p, xt, 0);
    CHECK(c0.ct0 == 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(c0.ct[i] == powmod(p.g, xt[i], p.q));

    std::vector<std::uint32_t> wrong_dim{1, 2};
    CHECK_THROWS_AS(encrypt(keys, p, wrong_dim, 1), std::invalid_argument);
}

TEST_CASE("functional key equals direct modular sum") {
    GroupParams p = group_gen(24, 9);
    MasterKeys keys = keygen(p, 4, 10);

    FunctionalKey zero = derive_functional_key(p, keys, {0, 0, 0, 0});
    CHECK(zero.eta == 0);

    FunctionalKey unit = derive_functional_key(p, keys, {0, 0, 1, 0});
    CHECK(unit.eta == keys.s[2]);

    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        auto z = random_vec(rng, 4, 1000);
        FunctionalKey fk = derive_functional_key(p, keys, z);
        unsigned __int128 expect = 0;
        for (std::size_t j = 0; j < 4; ++j) expect += static_cast<unsigned __int128>(keys.s[j]) * z[j];
        CHECK(fk.eta == static_cast<std::uint64_t>(expect % p.p));
    }

    CHECK_THROWS_AS(derive_functional_key(p, keys, {1, 2}), std::invalid_argument);
}

TEST_CASE("decrypt recovers the plaintext inner product") {
    GroupParams p = group_gen(32, 42);
    MasterKeys keys = keygen(p, 8, 43);
    Rng rng(44);

    SUBCASE("zero vector decrypts to 0 and unit vectors extract components") {
        auto xt = random_vec(rng, 8, 255);
        Ciphertext ct = encrypt(keys, p, xt, 45);
        std::vector<std::uint32_t> z(8, 0);
        FunctionalKey fk = derive_functional_key(p, keys, z);
        CHECK(decrypt_inner_product(p, ct, z, fk, 8 * 7 * 255) == 0);

        for (std::size_t j = 0; j < 8; ++j) {
            std::vector<std::uint32_t> e(8, 0);
            e[j] = 1;
            FunctionalKey fe_j = derive_functional_key(p, keys, e);
            CHECK(decrypt_inner_product(p, ct, e, fe_j, 255) == xt[j]);
        }
    }

    SUBCASE("random trials match the plaintext oracle, k=3 xmax=255") {
        for (int trial = 0; trial < 200; ++trial) {
            auto xt = random_vec(rng, 8, 255);
            auto z = random_vec(rng, 8, 7);
            Ciphertext ct = encrypt(keys, p, xt, derive_seed(46, "r", trial));
            FunctionalKey fk = derive_functional_key(p, keys, z);
            std::uint64_t got = decrypt_inner_product(p, ct, z, fk, 8 * 7 * 255);
            CHECK(got == dot(xt, z));
        }
    }

    SUBCASE("linearity in the query vector") {
        auto xt = random_vec(rng, 8, 200);
        Ciphertext ct = encrypt(keys, p, xt, 99);
        auto z1 = random_vec(rng, 8, 7);
        auto z2 = random_vec(rng, 8, 7);
        std::vector<std::uint32_t> zsum(8);
        for (std::size_t j = 0; j < 8; ++j) zsum[j] = z1[j] + z2[j];
        auto fk1 = derive_functional_key(p, keys, z1);
        auto fk2 = derive_functional_key(p, keys, z2);
        auto fks = derive_functional_key(p, keys, zsum);
        std::uint64_t bound = 8 * 14 * 255;
        CHECK(decrypt_inner_product(p, ct, z1, fk1, bound) + decrypt_inner_product(p, ct, z2, fk2, bound) ==
              decrypt_inner_product(p, ct, zsum, fks, bound));
    }

    SUBCASE("decrypted value is independent of the encryption randomness") {
        auto xt = random_vec(rng, 8, 255);
        auto z = random_vec(rng, 8, 7);
        FunctionalKey fk = derive_functional_key(p, keys, z);
        std::uint64_t expect = dot(xt, z);
        for (std::uint64_t r_seed : {1ull, 2ull, 3ull, 999ull}) {
            Ciphertext ct = encrypt(keys, p, xt, r_seed);
            CHECK(decrypt_inner_product(p, ct, z, fk, 8 * 7 * 255) == expect);
        }
    }

    SUBCASE("tampering one component shifts the result by z_i or fails") {
        auto xt = random_vec(rng, 8, 100);
        auto z = random_vec(rng, 8, 7);
        FunctionalKey fk = derive_functional_key(p, keys, z);
        Ciphertext ct = encrypt(keys, p, xt, 7);
        std::uint64_t clean = decrypt_inner_product(p, ct, z, fk, 8 * 7 * 255);
        for (std::size_t i = 0; i < 8; ++i) {
            Ciphertext tampered = ct;
            tampered.ct[i] = mulmod(tampered.ct[i], p.g, p.q);
            std::uint64_t shifted = decrypt_inner_product(p, tampered, z, fk, 8 * 7 * 255 + 8);
            CHECK(shifted == clean + z[i]);
        }
    }

    SUBCASE("wrong functional key raises LogNotFound") {
        auto xt = random_vec(rng, 8, 255);
        auto z = random_vec(rng, 8, 7);
        Ciphertext ct = encrypt(keys, p, xt, 13);
        FunctionalKey fk = derive_functional_key(p, keys, z);
        fk.eta = (fk.eta + 1) % p.p;
        CHECK_THROWS_AS(decrypt_inner_product(p, ct, z, fk, 8 * 7 * 255), LogNotFound);
    }
}

TEST_CASE("baby-step giant-step agrees with the linear-scan oracle") {
    GroupParams p = group_gen(20, 17);
    MasterKeys keys = keygen(p, 1, 18);
    Rng rng(19);
    for (std::uint64_t bound : {0ull, 1ull, 2ull, 100ull, 9999ull}) {
        for (int trial = 0; trial < 8; ++trial) {
            std::uint32_t v = static_cast<std::uint32_t>(rng.below(bound + 1));
            std::uint64_t target = powmod(p.g, v, p.q);
            std::vector<std::uint32_t> z{1};
            FunctionalKey fk = derive_functional_key(p, keys, z);
            std::vector<std::uint32_t> xv{v};
            if (v < p.p) {
                Ciphertext ct = encrypt(keys, p, xv, rng.next());
                CHECK(decrypt_inner_product(p, ct, z, fk, bound) == v);
            }
            CHECK(dlog_linear(p, target, bound) == static_cast<std::int64_t>(v));
        }
    }
    // a target just above the bound is not found
    std::uint64_t target = powmod(p.g, 101, p.q);
    CHECK(dlog_linear(p, target, 100) == -1);
}

TEST_CASE("fe serialization round-trips") {
    GroupParams p = group_gen(28, 101);
    MasterKeys keys = keygen(p, 3, 102);
    Ciphertext ct = encrypt(keys, p, std::vector<std::uint32_t>{1, 2, 3}, 103);
    FunctionalKey fk = derive_functional_key(p, keys, {4, 5, 6});

    Bytes pb = serialize(p);
    ByteReader pr(pb);
    GroupParams p2 = parse_group_params(pr);
    CHECK(p2.p == p.p);
    CHECK(p2.q == p.q);
    CHECK(p2.g == p.g);
    CHECK(p2.lambda == p.lambda);

    Bytes cb = serialize(ct);
    ByteReader cr(cb);
    Ciphertext ct2 = parse_ciphertext(cr);
    CHECK(ct2.ct0 == ct.ct0);
    CHECK(ct2.ct == ct.ct);

    Bytes fb = serialize(fk);
    ByteReader fr(fb);
    FunctionalKey fk2 = parse_functional_key(fr);
    CHECK(fk2.eta == fk.eta);
    CHECK(fk2.z == fk.z);
}
