#include "pole/fe.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace pole::fe {

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp != 0) {
        if (exp & 1) result = mulmod(result, base, m);
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    return result;
}

std::uint64_t invmod(std::uint64_t a, std::uint64_t prime_m) {
    return powmod(a % prime_m, prime_m - 2, prime_m);
}

// Deterministic Miller-Rabin; this base set decides primality for all 64-bit n.
bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n % p == 0) return n == p;
    }
    std::uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        std::uint64_t x = powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 0; i < r - 1; ++i) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

GroupParams group_gen(int lambda, std::uint64_t seed) {
    if (lambda < 16 || lambda > 62) throw std::invalid_argument("group_gen: lambda out of [16, 62]");
    Rng rng(seed);
    std::uint64_t lo = std::uint64_t{1} << (lambda - 1);
    std::uint64_t hi = (std::uint64_t{1} << lambda) - 1;
    std::uint64_t p;
    for (;;) {
        p = rng.range(lo, hi) | 1;
        if (is_prime(p) && is_prime(2 * p + 1)) break;
    }
    std::uint64_t q = 2 * p + 1;
    // Any nonidentity square of Z_q^* generates the order-p subgroup.
    std::uint64_t g;
    do {
        std::uint64_t a = rng.range(2, q - 2);
        g = mulmod(a, a, q);
    } while (g == 1);
    return GroupParams{p, q, g, lambda};
}

MasterKeys keygen(const GroupParams& params, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw std::invalid_argument("keygen: dimension must be >= 1");
    Rng rng(seed);
    MasterKeys keys;
    keys.s.reserve(dim);
    keys.h.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        std::uint64_t si = rng.below(params.p);
        keys.s.push_back(si);
        keys.h.push_back(powmod(params.g, si, params.q));
    }
    return keys;
}

std::vector<std::uint32_t> discretize(std::span<const double> x, const Discretization& disc) {
    std::vector<std::uint32_t> out;
    out.reserve(x.size());
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument("discretize: non-finite input");
        long long t = std::llround(v * disc.scale) + static_cast<long long>(disc.offset);
        t = std::clamp(t, 0ll, static_cast<long long>(disc.xmax));
        out.push_back(static_cast<std::uint32_t>(t));
    }
    return out;
}

Ciphertext encrypt_with_randomness(const MasterKeys& keys, const GroupParams& params,
                                   std::span<const std::uint32_t> xt, std::uint64_t r) {
    if (xt.size() != keys.dim()) throw std::invalid_argument("encrypt: dimension mismatch");
    Ciphertext out;
    out.ct0 = powmod(params.g, r, params.q);
    out.ct.reserve(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i) {
        if (xt[i] >= params.p) throw std::invalid_argument("encrypt: plaintext component outside Z_p");
        std::uint64_t hi_r = powmod(keys.h[i], r, params.q);
        out.ct.push_back(mulmod(hi_r, powmod(params.g, xt[i], params.q), params.q));
    }
    return out;
}

Ciphertext encrypt(const MasterKeys& keys, const GroupParams& params,
                   std::span<const std::uint32_t> xt, std::uint64_t r_seed) {
    Rng rng(r_seed);
    return encrypt_with_randomness(keys, params, xt, rng.below(params.p));
}

FunctionalKey derive_functional_key(const GroupParams& params, const MasterKeys& keys,
                                    std::vector<std::uint32_t> z) {
    if (z.size() != keys.dim()) throw std::invalid_argument("derive_functional_key: dimension mismatch");
    std::uint64_t eta = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j] >= params.p) throw std::invalid_argument("derive_functional_key: component outside Z_p");
        eta = (eta + mulmod(keys.s[j], z[j], params.p)) % params.p;
    }
    return FunctionalKey{eta, std::move(z)};
}

namespace {

// g^v = target with v in [0, bound], or LogNotFound.
std::uint64_t bsgs(const GroupParams& params, std::uint64_t target, std::uint64_t bound) {
    if (target == 1) return 0;
    std::uint64_t m = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(bound) + 1.0)));
    if (m == 0) m = 1;
    std::unordered_map<std::uint64_t, std::uint64_t> baby;
    baby.reserve(static_cast<std::size_t>(m) * 2);
    std::uint64_t cur = 1;
    for (std::uint64_t j = 0; j < m; ++j) {
        baby.emplace(cur, j);
        cur = mulmod(cur, params.g, params.q);
    }
    // giant step multiplier g^{-m}
    std::uint64_t gm_inv = powmod(params.g, params.p - (m % params.p), params.q);
    std::uint64_t gamma = target;
    for (std::uint64_t i = 0; i * m <= bound; ++i) {
        auto it = baby.find(gamma);
        if (it != baby.end()) {
            std::uint64_t v = i * m + it->second;
            if (v <= bound) return v;
        }
        gamma = mulmod(gamma, gm_inv, params.q);
    }
    throw LogNotFound("no exponent in [0, bound] matches");
}

}  // namespace

std::uint64_t decrypt_inner_product(const GroupParams& params, const Ciphertext& ct,
                                    std::span<const std::uint32_t> z, const FunctionalKey& fkey,
                                    std::uint64_t bound) {
    if (z.size() != ct.dim()) throw std::invalid_argument("decrypt: dimension mismatch");
    // prod ct_j^{z_j} evaluated by grouping equal exponents; z components are
    // k-bit so there are at most 2^k classes.
    std::uint32_t zmax = 0;
    for (auto v : z) zmax = std::max(zmax, v);
    std::vector<std::uint64_t> class_product(static_cast<std::size_t>(zmax) + 1, 1);
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j] != 0) class_product[z[j]] = mulmod(class_product[z[j]], ct.ct[j], params.q);
    }
    std::uint64_t numerator = 1;
    for (std::uint32_t v = 1; v <= zmax; ++v) {
        if (class_product[v] != 1) numerator = mulmod(numerator, powmod(class_product[v], v, params.q), params.q);
    }
    std::uint64_t denominator = powmod(ct.ct0, fkey.eta, params.q);
    std::uint64_t target = mulmod(numerator, invmod(denominator, params.q), params.q);
    return bsgs(params, target, bound);
}

Bytes serialize(const GroupParams& params) {
    ByteWriter w;
    w.put_uint(params.p);
    w.put_uint(params.q);
    w.put_uint(params.g);
    w.put_uint(static_cast<std::uint64_t>(params.lambda));
    return w.take();
}

GroupParams parse_group_params(ByteReader& r) {
    GroupParams p;
    p.p = r.get_uint();
    p.q = r.get_uint();
    p.g = r.get_uint();
    p.lambda = static_cast<int>(r.get_uint());
    return p;
}

Bytes serialize(const MasterKeys& keys) {
    ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(keys.s.size()));
    for (auto v : keys.s) w.put_uint(v);
    for (auto v : keys.h) w.put_uint(v);
    return w.take();
}

void write_ciphertext(ByteWriter& w, const Ciphertext& ct) {
    w.put_uint(ct.ct0);
    w.put_u32(static_cast<std::uint32_t>(ct.ct.size()));
    for (auto v : ct.ct) w.put_uint(v);
}

Bytes serialize(const Ciphertext& ct) {
    ByteWriter w;
    write_ciphertext(w, ct);
    return w.take();
}

Ciphertext parse_ciphertext(ByteReader& r) {
    Ciphertext ct;
    ct.ct0 = r.get_uint();
    std::uint32_t n = r.get_u32();
    ct.ct.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ct.ct.push_back(r.get_uint());
    return ct;
}

void write_functional_key(ByteWriter& w, const FunctionalKey& fkey) {
    w.put_uint(fkey.eta);
    w.put_u32(static_cast<std::uint32_t>(fkey.z.size()));
    for (auto v : fkey.z) w.put_uint(v);
}

Bytes serialize(const FunctionalKey& fkey) {
    ByteWriter w;
    write_functional_key(w, fkey);
    return w.take();
}

FunctionalKey parse_functional_key(ByteReader& r) {
    FunctionalKey k;
    k.eta = r.get_uint();
    std::uint32_t n = r.get_u32();
    k.z.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) k.z.push_back(static_cast<std::uint32_t>(r.get_uint()));
    return k;
}

}  // namespace pole::fe
