#include "pole/sml.hpp"

#include <cstring>

namespace pole::sml {

namespace {

// Bit t of a 256-bit word in big-endian order: t=0 is the most significant
// bit of byte 0.
inline int get_bit(const Hash256& w, std::size_t t) {
    return (w[t / 8] >> (7 - (t % 8))) & 1;
}

inline void set_bit(Hash256& w, std::size_t t, int v) {
    if (v)
        w[t / 8] |= static_cast<std::uint8_t>(1u << (7 - (t % 8)));
    else
        w[t / 8] &= static_cast<std::uint8_t>(~(1u << (7 - (t % 8))));
}

Hash256 rotl256(const Hash256& w, std::size_t bits) {
    bits %= 256;
    Hash256 out{};
    for (std::size_t t = 0; t < 256; ++t) set_bit(out, t, get_bit(w, (t + bits) % 256));
    return out;
}

Hash256 xor256(const Hash256& a, const Hash256& b) {
    Hash256 out;
    for (std::size_t i = 0; i < 32; ++i) out[i] = a[i] ^ b[i];
    return out;
}

}  // namespace

SmlWeights generate_sml(const Hash256& phs, std::size_t dim, std::size_t queries, int k) {
    if (k < 1 || k > 16) throw std::invalid_argument("generate_sml: k out of [1, 16]");
    if (dim == 0 || queries == 0) throw std::invalid_argument("generate_sml: empty shape");
    SmlWeights weights;
    weights.k = k;
    weights.source_hash = phs;
    weights.z.reserve(queries);
    for (std::size_t i = 1; i <= queries; ++i) {
        Hash256 primary = xor256(phs, rotl256(phs, i));
        std::vector<std::uint32_t> zi(dim, 0);
        for (std::size_t j = 0; j < dim; ++j) {
            std::uint32_t w = 0;
            for (int b = 0; b < k; ++b) {
                // master_weight is primary repeated until k*D bits, so bit
                // indices wrap mod 256
                std::size_t master_bit = j * static_cast<std::size_t>(k) + static_cast<std::size_t>(b);
                w = (w << 1) | static_cast<std::uint32_t>(get_bit(primary, master_bit % 256));
            }
            zi[j] = w;
        }
        weights.z.push_back(std::move(zi));
    }
    return weights;
}

Bytes serialize(const SmlWeights& weights) {
    ByteWriter w;
    w.put_u8(static_cast<std::uint8_t>(weights.k));
    w.put_u32(static_cast<std::uint32_t>(weights.queries()));
    w.put_u32(static_cast<std::uint32_t>(weights.dim()));
    w.put_hash(weights.source_hash);
    // weights packed k bits each, MSB first, in (i, j) order
    Bytes packed;
    std::uint32_t acc = 0;
    int nbits = 0;
    for (const auto& zi : weights.z) {
        for (std::uint32_t v : zi) {
            acc = (acc << weights.k) | (v & ((1u << weights.k) - 1));
            nbits += weights.k;
            while (nbits >= 8) {
                packed.push_back(static_cast<std::uint8_t>(acc >> (nbits - 8)));
                nbits -= 8;
                acc &= (1u << nbits) - 1;
            }
        }
    }
    if (nbits > 0) packed.push_back(static_cast<std::uint8_t>(acc << (8 - nbits)));
    w.put_bytes(packed);
    return w.take();
}

SmlWeights parse_weights(ByteReader& r) {
    SmlWeights weights;
    weights.k = r.get_u8();
    std::uint32_t queries = r.get_u32();
    std::uint32_t dim = r.get_u32();
    weights.source_hash = r.get_hash();
    Bytes packed = r.get_bytes();
    if (weights.k < 1 || weights.k > 16) throw DecodeError("sml weights: bad k");
    std::size_t need_bits = static_cast<std::size_t>(queries) * dim * static_cast<std::size_t>(weights.k);
    if (packed.size() != (need_bits + 7) / 8) throw DecodeError("sml weights: bad packed length");
    weights.z.assign(queries, std::vector<std::uint32_t>(dim, 0));
    std::size_t bit = 0;
    for (std::uint32_t i = 0; i < queries; ++i) {
        for (std::uint32_t j = 0; j < dim; ++j) {
            std::uint32_t v = 0;
            for (int b = 0; b < weights.k; ++b, ++bit) {
                v = (v << 1) | ((packed[bit / 8] >> (7 - (bit % 8))) & 1u);
            }
            weights.z[i][j] = v;
        }
    }
    return weights;
}

SmlWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    SmlWeights w = parse_weights(r);
    if (!r.done()) throw DecodeError("sml weights: trailing bytes");
    return w;
}

std::uint64_t decrypt_bound(std::size_t dim, int k, std::uint32_t xmax) {
    return static_cast<std::uint64_t>(dim) * ((std::uint64_t{1} << k) - 1) * xmax;
}

std::vector<double> apply_sml(const SmlWeights& weights, const fe::GroupParams& params,
                              const fe::Ciphertext& ct, const std::vector<fe::FunctionalKey>& fkeys,
                              const fe::Discretization& disc) {
    if (fkeys.size() != weights.queries())
        throw std::invalid_argument("apply_sml: one functional key per query vector required");
    if (ct.dim() != weights.dim()) throw std::invalid_argument("apply_sml: ciphertext dimension mismatch");
    std::uint64_t bound = decrypt_bound(weights.dim(), weights.k, disc.xmax);
    std::vector<double> features;
    features.reserve(weights.queries());
    for (std::size_t i = 0; i < weights.queries(); ++i) {
        std::uint64_t ip;
        try {
            ip = fe::decrypt_inner_product(params, ct, weights.z[i], fkeys[i], bound);
        } catch (const fe::LogNotFound& e) {
            throw SmlDecryptFailed(std::string("query vector ") + std::to_string(i) + ": " + e.what());
        }
        std::int64_t zsum = 0;
        for (std::uint32_t v : weights.z[i]) zsum += v;
        features.push_back(
            static_cast<double>(static_cast<std::int64_t>(ip) - static_cast<std::int64_t>(disc.offset) * zsum) /
            disc.scale);
    }
    return features;
}

std::vector<std::vector<double>> apply_sml_batch(const SmlWeights& weights, const fe::GroupParams& params,
                                                 const std::vector<fe::Ciphertext>& cts,
                                                 const std::vector<fe::FunctionalKey>& fkeys,
                                                 const fe::Discretization& disc) {
    std::vector<std::vector<double>> out;
    out.reserve(cts.size());
    for (const auto& ct : cts) out.push_back(apply_sml(weights, params, ct, fkeys, disc));
    return out;
}

std::vector<double> apply_sml_plaintext(const SmlWeights& weights, std::span<const double> x,
                                        const fe::Discretization& disc) {
    std::vector<std::uint32_t> xt = fe::discretize(x, disc);
    if (xt.size() != weights.dim()) throw std::invalid_argument("apply_sml_plaintext: dimension mismatch");
    std::vector<double> features;
    features.reserve(weights.queries());
    for (const auto& zi : weights.z) {
        std::int64_t ip = 0;
        std::int64_t zsum = 0;
        for (std::size_t j = 0; j < zi.size(); ++j) {
            ip += static_cast<std::int64_t>(xt[j]) * zi[j];
            zsum += zi[j];
        }
        features.push_back(static_cast<double>(ip - static_cast<std::int64_t>(disc.offset) * zsum) / disc.scale);
    }
    return features;
}

std::vector<std::vector<double>> apply_sml_plaintext_batch(const SmlWeights& weights,
                                                           const std::vector<std::vector<double>>& xs,
                                                           const fe::Discretization& disc) {
    std::vector<std::vector<double>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(apply_sml_plaintext(weights, x, disc));
    return out;
}

}  // namespace pole::sml
