#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pole {

using Bytes = std::vector<std::uint8_t>;
using Hash256 = std::array<std::uint8_t, 32>;

struct DecodeError : std::runtime_error {
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

// Canonical encoding shared by block hashing, chain persistence and key
// serialization. Integers are minimal big-endian bytes behind a one-byte
// length, sequences carry a fixed 4-byte big-endian count, reals are 8
// IEEE-754 bytes little-endian. Field order is fixed by the caller.
class ByteWriter {
  public:
    void put_u8(std::uint8_t v) { buf_.push_back(v); }

    void put_u32(std::uint32_t v) {
        for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    // Minimal big-endian representation, 1-byte length prefix. Zero encodes
    // as a bare zero length.
    void put_uint(std::uint64_t v) {
        std::uint8_t tmp[8];
        int n = 0;
        while (v != 0) {
            tmp[n++] = static_cast<std::uint8_t>(v & 0xff);
            v >>= 8;
        }
        put_u8(static_cast<std::uint8_t>(n));
        for (int i = n - 1; i >= 0; --i) buf_.push_back(tmp[i]);
    }

    void put_double(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }

    void put_hash(const Hash256& h) { buf_.insert(buf_.end(), h.begin(), h.end()); }

    void put_bytes(std::span<const std::uint8_t> b) {
        put_u32(static_cast<std::uint32_t>(b.size()));
        buf_.insert(buf_.end(), b.begin(), b.end());
    }

    void put_str(const std::string& s) {
        put_u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void put_raw(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

  private:
    Bytes buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t get_u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }

    std::uint64_t get_uint() {
        std::uint8_t n = get_u8();
        if (n > 8) throw DecodeError("integer wider than 8 bytes");
        need(n);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }

    double get_double() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    Hash256 get_hash() {
        need(32);
        Hash256 h;
        std::memcpy(h.data(), data_.data() + pos_, 32);
        pos_ += 32;
        return h;
    }

    Bytes get_bytes() {
        std::uint32_t n = get_u32();
        need(n);
        Bytes b(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return b;
    }

    std::string get_str() {
        std::uint32_t n = get_u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw DecodeError("truncated input");
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline std::string to_hex(std::span<const std::uint8_t> b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (std::uint8_t c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xf]);
    }
    return s;
}

inline std::string to_hex(const Hash256& h) { return to_hex(std::span<const std::uint8_t>(h.data(), h.size())); }

inline bool is_zero(const Hash256& h) {
    for (auto b : h)
        if (b != 0) return false;
    return true;
}

}  // namespace pole
