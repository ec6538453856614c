#include "doctest.h"

#include "pole/bytes.hpp"
#include "pole/hash.hpp"

using namespace pole;

TEST_CASE("sha256 matches FIPS 180-4 vectors") {
    CHECK(to_hex(sha256(std::string(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(sha256(std::string("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(sha256(std::string("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // one million 'a', exercises the streaming path
    Sha256 h;
    std::vector<std::uint8_t> chunk(1000, 'a');
    for (int i = 0; i < 1000; ++i) h.update(chunk);
    CHECK(to_hex(h.finish()) == "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("canonical integer coding round-trips and is minimal") {
    ByteWriter w;
    w.put_uint(0);
    w.put_uint(1);
    w.put_uint(255);
    w.put_uint(256);
    w.put_uint(~std::uint64_t{0});
    // 0 has a bare zero-length prefix; 255 fits a single byte
    CHECK(w.bytes()[0] == 0);
    CHECK(w.bytes()[1] == 1);

    ByteReader r(w.bytes());
    CHECK(r.get_uint() == 0);
    CHECK(r.get_uint() == 1);
    CHECK(r.get_uint() == 255);
    CHECK(r.get_uint() == 256);
    CHECK(r.get_uint() == ~std::uint64_t{0});
    CHECK(r.done());
}

TEST_CASE("writer and reader round-trip mixed fields") {
    ByteWriter w;
    w.put_double(-1.5);
    w.put_double(0.1);
    w.put_str("hello");
    Hash256 h = sha256(std::string("x"));
    w.put_hash(h);
    w.put_bytes(Bytes{1, 2, 3});

    ByteReader r(w.bytes());
    CHECK(r.get_double() == -1.5);
    CHECK(r.get_double() == 0.1);
    CHECK(r.get_str() == "hello");
    CHECK(r.get_hash() == h);
    CHECK(r.get_bytes() == Bytes{1, 2, 3});
    CHECK(r.done());
}

TEST_CASE("reader rejects truncated input") {
    ByteWriter w;
    w.put_str("abcdef");
    Bytes cut(w.bytes().begin(), w.bytes().end() - 2);
    ByteReader r(cut);
    CHECK_THROWS_AS(r.get_str(), DecodeError);
}

TEST_CASE("derive_seed separates tags and values") {
    auto a = derive_seed(42, "miner-init", 0, 1);
    auto b = derive_seed(42, "miner-init", 0, 2);
    auto c = derive_seed(42, "batch", 0, 1);
    auto a2 = derive_seed(42, "miner-init", 0, 1);
    CHECK(a == a2);
    CHECK(a != b);
    CHECK(a != c);
}
