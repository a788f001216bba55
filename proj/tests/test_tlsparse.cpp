#include "doctest.h"
#include "tlm/tlsparse.hpp"

#include "tlm/common.hpp"

using namespace tlm;

namespace {

TlsRecord random_record(Rng& rng, std::size_t max_len = 600) {
    static const std::uint8_t types[] = {20, 21, 22, 23};
    Bytes payload(bounded(rng, max_len + 1));
    for (auto& b : payload) b = random_byte(rng);
    return make_record(types[bounded(rng, 4)], std::move(payload), 3,
                       static_cast<std::uint8_t>(1 + bounded(rng, 3)));
}

}  // namespace

TEST_CASE("app data heuristic checks the first byte") {
    const Bytes app = {0x17, 0x03, 0x03, 0x00, 0x10, 0xde, 0xad};
    const Bytes handshake = {0x16, 0x03, 0x01, 0x00, 0x02, 0x01, 0x02};
    CHECK(is_app_data_segment(app));
    CHECK_FALSE(is_app_data_segment(handshake));
    CHECK_FALSE(is_app_data_segment(Bytes{}));
}

TEST_CASE("serialize_record emits header then payload") {
    const TlsRecord r = make_record(23, {0xAA, 0xBB});
    CHECK(serialize_record(r) == Bytes{0x17, 0x03, 0x03, 0x00, 0x02, 0xAA, 0xBB});

    const TlsRecord empty = make_record(22, {});
    CHECK(serialize_record(empty).size() == 5);
}

TEST_CASE("serialize_record rejects a lying length field") {
    TlsRecord r = make_record(23, {1, 2, 3});
    r.declared_length = 7;
    CHECK_THROWS_AS(serialize_record(r), LengthMismatch);
}

TEST_CASE("split_records handles short and truncated streams") {
    CHECK(split_records(Bytes{0x17, 0x03, 0x03, 0x00}).records.empty());
    CHECK(split_records(Bytes{0x17, 0x03, 0x03, 0x00}).trailing == 4);

    // Header declares 100 bytes but only 50 follow.
    Bytes stream = {0x17, 0x03, 0x03, 0x00, 100};
    stream.resize(stream.size() + 50, 0x42);
    const SplitResult r = split_records(stream);
    CHECK(r.records.empty());
    CHECK(r.trailing == 105);
}

TEST_CASE("split_records stops at an implausible header") {
    Bytes stream = serialize_record(make_record(23, {1, 2, 3}));
    stream.push_back(0x00);  // content type 0 is not a TLS record type
    stream.insert(stream.end(), {3, 3, 0, 1, 9});
    const SplitResult r = split_records(stream);
    CHECK(r.records.size() == 1);
    CHECK(r.trailing == 6);
}

TEST_CASE("serialize/split round-trip identity on random record lists") {
    Rng rng(20240811);
    for (int trial = 0; trial < 100; trial++) {
        std::vector<TlsRecord> records(bounded(rng, 6));
        for (auto& r : records) r = random_record(rng);
        const Bytes wire = serialize_records(records);
        const SplitResult out = split_records(wire);
        CHECK(out.trailing == 0);
        REQUIRE(out.records.size() == records.size());
        for (std::size_t i = 0; i < records.size(); i++) CHECK(out.records[i] == records[i]);

        std::size_t expected = 0;
        for (const auto& r : records) expected += kTlsHeaderSize + r.payload.size();
        CHECK(wire.size() == expected);
    }
}

TEST_CASE("is_app_data_segment agrees with content type on serialized records") {
    Rng rng(77);
    for (int trial = 0; trial < 50; trial++) {
        const TlsRecord r = random_record(rng);
        CHECK(is_app_data_segment(serialize_record(r)) == (r.content_type == 23));
    }
}
