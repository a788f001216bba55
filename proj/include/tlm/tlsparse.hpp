#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlm/common.hpp"

namespace tlm {

// One TLS record-layer unit: 5-byte header (type, version, big-endian length)
// followed by an opaque payload.
struct TlsRecord {
    std::uint8_t content_type = 0;  // 20 CCS, 21 Alert, 22 Handshake, 23 AppData
    std::uint8_t version_major = 3;
    std::uint8_t version_minor = 3;
    std::uint16_t declared_length = 0;
    Bytes payload;

    bool operator==(const TlsRecord&) const = default;
};

inline constexpr std::size_t kTlsHeaderSize = 5;
inline constexpr std::size_t kTlsMaxRecordLen = 16384 + 2048;
inline constexpr std::uint8_t kContentTypeHandshake = 22;
inline constexpr std::uint8_t kContentTypeAppData = 23;

// Per-segment heuristic: a TCP payload carries an application-data record iff
// its first byte is 0x17.
inline bool is_app_data_segment(std::span<const std::uint8_t> payload) {
    return !payload.empty() && payload[0] == kContentTypeAppData;
}

struct SplitResult {
    std::vector<TlsRecord> records;
    std::size_t trailing = 0;  // unconsumed bytes after the last whole record
};

// Greedy record split from offset 0. Stops at the first malformed header
// (content type outside [20,23] or length above the record-layer ceiling) or
// at truncation; the unconsumed byte count is reported, never thrown.
SplitResult split_records(std::span<const std::uint8_t> stream);

// 5-byte header + payload. Throws LengthMismatch if declared_length does not
// equal the payload size.
Bytes serialize_record(const TlsRecord& r);

Bytes serialize_records(std::span<const TlsRecord> records);

// Convenience constructor that keeps declared_length in sync.
TlsRecord make_record(std::uint8_t content_type, Bytes payload,
                      std::uint8_t version_major = 3, std::uint8_t version_minor = 3);

}  // namespace tlm
