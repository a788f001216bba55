#include "tlm/tlsparse.hpp"

namespace tlm {

namespace {

bool plausible_header(std::uint8_t content_type, std::size_t length) {
    return content_type >= 20 && content_type <= 23 && length <= kTlsMaxRecordLen;
}

}  // namespace

SplitResult split_records(std::span<const std::uint8_t> stream) {
    SplitResult out;
    std::size_t pos = 0;
    while (stream.size() - pos >= kTlsHeaderSize) {
        const std::uint8_t type = stream[pos];
        const std::size_t length =
            (static_cast<std::size_t>(stream[pos + 3]) << 8) | stream[pos + 4];
        if (!plausible_header(type, length)) break;
        if (stream.size() - pos - kTlsHeaderSize < length) break;  // truncated body
        TlsRecord r;
        r.content_type = type;
        r.version_major = stream[pos + 1];
        r.version_minor = stream[pos + 2];
        r.declared_length = static_cast<std::uint16_t>(length);
        r.payload.assign(stream.begin() + pos + kTlsHeaderSize,
                         stream.begin() + pos + kTlsHeaderSize + length);
        out.records.push_back(std::move(r));
        pos += kTlsHeaderSize + length;
    }
    out.trailing = stream.size() - pos;
    return out;
}

Bytes serialize_record(const TlsRecord& r) {
    if (r.payload.size() != r.declared_length) {
        throw LengthMismatch("record declares " + std::to_string(r.declared_length) +
                             " bytes but payload has " + std::to_string(r.payload.size()));
    }
    Bytes out;
    out.reserve(kTlsHeaderSize + r.payload.size());
    out.push_back(r.content_type);
    out.push_back(r.version_major);
    out.push_back(r.version_minor);
    out.push_back(static_cast<std::uint8_t>(r.declared_length >> 8));
    out.push_back(static_cast<std::uint8_t>(r.declared_length & 0xff));
    out.insert(out.end(), r.payload.begin(), r.payload.end());
    return out;
}

Bytes serialize_records(std::span<const TlsRecord> records) {
    Bytes out;
    for (const TlsRecord& r : records) {
        Bytes one = serialize_record(r);
        out.insert(out.end(), one.begin(), one.end());
    }
    return out;
}

TlsRecord make_record(std::uint8_t content_type, Bytes payload,
                      std::uint8_t version_major, std::uint8_t version_minor) {
    TlsRecord r;
    r.content_type = content_type;
    r.version_major = version_major;
    r.version_minor = version_minor;
    r.declared_length = static_cast<std::uint16_t>(payload.size());
    r.payload = std::move(payload);
    return r;
}

}  // namespace tlm
