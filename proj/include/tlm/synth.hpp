#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "tlm/ingest.hpp"

namespace tlm {

// Ground-truth generator configuration. Each leakage channel plants label
// information at a known byte span so detections can be verified exactly:
//   handshake_leak  -> per-class constant bytes inside handshake-record bodies
//   length_leak     -> disjoint per-class record-length ranges (header bytes 3-4)
//   iv_leak         -> per-class bias in segment payload bytes 5..20
//   payload_leak    -> per-class byte-histogram skew in the ciphertext body
struct LeakageProfile {
    int classes = 2;
    int sessions_per_class = 10;
    bool handshake_leak = false;
    bool length_leak = false;
    double iv_leak_strength = 0.0;       // in [0,1]
    double payload_leak_strength = 0.0;  // in [0,1]
    int records_min = 10;                // app-data records per session
    int records_max = 14;
    std::uint64_t seed = 0;

    void validate() const;  // throws InvalidProfile
    nlohmann::json to_json() const;
    static LeakageProfile from_json(const nlohmann::json& j);
    static LeakageProfile from_file(const std::string& path);
};

// Record body lengths are always >= this, so a 200-byte packet row is fully
// covered by ciphertext and the zero-padding boundary cannot leak the length.
inline constexpr int kSynthMinRecordLen = 200;
inline constexpr int kSynthLenBucket = 40;  // width of each class's length range

// Deterministic dataset: per session, 3 empty segments (TCP handshake
// stand-in), 1-2 handshake-record segments (first byte 0x16), then app-data
// segments carrying exactly one well-formed TLS record each (first byte 0x17).
// All randomness is keyed by (seed, class, session index).
LabeledDataset generate(const LeakageProfile& profile);

// Classic pcap (Ethernet/IPv4/TCP framing, one flow per session), parseable
// by parse_pcap with byte-identical payloads.
void write_pcap(const LabeledDataset& ds, const std::string& path);

// The JSONL format read_sessions_jsonl consumes.
void write_sessions_jsonl(const LabeledDataset& ds, const std::string& path);

// Flow 4-tuple assigned to the i-th session by write_pcap.
FlowKey session_flow_key(std::size_t session_index);

// {"<canonical flow key>": "<label>"} for every session, matching write_pcap.
nlohmann::json make_label_map(const LabeledDataset& ds);

}  // namespace tlm
