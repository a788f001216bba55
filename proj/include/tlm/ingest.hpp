#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlm/common.hpp"

namespace tlm {

enum class Direction { ClientToServer, ServerToClient };

inline constexpr std::size_t kMaxTcpPayload = 65495;

// One TCP segment as seen on the wire, reduced to what classification needs.
struct RawSegment {
    std::uint32_t seq = 0;
    std::int64_t ts_sec = 0;
    std::uint32_t ts_nsec = 0;
    Direction dir = Direction::ClientToServer;
    Bytes payload;

    double ts_seconds() const { return static_cast<double>(ts_sec) + ts_nsec * 1e-9; }
};

// Canonicalized TCP 4-tuple: endpoint A is the numerically lower (ip, port).
struct FlowKey {
    std::uint32_t ip_a = 0, ip_b = 0;
    std::uint16_t port_a = 0, port_b = 0;

    auto operator<=>(const FlowKey&) const = default;
    std::string str() const;

    static FlowKey canonical(std::uint32_t src_ip, std::uint16_t src_port,
                             std::uint32_t dst_ip, std::uint16_t dst_port);
};

struct Origin {
    enum class Kind { Pcap, Jsonl, Synthetic };
    Kind kind = Kind::Synthetic;
    std::string path;        // Pcap/Jsonl
    std::uint64_t seed = 0;  // Synthetic
};

// Ordered, labeled segment sequence for one flow — the unit of classification.
struct Session {
    std::string id;
    std::string label;
    std::vector<RawSegment> segments;
    Origin origin;
};

struct LabeledDataset {
    std::vector<Session> sessions;
    std::vector<std::string> class_names;  // sorted lexicographically
    std::uint64_t split_seed = 42;

    int class_index(const std::string& label) const;
    std::size_t num_classes() const { return class_names.size(); }

    // Collects distinct labels, sorts them, validates every session's label.
    static LabeledDataset from_sessions(std::vector<Session> sessions,
                                        std::uint64_t split_seed = 42);
};

// --------------------------------------------------------------------------
// pcap ingestion (classic format, Ethernet link type)
// --------------------------------------------------------------------------

struct PcapParse {
    std::vector<std::pair<FlowKey, RawSegment>> pairs;  // capture order
    std::size_t skipped = 0;                            // non-IPv4 + non-TCP + malformed frames
    std::size_t skipped_non_ipv4 = 0;
    std::size_t skipped_non_tcp = 0;
};

// Throws MalformedPcapHeader / UnsupportedLinkType / TruncatedFrame.
// Direction: the endpoint that sent the first SYN of a flow is the client;
// if no SYN was captured, the source of the flow's first segment is.
PcapParse parse_pcap(std::span<const std::uint8_t> bytes);
PcapParse parse_pcap_file(const std::string& path);

using Labeler = std::function<std::optional<std::string>(const FlowKey&)>;

// One session per flow key; per-direction segments stable-sorted by sequence
// number and deduplicated (first-seen payload wins), then the two directions
// interleaved by timestamp. Unlabeled flows are dropped and counted.
LabeledDataset assemble_sessions(const std::vector<std::pair<FlowKey, RawSegment>>& pairs,
                                 const Labeler& labeler, const Origin& origin,
                                 std::size_t* dropped_flows = nullptr);

// --------------------------------------------------------------------------
// JSONL session format
// --------------------------------------------------------------------------

// One JSON object per line:
//   {"id": str, "label": str, "segments":
//     [{"dir": "c2s"|"s2c", "seq": int, "ts": float, "payload_b64": str}]}
LabeledDataset read_sessions_jsonl(const std::string& path);

// --------------------------------------------------------------------------

// Stratified split, deterministic in ds.split_seed. Per-class test count is
// round(test_fraction * class_count), clamped to [1, count-1].
// Throws ClassTooSmall if any class has fewer than 2 sessions.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        double test_fraction);

// Keeps only segments flowing in `dir`; nullopt keeps both directions.
LabeledDataset filter_direction(const LabeledDataset& ds, std::optional<Direction> dir);

// Small helpers shared with the synth writers and the CLI.
std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(const std::string& text);  // throws Error on bad input

}  // namespace tlm
