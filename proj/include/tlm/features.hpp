#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tlm/ingest.hpp"

namespace tlm {

enum class ViewKind { TcpPayload, TlsAppData, ConcatTls };

std::string to_string(ViewKind kind);
ViewKind view_kind_from_string(const std::string& s);

// Deterministic transform from a session to a fixed-shape byte matrix. Masks
// are per-packet prefixes [0, per_packet_mask).
struct ViewSpec {
    ViewKind kind = ViewKind::TcpPayload;
    int packets = 10;            // K
    int bytes_per_packet = 200;  // N
    int per_packet_mask = 0;     // m: zero bytes [0, m) of each packet row
    int concat_length = 2000;    // ConcatTls only
    int skip_tcp_handshake = 3;  // leading segments dropped (TcpPayload only)

    int dims() const {
        return kind == ViewKind::ConcatTls ? concat_length : packets * bytes_per_packet;
    }
    void validate() const;  // throws Error on bad combinations

    bool operator==(const ViewSpec&) const = default;
    nlohmann::json to_json() const;
    static ViewSpec from_json(const nlohmann::json& j);
};

struct SampleMatrix {
    Bytes features;  // length == spec.dims()
    int class_index = 0;
    std::string session_id;
};

struct ViewDataset {
    ViewSpec spec;
    std::vector<SampleMatrix> samples;
    std::vector<std::string> class_names;
    std::size_t dropped_all_zero = 0;

    int dims() const { return spec.dims(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Builds the fixed-shape byte matrix for every session.
//  TcpPayload: drop skip_tcp_handshake leading segments positionally, then the
//    next K non-empty payloads, each truncated/zero-padded to N and masked.
//  TlsAppData: first K segments whose payload starts with 0x17, same shaping.
//  ConcatTls:  app-data payloads masked per payload, concatenated, then
//    truncated/zero-padded to concat_length.
// Sessions reducing to an all-zero vector are dropped and counted.
// Throws EmptyView when no session survives.
ViewDataset build_view(const LabeledDataset& ds, const ViewSpec& spec);

// New dataset whose mask prefix is max(old, extra_prefix) with those positions
// zeroed; the input is untouched. Throws RangeOutOfBounds / KindMismatch.
ViewDataset apply_mask(const ViewDataset& v, int extra_prefix);

// Sums a flat K*N importance vector into per-offset totals of length N.
// Throws KindMismatch for ConcatTls, DimensionMismatch on bad lengths.
std::vector<double> offset_importance(const std::vector<double>& flat_impact,
                                      const ViewSpec& spec);

// Binary matrix export: 16-byte header (magic "TLMV", u32 sample count, u32 D,
// u32 class count, little-endian) then per-sample records (u32 class_index,
// D feature bytes). A JSON sidecar at <path>.json carries class_names + spec.
void write_view_matrix(const ViewDataset& v, const std::string& path);
ViewDataset read_view_matrix(const std::string& path);

}  // namespace tlm
