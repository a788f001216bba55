#include "tlm/features.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "tlm/tlsparse.hpp"

namespace tlm {

std::string to_string(ViewKind kind) {
    switch (kind) {
        case ViewKind::TcpPayload: return "tcp_payload";
        case ViewKind::TlsAppData: return "tls_app_data";
        case ViewKind::ConcatTls: return "concat_tls";
    }
    return "?";
}

ViewKind view_kind_from_string(const std::string& s) {
    if (s == "tcp_payload") return ViewKind::TcpPayload;
    if (s == "tls_app_data") return ViewKind::TlsAppData;
    if (s == "concat_tls") return ViewKind::ConcatTls;
    throw Error("unknown view kind '" + s + "'");
}

void ViewSpec::validate() const {
    if (kind == ViewKind::ConcatTls) {
        if (concat_length < 1) throw Error("concat_length must be >= 1");
    } else {
        if (packets < 1 || bytes_per_packet < 1) throw Error("packets and bytes_per_packet must be >= 1");
        if (per_packet_mask > bytes_per_packet) throw RangeOutOfBounds("mask prefix exceeds bytes_per_packet");
    }
    if (per_packet_mask < 0) throw RangeOutOfBounds("mask prefix must be >= 0");
    if (skip_tcp_handshake < 0) throw Error("skip_tcp_handshake must be >= 0");
}

nlohmann::json ViewSpec::to_json() const {
    return nlohmann::json{{"kind", to_string(kind)},
                          {"packets", packets},
                          {"bytes_per_packet", bytes_per_packet},
                          {"per_packet_mask", per_packet_mask},
                          {"concat_length", concat_length},
                          {"skip_tcp_handshake", skip_tcp_handshake}};
}

ViewSpec ViewSpec::from_json(const nlohmann::json& j) {
    ViewSpec s;
    s.kind = view_kind_from_string(j.at("kind").get<std::string>());
    s.packets = j.value("packets", 10);
    s.bytes_per_packet = j.value("bytes_per_packet", 200);
    s.per_packet_mask = j.value("per_packet_mask", 0);
    s.concat_length = j.value("concat_length", 2000);
    s.skip_tcp_handshake = j.value("skip_tcp_handshake", 3);
    s.validate();
    return s;
}

namespace {

// Truncate/zero-pad to n, then zero the mask prefix.
void shape_row(const Bytes& payload, int n, int mask, std::uint8_t* out) {
    const std::size_t take = std::min<std::size_t>(payload.size(), static_cast<std::size_t>(n));
    std::memcpy(out, payload.data(), take);
    std::memset(out + take, 0, static_cast<std::size_t>(n) - take);
    std::memset(out, 0, static_cast<std::size_t>(std::min(mask, n)));
}

bool all_zero(const Bytes& v) {
    return std::all_of(v.begin(), v.end(), [](std::uint8_t b) { return b == 0; });
}

}  // namespace

ViewDataset build_view(const LabeledDataset& ds, const ViewSpec& spec) {
    spec.validate();
    ViewDataset out;
    out.spec = spec;
    out.class_names = ds.class_names;
    const int d = spec.dims();

    for (const Session& sess : ds.sessions) {
        SampleMatrix sample;
        sample.session_id = sess.id;
        sample.class_index = ds.class_index(sess.label);
        sample.features.assign(static_cast<std::size_t>(d), 0);

        if (spec.kind == ViewKind::TcpPayload) {
            int row = 0;
            for (std::size_t i = static_cast<std::size_t>(spec.skip_tcp_handshake);
                 i < sess.segments.size() && row < spec.packets; i++) {
                const Bytes& p = sess.segments[i].payload;
                if (p.empty()) continue;  // pure ACKs after the handshake carry no data
                shape_row(p, spec.bytes_per_packet, spec.per_packet_mask,
                          sample.features.data() +
                              static_cast<std::size_t>(row) * spec.bytes_per_packet);
                row++;
            }
        } else if (spec.kind == ViewKind::TlsAppData) {
            int row = 0;
            for (const RawSegment& seg : sess.segments) {
                if (row >= spec.packets) break;
                if (!is_app_data_segment(seg.payload)) continue;
                shape_row(seg.payload, spec.bytes_per_packet, spec.per_packet_mask,
                          sample.features.data() +
                              static_cast<std::size_t>(row) * spec.bytes_per_packet);
                row++;
            }
        } else {  // ConcatTls
            std::size_t pos = 0;
            for (const RawSegment& seg : sess.segments) {
                if (pos >= static_cast<std::size_t>(spec.concat_length)) break;
                if (!is_app_data_segment(seg.payload)) continue;
                // Mask the payload prefix, then append what fits.
                const std::size_t room = static_cast<std::size_t>(spec.concat_length) - pos;
                const std::size_t take = std::min(seg.payload.size(), room);
                std::memcpy(sample.features.data() + pos, seg.payload.data(), take);
                const std::size_t masked =
                    std::min<std::size_t>(static_cast<std::size_t>(spec.per_packet_mask), take);
                std::memset(sample.features.data() + pos, 0, masked);
                pos += take;
            }
        }

        if (all_zero(sample.features)) {
            out.dropped_all_zero++;
            continue;
        }
        out.samples.push_back(std::move(sample));
    }

    if (out.samples.empty()) {
        throw EmptyView("no sessions survive view '" + to_string(spec.kind) + "'");
    }
    return out;
}

ViewDataset apply_mask(const ViewDataset& v, int extra_prefix) {
    if (v.spec.kind == ViewKind::ConcatTls) {
        throw KindMismatch("per-packet masks cannot be applied to an already-concatenated view");
    }
    if (extra_prefix < 0 || extra_prefix > v.spec.bytes_per_packet) {
        throw RangeOutOfBounds("mask prefix " + std::to_string(extra_prefix) + " outside [0, " +
                               std::to_string(v.spec.bytes_per_packet) + "]");
    }
    ViewDataset out = v;
    out.spec.per_packet_mask = std::max(v.spec.per_packet_mask, extra_prefix);
    const int n = out.spec.bytes_per_packet;
    for (SampleMatrix& s : out.samples) {
        for (int p = 0; p < out.spec.packets; p++) {
            std::memset(s.features.data() + static_cast<std::size_t>(p) * n, 0,
                        static_cast<std::size_t>(out.spec.per_packet_mask));
        }
    }
    return out;
}

std::vector<double> offset_importance(const std::vector<double>& flat_impact,
                                      const ViewSpec& spec) {
    if (spec.kind == ViewKind::ConcatTls) {
        throw KindMismatch("offset aggregation is undefined for concatenated views");
    }
    const std::size_t k = static_cast<std::size_t>(spec.packets);
    const std::size_t n = static_cast<std::size_t>(spec.bytes_per_packet);
    if (flat_impact.size() != k * n) {
        throw DimensionMismatch("impact length " + std::to_string(flat_impact.size()) +
                                " != packets*bytes_per_packet " + std::to_string(k * n));
    }
    std::vector<double> per_offset(n, 0.0);
    for (std::size_t i = 0; i < k; i++) {
        for (std::size_t j = 0; j < n; j++) per_offset[j] += flat_impact[i * n + j];
    }
    return per_offset;
}

// --------------------------------------------------------------------------
// TLMV matrix file
// --------------------------------------------------------------------------

namespace {
constexpr char kMatrixMagic[4] = {'T', 'L', 'M', 'V'};

void put_u32le(std::ofstream& f, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
    f.write(b, 4);
}

std::uint32_t get_u32le(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError("matrix file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_view_matrix(const ViewDataset& v, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(kMatrixMagic, 4);
    put_u32le(f, static_cast<std::uint32_t>(v.samples.size()));
    put_u32le(f, static_cast<std::uint32_t>(v.dims()));
    put_u32le(f, static_cast<std::uint32_t>(v.class_names.size()));
    for (const SampleMatrix& s : v.samples) {
        put_u32le(f, static_cast<std::uint32_t>(s.class_index));
        f.write(reinterpret_cast<const char*>(s.features.data()),
                static_cast<std::streamsize>(s.features.size()));
    }
    if (!f) throw IoError("write failed for " + path);

    nlohmann::json sidecar{{"class_names", v.class_names}, {"view", v.spec.to_json()}};
    std::ofstream sf(path + ".json");
    if (!sf) throw IoError("cannot write " + path + ".json");
    sf << sidecar.dump(2) << '\n';
}

ViewDataset read_view_matrix(const std::string& path) {
    std::ifstream sf(path + ".json");
    if (!sf) throw IoError("cannot open " + path + ".json");
    nlohmann::json sidecar;
    sf >> sidecar;

    ViewDataset v;
    v.spec = ViewSpec::from_json(sidecar.at("view"));
    v.class_names = sidecar.at("class_names").get<std::vector<std::string>>();

    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMatrixMagic, 4) != 0) throw IoError("bad matrix magic");
    const std::uint32_t count = get_u32le(f);
    const std::uint32_t dims = get_u32le(f);
    const std::uint32_t classes = get_u32le(f);
    if (dims != static_cast<std::uint32_t>(v.spec.dims()) ||
        classes != v.class_names.size()) {
        throw IoError("matrix header disagrees with sidecar");
    }
    v.samples.resize(count);
    for (SampleMatrix& s : v.samples) {
        s.class_index = static_cast<int>(get_u32le(f));
        s.features.resize(dims);
        f.read(reinterpret_cast<char*>(s.features.data()), dims);
        if (!f) throw IoError("matrix file truncated");
    }
    return v;
}

}  // namespace tlm
