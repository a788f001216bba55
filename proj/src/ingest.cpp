#include "tlm/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tlm {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint16_t rd16be(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t rd32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

std::uint32_t rd32(const std::uint8_t* p, bool swap) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    if (swap) v = __builtin_bswap32(v);
    return v;
}

std::string ipv4_str(std::uint32_t ip) {
    std::ostringstream os;
    os << ((ip >> 24) & 0xff) << '.' << ((ip >> 16) & 0xff) << '.' << ((ip >> 8) & 0xff) << '.'
       << (ip & 0xff);
    return os.str();
}

constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4u;
constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1u;
constexpr std::uint16_t kEthertypeIpv4 = 0x0800;
constexpr std::uint8_t kIpProtoTcp = 6;
constexpr std::uint8_t kTcpFlagSyn = 0x02;

}  // namespace

std::string FlowKey::str() const {
    return ipv4_str(ip_a) + ":" + std::to_string(port_a) + "-" + ipv4_str(ip_b) + ":" +
           std::to_string(port_b);
}

FlowKey FlowKey::canonical(std::uint32_t src_ip, std::uint16_t src_port, std::uint32_t dst_ip,
                           std::uint16_t dst_port) {
    FlowKey k;
    if (std::make_pair(src_ip, src_port) <= std::make_pair(dst_ip, dst_port)) {
        k.ip_a = src_ip; k.port_a = src_port; k.ip_b = dst_ip; k.port_b = dst_port;
    } else {
        k.ip_a = dst_ip; k.port_a = dst_port; k.ip_b = src_ip; k.port_b = src_port;
    }
    return k;
}

int LabeledDataset::class_index(const std::string& label) const {
    auto it = std::lower_bound(class_names.begin(), class_names.end(), label);
    if (it == class_names.end() || *it != label) return -1;
    return static_cast<int>(it - class_names.begin());
}

LabeledDataset LabeledDataset::from_sessions(std::vector<Session> sessions,
                                             std::uint64_t split_seed) {
    LabeledDataset ds;
    std::set<std::string> labels;
    for (const Session& s : sessions) {
        if (s.label.empty()) throw Error("session '" + s.id + "' has an empty label");
        labels.insert(s.label);
    }
    ds.class_names.assign(labels.begin(), labels.end());
    ds.sessions = std::move(sessions);
    ds.split_seed = split_seed;
    return ds;
}

// --------------------------------------------------------------------------
// pcap
// --------------------------------------------------------------------------

namespace {

struct FrameInfo {
    FlowKey key;
    std::uint32_t src_ip;
    std::uint16_t src_port;
    bool syn;
    RawSegment seg;  // direction filled in later
};

// Ethernet/IPv4/TCP decode of one captured frame; nullopt means "skip".
std::optional<FrameInfo> decode_frame(std::span<const std::uint8_t> frame, std::int64_t ts_sec,
                                      std::uint32_t ts_nsec, PcapParse& counters) {
    if (frame.size() < 14) { counters.skipped++; counters.skipped_non_ipv4++; return std::nullopt; }
    const std::uint16_t ethertype = rd16be(frame.data() + 12);
    if (ethertype != kEthertypeIpv4) {  // IPv6, VLAN-tagged and ARP frames all land here
        counters.skipped++; counters.skipped_non_ipv4++;
        return std::nullopt;
    }
    std::span<const std::uint8_t> ip = frame.subspan(14);
    if (ip.size() < 20 || (ip[0] >> 4) != 4) {
        counters.skipped++; counters.skipped_non_ipv4++;
        return std::nullopt;
    }
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    const std::size_t total_len = rd16be(ip.data() + 2);
    if (ihl < 20 || ip.size() < ihl || total_len < ihl || total_len > ip.size()) {
        counters.skipped++; counters.skipped_non_ipv4++;
        return std::nullopt;
    }
    if (ip[9] != kIpProtoTcp) {
        counters.skipped++; counters.skipped_non_tcp++;
        return std::nullopt;
    }
    std::span<const std::uint8_t> tcp = ip.subspan(ihl, total_len - ihl);
    if (tcp.size() < 20) { counters.skipped++; counters.skipped_non_tcp++; return std::nullopt; }
    const std::size_t doff = static_cast<std::size_t>(tcp[12] >> 4) * 4;
    if (doff < 20 || tcp.size() < doff) {
        counters.skipped++; counters.skipped_non_tcp++;
        return std::nullopt;
    }

    FrameInfo info;
    info.src_ip = rd32be(ip.data() + 12);
    const std::uint32_t dst_ip = rd32be(ip.data() + 16);
    info.src_port = rd16be(tcp.data());
    const std::uint16_t dst_port = rd16be(tcp.data() + 2);
    info.key = FlowKey::canonical(info.src_ip, info.src_port, dst_ip, dst_port);
    info.syn = (tcp[13] & kTcpFlagSyn) != 0;
    info.seg.seq = rd32be(tcp.data() + 4);
    info.seg.ts_sec = ts_sec;
    info.seg.ts_nsec = ts_nsec;
    info.seg.payload.assign(tcp.begin() + doff, tcp.end());
    return info;
}

}  // namespace

PcapParse parse_pcap(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 24) throw MalformedPcapHeader("pcap shorter than its 24-byte global header");
    std::uint32_t magic;
    std::memcpy(&magic, bytes.data(), 4);
    bool swap = false;
    if (magic == kPcapMagicSwapped) swap = true;
    else if (magic != kPcapMagic) throw MalformedPcapHeader("bad magic");
    const std::uint32_t link_type = rd32(bytes.data() + 20, swap);
    if (link_type != 1) {
        throw UnsupportedLinkType("link type " + std::to_string(link_type) + ", only Ethernet (1)");
    }

    PcapParse out;
    std::vector<FrameInfo> frames;
    std::size_t pos = 24;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 16) throw TruncatedFrame("record header runs past end of file");
        const std::uint32_t ts_sec = rd32(bytes.data() + pos, swap);
        const std::uint32_t ts_usec = rd32(bytes.data() + pos + 4, swap);
        const std::uint32_t incl_len = rd32(bytes.data() + pos + 8, swap);
        pos += 16;
        if (bytes.size() - pos < incl_len) throw TruncatedFrame("frame length exceeds remaining bytes");
        auto info = decode_frame(bytes.subspan(pos, incl_len), ts_sec, ts_usec * 1000u, out);
        if (info) frames.push_back(std::move(*info));
        pos += incl_len;
    }

    // Client endpoint per flow: sender of the first SYN, else of the first frame.
    std::map<FlowKey, std::pair<std::uint32_t, std::uint16_t>> client;
    for (const FrameInfo& f : frames) {
        if (f.syn && !client.count(f.key)) client[f.key] = {f.src_ip, f.src_port};
    }
    for (const FrameInfo& f : frames) {
        if (!client.count(f.key)) client[f.key] = {f.src_ip, f.src_port};
    }

    out.pairs.reserve(frames.size());
    for (FrameInfo& f : frames) {
        const auto& c = client[f.key];
        f.seg.dir = (f.src_ip == c.first && f.src_port == c.second) ? Direction::ClientToServer
                                                                    : Direction::ServerToClient;
        out.pairs.emplace_back(f.key, std::move(f.seg));
    }
    return out;
}

PcapParse parse_pcap_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_pcap(data);
}

// --------------------------------------------------------------------------
// session assembly
// --------------------------------------------------------------------------

LabeledDataset assemble_sessions(const std::vector<std::pair<FlowKey, RawSegment>>& pairs,
                                 const Labeler& labeler, const Origin& origin,
                                 std::size_t* dropped_flows) {
    // Group by flow, preserving first-appearance order.
    std::vector<FlowKey> order;
    std::map<FlowKey, std::vector<RawSegment>> flows;
    for (const auto& [key, seg] : pairs) {
        auto [it, inserted] = flows.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(seg);
    }

    std::size_t dropped = 0;
    std::vector<Session> sessions;
    for (const FlowKey& key : order) {
        std::optional<std::string> label = labeler(key);
        if (!label) { dropped++; continue; }

        auto& segs = flows[key];
        std::vector<RawSegment> by_dir[2];
        for (RawSegment& s : segs) by_dir[s.dir == Direction::ServerToClient].push_back(std::move(s));

        for (auto& lane : by_dir) {
            std::stable_sort(lane.begin(), lane.end(),
                             [](const RawSegment& a, const RawSegment& b) { return a.seq < b.seq; });
            // Retransmission dedup: first-seen payload wins. Empty segments are
            // keyed separately — a pure ACK legitimately shares its seq with the
            // next data segment.
            std::vector<RawSegment> kept;
            for (RawSegment& s : lane) {
                if (!kept.empty() && kept.back().seq == s.seq &&
                    kept.back().payload.empty() == s.payload.empty()) {
                    continue;
                }
                kept.push_back(std::move(s));
            }
            lane = std::move(kept);
        }

        // Interleave the two directions by timestamp; ties go client-first.
        Session sess;
        sess.id = key.str();
        sess.label = *label;
        sess.origin = origin;
        std::size_t i = 0, j = 0;
        auto ts_le = [](const RawSegment& a, const RawSegment& b) {
            return std::make_pair(a.ts_sec, a.ts_nsec) <= std::make_pair(b.ts_sec, b.ts_nsec);
        };
        while (i < by_dir[0].size() || j < by_dir[1].size()) {
            if (j == by_dir[1].size() ||
                (i < by_dir[0].size() && ts_le(by_dir[0][i], by_dir[1][j]))) {
                sess.segments.push_back(std::move(by_dir[0][i++]));
            } else {
                sess.segments.push_back(std::move(by_dir[1][j++]));
            }
        }
        sessions.push_back(std::move(sess));
    }
    if (dropped_flows) *dropped_flows = dropped;
    if (dropped > 0) log_info(std::to_string(dropped) + " unlabeled flows dropped");
    return LabeledDataset::from_sessions(std::move(sessions));
}

// --------------------------------------------------------------------------
// base64
// --------------------------------------------------------------------------

namespace {
constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    const std::size_t rem = data.size() - i;
    if (rem == 1) {
        const std::uint32_t v = data[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.append("==");
    } else if (rem == 2) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

Bytes base64_decode(const std::string& text) {
    static const auto table = [] {
        std::array<std::int8_t, 256> t;
        t.fill(-1);
        for (int i = 0; i < 64; i++) t[static_cast<unsigned char>(kB64Alphabet[i])] = static_cast<std::int8_t>(i);
        return t;
    }();
    if (text.size() % 4 != 0) throw Error("base64 length not a multiple of 4");
    Bytes out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t v = 0;
        for (int k = 0; k < 4; k++) {
            const char c = text[i + k];
            if (c == '=') {
                if (i + 4 != text.size() || k < 2) throw Error("misplaced base64 padding");
                pad++;
                v <<= 6;
                continue;
            }
            if (pad > 0 || table[static_cast<unsigned char>(c)] < 0) throw Error("invalid base64 character");
            v = (v << 6) | static_cast<std::uint32_t>(table[static_cast<unsigned char>(c)]);
        }
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

// --------------------------------------------------------------------------
// JSONL
// --------------------------------------------------------------------------

LabeledDataset read_sessions_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Session> sessions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw MalformedLine(line_no, e.what());
        }
        try {
            Session s;
            s.id = j.at("id").get<std::string>();
            s.label = j.at("label").get<std::string>();
            if (s.label.empty()) throw Error("empty label");
            s.origin = Origin{Origin::Kind::Jsonl, path, 0};
            for (const auto& js : j.at("segments")) {
                RawSegment seg;
                const std::string dir = js.at("dir").get<std::string>();
                if (dir == "c2s") seg.dir = Direction::ClientToServer;
                else if (dir == "s2c") seg.dir = Direction::ServerToClient;
                else throw Error("dir must be c2s or s2c");
                seg.seq = js.at("seq").get<std::uint32_t>();
                const double ts = js.at("ts").get<double>();
                seg.ts_sec = static_cast<std::int64_t>(std::floor(ts));
                seg.ts_nsec = static_cast<std::uint32_t>(
                    std::min<long long>(999999999LL, std::llround((ts - static_cast<double>(seg.ts_sec)) * 1e9)));
                seg.payload = base64_decode(js.at("payload_b64").get<std::string>());
                if (seg.payload.size() > kMaxTcpPayload) throw Error("payload exceeds max TCP payload");
                s.segments.push_back(std::move(seg));
            }
            sessions.push_back(std::move(s));
        } catch (const MalformedLine&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedLine(line_no, e.what());
        }
    }
    return LabeledDataset::from_sessions(std::move(sessions));
}

// --------------------------------------------------------------------------
// split
// --------------------------------------------------------------------------

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error("test_fraction must be in (0,1)");
    }
    std::vector<std::vector<std::size_t>> per_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.sessions.size(); i++) {
        const int c = ds.class_index(ds.sessions[i].label);
        per_class[static_cast<std::size_t>(c)].push_back(i);
    }

    std::vector<bool> in_test(ds.sessions.size(), false);
    for (std::size_t c = 0; c < per_class.size(); c++) {
        auto& idx = per_class[c];
        if (idx.size() < 2) throw ClassTooSmall(ds.class_names[c]);
        std::size_t n_test = static_cast<std::size_t>(
            std::lround(test_fraction * static_cast<double>(idx.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);

        Rng rng(stream_key(ds.split_seed, c));
        for (std::size_t i = idx.size() - 1; i > 0; i--) {  // Fisher-Yates
            std::swap(idx[i], idx[bounded(rng, i + 1)]);
        }
        for (std::size_t i = 0; i < n_test; i++) in_test[idx[i]] = true;
    }

    LabeledDataset train, test;
    train.class_names = test.class_names = ds.class_names;
    train.split_seed = test.split_seed = ds.split_seed;
    for (std::size_t i = 0; i < ds.sessions.size(); i++) {
        (in_test[i] ? test : train).sessions.push_back(ds.sessions[i]);
    }
    return {std::move(train), std::move(test)};
}

LabeledDataset filter_direction(const LabeledDataset& ds, std::optional<Direction> dir) {
    if (!dir) return ds;
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.split_seed = ds.split_seed;
    for (const Session& s : ds.sessions) {
        Session f = s;
        f.segments.clear();
        for (const RawSegment& seg : s.segments) {
            if (seg.dir == *dir) f.segments.push_back(seg);
        }
        out.sessions.push_back(std::move(f));
    }
    return out;
}

}  // namespace tlm
