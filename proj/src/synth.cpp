#include "tlm/synth.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "tlm/tlsparse.hpp"

namespace tlm {

namespace {

constexpr std::int64_t kBaseEpoch = 1700000000;
constexpr std::uint32_t kServerIp = 0xC0A80001;  // 192.168.0.1
constexpr std::uint16_t kServerPort = 443;

// Independent tags so each leakage channel draws its class constants from a
// distinct stream.
constexpr std::uint64_t kTagHandshake = 0x68736b31;
constexpr std::uint64_t kTagIv = 0x69763232;

std::uint8_t class_constant(std::uint64_t seed, std::uint64_t tag, int cls, int pos) {
    return static_cast<std::uint8_t>(
        stream_key(seed ^ tag, static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(pos)) & 0xff);
}

std::string class_label(int c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "class%03d", c);
    return buf;
}

std::uint32_t client_ip(std::size_t session_index) {
    return 0x0A000000u | static_cast<std::uint32_t>(session_index & 0x00FFFFFFu);
}

std::uint16_t client_port(std::size_t session_index) {
    return static_cast<std::uint16_t>(20000 + session_index % 40000);
}

}  // namespace

void LeakageProfile::validate() const {
    if (classes < 2 || classes > 256) throw InvalidProfile("classes must be in [2, 256]");
    if (sessions_per_class < 1) throw InvalidProfile("sessions_per_class must be >= 1");
    if (iv_leak_strength < 0.0 || iv_leak_strength > 1.0)
        throw InvalidProfile("iv_leak_strength must be in [0, 1]");
    if (payload_leak_strength < 0.0 || payload_leak_strength > 1.0)
        throw InvalidProfile("payload_leak_strength must be in [0, 1]");
    if (records_min < 1 || records_max < records_min)
        throw InvalidProfile("records_per_session range must satisfy 1 <= min <= max");
    const long max_len = kSynthMinRecordLen + static_cast<long>(kSynthLenBucket) * classes;
    if (max_len > static_cast<long>(kTlsMaxRecordLen))
        throw InvalidProfile("too many classes for the record-length budget");
}

nlohmann::json LeakageProfile::to_json() const {
    return nlohmann::json{{"classes", classes},
                          {"sessions_per_class", sessions_per_class},
                          {"handshake_leak", handshake_leak},
                          {"length_leak", length_leak},
                          {"iv_leak_strength", iv_leak_strength},
                          {"payload_leak_strength", payload_leak_strength},
                          {"records_per_session", {records_min, records_max}},
                          {"seed", seed}};
}

LeakageProfile LeakageProfile::from_json(const nlohmann::json& j) {
    LeakageProfile p;
    p.classes = j.at("classes").get<int>();
    p.sessions_per_class = j.at("sessions_per_class").get<int>();
    p.handshake_leak = j.value("handshake_leak", false);
    p.length_leak = j.value("length_leak", false);
    p.iv_leak_strength = j.value("iv_leak_strength", 0.0);
    p.payload_leak_strength = j.value("payload_leak_strength", 0.0);
    if (j.contains("records_per_session")) {
        p.records_min = j["records_per_session"].at(0).get<int>();
        p.records_max = j["records_per_session"].at(1).get<int>();
    }
    p.seed = j.value("seed", std::uint64_t{0});
    p.validate();
    return p;
}

LeakageProfile LeakageProfile::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InvalidProfile(std::string("profile parse error: ") + e.what());
    }
    return from_json(j);
}

LabeledDataset generate(const LeakageProfile& profile) {
    profile.validate();
    const int C = profile.classes;

    std::vector<Session> sessions;
    sessions.reserve(static_cast<std::size_t>(C) * profile.sessions_per_class);

    for (int c = 0; c < C; c++) {
        for (int i = 0; i < profile.sessions_per_class; i++) {
            Rng rng(stream_key(profile.seed, static_cast<std::uint64_t>(c),
                               static_cast<std::uint64_t>(i)));
            const std::size_t g = static_cast<std::size_t>(c) * profile.sessions_per_class +
                                  static_cast<std::size_t>(i);

            Session s;
            s.id = "c" + std::to_string(c) + "-s" + std::to_string(i);
            s.label = class_label(c);
            s.origin = Origin{Origin::Kind::Synthetic, "", profile.seed};

            const std::int64_t base_ts = kBaseEpoch + static_cast<std::int64_t>(g);
            int tick = 0;
            auto push = [&](Direction dir, std::uint32_t seq, Bytes payload) {
                RawSegment seg;
                seg.dir = dir;
                seg.seq = seq;
                seg.ts_sec = base_ts;
                seg.ts_nsec = static_cast<std::uint32_t>(tick++) * 1000000u;  // 1 ms steps
                seg.payload = std::move(payload);
                s.segments.push_back(std::move(seg));
            };

            const std::uint32_t isn_c = static_cast<std::uint32_t>(rng());
            const std::uint32_t isn_s = static_cast<std::uint32_t>(rng());

            // TCP handshake stand-in: SYN, SYN-ACK, ACK, all empty. The
            // handshake consumes two client sequence numbers so data segments
            // never collide with the pure ACK.
            push(Direction::ClientToServer, isn_c, {});
            push(Direction::ServerToClient, isn_s, {});
            push(Direction::ClientToServer, isn_c + 1, {});
            std::uint32_t seq_c = isn_c + 2;
            std::uint32_t seq_s = isn_s + 1;

            auto emit_record = [&](Direction dir, const TlsRecord& rec) {
                Bytes wire = serialize_record(rec);
                std::uint32_t& seq = (dir == Direction::ClientToServer) ? seq_c : seq_s;
                const std::uint32_t at = seq;
                seq += static_cast<std::uint32_t>(wire.size());
                push(dir, at, std::move(wire));
            };

            // 1-2 TLS handshake records (ClientHello, optionally ServerHello).
            const int n_hs = 1 + static_cast<int>(bounded(rng, 2));
            for (int h = 0; h < n_hs; h++) {
                const int body_len = 48 + static_cast<int>(bounded(rng, 49));
                Bytes body(static_cast<std::size_t>(body_len));
                for (int j = 0; j < body_len; j++) {
                    if (profile.handshake_leak && j < 16) {
                        body[static_cast<std::size_t>(j)] = class_constant(profile.seed, kTagHandshake, c, j);
                        rng();  // keep stream position independent of the channel switch
                    } else {
                        body[static_cast<std::size_t>(j)] = random_byte(rng);
                    }
                }
                emit_record(h == 0 ? Direction::ClientToServer : Direction::ServerToClient,
                            make_record(kContentTypeHandshake, std::move(body)));
            }

            // Application-data records, one per segment.
            const int n_app = profile.records_min +
                              static_cast<int>(bounded(
                                  rng, static_cast<std::uint64_t>(profile.records_max -
                                                                  profile.records_min + 1)));
            const int payload_lo = (256 * c) / C;
            const int payload_width = std::max(1, (256 * (c + 1)) / C - payload_lo);
            for (int k = 0; k < n_app; k++) {
                const int len = profile.length_leak
                                    ? kSynthMinRecordLen + kSynthLenBucket * c +
                                          static_cast<int>(bounded(rng, kSynthLenBucket))
                                    : kSynthMinRecordLen +
                                          static_cast<int>(bounded(
                                              rng, static_cast<std::uint64_t>(kSynthLenBucket) * C));
                Bytes body(static_cast<std::size_t>(len));
                for (int j = 0; j < len; j++) {
                    std::uint8_t b;
                    if (j < 16 && unit_real(rng) < profile.iv_leak_strength) {
                        b = class_constant(profile.seed, kTagIv, c, j);
                        rng();
                    } else if (j >= 16 && unit_real(rng) < profile.payload_leak_strength) {
                        b = static_cast<std::uint8_t>(payload_lo + static_cast<int>(bounded(
                                                          rng, static_cast<std::uint64_t>(payload_width))));
                    } else {
                        b = random_byte(rng);
                    }
                    body[static_cast<std::size_t>(j)] = b;
                }
                emit_record(k == 0 ? Direction::ClientToServer : Direction::ServerToClient,
                            make_record(kContentTypeAppData, std::move(body)));
            }

            sessions.push_back(std::move(s));
        }
    }
    LabeledDataset ds = LabeledDataset::from_sessions(std::move(sessions));
    ds.split_seed = profile.seed;
    return ds;
}

// --------------------------------------------------------------------------
// pcap writer
// --------------------------------------------------------------------------

namespace {

void put16be(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put32be(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put32le(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put16le(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

FlowKey session_flow_key(std::size_t session_index) {
    return FlowKey::canonical(client_ip(session_index), client_port(session_index), kServerIp,
                              kServerPort);
}

nlohmann::json make_label_map(const LabeledDataset& ds) {
    nlohmann::json map = nlohmann::json::object();
    for (std::size_t i = 0; i < ds.sessions.size(); i++) {
        map[session_flow_key(i).str()] = ds.sessions[i].label;
    }
    return map;
}

void write_pcap(const LabeledDataset& ds, const std::string& path) {
    Bytes out;
    // Global header: magic, version 2.4, thiszone, sigfigs, snaplen, ethernet.
    put32le(out, 0xa1b2c3d4u);
    put16le(out, 2);
    put16le(out, 4);
    put32le(out, 0);
    put32le(out, 0);
    put32le(out, 65535);
    put32le(out, 1);

    std::uint16_t ip_id = 1;
    for (std::size_t i = 0; i < ds.sessions.size(); i++) {
        const Session& s = ds.sessions[i];
        const std::uint32_t c_ip = client_ip(i);
        const std::uint16_t c_port = client_port(i);
        for (std::size_t k = 0; k < s.segments.size(); k++) {
            const RawSegment& seg = s.segments[k];
            const bool c2s = seg.dir == Direction::ClientToServer;

            Bytes frame;
            // Ethernet
            static const std::uint8_t mac_client[6] = {0x02, 0, 0, 0, 0, 0x01};
            static const std::uint8_t mac_server[6] = {0x02, 0, 0, 0, 0, 0x02};
            const std::uint8_t* dst = c2s ? mac_server : mac_client;
            const std::uint8_t* src = c2s ? mac_client : mac_server;
            frame.insert(frame.end(), dst, dst + 6);
            frame.insert(frame.end(), src, src + 6);
            put16be(frame, 0x0800);
            // IPv4, 20-byte header, checksum left zero (not validated here)
            const std::uint16_t total_len =
                static_cast<std::uint16_t>(40 + seg.payload.size());
            frame.push_back(0x45);
            frame.push_back(0);
            put16be(frame, total_len);
            put16be(frame, ip_id++);
            put16be(frame, 0);
            frame.push_back(64);
            frame.push_back(6);
            put16be(frame, 0);
            put32be(frame, c2s ? c_ip : kServerIp);
            put32be(frame, c2s ? kServerIp : c_ip);
            // TCP, 20-byte header
            put16be(frame, c2s ? c_port : kServerPort);
            put16be(frame, c2s ? kServerPort : c_port);
            put32be(frame, seg.seq);
            put32be(frame, 0);  // ack
            frame.push_back(0x50);
            std::uint8_t flags = 0x10;  // ACK
            if (seg.payload.empty()) {
                if (k == 0) flags = 0x02;        // SYN
                else if (k == 1) flags = 0x12;   // SYN|ACK
            } else {
                flags = 0x18;  // PSH|ACK
            }
            frame.push_back(flags);
            put16be(frame, 0xffff);
            put16be(frame, 0);
            put16be(frame, 0);
            frame.insert(frame.end(), seg.payload.begin(), seg.payload.end());

            put32le(out, static_cast<std::uint32_t>(seg.ts_sec));
            put32le(out, seg.ts_nsec / 1000u);
            put32le(out, static_cast<std::uint32_t>(frame.size()));
            put32le(out, static_cast<std::uint32_t>(frame.size()));
            out.insert(out.end(), frame.begin(), frame.end());
        }
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + path);
}

void write_sessions_jsonl(const LabeledDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (const Session& s : ds.sessions) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["label"] = s.label;
        auto& segs = j["segments"] = nlohmann::ordered_json::array();
        for (const RawSegment& seg : s.segments) {
            nlohmann::ordered_json js;
            js["dir"] = seg.dir == Direction::ClientToServer ? "c2s" : "s2c";
            js["seq"] = seg.seq;
            js["ts"] = seg.ts_seconds();
            js["payload_b64"] = base64_encode(seg.payload);
            segs.push_back(std::move(js));
        }
        f << j.dump() << '\n';
    }
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace tlm
