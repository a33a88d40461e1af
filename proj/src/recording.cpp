#include "dryrun/recording.hpp"

#include <algorithm>
#include <cstring>

#include "dryrun/protocol.hpp"
#include "dryrun/range_coder.hpp"
#include "dryrun/text.hpp"

namespace dryrun {

std::string_view to_string(EntryKind k) {
    switch (k) {
        case EntryKind::RegRead: return "RegRead";
        case EntryKind::RegWrite: return "RegWrite";
        case EntryKind::MemPush: return "MemPush";
        case EntryKind::MemPull: return "MemPull";
        case EntryKind::Irq: return "Irq";
        case EntryKind::JobBoundary: return "JobBoundary";
    }
    return "?";
}

namespace {

bool same_delta(const MemoryDelta& a, const MemoryDelta& b) {
    if (a.compressed != b.compressed || a.records.size() != b.records.size()) return false;
    for (size_t i = 0; i < a.records.size(); ++i) {
        const auto &x = a.records[i], &y = b.records[i];
        if (x.page != y.page || x.offset != y.offset || x.len != y.len || x.payload != y.payload) return false;
    }
    return true;
}

constexpr char kMagic[8] = {'C', 'O', 'D', 'Y', 'R', 'E', 'C', '1'};

void write_digest(ByteWriter& w, const Digest& d) { w.raw(ByteSpan(d.data(), d.size())); }
Digest read_digest(ByteReader& r) {
    Digest d;
    ByteSpan s = r.raw(d.size());
    std::copy(s.begin(), s.end(), d.begin());
    return d;
}

void write_pages(ByteWriter& w, const std::vector<PageIndex>& v) {
    w.u32(static_cast<uint32_t>(v.size()));
    for (PageIndex p : v) w.u32(p);
}
std::vector<PageIndex> read_pages(ByteReader& r) {
    uint32_t n = r.u32();
    if (n > r.remaining() / 4) throw Error(ErrorCode::CorruptStream, "page list too long");
    std::vector<PageIndex> v(n);
    for (auto& p : v) p = r.u32();
    return v;
}

Bytes encode_header(const RecordingHeader& h) {
    ByteWriter w;
    w.u32(h.version);
    write_digest(w, h.device_map_hash);
    write_digest(w, h.workload_hash);
    w.str(h.mode);
    w.str(h.net.name);
    w.u64(static_cast<uint64_t>(h.net.rtt.count()));
    uint64_t bw;
    std::memcpy(&bw, &h.net.bandwidth_bps, 8);
    w.u64(bw);
    w.u64(h.device.seed);
    w.u64(h.device.ticks.access);
    w.u64(h.device.ticks.job);
    w.u64(h.device.ticks.power_transition);
    w.str(h.device_map_text);
    write_pages(w, h.pages);
    write_pages(w, h.inputs);
    return w.take();
}

RecordingHeader decode_header(ByteSpan b) {
    ByteReader r(b);
    RecordingHeader h;
    h.version = r.u32();
    if (h.version != 1) throw Error(ErrorCode::CorruptStream, "unsupported recording version " + std::to_string(h.version));
    h.device_map_hash = read_digest(r);
    h.workload_hash = read_digest(r);
    h.mode = r.str();
    h.net.name = r.str();
    h.net.rtt = SimTime(static_cast<int64_t>(r.u64()));
    uint64_t bw = r.u64();
    std::memcpy(&h.net.bandwidth_bps, &bw, 8);
    h.device.seed = r.u64();
    h.device.ticks.access = r.u64();
    h.device.ticks.job = r.u64();
    h.device.ticks.power_transition = r.u64();
    h.device_map_text = r.str();
    h.pages = read_pages(r);
    h.inputs = read_pages(r);
    if (!r.done()) throw Error(ErrorCode::CorruptStream, "trailing bytes in recording header");
    return h;
}

Bytes encode_sync(const LogEntry& e) {
    ByteWriter w;
    wire::write_pagetable(w, e.pagetable);
    w.blob(e.delta.encode());
    return w.take();
}

void decode_sync(ByteSpan b, LogEntry& e) {
    ByteReader r(b);
    e.pagetable = wire::read_pagetable(r);
    Bytes d = r.blob();
    e.delta = MemoryDelta::decode(d);
    if (!r.done()) throw Error(ErrorCode::CorruptStream, "trailing bytes in sync payload");
}

bool known_kind(uint16_t k) { return k >= 1 && k <= 6; }

}  // namespace

bool LogEntry::operator==(const LogEntry& o) const {
    return seq == o.seq && thread == o.thread && tick == o.tick && same_event(*this, o);
}

bool same_event(const LogEntry& a, const LogEntry& b) {
    return a.kind == b.kind && a.addr == b.addr && a.value == b.value && a.pagetable == b.pagetable &&
           same_delta(a.delta, b.delta);
}

Bytes Recording::encode() const {
    ByteWriter w;
    w.raw(std::string_view(kMagic, 8));
    w.blob(encode_header(header));
    Bytes blob;
    w.u32(static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        w.u16(static_cast<uint16_t>(e.kind));
        w.u64(e.seq);
        ByteWriter f;
        f.u32(e.thread);
        f.u64(e.tick);
        switch (e.kind) {
            case EntryKind::RegRead:
            case EntryKind::RegWrite:
                f.u32(e.addr);
                f.u64(e.value);
                break;
            case EntryKind::Irq:
            case EntryKind::JobBoundary: f.u64(e.value); break;
            case EntryKind::MemPush:
            case EntryKind::MemPull: {
                Bytes payload = encode_sync(e);
                f.u32(static_cast<uint32_t>(blob.size()));
                f.u32(static_cast<uint32_t>(payload.size()));
                blob.insert(blob.end(), payload.begin(), payload.end());
                break;
            }
        }
        w.blob(f.bytes());
    }
    w.blob(blob);
    Digest d = hmac_sha256(kSigningKey, w.bytes());
    write_digest(w, d);
    return w.take();
}

Recording Recording::decode(ByteSpan data) {
    if (data.size() < 8 + 32) throw Error(ErrorCode::DigestMismatch, "recording too short to carry a digest");
    ByteSpan body = data.first(data.size() - 32);
    Digest want = hmac_sha256(kSigningKey, body);
    if (!std::equal(want.begin(), want.end(), data.end() - 32)) throw Error(ErrorCode::DigestMismatch, "recording digest does not verify");
    ByteReader r(body);
    ByteSpan magic = r.raw(8);
    if (!std::equal(magic.begin(), magic.end(), kMagic)) throw Error(ErrorCode::CorruptStream, "missing CODYREC1 magic");
    Recording rec;
    std::copy(want.begin(), want.end(), rec.digest.begin());
    Bytes hdr = r.blob();
    rec.header = decode_header(hdr);
    uint32_t n = r.u32();
    struct BlobRef {
        size_t entry;
        uint32_t off, len;
    };
    std::vector<BlobRef> refs;
    rec.entries.reserve(std::min<uint32_t>(n, 1u << 20));
    for (uint32_t i = 0; i < n; ++i) {
        LogEntry e;
        uint16_t kind = r.u16();
        if (!known_kind(kind)) throw Error(ErrorCode::CorruptStream, "unknown entry kind " + std::to_string(kind));
        e.kind = static_cast<EntryKind>(kind);
        e.seq = r.u64();
        Bytes fields = r.blob();
        ByteReader f(fields);
        e.thread = f.u32();
        e.tick = f.u64();
        switch (e.kind) {
            case EntryKind::RegRead:
            case EntryKind::RegWrite:
                e.addr = f.u32();
                e.value = f.u64();
                break;
            case EntryKind::Irq:
            case EntryKind::JobBoundary: e.value = f.u64(); break;
            case EntryKind::MemPush:
            case EntryKind::MemPull: {
                uint32_t off = f.u32(), len = f.u32();
                refs.push_back({rec.entries.size(), off, len});
                break;
            }
        }
        if (!f.done()) throw Error(ErrorCode::CorruptStream, "trailing bytes in log entry");
        rec.entries.push_back(std::move(e));
    }
    Bytes blob = r.blob();
    if (!r.done()) throw Error(ErrorCode::CorruptStream, "trailing bytes after payload blob");
    for (const auto& ref : refs) {
        if (uint64_t{ref.off} + ref.len > blob.size()) throw Error(ErrorCode::CorruptStream, "payload reference out of range");
        decode_sync(ByteSpan(blob).subspan(ref.off, ref.len), rec.entries[ref.entry]);
    }
    return rec;
}

void Recording::save(const std::string& path) const {
    Bytes b = encode();
    text::write_file(path, std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

Recording Recording::load(const std::string& path) {
    std::string s = text::read_file(path);
    return decode(ByteSpan(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

uint64_t Recorder::append(LogEntry e) {
    if (finalized_) throw Error(ErrorCode::RecordAfterFinalize, "recording already finalized");
    e.seq = next_seq_++;
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
}

void Recorder::truncate(uint64_t size) {
    if (finalized_) throw Error(ErrorCode::RecordAfterFinalize, "recording already finalized");
    if (size < entries_.size()) entries_.resize(size);
    next_seq_ = entries_.empty() ? 1 : entries_.back().seq + 1;
}

Recording Recorder::finalize() {
    if (finalized_) throw Error(ErrorCode::RecordAfterFinalize, "recording already finalized");
    finalized_ = true;
    Recording r;
    r.header = header_;
    r.entries = entries_;
    Bytes b = r.encode();
    std::copy(b.end() - 32, b.end(), r.digest.begin());
    return r;
}

std::optional<uint64_t> ReplayEngine::run(const std::vector<LogEntry>& entries, uint64_t from, uint64_t to) {
    for (uint64_t i = from; i < to; ++i)
        if (!apply(entries[i])) return i;
    return std::nullopt;
}

bool ReplayEngine::apply(const LogEntry& e) {
    dev_.advance_to(e.tick);
    switch (e.kind) {
        case EntryKind::RegRead: {
            uint64_t v = dev_.read(e.addr);
            const RegisterSpec& spec = dev_.map().at(e.addr);
            if (spec.kind != RegKind::Nondet && v != e.value) {
                detail_ = "read of " + spec.name + " returned " + text::hex(v) + ", recorded " + text::hex(e.value);
                return false;
            }
            return true;
        }
        case EntryKind::RegWrite: dev_.write(e.addr, e.value); return true;
        case EntryKind::JobBoundary: return true;
        case EntryKind::MemPush: {
            MemoryDelta d;
            d.base_generation = e.delta.base_generation;
            d.compressed = e.delta.compressed;
            for (const auto& r : e.delta.records)
                if (!fresh_.count(r.page) && !dev_.written_outputs().count(r.page)) d.records.push_back(r);
            apply_delta(dev_.memory(), d);
            dev_.map_pages(e.pagetable);
            return true;
        }
        case EntryKind::Irq: {
            dev_.finish_job();
            if (!dev_.irq_pending()) {
                detail_ = "no interrupt pending";
                return false;
            }
            if (const RegisterSpec* s = dev_.map().find(regs::kJobIrqStatus); s && dev_.peek(s->addr) != e.value) {
                detail_ = "interrupt status " + text::hex(dev_.peek(s->addr)) + ", recorded " + text::hex(e.value);
                return false;
            }
            return true;
        }
        case EntryKind::MemPull: {
            for (const auto& r : e.delta.records) {
                if (dev_.written_outputs().count(r.page)) continue;
                Bytes body = e.delta.compressed ? rc::decode(r.payload) : r.payload;
                const Page& pg = dev_.memory().page_or_zero(r.page);
                if (body.size() != r.len || std::memcmp(pg.data() + r.offset, body.data(), r.len) != 0) {
                    detail_ = "page " + std::to_string(r.page) + " differs from the recorded job result";
                    return false;
                }
            }
            dev_.unmap_all();
            ++jobs_;
            return true;
        }
    }
    return true;
}

MemoryImage replay_image(const RecordingHeader& h, const PageSet& inputs) {
    MemoryImage img;
    for (PageIndex p : h.pages) img.page(p);
    for (PageIndex p : h.inputs)
        if (auto it = inputs.find(p); it != inputs.end()) img.page(p) = it->second;
    img.clear_dirty();
    return img;
}

ReplayReport replay(const Recording& rec, Device& dev, const PageSet& inputs) {
    if (dev.map().hash() != rec.header.device_map_hash)
        throw Error(ErrorCode::DeviceMapMismatch, "device map differs from the one the recording was made against");
    Bytes check = rec.encode();
    if (!std::equal(rec.digest.begin(), rec.digest.end(), check.end() - 32))
        throw Error(ErrorCode::DigestMismatch, "recording digest does not verify");
    dev.reset();
    dev.memory() = replay_image(rec.header, inputs);
    std::set<PageIndex> fresh(rec.header.inputs.begin(), rec.header.inputs.end());
    ReplayEngine eng(dev, fresh);
    ReplayReport rep;
    rep.divergence = eng.run(rec.entries, 0, rec.entries.size());
    rep.divergence_detail = eng.detail();
    rep.entries_replayed = rep.divergence ? *rep.divergence : rec.entries.size();
    rep.jobs = eng.jobs();
    for (PageIndex p : dev.written_outputs()) rep.outputs[p] = dev.memory().page_or_zero(p);
    rep.state_hash = dev.state_hash();
    return rep;
}

uint64_t snap_to_job_boundary(const std::vector<LogEntry>& entries, uint64_t upto) {
    upto = std::min<uint64_t>(upto, entries.size());
    std::optional<uint64_t> boundary;
    bool in_job = false;
    for (uint64_t i = 0; i < upto; ++i) {
        switch (entries[i].kind) {
            case EntryKind::JobBoundary:
                boundary = i;
                in_job = true;
                break;
            case EntryKind::MemPull: in_job = false; break;
            default: break;
        }
    }
    return in_job && boundary ? *boundary : upto;
}

uint64_t replay_prefix(const std::vector<LogEntry>& entries, uint64_t upto, Device& dev, const MemoryImage& image) {
    uint64_t snapped = snap_to_job_boundary(entries, upto);
    dev.reset();
    dev.memory() = image;
    ReplayEngine eng(dev, {});
    if (auto at = eng.run(entries, 0, snapped))
        throw Error(ErrorCode::Divergence, "prefix replay diverged at entry " + std::to_string(*at) + ": " + eng.detail());
    return snapped;
}

}  // namespace dryrun
