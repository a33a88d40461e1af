#include "dryrun/memory.hpp"

#include <algorithm>
#include <cstring>

#include "dryrun/range_coder.hpp"

namespace dryrun {

std::string_view to_string(PageClass c) {
    switch (c) {
        case PageClass::Metastate: return "metastate";
        case PageClass::Data: return "data";
        case PageClass::Unknown: return "unknown";
    }
    return "?";
}

PageClass classify(const MappingRecord& rec) {
    if (rec.perm.executable) return PageClass::Metastate;
    if (rec.mapped_readonly_by_app) return PageClass::Data;
    if (rec.hint_available) return PageClass::Metastate;
    return PageClass::Unknown;
}

namespace {
const Page& zero_page() {
    static const Page z{};
    return z;
}
}  // namespace

const Page* MemoryImage::find(PageIndex p) const {
    auto it = pages_.find(p);
    return it == pages_.end() ? nullptr : &it->second;
}

Page& MemoryImage::page(PageIndex p) {
    dirty_.insert(p);
    return pages_[p];
}

const Page& MemoryImage::page_or_zero(PageIndex p) const {
    const Page* pg = find(p);
    return pg ? *pg : zero_page();
}

void MemoryImage::write_u64(PageIndex p, uint32_t offset, uint64_t v) {
    if (offset > kPageSize - 8) throw Error(ErrorCode::InvalidArgument, "u64 write past page end");
    Page& pg = page(p);
    for (int i = 0; i < 8; ++i) pg[offset + i] = static_cast<uint8_t>(v >> (8 * i));
}

uint64_t MemoryImage::read_u64(PageIndex p, uint32_t offset) const {
    if (offset > kPageSize - 8) throw Error(ErrorCode::InvalidArgument, "u64 read past page end");
    const Page& pg = page_or_zero(p);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t{pg[offset + i]} << (8 * i);
    return v;
}

void MemoryImage::fill(PageIndex p, uint8_t value) { page(p).fill(value); }

PageClass MemoryImage::page_class(PageIndex p) const {
    auto it = classes_.find(p);
    return it == classes_.end() ? PageClass::Unknown : it->second;
}

Bytes MemoryDelta::encode() const {
    ByteWriter w;
    w.u64(base_generation);
    w.u8(compressed ? 1 : 0);
    w.u32(static_cast<uint32_t>(records.size()));
    for (const auto& r : records) {
        w.u32(r.page);
        w.u16(r.offset);
        w.u16(r.len);
        w.u32(static_cast<uint32_t>(r.payload.size()));
        w.raw(r.payload);
    }
    return w.take();
}

MemoryDelta MemoryDelta::decode(ByteSpan data) {
    ByteReader rd(data);
    MemoryDelta d;
    d.base_generation = rd.u64();
    uint8_t flags = rd.u8();
    if (flags > 1) throw Error(ErrorCode::CorruptStream, "unknown delta flags");
    d.compressed = flags & 1;
    uint32_t n = rd.u32();
    for (uint32_t i = 0; i < n; ++i) {
        DeltaRecord r;
        r.page = rd.u32();
        r.offset = rd.u16();
        r.len = rd.u16();
        if (uint32_t{r.offset} + r.len > kPageSize) throw Error(ErrorCode::CorruptStream, "delta range past page end");
        uint32_t coded = rd.u32();
        ByteSpan body = rd.raw(coded);
        r.payload.assign(body.begin(), body.end());
        d.records.push_back(std::move(r));
    }
    if (!rd.done()) throw Error(ErrorCode::CorruptStream, "trailing bytes after delta");
    return d;
}

namespace {
DeltaRecord make_record(PageIndex p, const Page& pg, uint32_t begin, uint32_t end, bool compress) {
    DeltaRecord r;
    r.page = p;
    r.offset = static_cast<uint16_t>(begin);
    r.len = static_cast<uint16_t>(end - begin);
    ByteSpan span(pg.data() + begin, end - begin);
    if (compress)
        r.payload = rc::encode(span);
    else
        r.payload.assign(span.begin(), span.end());
    return r;
}
}  // namespace

MemoryDelta make_delta(const MemoryImage& base, const MemoryImage& current,
                       const std::function<bool(PageIndex)>& select, bool compress) {
    MemoryDelta d;
    d.base_generation = base.generation();
    d.compressed = compress;
    for (const auto& [p, pg] : current.pages()) {
        if (!select(p)) continue;
        const Page* old = base.find(p);
        if (!old) {
            d.records.push_back(make_record(p, pg, 0, kPageSize, compress));
            continue;
        }
        uint32_t b = 0;
        while (b < kPageSize && pg[b] == (*old)[b]) ++b;
        if (b == kPageSize) continue;
        uint32_t e = kPageSize;
        while (e > b && pg[e - 1] == (*old)[e - 1]) --e;
        d.records.push_back(make_record(p, pg, b, e, compress));
    }
    return d;
}

MemoryDelta full_dump(const MemoryImage& image, const std::function<bool(PageIndex)>& select) {
    MemoryDelta d;
    d.base_generation = image.generation();
    d.compressed = false;
    for (const auto& [p, pg] : image.pages())
        if (select(p)) d.records.push_back(make_record(p, pg, 0, kPageSize, false));
    return d;
}

void apply_delta(MemoryImage& target, const MemoryDelta& delta) {
    for (const auto& r : delta.records) {
        Bytes decoded;
        ByteSpan body = r.payload;
        if (delta.compressed) {
            decoded = rc::decode(r.payload);
            body = decoded;
        }
        if (body.size() != r.len) throw Error(ErrorCode::CorruptStream, "delta record length mismatch");
        Page& pg = target.page(r.page);
        std::memcpy(pg.data() + r.offset, body.data(), body.size());
    }
}

}  // namespace dryrun
