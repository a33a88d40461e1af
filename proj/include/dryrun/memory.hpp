#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "dryrun/bytes.hpp"
#include "dryrun/sim_time.hpp"

namespace dryrun {

using Page = std::array<uint8_t, kPageSize>;
using PageIndex = uint32_t;

enum class PageClass : uint8_t { Metastate, Data, Unknown };

std::string_view to_string(PageClass c);

struct PagePerm {
    bool readable = true;
    bool writable = true;
    bool executable = false;
    bool mapped_to_device = false;

    bool operator==(const PagePerm&) const = default;
};

/// What the driver knows about how a page was mapped.
struct MappingRecord {
    PagePerm perm;
    bool mapped_readonly_by_app = false;
    /// False when the platform exposes neither permission bits nor mapping flags.
    bool hint_available = true;
};

/// executable => metastate; app-readonly => data; a writable region with
/// hints available may carry commands, so it is metastate; no hints => unknown.
PageClass classify(const MappingRecord& rec);

/// Page-granular view of shared memory. Pages are created zero-filled on first
/// touch; every mutable access marks the page dirty until `clear_dirty`.
class MemoryImage {
public:
    [[nodiscard]] bool contains(PageIndex p) const { return pages_.count(p) != 0; }
    [[nodiscard]] const Page* find(PageIndex p) const;
    Page& page(PageIndex p);
    [[nodiscard]] const Page& page_or_zero(PageIndex p) const;

    void write_u64(PageIndex p, uint32_t offset, uint64_t v);
    [[nodiscard]] uint64_t read_u64(PageIndex p, uint32_t offset) const;
    void fill(PageIndex p, uint8_t value);

    void set_class(PageIndex p, PageClass c) { classes_[p] = c; }
    [[nodiscard]] PageClass page_class(PageIndex p) const;

    [[nodiscard]] const std::map<PageIndex, Page>& pages() const { return pages_; }
    [[nodiscard]] const std::set<PageIndex>& dirty() const { return dirty_; }
    void clear_dirty() { dirty_.clear(); }

    [[nodiscard]] uint64_t generation() const { return generation_; }
    void bump_generation() { ++generation_; }

    bool operator==(const MemoryImage& o) const { return pages_ == o.pages_; }

private:
    std::map<PageIndex, Page> pages_;
    std::map<PageIndex, PageClass> classes_;
    std::set<PageIndex> dirty_;
    uint64_t generation_ = 0;
};

/// One trimmed byte range of one page. `payload` is range-coded when the
/// delta is compressed, raw otherwise.
struct DeltaRecord {
    PageIndex page = 0;
    uint16_t offset = 0;
    uint16_t len = 0;
    Bytes payload;
};

/// Wire layout: u64 base-generation, u8 flags (bit 0 = range coded), u32
/// record count, then per record `page: u32, offset: u16, len: u16,
/// coded-len: u32, coded bytes`; little-endian.
struct MemoryDelta {
    uint64_t base_generation = 0;
    bool compressed = true;
    std::vector<DeltaRecord> records;

    [[nodiscard]] Bytes encode() const;
    static MemoryDelta decode(ByteSpan data);
    [[nodiscard]] bool empty() const { return records.empty(); }
};

inline constexpr size_t kDeltaHeaderBytes = 8 + 1 + 4;

/// Difference of `current` against `base` over the selected pages. Pages
/// missing from `base` are sent whole; otherwise each changed page is trimmed
/// to the span between its first and last differing byte.
MemoryDelta make_delta(const MemoryImage& base, const MemoryImage& current,
                       const std::function<bool(PageIndex)>& select, bool compress = true);

/// Full dump of the selected pages, uncompressed.
MemoryDelta full_dump(const MemoryImage& image, const std::function<bool(PageIndex)>& select);

void apply_delta(MemoryImage& target, const MemoryDelta& delta);

}  // namespace dryrun
