#include "dryrun/memsync.hpp"

#include <random>

namespace dryrun {

bool MemoryLayout::synced(PageIndex p) const {
    auto it = classes.find(p);
    return it == classes.end() || it->second != PageClass::Data;
}

std::function<bool(PageIndex)> MemoryLayout::selector() const {
    return [this](PageIndex p) { return synced(p); };
}

size_t MemoryLayout::synced_count() const {
    size_t n = 0;
    for (const auto& [p, c] : classes) n += c != PageClass::Data ? 1 : 0;
    return n;
}

PagePerm MemoryLayout::perm(PageIndex p) const {
    auto it = mapping.find(p);
    return it == mapping.end() ? PagePerm{} : it->second.perm;
}

MemoryLayout plan_layout(const Program& p) {
    MemoryLayout l;
    l.inputs = p.input_pages();
    std::set<PageIndex> meta, data;
    for (const auto& [id, j] : p.jobs) {
        for (PageIndex pg : expand(j.meta)) meta.insert(pg);
        for (PageIndex pg : expand(j.inputs)) data.insert(pg);
        for (PageIndex pg : expand(j.outputs)) data.insert(pg);
    }
    for (PageIndex pg : l.inputs) data.insert(pg);

    for (PageIndex pg : p.pages()) {
        MappingRecord rec;
        if (p.hints == Hints::None) {
            rec.hint_available = false;
        } else if (meta.count(pg)) {
            rec.perm.executable = p.hints == Hints::Exec;
        } else if (data.count(pg)) {
            rec.perm.writable = false;
            rec.mapped_readonly_by_app = true;
        }
        l.mapping[pg] = rec;
        PageClass c = classify(rec);
        l.classes[pg] = c;
        if (c == PageClass::Unknown) l.zero_data = true;
    }
    return l;
}

PageSet generate_inputs(const Program& p) {
    PageSet out;
    for (const auto& in : p.inputs) {
        for (PageIndex pg : expand(in.pages)) {
            Page& page = out[pg];
            if (in.kind == InputSpec::Kind::Fill) {
                page.fill(static_cast<uint8_t>(in.value));
                continue;
            }
            std::mt19937_64 rng(in.value * 0x9E3779B97F4A7C15ull + pg);
            for (uint32_t i = 0; i < kPageSize; i += 8) {
                uint64_t v = rng();
                for (int b = 0; b < 8; ++b) page[i + b] = static_cast<uint8_t>(v >> (8 * b));
            }
        }
    }
    return out;
}

MemoryImage initial_image(const Program& p, const MemoryLayout& layout, const PageSet& inputs) {
    MemoryImage img;
    for (PageIndex pg : p.pages()) {
        img.page(pg);
        img.set_class(pg, layout.classes.count(pg) ? layout.classes.at(pg) : PageClass::Unknown);
    }
    if (!layout.zero_data)
        for (const auto& [pg, content] : inputs)
            if (layout.inputs.count(pg)) img.page(pg) = content;
    img.clear_dirty();
    return img;
}

std::set<PageIndex> job_pages(const JobSpec& job) {
    std::set<PageIndex> out;
    for (const auto* list : {&job.meta, &job.inputs, &job.outputs})
        for (PageIndex p : expand(*list)) out.insert(p);
    return out;
}

std::map<PageIndex, PagePerm> job_pagetable(const JobSpec& job, const MemoryLayout& layout) {
    std::map<PageIndex, PagePerm> pt;
    for (PageIndex p : job_pages(job)) {
        PagePerm perm = layout.perm(p);
        perm.mapped_to_device = true;
        pt[p] = perm;
    }
    return pt;
}

MemoryDelta SyncPoint::outgoing(const MemoryImage& live, const std::function<bool(PageIndex)>& select, bool full) {
    MemoryDelta d = full ? full_dump(live, select) : make_delta(base_, live, select, true);
    d.base_generation = base_.generation();
    for (const auto& [p, pg] : live.pages())
        if (select(p)) base_.page(p) = pg;
    base_.bump_generation();
    base_.clear_dirty();
    return d;
}

void SyncPoint::incoming(MemoryImage& live, const MemoryDelta& d) {
    apply_delta(live, d);
    apply_delta(base_, d);
    base_.bump_generation();
    base_.clear_dirty();
}

MemoryDelta diff_pages(const MemoryImage& before, const MemoryImage& after, const std::set<PageIndex>& pages,
                       bool compress) {
    return make_delta(before, after, [&](PageIndex p) { return pages.count(p) != 0; }, compress);
}

MemoryImage copy_pages(const MemoryImage& src, const std::set<PageIndex>& pages) {
    MemoryImage out;
    for (PageIndex p : pages)
        if (const Page* pg = src.find(p)) out.page(p) = *pg;
    out.clear_dirty();
    return out;
}

}  // namespace dryrun
