#include "dryrun/job_descriptor.hpp"

namespace dryrun {

void write_descriptor(MemoryImage& mem, PageIndex page, const JobDescriptor& d) {
    size_t n = d.meta.size() + d.inputs.size() + d.outputs.size();
    if (n > jobdesc::kMaxRanges) throw Error(ErrorCode::InvalidArgument, "too many page ranges for one descriptor");
    mem.write_u64(page, 0x00, jobdesc::kMagic);
    mem.write_u64(page, 0x08, d.job_id);
    mem.write_u64(page, 0x10, static_cast<uint64_t>(d.transform));
    mem.write_u64(page, 0x18, d.constant);
    mem.write_u64(page, 0x20, d.meta.size());
    mem.write_u64(page, 0x28, d.inputs.size());
    mem.write_u64(page, 0x30, d.outputs.size());
    uint32_t off = jobdesc::kRangesOffset;
    for (const auto* list : {&d.meta, &d.inputs, &d.outputs})
        for (const PageRange& r : *list) {
            mem.write_u64(page, off, uint64_t{r.first} | (uint64_t{r.count} << 32));
            off += 8;
        }
    mem.write_u64(page, jobdesc::kStatusOffset, 0);
}

std::optional<JobDescriptor> read_descriptor(const MemoryImage& mem, PageIndex page) {
    if (mem.read_u64(page, 0x00) != jobdesc::kMagic) return std::nullopt;
    JobDescriptor d;
    d.job_id = mem.read_u64(page, 0x08);
    uint64_t xf = mem.read_u64(page, 0x10);
    if (xf != 1 && xf != 2) return std::nullopt;
    d.transform = static_cast<Transform>(xf);
    d.constant = mem.read_u64(page, 0x18);
    uint64_t nm = mem.read_u64(page, 0x20), ni = mem.read_u64(page, 0x28), no = mem.read_u64(page, 0x30);
    if (nm + ni + no > jobdesc::kMaxRanges) return std::nullopt;
    uint32_t off = jobdesc::kRangesOffset;
    auto take = [&](uint64_t n, std::vector<PageRange>& out) {
        for (uint64_t i = 0; i < n; ++i, off += 8) {
            uint64_t w = mem.read_u64(page, off);
            out.push_back({static_cast<PageIndex>(w), static_cast<uint32_t>(w >> 32)});
        }
    };
    take(nm, d.meta);
    take(ni, d.inputs);
    take(no, d.outputs);
    return d;
}

std::vector<PageIndex> expand(const std::vector<PageRange>& ranges) {
    std::vector<PageIndex> out;
    for (const PageRange& r : ranges)
        for (uint32_t i = 0; i < r.count; ++i) out.push_back(r.first + i);
    return out;
}

}  // namespace dryrun
