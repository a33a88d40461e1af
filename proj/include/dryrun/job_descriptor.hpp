#pragma once

// Layout of the job descriptor the driver writes into the first metastate page
// of a job. The device reads it on JOB_START and writes the status word back.
//
//   0x000 u64 magic 'JOBD'
//   0x008 u64 job id
//   0x010 u64 transform (1 = byte add, 2 = per-page additive checksum)
//   0x018 u64 transform constant
//   0x020 u64 number of metastate ranges
//   0x028 u64 number of input ranges
//   0x030 u64 number of output ranges
//   0x040 ... (u32 first, u32 count) pairs: metastate, then input, then output
//   0xF00 u64 status word: 0 pending, (job id << 8) | 1 done, (job id << 8) | 0xF fault

#include <cstdint>
#include <optional>
#include <vector>

#include "dryrun/memory.hpp"

namespace dryrun {

enum class Transform : uint8_t { Add = 1, Checksum = 2 };

struct PageRange {
    PageIndex first = 0;
    uint32_t count = 0;

    bool operator==(const PageRange&) const = default;
};

struct JobDescriptor {
    uint64_t job_id = 0;
    Transform transform = Transform::Add;
    uint64_t constant = 0;
    std::vector<PageRange> meta;
    std::vector<PageRange> inputs;
    std::vector<PageRange> outputs;

    bool operator==(const JobDescriptor&) const = default;
};

namespace jobdesc {
inline constexpr uint64_t kMagic = 0x444F424Aull;
inline constexpr uint32_t kRangesOffset = 0x40;
inline constexpr uint32_t kStatusOffset = 0xF00;
inline constexpr size_t kMaxRanges = (kStatusOffset - kRangesOffset) / 8;
inline constexpr uint64_t kStatusDone = 1;
inline constexpr uint64_t kStatusFault = 0xF;
}  // namespace jobdesc

void write_descriptor(MemoryImage& mem, PageIndex page, const JobDescriptor& desc);
std::optional<JobDescriptor> read_descriptor(const MemoryImage& mem, PageIndex page);

std::vector<PageIndex> expand(const std::vector<PageRange>& ranges);

}  // namespace dryrun
