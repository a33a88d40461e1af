#pragma once

// Shared-memory synchronization between the driver's and the device's views.
//
// Views are exchanged only at job boundaries: right before JOB_START the
// driver pushes the delta of every synced page, right after the completion
// interrupt the device pulls its delta back. Which pages are synced follows
// from how they were mapped: data pages (app-readonly inputs and outputs)
// stay where they are, everything else travels. Without mapping hints every
// page is unknown; the run then zeroes the workload's input pages on both
// sides and syncs everything, so the dumps still compress.

#include <cstdint>
#include <functional>
#include <map>
#include <set>

#include "dryrun/memory.hpp"
#include "dryrun/workload.hpp"

namespace dryrun {

using PageSet = std::map<PageIndex, Page>;

struct MemoryLayout {
    std::map<PageIndex, MappingRecord> mapping;
    std::map<PageIndex, PageClass> classes;
    std::set<PageIndex> inputs;
    /// Set when any page classified as unknown.
    bool zero_data = false;

    [[nodiscard]] bool synced(PageIndex p) const;
    [[nodiscard]] std::function<bool(PageIndex)> selector() const;
    [[nodiscard]] size_t synced_count() const;
    [[nodiscard]] PagePerm perm(PageIndex p) const;
};

/// Mapping records implied by the program's jobs and its `hints` directive.
MemoryLayout plan_layout(const Program& p);

/// Record-time content of the program's input pages.
PageSet generate_inputs(const Program& p);

/// Every program page, zero unless it is an input. In zero-data mode inputs
/// stay zero whatever `inputs` holds.
MemoryImage initial_image(const Program& p, const MemoryLayout& layout, const PageSet& inputs);

/// Pagetable entries the device needs for one job: metastate, inputs, outputs.
std::map<PageIndex, PagePerm> job_pagetable(const JobSpec& job, const MemoryLayout& layout);
std::set<PageIndex> job_pages(const JobSpec& job);

/// One side's record of the synced pages as of the last exchange.
class SyncPoint {
public:
    void reset(const MemoryImage& image) { base_ = image; }
    /// Delta of `live` against the last exchange; the base moves to `live`.
    MemoryDelta outgoing(const MemoryImage& live, const std::function<bool(PageIndex)>& select, bool full);
    /// Applies a received delta to `live` and to the base.
    void incoming(MemoryImage& live, const MemoryDelta& d);
    [[nodiscard]] const MemoryImage& base() const { return base_; }

private:
    MemoryImage base_;
};

/// Pages the driver gave up at submit; touching them before the interrupt traps.
class AccessGuard {
public:
    void lock(const std::set<PageIndex>& pages) { locked_.insert(pages.begin(), pages.end()); }
    void unlock_all() { locked_.clear(); }
    void check(PageIndex p) const {
        if (locked_.count(p)) throw TrapFault(p, "driver");
    }
    [[nodiscard]] bool accessible(PageIndex p) const { return locked_.count(p) == 0; }
    [[nodiscard]] const std::set<PageIndex>& locked() const { return locked_; }

private:
    std::set<PageIndex> locked_;
};

/// Difference between two images restricted to `pages`, uncompressed unless asked.
MemoryDelta diff_pages(const MemoryImage& before, const MemoryImage& after, const std::set<PageIndex>& pages,
                       bool compress);

/// Copies of the listed pages (missing pages are left out).
MemoryImage copy_pages(const MemoryImage& src, const std::set<PageIndex>& pages);

}  // namespace dryrun
