#include <gtest/gtest.h>

#include <filesystem>

#include "dryrun/error.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/recording.hpp"
#include "dryrun/runtime.hpp"

using namespace dryrun;

namespace {

Program add_program() {
    return parse_workload(std::string(builtin_device_map()) +
                          "job 1 meta=0-1 in=8-11 out=12-15 xform=add:3\ninput 8-11 fill=0x07\n"
                          "thread 0\n"
                          "hot_begin init\n  id = read GPU_ID\n  write MMU_CONFIG, id & 0x1\nhot_end\n"
                          "  write PWR_STATE, 1\n  poll PWR_STATE == 1 max 100 backoff 2\n"
                          "  submit 1\n  wait_irq\n"
                          "hot_begin interrupt\n  irq = read JOB_IRQ_STATUS\n  write JOB_IRQ_CLEAR, irq\nhot_end\n"
                          "  extern irq\n");
}

Device device_for(const Recording& rec) { return Device(DeviceMap::parse(rec.header.device_map_text), rec.header.device); }

PageSet filled(const std::vector<PageIndex>& pages, uint8_t v) {
    PageSet s;
    for (PageIndex p : pages) s[p].fill(v);
    return s;
}

}  // namespace

TEST(RecordingFile, EmptyRoundTrips) {
    Recorder r;
    Recording rec = r.finalize();
    Recording back = Recording::decode(rec.encode());
    EXPECT_TRUE(back.entries.empty());
    EXPECT_EQ(back.header, rec.header);
}

TEST(RecordingFile, FinalizedRecorderRejectsAppends) {
    Recorder r;
    r.append(LogEntry{});
    r.finalize();
    try {
        r.append(LogEntry{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RecordAfterFinalize);
    }
}

TEST(RecordingFile, RunRecordingRoundTripsThroughDisk) {
    RunOptions o;
    o.mode = Mode::MD;
    RunReport r = run(add_program(), o);
    auto path = (std::filesystem::temp_directory_path() / "dryrun_rec_test.bin").string();
    r.recording.save(path);
    Recording back = Recording::load(path);
    std::filesystem::remove(path);
    ASSERT_EQ(back.entries.size(), r.recording.entries.size());
    for (size_t i = 0; i < back.entries.size(); ++i) ASSERT_EQ(back.entries[i], r.recording.entries[i]) << i;
    EXPECT_EQ(back.header, r.recording.header);
    EXPECT_EQ(back.digest, r.recording.digest);
}

TEST(RecordingFile, TamperingBreaksTheDigest) {
    RunOptions o;
    RunReport r = run(add_program(), o);
    Bytes b = r.recording.encode();
    Bytes cut(b.begin(), b.end() - 5);
    EXPECT_THROW(Recording::decode(cut), Error);
    Bytes flip = b;
    flip[flip.size() / 2] ^= 1;
    try {
        Recording::decode(flip);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DigestMismatch);
    }
    Recording edited = r.recording;
    edited.entries[0].value ^= 1;
    Device dev = device_for(r.recording);
    EXPECT_THROW(replay(edited, dev, {}), Error);
}

TEST(Replay, NewInputsGiveNewOutputsWithoutNetwork) {
    RunOptions o;
    o.mode = Mode::MDS;
    RunReport r = run(add_program(), o);
    for (uint8_t b : r.outputs.at(12)) ASSERT_EQ(b, 10);

    Device dev = device_for(r.recording);
    ReplayReport same = replay(r.recording, dev, generate_inputs(add_program()));
    EXPECT_FALSE(same.divergence.has_value()) << same.divergence_detail;
    EXPECT_EQ(same.network_messages, 0u);
    EXPECT_EQ(same.jobs, 1u);
    EXPECT_EQ(same.outputs, r.outputs);

    Device dev2 = device_for(r.recording);
    ReplayReport other = replay(r.recording, dev2, filled(r.recording.header.inputs, 40));
    EXPECT_FALSE(other.divergence.has_value()) << other.divergence_detail;
    ASSERT_EQ(other.outputs.size(), 4u);
    for (const auto& [pg, page] : other.outputs)
        for (uint8_t b : page) ASSERT_EQ(b, 43) << pg;
}

TEST(Replay, RecordingsAgreeAcrossModes) {
    std::vector<Recording> recs;
    for (Mode m : {Mode::Naive, Mode::M, Mode::MD, Mode::MDS}) {
        RunOptions o;
        o.mode = m;
        recs.push_back(run(add_program(), o).recording);
    }
    for (const auto& rec : recs) {
        Device dev = device_for(rec);
        ReplayReport rr = replay(rec, dev, filled(rec.header.inputs, 1));
        EXPECT_FALSE(rr.divergence.has_value());
        for (uint8_t b : rr.outputs.at(15)) ASSERT_EQ(b, 4);
    }
    size_t regs = 0;
    for (const auto& e : recs[2].entries) regs += e.kind == EntryKind::RegRead || e.kind == EntryKind::RegWrite;
    size_t naive_regs = 0;
    for (const auto& e : recs[0].entries) naive_regs += e.kind == EntryKind::RegRead || e.kind == EntryKind::RegWrite;
    EXPECT_EQ(regs, naive_regs);
}

TEST(Replay, WrongDeviceMapIsRejected) {
    RunOptions o;
    RunReport r = run(add_program(), o);
    Device dev(DeviceMap::parse("REG 0x0 GPU_ID constant 0x1\n"));
    try {
        replay(r.recording, dev, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DeviceMapMismatch);
    }
}

TEST(Replay, DivergenceIsReported) {
    RunOptions o;
    RunReport r = run(add_program(), o);
    Recording rec = r.recording;
    // re-sign an altered read so only the value check can catch it
    Recorder re(rec.header);
    std::optional<uint64_t> altered;
    for (auto e : rec.entries) {
        bool pick = !altered && e.kind == EntryKind::RegRead;
        if (pick) e.value ^= 0x100;
        uint64_t at = re.append(e);
        if (pick) altered = at;
    }
    Recording bad = re.finalize();
    Device dev = device_for(bad);
    ReplayReport rr = replay(bad, dev, {});
    ASSERT_TRUE(rr.divergence.has_value());
    EXPECT_EQ(rr.divergence, altered);
}

TEST(Replay, PrefixSnapsToJobBoundary) {
    RunOptions o;
    RunReport r = run(add_program(), o);
    const auto& es = r.recording.entries;
    size_t push = 0, pull = 0;
    for (size_t i = 0; i < es.size(); ++i) {
        if (es[i].kind == EntryKind::JobBoundary) push = i;
        if (es[i].kind == EntryKind::MemPull) pull = i;
    }
    ASSERT_LT(push, pull);
    EXPECT_EQ(snap_to_job_boundary(es, push + 1), push);
    EXPECT_EQ(snap_to_job_boundary(es, pull + 1), pull + 1);
    EXPECT_EQ(snap_to_job_boundary(es, push), push);
}
