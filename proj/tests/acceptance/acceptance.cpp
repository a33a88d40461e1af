// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dryrun/error.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/polling.hpp"
#include "dryrun/range_coder.hpp"
#include "dryrun/runtime.hpp"

using namespace dryrun;
namespace fs = std::filesystem;

namespace {

const Mode kModes[] = {Mode::Naive, Mode::M, Mode::MD, Mode::MDS};

struct Bundled {
    std::string name;
    Program prog;
    bool violating = false;
    bool deterministic = true;
    // the shipped benchmark profiles; everything else is a fixture for one property
    bool profile = false;
};

std::vector<Bundled> bundled() {
    std::vector<Bundled> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(std::string(DRYRUN_DATA_DIR) + "/workloads"))
        if (e.path().extension() == ".wl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        Bundled b;
        b.name = f.stem().string();
        b.prog = load_workload(f.string());
        b.violating = b.name.rfind("violate-", 0) == 0;
        b.profile = b.name == "mnist-like" || b.name == "vgg16-like";
        for (const auto& t : b.prog.threads)
            for (const auto& in : t.code)
                if ((in.op == Op::Read || in.op == Op::Poll) &&
                    b.prog.device.at(in.op == Op::Read ? in.reg : in.poll.reg).kind == RegKind::Nondet)
                    b.deterministic = false;
        out.push_back(std::move(b));
    }
    return out;
}

RunReport run_mode(const Program& p, Mode m, const NetworkConfig& net = NetworkConfig::cellular(),
                   CommitHistory* h = nullptr) {
    RunOptions o;
    o.mode = m;
    o.net = net;
    o.history = h;
    return run(p, o);
}

std::string fmt(double v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " " << id << " " << title << ": " << detail << std::endl;
    if (!ok) ++failures;
}

std::vector<std::pair<EntryKind, uint32_t>> register_trace(const Recording& rec, std::optional<uint32_t> thread = {}) {
    std::vector<std::pair<EntryKind, uint32_t>> out;
    for (const auto& e : rec.entries)
        if ((e.kind == EntryKind::RegRead || e.kind == EntryKind::RegWrite) && (!thread || e.thread == *thread))
            out.push_back({e.kind, e.addr});
    return out;
}

/// Every mutable observable a run leaves behind.
bool same_outcome(const RunReport& a, const RunReport& b) {
    return a.device_state == b.device_state && a.vars == b.vars && a.shared == b.shared && a.externs == b.externs &&
           a.outputs == b.outputs;
}

// ---- 1 -----------------------------------------------------------------

void mode_equivalence(const std::vector<Bundled>& all) {
    bool ok = true;
    std::ostringstream d;
    double worst = 0;
    size_t n = 0;
    for (const auto& b : all) {
        if (b.violating || !b.deterministic) continue;
        ++n;
        auto t0 = std::chrono::steady_clock::now();
        try {
            RunReport base = run_mode(b.prog, Mode::Naive);
            for (Mode m : kModes) {
                if (!same_outcome(run_mode(b.prog, m), base)) {
                    ok = false;
                    d << b.name << "/" << to_string(m) << " differs; ";
                }
            }
        } catch (const Error& e) {
            ok = false;
            d << b.name << " raised " << to_string(e.code()) << "; ";
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        worst = std::max(worst, secs);
        if (secs >= 10) {
            ok = false;
            d << b.name << " took " << fmt(secs, 1) << " s; ";
        }
    }
    d << n << " workloads x 4 modes identical, slowest " << fmt(worst, 2) << " s for all modes";
    report(1, "mode equivalence", ok && n > 0, d.str());
}

// ---- 2 -----------------------------------------------------------------

void round_trip_accounting(const std::vector<Bundled>& all) {
    bool ok = true;
    std::ostringstream d;
    double batch = 0;
    for (const auto& b : all) {
        if (b.violating) continue;
        RunReport naive = run_mode(b.prog, Mode::Naive);
        // oracle: what the device log says was asked of it, one exchange per
        // register access and two per job (push before start, wait for irq)
        uint64_t regs = register_trace(naive.recording).size(), jobs = 0;
        for (const auto& e : naive.recording.entries) jobs += e.kind == EntryKind::JobBoundary;
        if (naive.metrics.round_trips != regs + 2 * jobs) {
            ok = false;
            d << b.name << " naive " << naive.metrics.round_trips << " != oracle " << regs + 2 * jobs << "; ";
        }
        RunReport md = run_mode(b.prog, Mode::MD);
        uint64_t md_jobs = 0;
        for (const auto& e : md.recording.entries) md_jobs += e.kind == EntryKind::JobBoundary;
        // md pipelines the push behind the start commit, leaving only the irq wait
        if (md.metrics.round_trips != md.metrics.commits + md_jobs) {
            ok = false;
            d << b.name << " md " << md.metrics.round_trips << " != commits+irq waits " << md.metrics.commits + md_jobs
              << "; ";
        }
        if (b.name == "mnist-like") {
            batch = md.metrics.avg_batch_size();
            d << "mnist-like naive " << naive.metrics.round_trips << " md " << md.metrics.round_trips << " (" << md.metrics.commits
              << " commits); ";
        }
    }
    if (batch < 2) ok = false;
    d << "avg batch on mnist-like " << fmt(batch, 2);
    report(2, "round-trip accounting", ok, d.str());
}

// ---- 3 -----------------------------------------------------------------

void deferral_delay(const std::vector<Bundled>& all) {
    bool ok = true;
    std::ostringstream d, fixtures;
    double worst = 1;
    for (const auto& net : {NetworkConfig::wifi(), NetworkConfig::cellular()}) {
        for (const auto& b : all) {
            if (b.violating) continue;
            double naive = to_seconds(run_mode(b.prog, Mode::Naive, net).metrics.sim_time);
            double md = to_seconds(run_mode(b.prog, Mode::MD, net).metrics.sim_time);
            double red = 1 - md / naive;
            if (!b.profile) {
                fixtures << b.name << "@" << net.name << " " << fmt(100 * red, 1) << "%; ";
                continue;
            }
            worst = std::min(worst, red);
            if (red < 0.5) ok = false;
            d << b.name << "@" << net.name << " " << fmt(100 * red, 1) << "%; ";
        }
    }
    if (worst == 1) ok = false;
    d << "smallest reduction " << fmt(100 * worst, 1) << "%; fixtures (reported) " << fixtures.str();
    report(3, "deferral delay reduction", ok, d.str());
}

// ---- 4 -----------------------------------------------------------------

void speculation(const std::vector<Bundled>& all) {
    bool ok = true;
    std::ostringstream d, fixtures;
    double min_frac = 1, min_red = 1;
    uint64_t mispredicts = 0;
    for (const auto& b : all) {
        if (b.violating || !b.deterministic) continue;
        CommitHistory h;
        for (int i = 0; i < 3; ++i) run_mode(b.prog, Mode::MDS, NetworkConfig::cellular(), &h);
        RunReport mds = run_mode(b.prog, Mode::MDS, NetworkConfig::cellular(), &h);
        RunReport md = run_mode(b.prog, Mode::MD);
        double frac = mds.metrics.commits ? double(mds.metrics.speculated_commits) / double(mds.metrics.commits) : 1;
        double red = 1 - to_seconds(mds.metrics.sim_time) / to_seconds(md.metrics.sim_time);
        // mispredictions must be zero everywhere, the bands apply to the profiles
        mispredicts += mds.metrics.mispredictions;
        if (!b.profile) {
            fixtures << b.name << " " << fmt(100 * frac, 1) << "% spec, -" << fmt(100 * red, 1) << "%; ";
            continue;
        }
        min_frac = std::min(min_frac, frac);
        min_red = std::min(min_red, red);
        if (frac < 0.9 || red < 0.4) {
            ok = false;
            d << b.name << " below bar; ";
        }
        d << b.name << " " << fmt(100 * frac, 1) << "% spec, -" << fmt(100 * red, 1) << "%; ";
    }
    if (mispredicts) ok = false;
    d << "min speculated " << fmt(100 * min_frac, 1) << "%, min delay reduction " << fmt(100 * min_red, 1)
      << "%, mispredictions (all workloads) " << mispredicts << "; fixtures (reported) " << fixtures.str();
    report(4, "speculation", ok, d.str());
}

// ---- 5 -----------------------------------------------------------------

void misprediction_safety(const std::vector<Bundled>& all) {
    const Bundled* w = nullptr;
    for (const auto& b : all)
        if (b.name == "mnist-like") w = &b;
    if (!w) {
        report(5, "misprediction safety", false, "mnist-like workload missing");
        return;
    }
    RunOptions base_opt;
    base_opt.mode = Mode::MDS;
    base_opt.spec.enabled = false;
    RunReport baseline = run(w->prog, base_opt);

    CommitHistory warm;
    for (int i = 0; i < 3; ++i) run_mode(w->prog, Mode::MDS, NetworkConfig::cellular(), &warm);
    uint64_t commits = run_mode(w->prog, Mode::MDS, NetworkConfig::cellular(), &warm).metrics.commits;

    uint64_t injected = 0, detected = 0, tainted = 0, state_bad = 0, errors = 0;
    for (uint64_t id = 1; id <= commits; ++id) {
        CommitHistory h = warm;
        RunOptions o;
        o.mode = Mode::MDS;
        o.history = &h;
        o.inject_at = id;
        try {
            RunReport r = run(w->prog, o);
            if (!r.metrics.injections) continue;
            ++injected;
            bool seen = std::any_of(r.mispredicts.begin(), r.mispredicts.end(), [](const Mispredict& m) { return m.injected; });
            detected += seen;
            tainted += r.metrics.safety_violations;
            state_bad += !same_outcome(r, baseline);
        } catch (const Error&) {
            ++errors;
        }
    }
    bool ok = injected > 0 && detected == injected && tainted == 0 && state_bad == 0 && errors == 0;
    std::ostringstream d;
    d << commits << " commit ids swept, " << injected << " carried a prediction and were corrupted; detected "
      << detected << "/" << injected << " (" << fmt(injected ? 100.0 * detected / injected : 0, 1) << "%), tainted "
      << tainted << ", final state mismatches " << state_bad << ", errors " << errors;
    report(5, "misprediction safety", ok, d.str());
}

// ---- 6 -----------------------------------------------------------------

void polling_offload() {
    const std::string map(builtin_device_map());
    const char* regs[] = {"PWR_STATE", "L2_STATE", "CACHE_STATE", "CORE_COUNT", "GPU_FEATURES"};
    std::mt19937_64 rng(2024);
    uint64_t bad_rt = 0, bad_iter = 0, timeouts = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string reg = regs[rng() % 5];
        uint64_t target = rng() % 3, max = 1 + rng() % 20, backoff = rng() % 4, settle = rng() % 10;
        std::string poll = "  poll " + reg + " == " + std::to_string(target) + " max " + std::to_string(max) +
                           " backoff " + std::to_string(backoff) + " into v\n";
        std::string setup = "thread 0\n  write " + reg + ", 1\n  delay " + std::to_string(settle) + "\n";
        Program with = parse_workload(map + setup + poll + "  extern v\n");
        Program without = parse_workload(map + setup + "  v = 0\n  extern v\n");

        RunReport md = run_mode(with, Mode::MD);
        RunReport md0 = run_mode(without, Mode::MD);
        if (md.metrics.round_trips - md0.metrics.round_trips != 1 || md.metrics.polls_offloaded != 1) ++bad_rt;

        // device-side iteration count, from the log
        uint32_t addr = with.device.find(reg)->addr;
        uint64_t offloaded = 0;
        for (const auto& e : md.recording.entries) offloaded += e.kind == EntryKind::RegRead && e.addr == addr;

        // local oracle: a bare device stepped one read at a time
        Device dev(with.device);
        dev.write(addr, 1);
        dev.advance(settle);
        PollLoopSpec loop = with.threads[0].code[2].poll;
        uint64_t local = 0;
        bool hit = false;
        uint64_t last = 0;
        while (local < max) {
            last = dev.read(addr);
            ++local;
            if (last == target) {
                hit = true;
                break;
            }
            if (local < max) dev.advance(loop.backoff);
        }
        timeouts += !hit;
        RunReport naive = run_mode(with, Mode::Naive);
        if (offloaded != local || naive.metrics.local_poll_iterations != local || md.externs[0].value != last) ++bad_iter;
    }
    bool ok = bad_rt == 0 && bad_iter == 0;
    std::ostringstream d;
    d << "1000 loops (" << timeouts << " timing out): " << bad_rt << " not costing 1 round trip, " << bad_iter
      << " iteration mismatches against the local oracle";
    report(6, "polling offload", ok, d.str());
}

// ---- 7 -----------------------------------------------------------------

void metastate_sync(const std::vector<Bundled>& all) {
    bool ok = true;
    std::ostringstream d;
    size_t eligible = 0;
    for (const auto& b : all) {
        if (b.violating) continue;
        MemoryLayout l = plan_layout(b.prog);
        size_t meta = l.synced_count(), data = l.classes.size() - meta;
        if (meta == 0 || data < 64 * meta) continue;
        ++eligible;
        RunReport naive = run_mode(b.prog, Mode::Naive), m = run_mode(b.prog, Mode::M);
        double red = 1 - double(m.metrics.bytes_to_device) / double(naive.metrics.bytes_to_device);
        if (red < 0.7) ok = false;
        d << b.name << " (" << data << ":" << meta << ") bytes to device " << naive.metrics.bytes_to_device << " -> "
          << m.metrics.bytes_to_device << " (-" << fmt(100 * red, 2) << "%); ";
    }
    if (!eligible) ok = false;
    size_t false_traps = 0, missed = 0, violating = 0;
    for (const auto& b : all) {
        violating += b.violating;
        for (Mode m : kModes) {
            bool trapped = false;
            try {
                run_mode(b.prog, m);
            } catch (const Error& e) {
                trapped = e.code() == ErrorCode::TrapFault;
                if (!trapped) ok = false;
            }
            if (b.violating && !trapped) ++missed;
            if (!b.violating && trapped) ++false_traps;
        }
    }
    if (violating != 3 || missed || false_traps) ok = false;
    d << "traps: " << violating << " violating workloads missed " << missed << "/" << 4 * violating
      << " runs, false traps on correct workloads " << false_traps;
    report(7, "metastate-only sync", ok, d.str());
}

// ---- 8 -----------------------------------------------------------------

void replay_new_inputs(const std::vector<Bundled>& all) {
    const Bundled* w = nullptr;
    for (const auto& b : all)
        if (b.name == "mnist-like") w = &b;
    if (!w) {
        report(8, "replay", false, "mnist-like workload missing");
        return;
    }
    RunReport rec = run_mode(w->prog, Mode::MDS);
    std::mt19937_64 rng(77);
    size_t mismatched = 0, diverged = 0, messages = 0, distinct = 0;
    Digest first{};
    for (int i = 0; i < 100; ++i) {
        PageSet inputs;
        for (PageIndex p : rec.recording.header.inputs) {
            Page& pg = inputs[p];
            for (auto& byte : pg) byte = static_cast<uint8_t>(rng());
        }
        RunOptions o;
        o.mode = Mode::MD;
        o.inputs = &inputs;
        RunReport fresh = run(w->prog, o);

        Device dev(DeviceMap::parse(rec.recording.header.device_map_text), rec.recording.header.device);
        ReplayReport r = replay(rec.recording, dev, inputs);
        diverged += r.divergence.has_value();
        messages += r.network_messages;
        mismatched += r.outputs != fresh.outputs;
        Digest h = sha256(ByteSpan(r.outputs.begin()->second.data(), kPageSize));
        if (i == 0) first = h;
        distinct += h != first;
    }
    bool ok = mismatched == 0 && diverged == 0 && messages == 0 && distinct > 0;
    std::ostringstream d;
    d << "100 input sets: " << mismatched << " output mismatches vs fresh runs, " << diverged << " divergences, "
      << messages << " network messages during replay";
    report(8, "replay", ok, d.str());
}

// ---- 9 -----------------------------------------------------------------

void codec() {
    std::mt19937_64 rng(9);
    size_t bad = 0, total = 0;
    for (int i = 0; i < 10000; ++i) {
        size_t n = rng() % (64 * 1024 + 1);
        Bytes in(n);
        // mix of uniform, skewed, and run-heavy buffers
        switch (i % 3) {
            case 0:
                for (auto& b : in) b = static_cast<uint8_t>(rng());
                break;
            case 1:
                for (auto& b : in) b = static_cast<uint8_t>(rng() % 5 == 0 ? rng() : 0);
                break;
            default: {
                uint8_t v = 0;
                for (size_t k = 0; k < n; ++k) {
                    if (rng() % 64 == 0) v = static_cast<uint8_t>(rng());
                    in[k] = v;
                }
            }
        }
        total += n;
        if (rc::decode(rc::encode(in)) != in) ++bad;
    }
    Bytes zeros(4096, 0);
    size_t zsize = rc::encode(zeros).size();
    bool ok = bad == 0 && zsize < 64 && rc::decode(rc::encode(zeros)) == zeros;
    std::ostringstream d;
    d << "10000 buffers (" << total / (1024 * 1024) << " MiB), " << bad << " roundtrip failures; zero page -> " << zsize
      << " bytes";
    report(9, "codec", ok, d.str());
}

// ---- 10 ----------------------------------------------------------------

void release_consistency(const std::vector<Bundled>& all) {
    const Bundled* w = nullptr;
    for (const auto& b : all)
        if (b.name == "locks3") w = &b;
    if (!w) {
        report(10, "release consistency", false, "locks3 workload missing");
        return;
    }
    size_t threads = w->prog.threads.size();
    RunReport base = run_mode(w->prog, Mode::Naive);
    std::vector<std::vector<std::pair<EntryKind, uint32_t>>> want;
    for (size_t t = 0; t < threads; ++t) want.push_back(register_trace(base.recording, static_cast<uint32_t>(t)));

    CommitHistory h;
    size_t leaks = 0, order_bad = 0, errors = 0, totals_bad = 0;
    const int kSchedules = 10000;
    for (int s = 0; s < kSchedules; ++s) {
        RunOptions o;
        o.mode = s % 2 ? Mode::MDS : Mode::MD;
        o.history = &h;
        o.schedule = Schedule::Random;
        o.schedule_seed = static_cast<uint64_t>(s);
        try {
            RunReport r = run(w->prog, o);
            for (size_t t = 0; t < threads; ++t)
                if (register_trace(r.recording, static_cast<uint32_t>(t)) != want[t]) {
                    ++order_bad;
                    break;
                }
            totals_bad += r.shared.at("total") != base.shared.at("total");
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ReleaseConsistency || e.code() == ErrorCode::SymbolLeak)
                ++leaks;
            else
                ++errors;
        }
    }
    bool ok = leaks == 0 && order_bad == 0 && errors == 0 && totals_bad == 0;
    std::ostringstream d;
    d << kSchedules << " random schedules on " << threads << " threads: " << leaks << " unresolved symbols exposed, "
      << order_bad << " per-thread order violations, " << totals_bad << " wrong shared totals, " << errors << " other errors";
    report(10, "release consistency", ok, d.str());
}

}  // namespace

int main() {
    try {
        auto all = bundled();
        mode_equivalence(all);
        round_trip_accounting(all);
        deferral_delay(all);
        speculation(all);
        misprediction_safety(all);
        polling_offload();
        metastate_sync(all);
        replay_new_inputs(all);
        codec();
        release_consistency(all);
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures ? "FAILED " : "ALL PASSED ") << 10 - failures << "/10" << std::endl;
    return failures ? 1 : 0;
}
