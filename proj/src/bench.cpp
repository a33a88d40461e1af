#include "dryrun/bench.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>

#include "dryrun/error.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/text.hpp"

namespace dryrun {

namespace {

constexpr std::string_view kMagic = "CODYREPORT1";

const std::set<std::string>& text_keys() {
    static const std::set<std::string> k{"workload", "mode", "net", "device_state"};
    return k;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& MetricsReport::report_keys() {
    static const std::vector<std::string> keys{
        "workload", "mode", "net", "rtt_ms", "bw_mbps", "seed", "k",
        "round_trips", "commits", "speculated_commits", "speculated_fraction", "mispredictions", "recoveries",
        "stalls", "sim_time_s", "bytes_to_device", "bytes_from_device", "messages_to_device",
        "deferred_accesses", "avg_batch_size", "register_accesses", "sync_accesses",
        "polls", "polls_offloaded", "polls_predicted", "local_poll_iterations", "jobs",
        "memory_bytes_to_device", "memory_bytes_from_device", "externs", "safety_violations", "injections",
        "replayed_entries", "commits_init", "commits_interrupt", "commits_power", "commits_polling",
        "commits_other", "recording_entries", "device_state"};
    return keys;
}

bool MetricsReport::is_numeric(const std::string& key) { return !text_keys().count(key); }

void MetricsReport::set(const std::string& key, std::string value) {
    for (auto& [k, v] : fields_)
        if (k == key) {
            v = std::move(value);
            return;
        }
    fields_.emplace_back(key, std::move(value));
}

std::optional<std::string> MetricsReport::get(const std::string& key) const {
    for (const auto& [k, v] : fields_)
        if (k == key) return v;
    return std::nullopt;
}

double MetricsReport::number(const std::string& key) const {
    auto v = get(key);
    if (!v) throw Error(ErrorCode::SchemaMismatch, "report has no `" + key + "`");
    try {
        return std::stod(*v);
    } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaMismatch, "report value of `" + key + "` is not a number");
    }
}

std::string MetricsReport::to_text() const {
    std::string out(kMagic);
    out += '\n';
    for (const auto& [k, v] : fields_) out += k + ' ' + v + '\n';
    return out;
}

MetricsReport MetricsReport::parse(std::string_view t) {
    auto lines = text::split_lines(t);
    if (lines.empty() || text::trim(lines[0]) != kMagic) throw Error(ErrorCode::SchemaMismatch, "not a metrics report");
    MetricsReport r;
    for (size_t i = 1; i < lines.size(); ++i) {
        auto words = text::split_ws(text::strip_comment(lines[i]));
        if (words.empty()) continue;
        if (words.size() != 2) throw Error(ErrorCode::SchemaMismatch, "report line " + std::to_string(i + 1) + " is not `key value`");
        r.set(std::string(words[0]), std::string(words[1]));
    }
    return r;
}

MetricsReport MetricsReport::load(const std::string& path) { return parse(text::read_file(path)); }

void MetricsReport::save(const std::string& path) const { text::write_file(path, to_text()); }

std::string MetricsReport::csv_header() const {
    std::string out;
    for (const auto& [k, v] : fields_) out += (out.empty() ? "" : ",") + k;
    return out;
}

std::string MetricsReport::csv_row() const {
    std::string out;
    bool first = true;
    for (const auto& [k, v] : fields_) {
        out += (first ? "" : ",") + v;
        first = false;
    }
    return out;
}

MetricsReport make_report(const RunConfig& c, const RunReport& run) {
    const RunMetrics& m = run.metrics;
    MetricsReport r;
    auto u = [&](const std::string& k, uint64_t v) { r.set(k, std::to_string(v)); };
    r.set("workload", c.workload.empty() ? "-" : std::filesystem::path(c.workload).filename().string());
    r.set("mode", std::string(to_string(c.mode)));
    r.set("net", c.net.name.empty() ? "custom" : c.net.name);
    r.set("rtt_ms", fmt_double(std::chrono::duration<double, std::milli>(c.net.rtt).count()));
    r.set("bw_mbps", fmt_double(c.net.bandwidth_bps / 1e6));
    u("seed", c.seed);
    u("k", c.k);
    u("round_trips", m.round_trips);
    u("commits", m.commits);
    u("speculated_commits", m.speculated_commits);
    r.set("speculated_fraction",
          fmt_double(m.commits ? static_cast<double>(m.speculated_commits) / static_cast<double>(m.commits) : 0.0));
    u("mispredictions", m.mispredictions);
    u("recoveries", m.recoveries);
    u("stalls", m.stalls);
    r.set("sim_time_s", fmt_double(to_seconds(m.sim_time)));
    u("bytes_to_device", m.bytes_to_device);
    u("bytes_from_device", m.bytes_from_device);
    u("messages_to_device", m.messages_to_device);
    u("deferred_accesses", m.deferred_accesses);
    r.set("avg_batch_size", fmt_double(m.avg_batch_size()));
    u("register_accesses", m.register_accesses);
    u("sync_accesses", m.sync_accesses);
    u("polls", m.polls);
    u("polls_offloaded", m.polls_offloaded);
    u("polls_predicted", m.polls_predicted);
    u("local_poll_iterations", m.local_poll_iterations);
    u("jobs", m.jobs);
    u("memory_bytes_to_device", m.memory_bytes_to_device);
    u("memory_bytes_from_device", m.memory_bytes_from_device);
    u("externs", m.externs);
    u("safety_violations", m.safety_violations);
    u("injections", m.injections);
    u("replayed_entries", m.replayed_entries);
    for (size_t i = 0; i < kCategoryCount; ++i)
        u("commits_" + std::string(to_string(static_cast<Category>(i))), m.commits_by_category[i]);
    u("recording_entries", run.recording.entries.size());
    r.set("device_state", to_hex(run.device_state));
    return r;
}

Program load_program(const std::string& workload, uint64_t seed) {
    if (std::filesystem::exists(workload)) return load_workload(workload);
    if (auto prof = bundled_profile(workload)) {
        prof->seed = seed;
        return synthesize_workload(*prof);
    }
    throw Error(ErrorCode::Io, "no workload file or bundled profile named `" + workload + "`");
}

BenchResult run_bench(const RunConfig& c) {
    try {
        Program prog = load_program(c.workload);
        SpeculationPolicy policy;
        policy.confidence_k = c.k;
        CommitHistory history = c.history.empty() ? CommitHistory(policy.history_capacity)
                                                  : CommitHistory::load(c.history, policy.history_capacity);
        RunOptions o;
        o.mode = c.mode;
        o.net = c.net;
        o.device.seed = c.seed;
        o.spec = policy;
        o.history = &history;
        for (uint32_t i = 0; i < c.warmup; ++i) run(prog, o);
        o.inject_at = c.inject_at;
        BenchResult res;
        res.run = run(prog, o);
        res.report = make_report(c, res.run);
        if (!c.history.empty()) history.save(c.history);
        if (!c.report.empty()) res.report.save(c.report);
        if (!c.recording.empty()) res.run.recording.save(c.recording);
        return res;
    } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " [workload " + c.workload + ", mode " +
                                  std::string(to_string(c.mode)) + ", net " + c.net.name + "]");
    }
}

Comparison compare(const std::vector<MetricsReport>& reports, std::vector<std::string> labels) {
    if (reports.size() < 2) throw Error(ErrorCode::InvalidArgument, "compare needs at least two reports");
    std::vector<std::string> keys;
    for (const auto& [k, v] : reports[0].fields())
        if (MetricsReport::is_numeric(k)) keys.push_back(k);
    for (size_t i = 1; i < reports.size(); ++i) {
        std::vector<std::string> other;
        for (const auto& [k, v] : reports[i].fields())
            if (MetricsReport::is_numeric(k)) other.push_back(k);
        if (other != keys) throw Error(ErrorCode::SchemaMismatch, "report " + std::to_string(i + 1) + " has a different key set");
    }
    Comparison c;
    c.keys = keys;
    for (size_t i = 0; i < reports.size(); ++i) {
        std::string label = i < labels.size() ? labels[i] : std::string();
        if (label.empty()) label = reports[i].get("mode").value_or("r" + std::to_string(i + 1));
        c.labels.push_back(label);
        std::vector<double> vals, ratios;
        for (const auto& k : keys) {
            double v = reports[i].number(k), base = reports[0].number(k);
            vals.push_back(v);
            ratios.push_back(base == 0 ? (v == 0 ? 1.0 : std::nan("")) : v / base);
        }
        c.values.push_back(std::move(vals));
        c.ratios.push_back(std::move(ratios));
    }
    return c;
}

std::string Comparison::to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(26) << "metric";
    for (const auto& l : labels) os << std::setw(28) << l;
    os << '\n';
    for (size_t j = 0; j < keys.size(); ++j) {
        os << std::setw(26) << keys[j];
        for (size_t i = 0; i < labels.size(); ++i) {
            std::string cell = fmt_short(values[i][j]);
            if (i) cell += std::isnan(ratios[i][j]) ? std::string(" (n/a)") : " (x" + fmt_short(ratios[i][j]) + ")";
            os << std::setw(28) << cell;
        }
        os << '\n';
    }
    for (size_t j = 0; j < keys.size(); ++j) {
        if (keys[j] != "sim_time_s") continue;
        for (size_t i = 1; i < labels.size(); ++i)
            os << "delay reduction " << labels[i] << " vs " << labels[0] << ": " << fmt_short(1.0 - ratios[i][j]) << '\n';
    }
    return os.str();
}

std::string Comparison::to_csv() const {
    std::string out = "metric";
    for (const auto& l : labels) out += "," + l;
    for (size_t i = 1; i < labels.size(); ++i) out += ",ratio_" + labels[i];
    out += '\n';
    for (size_t j = 0; j < keys.size(); ++j) {
        out += keys[j];
        for (size_t i = 0; i < labels.size(); ++i) out += "," + fmt_double(values[i][j]);
        for (size_t i = 1; i < labels.size(); ++i) out += "," + fmt_double(ratios[i][j]);
        out += '\n';
    }
    return out;
}

}  // namespace dryrun
