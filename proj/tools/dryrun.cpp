#include <CLI11.hpp>

#include <iostream>

#include "dryrun/bench.hpp"
#include "dryrun/generator.hpp"
#include "dryrun/text.hpp"

using namespace dryrun;

namespace {

NetworkConfig pick_net(const std::string& name, double rtt_ms, double bw_mbps) {
    if (name == "custom") return NetworkConfig::custom(rtt_ms, bw_mbps);
    return NetworkConfig::preset(name);
}

Digest output_digest(const PageSet& pages) {
    Bytes all;
    for (const auto& [pg, page] : pages) {
        for (int b = 0; b < 4; ++b) all.push_back(static_cast<uint8_t>(pg >> (8 * b)));
        all.insert(all.end(), page.begin(), page.end());
    }
    return sha256(ByteSpan(all.data(), all.size()));
}

int cmd_replay(const std::string& recording, const std::string& input, const std::string& report_path) {
    Recording rec = Recording::load(recording);
    PageSet inputs;
    if (!input.empty()) inputs = generate_inputs(load_workload(input));
    Device dev(DeviceMap::parse(rec.header.device_map_text), rec.header.device);
    ReplayReport r = replay(rec, dev, inputs);
    MetricsReport out;
    out.set("entries_replayed", std::to_string(r.entries_replayed));
    out.set("jobs", std::to_string(r.jobs));
    out.set("network_messages", std::to_string(r.network_messages));
    out.set("divergence", r.divergence ? std::to_string(*r.divergence) : "none");
    out.set("output_pages", std::to_string(r.outputs.size()));
    out.set("output_digest", to_hex(output_digest(r.outputs)));
    out.set("device_state", to_hex(r.state_hash));
    if (report_path.empty())
        std::cout << out.to_text();
    else
        out.save(report_path);
    if (r.divergence) {
        std::cerr << "dryrun: replay diverged at entry " << *r.divergence << ": " << r.divergence_detail << '\n';
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Record and replay GPU driver interactions over a simulated network."};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string mode = "md", net = "cellular";
    double rtt_ms = 50, bw_mbps = 40;
    uint64_t inject = 0;
    auto* run = app.add_subcommand("run", "Record one workload run and report its metrics");
    run->add_option("--workload", cfg.workload, "Workload file or bundled profile name")->required();
    run->add_option("--mode", mode, "naive | m | md | mds")->check(CLI::IsMember({"naive", "m", "md", "mds"}));
    run->add_option("--net", net, "wifi | cellular | custom")->check(CLI::IsMember({"wifi", "cellular", "custom"}));
    run->add_option("--rtt-ms", rtt_ms, "Round-trip time for --net custom");
    run->add_option("--bw-mbps", bw_mbps, "Bandwidth for --net custom");
    run->add_option("--seed", cfg.seed, "Device seed");
    run->add_option("--k", cfg.k, "Speculation confidence");
    run->add_option("--history", cfg.history, "Commit history file (read, then updated)");
    auto* inject_opt = run->add_option("--inject-at", inject, "Corrupt the prediction of this commit id");
    run->add_option("--warmup", cfg.warmup, "Unreported runs first, sharing the history");
    run->add_option("--report", cfg.report, "Write the report here instead of stdout");
    run->add_option("--recording", cfg.recording, "Write the recording here");

    std::string rec_path, input_path, replay_report;
    auto* rep = app.add_subcommand("replay", "Replay a recording on a fresh device, no driver");
    rep->add_option("--recording", rec_path)->required();
    rep->add_option("--input", input_path, "File with `input` directives giving the new input pages");
    rep->add_option("--report", replay_report);

    std::vector<std::string> report_files;
    std::string csv_path;
    auto* cmp = app.add_subcommand("compare", "Ratio table of reports against the first");
    cmp->add_option("reports", report_files)->required()->expected(2, -1);
    cmp->add_option("--csv", csv_path, "Also write the table as CSV");

    std::string profile, out_path;
    uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic workload");
    gen->add_option("--profile", profile)->required()->check(CLI::IsMember(bundled_profile_names()));
    gen->add_option("--seed", gen_seed);
    gen->add_option("-o", out_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            cfg.mode = *parse_mode(mode);
            cfg.net = pick_net(net, rtt_ms, bw_mbps);
            if (*inject_opt) cfg.inject_at = inject;
            BenchResult r = run_bench(cfg);
            if (cfg.report.empty()) std::cout << r.report.to_text();
            return 0;
        }
        if (*rep) return cmd_replay(rec_path, input_path, replay_report);
        if (*cmp) {
            std::vector<MetricsReport> reports;
            for (const auto& f : report_files) reports.push_back(MetricsReport::load(f));
            Comparison c = compare(reports, report_files);
            std::cout << c.to_text();
            if (!csv_path.empty()) text::write_file(csv_path, c.to_csv());
            return 0;
        }
        if (*gen) {
            WorkloadProfile p = *bundled_profile(profile);
            p.seed = gen_seed;
            text::write_file(out_path, synthesize_workload_text(p));
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "dryrun: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "dryrun: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
