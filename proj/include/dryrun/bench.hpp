#pragma once

// Experiment harness: one configured run in, one key/value metrics report out.
//
// Report text:
//   CODYREPORT1
//   <key> <value>          one per line, keys in the fixed order of report_keys()
//
// Non-numeric keys (workload, mode, net, device_state) identify the run; all
// others are numbers and take part in comparisons.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dryrun/runtime.hpp"

namespace dryrun {

struct RunConfig {
    /// A workload file, or the name of a bundled generator profile.
    std::string workload;
    Mode mode = Mode::MD;
    NetworkConfig net;
    uint64_t seed = 1;
    uint32_t k = 3;
    std::optional<uint64_t> inject_at;
    /// History file, loaded before and saved after the run; empty keeps it in memory.
    std::string history;
    /// Runs made before the measured one, sharing its history.
    uint32_t warmup = 0;
    std::string report;
    std::string recording;
};

class MetricsReport {
public:
    static const std::vector<std::string>& report_keys();
    static bool is_numeric(const std::string& key);

    void set(const std::string& key, std::string value);
    [[nodiscard]] std::optional<std::string> get(const std::string& key) const;
    [[nodiscard]] double number(const std::string& key) const;
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& fields() const { return fields_; }

    [[nodiscard]] std::string to_text() const;
    static MetricsReport parse(std::string_view text);
    static MetricsReport load(const std::string& path);
    void save(const std::string& path) const;

    [[nodiscard]] std::string csv_header() const;
    [[nodiscard]] std::string csv_row() const;

    bool operator==(const MetricsReport&) const = default;

private:
    std::vector<std::pair<std::string, std::string>> fields_;
};

MetricsReport make_report(const RunConfig& config, const RunReport& run);

/// Path, or bundled profile name (generated with `seed`).
Program load_program(const std::string& workload, uint64_t seed = 1);

struct BenchResult {
    RunReport run;
    MetricsReport report;
};

/// Runs the configured pipeline; writes report/recording/history files when configured.
BenchResult run_bench(const RunConfig& config);

struct Comparison {
    std::vector<std::string> labels;
    std::vector<std::string> keys;
    /// ratios[i][j]: report i over report 0 for keys[j]; NaN when the base is 0 and the value is not.
    std::vector<std::vector<double>> ratios;
    std::vector<std::vector<double>> values;

    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] std::string to_csv() const;
};

/// Needs at least two reports with the same key set.
Comparison compare(const std::vector<MetricsReport>& reports, std::vector<std::string> labels = {});

}  // namespace dryrun
