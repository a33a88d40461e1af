#pragma once

// Value prediction for commits from per-site history, plus the bookkeeping
// that decides when a thread must stop and wait for validation.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dryrun/deferral.hpp"

namespace dryrun {

struct SpeculationPolicy {
    uint32_t confidence_k = 3;
    bool enabled = true;
    uint32_t history_capacity = 8;

    void validate() const;
};

struct HistoryEntry {
    Signature sig;
    std::vector<uint64_t> values;

    bool operator==(const HistoryEntry&) const = default;
};

/// site -> ring of the most recent commits seen there (oldest first).
///
/// File format:
///   CODYHIST1
///   SITE <thread>:<pc>
///   SIG <n> <op>:<hex addr> ...
///   VAL <m> <hex value> ...
/// with one SIG/VAL pair per ring entry, oldest first.
class CommitHistory {
public:
    explicit CommitHistory(uint32_t capacity = 8) : capacity_(capacity) {}

    void append(SiteId site, HistoryEntry entry);
    [[nodiscard]] const std::deque<HistoryEntry>* at(SiteId site) const;
    [[nodiscard]] size_t site_count() const { return sites_.size(); }
    [[nodiscard]] uint32_t capacity() const { return capacity_; }
    [[nodiscard]] const std::map<SiteId, std::deque<HistoryEntry>>& sites() const { return sites_; }

    [[nodiscard]] std::string to_text() const;
    static CommitHistory parse(std::string_view text, uint32_t capacity = 8);
    void save(const std::string& path) const;
    /// Missing file -> empty history.
    static CommitHistory load(const std::string& path, uint32_t capacity = 8);

    bool operator==(const CommitHistory& o) const { return sites_ == o.sites_; }

private:
    uint32_t capacity_;
    std::map<SiteId, std::deque<HistoryEntry>> sites_;
};

/// k-confidence rule: the last k entries at `site` exist, carry `sig`, and
/// agree on every value. Returns the predicted read values.
std::optional<std::vector<uint64_t>> predict(const CommitHistory& h, SiteId site, const Signature& sig,
                                             const SpeculationPolicy& policy);

/// Position of the first read whose actual value differs from the prediction.
std::optional<size_t> first_mismatch(const std::vector<uint64_t>& predicted, const std::vector<uint64_t>& actual);

/// Mispredict carries the recording index of the first mismatching access.
struct Mispredict {
    uint64_t log_index = 0;
    SiteId site;
    bool injected = false;
};

/// Validates a speculatively issued commit. History receives the actual
/// values whatever the outcome.
std::optional<Mispredict> validate(CommitHistory& h, const Commit& c, const std::vector<uint64_t>& predicted,
                                   const CommitResult& actual);

enum class IssueDecision { Proceed, Stall };

/// Stall when the commit depends on unvalidated predictions (data or
/// control), or when it externalizes state, while anything is still in flight.
IssueDecision may_issue(bool commit_tainted, bool externalizes, size_t outstanding);

/// Prediction ordinals are handed out in issue order and validated in the
/// same (FIFO) order, so a value is clean once its ordinal is validated.
class TaintState {
public:
    uint64_t next() { return ++issued_; }
    void validated(uint64_t ordinal) {
        if (ordinal > validated_) validated_ = ordinal;
    }
    /// After rollback nothing issued so far can be trusted or awaited.
    void retire_all() { validated_ = issued_; }
    [[nodiscard]] bool clean(uint64_t taint) const { return taint <= validated_; }
    [[nodiscard]] uint64_t validated_upto() const { return validated_; }
    [[nodiscard]] uint64_t issued() const { return issued_; }

private:
    uint64_t issued_ = 0;
    uint64_t validated_ = 0;
};

/// Poll-site prediction: the timeout outcome under the same k rule.
std::optional<bool> speculate_predicate(const CommitHistory& h, SiteId site, uint32_t reg,
                                        const SpeculationPolicy& policy);
Signature poll_signature(uint32_t reg);

}  // namespace dryrun
