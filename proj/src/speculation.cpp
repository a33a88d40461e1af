#include "dryrun/speculation.hpp"

#include <filesystem>
#include <sstream>

#include "dryrun/text.hpp"

namespace dryrun {

void SpeculationPolicy::validate() const {
    if (confidence_k < 1) throw Error(ErrorCode::InvalidArgument, "confidence k must be at least 1");
    if (history_capacity < confidence_k)
        throw Error(ErrorCode::InvalidArgument, "history capacity must be at least k");
}

void CommitHistory::append(SiteId site, HistoryEntry entry) {
    auto& ring = sites_[site];
    ring.push_back(std::move(entry));
    while (ring.size() > capacity_) ring.pop_front();
}

const std::deque<HistoryEntry>* CommitHistory::at(SiteId site) const {
    auto it = sites_.find(site);
    return it == sites_.end() ? nullptr : &it->second;
}

std::string CommitHistory::to_text() const {
    std::ostringstream os;
    os << "CODYHIST1\n";
    for (const auto& [site, ring] : sites_) {
        os << "SITE " << site.thread << ":" << site.pc << "\n";
        for (const auto& e : ring) {
            os << "SIG " << e.sig.size();
            for (const auto& a : e.sig) os << " " << a.op << ":" << text::hex(a.addr);
            os << "\nVAL " << e.values.size();
            for (uint64_t v : e.values) os << " " << text::hex(v);
            os << "\n";
        }
    }
    return os.str();
}

CommitHistory CommitHistory::parse(std::string_view body, uint32_t capacity) {
    CommitHistory h(capacity);
    auto lines = text::split_lines(body);
    int line_no = 0;
    auto bad = [&](const std::string& msg) { return ParseError(ErrorCode::CorruptStream, line_no, 1, msg); };
    size_t i = 0;
    for (; i < lines.size(); ++i) {
        ++line_no;
        if (!text::trim(lines[i]).empty()) break;
    }
    if (i == lines.size() || text::trim(lines[i]) != "CODYHIST1") throw bad("missing CODYHIST1 header");
    std::optional<SiteId> site;
    std::optional<Signature> pending_sig;
    for (++i; i < lines.size(); ++i) {
        ++line_no;
        auto w = text::split_ws(lines[i]);
        if (w.empty()) continue;
        if (w[0] == "SITE") {
            if (pending_sig) throw bad("SIG without VAL");
            size_t colon = w.size() == 2 ? w[1].find(':') : std::string_view::npos;
            if (colon == std::string_view::npos) throw bad("expected SITE <thread>:<pc>");
            auto t = text::parse_u64(w[1].substr(0, colon)), pc = text::parse_u64(w[1].substr(colon + 1));
            if (!t || !pc) throw bad("bad site");
            site = SiteId{static_cast<uint32_t>(*t), static_cast<uint32_t>(*pc)};
        } else if (w[0] == "SIG") {
            if (!site || pending_sig) throw bad("SIG out of place");
            auto n = w.size() >= 2 ? text::parse_u64(w[1]) : std::nullopt;
            if (!n || w.size() != *n + 2) throw bad("SIG count mismatch");
            Signature sig;
            for (size_t k = 2; k < w.size(); ++k) {
                std::string_view a = w[k];
                auto addr = a.size() > 2 ? text::parse_hex(a.substr(2)) : std::nullopt;
                if (!addr || a[1] != ':' || (a[0] != 'R' && a[0] != 'W' && a[0] != 'P')) throw bad("bad access");
                sig.push_back({a[0], static_cast<uint32_t>(*addr)});
            }
            pending_sig = std::move(sig);
        } else if (w[0] == "VAL") {
            if (!pending_sig) throw bad("VAL without SIG");
            auto m = w.size() >= 2 ? text::parse_u64(w[1]) : std::nullopt;
            if (!m || w.size() != *m + 2) throw bad("VAL count mismatch");
            std::vector<uint64_t> vals;
            for (size_t k = 2; k < w.size(); ++k) {
                auto v = text::parse_hex(w[k]);
                if (!v) throw bad("bad value");
                vals.push_back(*v);
            }
            h.append(*site, {std::move(*pending_sig), std::move(vals)});
            pending_sig.reset();
        } else {
            throw bad("unknown record `" + std::string(w[0]) + "`");
        }
    }
    if (pending_sig) throw bad("SIG without VAL at end");
    return h;
}

void CommitHistory::save(const std::string& path) const { text::write_file(path, to_text()); }

CommitHistory CommitHistory::load(const std::string& path, uint32_t capacity) {
    if (!std::filesystem::exists(path)) return CommitHistory(capacity);
    return parse(text::read_file(path), capacity);
}

std::optional<std::vector<uint64_t>> predict(const CommitHistory& h, SiteId site, const Signature& sig,
                                             const SpeculationPolicy& policy) {
    if (!policy.enabled) return std::nullopt;
    const auto* ring = h.at(site);
    if (!ring || ring->size() < policy.confidence_k) return std::nullopt;
    auto first = ring->end() - policy.confidence_k;
    for (auto it = first; it != ring->end(); ++it)
        if (it->sig != sig || it->values != first->values) return std::nullopt;
    return first->values;
}

std::optional<size_t> first_mismatch(const std::vector<uint64_t>& predicted, const std::vector<uint64_t>& actual) {
    if (predicted.size() != actual.size()) throw Error(ErrorCode::ArityMismatch, "prediction and result differ in length");
    for (size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] != actual[i]) return i;
    return std::nullopt;
}

std::optional<Mispredict> validate(CommitHistory& h, const Commit& c, const std::vector<uint64_t>& predicted,
                                   const CommitResult& actual) {
    h.append(c.site, {c.signature(), actual.reads});
    auto pos = first_mismatch(predicted, actual.reads);
    if (!pos) return std::nullopt;
    return Mispredict{actual.log_index_of_read(c, *pos), c.site, false};
}

IssueDecision may_issue(bool commit_tainted, bool externalizes, size_t outstanding) {
    if (outstanding == 0) return IssueDecision::Proceed;
    return (commit_tainted || externalizes) ? IssueDecision::Stall : IssueDecision::Proceed;
}

Signature poll_signature(uint32_t reg) { return {{'P', reg}}; }

std::optional<bool> speculate_predicate(const CommitHistory& h, SiteId site, uint32_t reg,
                                        const SpeculationPolicy& policy) {
    auto p = predict(h, site, poll_signature(reg), policy);
    if (!p || p->size() != 1) return std::nullopt;
    return (*p)[0] != 0;
}

}  // namespace dryrun
