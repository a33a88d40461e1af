#include "dryrun/device_map.hpp"

#include <algorithm>
#include <sstream>

#include "dryrun/error.hpp"
#include "dryrun/text.hpp"

namespace dryrun {

std::string_view to_string(RegKind kind) {
    switch (kind) {
        case RegKind::Constant: return "constant";
        case RegKind::Counter: return "counter";
        case RegKind::ClearOnRead: return "clear-on-read";
        case RegKind::JobStatus: return "job-status";
        case RegKind::PowerFsm: return "power-fsm";
        case RegKind::Nondet: return "nondet";
    }
    return "?";
}

std::optional<RegKind> parse_reg_kind(std::string_view s) {
    for (RegKind k : {RegKind::Constant, RegKind::Counter, RegKind::ClearOnRead, RegKind::JobStatus,
                      RegKind::PowerFsm, RegKind::Nondet})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

DeviceMap DeviceMap::parse(std::string_view body) {
    DeviceMap map;
    int line_no = 0;
    for (std::string_view raw : text::split_lines(body)) {
        ++line_no;
        std::string_view line = text::trim(text::strip_comment(raw));
        if (line.empty()) continue;
        map.add_line(line, line_no);
    }
    return map;
}

DeviceMap DeviceMap::load(const std::string& path) { return parse(text::read_file(path)); }

void DeviceMap::add_line(std::string_view line, int line_no) {
    auto tok = text::split_ws(line);
    if (tok.size() != 5 || tok[0] != "REG")
        throw ParseError(ErrorCode::SyntaxError, line_no, 1, "expected `REG <hex-addr> <name> <kind> <hex-init>`");
    auto addr = text::parse_hex(tok[1]);
    if (!addr || *addr > 0xFFFFFFFFull)
        throw ParseError(ErrorCode::SyntaxError, line_no, 5, "bad register address `" + std::string(tok[1]) + "`");
    auto kind = parse_reg_kind(tok[3]);
    if (!kind) throw ParseError(ErrorCode::SyntaxError, line_no, 1, "unknown register kind `" + std::string(tok[3]) + "`");
    auto init = text::parse_hex(tok[4]);
    if (!init) throw ParseError(ErrorCode::SyntaxError, line_no, 1, "bad init value `" + std::string(tok[4]) + "`");
    try {
        add(RegisterSpec{static_cast<uint32_t>(*addr), std::string(tok[2]), *kind, *init});
    } catch (const Error& e) {
        throw ParseError(e.code(), line_no, 1, e.what());
    }
}

void DeviceMap::add(RegisterSpec spec) {
    if (by_addr_.count(spec.addr))
        throw Error(ErrorCode::InvalidArgument, "duplicate register address " + text::hex(spec.addr));
    if (by_name_.count(spec.name)) throw Error(ErrorCode::InvalidArgument, "duplicate register name " + spec.name);
    by_addr_[spec.addr] = regs_.size();
    by_name_[spec.name] = regs_.size();
    regs_.push_back(std::move(spec));
}

const RegisterSpec* DeviceMap::find(uint32_t addr) const {
    auto it = by_addr_.find(addr);
    return it == by_addr_.end() ? nullptr : &regs_[it->second];
}

const RegisterSpec* DeviceMap::find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    return it == by_name_.end() ? nullptr : &regs_[it->second];
}

const RegisterSpec& DeviceMap::at(uint32_t addr) const {
    const RegisterSpec* r = find(addr);
    if (!r) throw Error(ErrorCode::UnknownRegister, "no register at " + text::hex(addr));
    return *r;
}

bool DeviceMap::has_nondet() const {
    return std::any_of(regs_.begin(), regs_.end(), [](const RegisterSpec& r) { return r.kind == RegKind::Nondet; });
}

std::string DeviceMap::to_text() const {
    std::vector<const RegisterSpec*> sorted;
    for (const auto& r : regs_) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->addr < b->addr; });
    std::ostringstream os;
    for (const auto* r : sorted)
        os << "REG " << text::hex(r->addr) << " " << r->name << " " << to_string(r->kind) << " " << text::hex(r->init)
           << "\n";
    return os.str();
}

}  // namespace dryrun
