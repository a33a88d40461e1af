#pragma once

// Driver programs: the line-oriented workload language and its static checks.
//
//   # comment
//   device mali-like.map            load a device map (path relative to the file)
//   REG 0x0000 GPU_ID constant 0x6221   or declare registers inline
//   shared total guard A            var `total` is shared and must be accessed under A
//   job 1 meta=0-1 in=8-11 out=12-15 xform=add:3
//   input 8-11 fill=0x07            record-time input content (fill=<byte> | random=<seed>)
//   hints exec                      mapping hints: exec | readonly | none
//   thread 0
//   hot_begin interrupt             hot scope, category init|interrupt|power|polling|other
//     irq = read JOB_IRQ_STATUS
//     write JOB_IRQ_CLEAR, irq
//   hot_end
//   loop:
//     x = x + 1
//     if x < 4 goto loop
//   lock A / unlock A / delay 50 / extern x / note text
//   poll GPU_STATUS & 0x1 == 0 max 1000 backoff 2 into v count n ontimeout fail
//   submit 1 / wait_irq
//   memw 3 0x10 x / memr y 3 0x10   driver load/store of a u64 in a shared page

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dryrun/device_map.hpp"
#include "dryrun/job_descriptor.hpp"
#include "dryrun/sim_time.hpp"
#include "dryrun/symexpr.hpp"

namespace dryrun {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind : uint8_t { Var, Literal, Binary };
    Kind kind = Kind::Literal;
    std::string var;
    uint64_t value = 0;
    BinOp op = BinOp::Add;
    ExprPtr lhs, rhs;

    static ExprPtr make_var(std::string name);
    static ExprPtr make_literal(uint64_t v);
    static ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs);

    void collect_vars(std::set<std::string>& out) const;
    /// Fully parenthesized source form.
    [[nodiscard]] std::string to_string() const;
};

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

enum class Category : uint8_t { Init, Interrupt, Power, Polling, Other };
inline constexpr size_t kCategoryCount = 5;
std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

struct PollLoopSpec {
    uint32_t reg = 0;
    std::optional<uint64_t> mask;
    BinOp cmp = BinOp::Eq;
    ExprPtr rhs;
    uint64_t max_iters = 1;
    Ticks backoff = 0;
    std::string into;
    std::string count_var;
    std::string on_timeout;
    size_t on_timeout_pc = 0;
    /// Computed at parse: idempotent register read and no escaping counter.
    bool simple = false;

    [[nodiscard]] bool test(uint64_t read_value, uint64_t rhs_value) const {
        uint64_t v = mask ? (read_value & *mask) : read_value;
        return apply(cmp, v, rhs_value) != 0;
    }
};

enum class Op : uint8_t {
    Read, Write, Assign, Branch, Label, Lock, Unlock, Delay, Extern,
    Poll, Submit, WaitIrq, MemWrite, MemRead, Note, HotBegin, HotEnd,
};

struct Instr {
    Op op = Op::Note;
    int line = 0;
    std::string dst;
    uint32_t reg = 0;
    ExprPtr expr;
    std::string label;
    size_t target = 0;
    std::string lock;
    Ticks ticks = 0;
    PollLoopSpec poll;
    uint64_t job = 0;
    PageIndex page = 0;
    uint32_t offset = 0;
    std::string text;
    Category category = Category::Other;

    [[nodiscard]] bool is_register_access() const { return op == Op::Read || op == Op::Write; }
};

bool instr_equal(const Instr& a, const Instr& b);

struct HotScope {
    size_t begin = 0;  // pc of hot_begin
    size_t end = 0;    // pc of hot_end
    Category category = Category::Other;

    bool operator==(const HotScope&) const = default;
};

struct ThreadProgram {
    uint32_t id = 0;
    std::vector<Instr> code;
    std::vector<HotScope> scopes;
    /// Per pc: index into `scopes` or -1.
    std::vector<int> scope_of;
    /// Vars that instructions in [from, to) may assign.
    [[nodiscard]] std::set<std::string> writes_in(size_t from, size_t to) const;
};

struct JobSpec {
    uint64_t id = 0;
    std::vector<PageRange> meta;
    std::vector<PageRange> inputs;
    std::vector<PageRange> outputs;
    Transform transform = Transform::Add;
    uint64_t constant = 0;

    bool operator==(const JobSpec&) const = default;
};

struct InputSpec {
    enum class Kind : uint8_t { Fill, Random };
    std::vector<PageRange> pages;
    Kind kind = Kind::Fill;
    uint64_t value = 0;

    bool operator==(const InputSpec&) const = default;
};

enum class Hints : uint8_t { Exec, Readonly, None };
std::string_view to_string(Hints h);

struct Program {
    DeviceMap device;
    std::vector<ThreadProgram> threads;
    std::set<std::string> locks;
    std::map<std::string, std::string> shared;  // var -> guarding lock
    std::map<uint64_t, JobSpec> jobs;
    std::vector<InputSpec> inputs;
    Hints hints = Hints::Exec;

    [[nodiscard]] const JobSpec& job(uint64_t id) const;
    [[nodiscard]] bool is_shared(const std::string& var) const { return shared.count(var) != 0; }
    /// Every page any job references, plus pages named by memr/memw and input directives.
    [[nodiscard]] std::set<PageIndex> pages() const;
    [[nodiscard]] std::set<PageIndex> input_pages() const;
    [[nodiscard]] size_t static_access_count() const;
};

bool program_equal(const Program& a, const Program& b);

/// Parses a workload; `base_dir` resolves `device <path>`.
Program parse_workload(std::string_view text, const std::string& base_dir = ".");
Program load_workload(const std::string& path);
/// Canonical text; the device map is emitted inline so the output is self-contained.
std::string print_workload(const Program& p);
Digest workload_hash(const Program& p);

/// Page ranges: comma-separated `a` or `a-b` (inclusive).
std::vector<PageRange> parse_ranges(std::string_view s);
std::string format_ranges(const std::vector<PageRange>& r);

}  // namespace dryrun
