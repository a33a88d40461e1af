#include "dryrun/workload.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <sstream>

#include "dryrun/text.hpp"

namespace dryrun {

ExprPtr Expr::make_var(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Var;
    e->var = std::move(name);
    return e;
}

ExprPtr Expr::make_literal(uint64_t v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Literal;
    e->value = v;
    return e;
}

ExprPtr Expr::make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Binary;
    e->op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

void Expr::collect_vars(std::set<std::string>& out) const {
    switch (kind) {
        case Kind::Var: out.insert(var); break;
        case Kind::Literal: break;
        case Kind::Binary:
            lhs->collect_vars(out);
            rhs->collect_vars(out);
            break;
    }
}

std::string Expr::to_string() const {
    switch (kind) {
        case Kind::Var: return var;
        case Kind::Literal: return text::hex(value);
        case Kind::Binary:
            return "(" + lhs->to_string() + " " + std::string(dryrun::to_string(op)) + " " + rhs->to_string() + ")";
    }
    return "?";
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case Expr::Kind::Var: return a->var == b->var;
        case Expr::Kind::Literal: return a->value == b->value;
        case Expr::Kind::Binary: return a->op == b->op && expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
    }
    return false;
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Init: return "init";
        case Category::Interrupt: return "interrupt";
        case Category::Power: return "power";
        case Category::Polling: return "polling";
        case Category::Other: return "other";
    }
    return "?";
}

std::optional<Category> parse_category(std::string_view s) {
    for (Category c : {Category::Init, Category::Interrupt, Category::Power, Category::Polling, Category::Other})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::string_view to_string(Hints h) {
    switch (h) {
        case Hints::Exec: return "exec";
        case Hints::Readonly: return "readonly";
        case Hints::None: return "none";
    }
    return "?";
}

bool instr_equal(const Instr& a, const Instr& b) {
    if (a.op != b.op) return false;
    switch (a.op) {
        case Op::Read: return a.dst == b.dst && a.reg == b.reg;
        case Op::Write: return a.reg == b.reg && expr_equal(a.expr, b.expr);
        case Op::Assign: return a.dst == b.dst && expr_equal(a.expr, b.expr);
        case Op::Branch: return a.label == b.label && a.target == b.target && expr_equal(a.expr, b.expr);
        case Op::Label: return a.label == b.label;
        case Op::Lock:
        case Op::Unlock: return a.lock == b.lock;
        case Op::Delay: return a.ticks == b.ticks;
        case Op::Extern: return expr_equal(a.expr, b.expr);
        case Op::Poll: {
            const auto &p = a.poll, &q = b.poll;
            return p.reg == q.reg && p.mask == q.mask && p.cmp == q.cmp && expr_equal(p.rhs, q.rhs) &&
                   p.max_iters == q.max_iters && p.backoff == q.backoff && p.into == q.into &&
                   p.count_var == q.count_var && p.on_timeout == q.on_timeout &&
                   p.on_timeout_pc == q.on_timeout_pc && p.simple == q.simple;
        }
        case Op::Submit: return a.job == b.job;
        case Op::WaitIrq:
        case Op::HotEnd: return true;
        case Op::MemWrite: return a.page == b.page && a.offset == b.offset && expr_equal(a.expr, b.expr);
        case Op::MemRead: return a.dst == b.dst && a.page == b.page && a.offset == b.offset;
        case Op::Note: return a.text == b.text;
        case Op::HotBegin: return a.category == b.category;
    }
    return false;
}

std::set<std::string> ThreadProgram::writes_in(size_t from, size_t to) const {
    std::set<std::string> out;
    for (size_t pc = from; pc < to && pc < code.size(); ++pc) {
        const Instr& in = code[pc];
        switch (in.op) {
            case Op::Read:
            case Op::Assign:
            case Op::MemRead: out.insert(in.dst); break;
            case Op::Poll:
                if (!in.poll.into.empty()) out.insert(in.poll.into);
                if (!in.poll.count_var.empty()) out.insert(in.poll.count_var);
                break;
            default: break;
        }
    }
    return out;
}

const JobSpec& Program::job(uint64_t id) const {
    auto it = jobs.find(id);
    if (it == jobs.end()) throw Error(ErrorCode::InvalidArgument, "unknown job " + std::to_string(id));
    return it->second;
}

std::set<PageIndex> Program::pages() const {
    std::set<PageIndex> out;
    for (const auto& [id, j] : jobs)
        for (const auto* list : {&j.meta, &j.inputs, &j.outputs})
            for (PageIndex p : expand(*list)) out.insert(p);
    for (const auto& in : inputs)
        for (PageIndex p : expand(in.pages)) out.insert(p);
    for (const auto& t : threads)
        for (const auto& i : t.code)
            if (i.op == Op::MemRead || i.op == Op::MemWrite) out.insert(i.page);
    return out;
}

std::set<PageIndex> Program::input_pages() const {
    std::set<PageIndex> out;
    for (const auto& [id, j] : jobs)
        for (PageIndex p : expand(j.inputs)) out.insert(p);
    for (const auto& in : inputs)
        for (PageIndex p : expand(in.pages)) out.insert(p);
    return out;
}

size_t Program::static_access_count() const {
    size_t n = 0;
    for (const auto& t : threads)
        for (const auto& i : t.code) n += i.is_register_access() ? 1 : 0;
    return n;
}

bool program_equal(const Program& a, const Program& b) {
    if (!(a.device == b.device) || a.locks != b.locks || a.shared != b.shared || a.jobs != b.jobs ||
        a.inputs != b.inputs || a.hints != b.hints || a.threads.size() != b.threads.size())
        return false;
    for (size_t t = 0; t < a.threads.size(); ++t) {
        const auto &x = a.threads[t], &y = b.threads[t];
        if (x.id != y.id || x.scopes != y.scopes || x.code.size() != y.code.size()) return false;
        for (size_t pc = 0; pc < x.code.size(); ++pc)
            if (!instr_equal(x.code[pc], y.code[pc])) return false;
    }
    return true;
}

std::vector<PageRange> parse_ranges(std::string_view s) {
    std::vector<PageRange> out;
    if (s.empty()) return out;
    size_t b = 0;
    while (b <= s.size()) {
        size_t e = s.find(',', b);
        std::string_view part = s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
        size_t dash = part.find('-');
        auto first = text::parse_u64(part.substr(0, dash));
        auto last = dash == std::string_view::npos ? first : text::parse_u64(part.substr(dash + 1));
        if (!first || !last || *last < *first || *last > 0xFFFFFFFFull)
            throw Error(ErrorCode::SyntaxError, "bad page range `" + std::string(part) + "`");
        out.push_back({static_cast<PageIndex>(*first), static_cast<uint32_t>(*last - *first + 1)});
        if (e == std::string_view::npos) break;
        b = e + 1;
    }
    return out;
}

std::string format_ranges(const std::vector<PageRange>& r) {
    std::string out;
    for (size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(r[i].first);
        if (r[i].count != 1) out += "-" + std::to_string(r[i].first + r[i].count - 1);
    }
    return out;
}

namespace {

const std::set<std::string, std::less<>>& keywords() {
    static const std::set<std::string, std::less<>> k = {
        "read",  "write",    "if",      "goto",   "lock",  "unlock", "delay",    "extern", "poll",
        "max",   "backoff",  "into",    "count",  "ontimeout", "submit", "wait_irq", "memw", "memr",
        "note",  "hot_begin", "hot_end", "device", "REG",   "shared", "guard",    "job",    "input",
        "hints", "thread"};
    return k;
}

struct Token {
    enum class Kind { Ident, Number, Punct, End } kind = Kind::End;
    std::string text;
    uint64_t value = 0;
    int col = 0;
};

class LineLexer {
public:
    LineLexer(std::string_view line, int line_no, int col_base) : line_no_(line_no) {
        size_t i = 0;
        while (i < line.size()) {
            char c = line[i];
            if (c == ' ' || c == '\t' || c == '\r') {
                ++i;
                continue;
            }
            Token t;
            t.col = col_base + static_cast<int>(i) + 1;
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                size_t b = i;
                while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_')) ++i;
                t.kind = Token::Kind::Ident;
                t.text = std::string(line.substr(b, i - b));
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                size_t b = i;
                while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])))) ++i;
                t.kind = Token::Kind::Number;
                t.text = std::string(line.substr(b, i - b));
                auto v = text::parse_u64(t.text);
                if (!v) throw ParseError(ErrorCode::SyntaxError, line_no, t.col, "bad number `" + t.text + "`");
                t.value = *v;
            } else {
                t.kind = Token::Kind::Punct;
                if ((c == '=' || c == '!') && i + 1 < line.size() && line[i + 1] == '=') {
                    t.text = std::string(line.substr(i, 2));
                    i += 2;
                } else if (std::string_view("&|^+-<>,:=()").find(c) != std::string_view::npos) {
                    t.text = std::string(1, c);
                    ++i;
                } else {
                    throw ParseError(ErrorCode::SyntaxError, line_no, t.col, std::string("unexpected character `") + c + "`");
                }
            }
            toks_.push_back(std::move(t));
        }
        end_.col = col_base + static_cast<int>(line.size()) + 1;
    }

    const Token& peek(size_t ahead = 0) const { return pos_ + ahead < toks_.size() ? toks_[pos_ + ahead] : end_; }
    const Token& next() {
        const Token& t = peek();
        if (pos_ < toks_.size()) ++pos_;
        return t;
    }
    bool at_end() const { return pos_ >= toks_.size(); }
    bool accept(std::string_view punct_or_word) {
        if (!at_end() && peek().kind != Token::Kind::Number && peek().text == punct_or_word) {
            ++pos_;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const Token& t, const std::string& msg) const {
        throw ParseError(ErrorCode::SyntaxError, line_no_, t.col, msg);
    }
    void expect(std::string_view what) {
        if (!accept(what)) fail(peek(), "expected `" + std::string(what) + "`");
    }
    std::string ident(const char* what) {
        const Token& t = peek();
        if (t.kind != Token::Kind::Ident) fail(t, std::string("expected ") + what);
        if (keywords().count(t.text)) fail(t, "`" + t.text + "` is a keyword");
        next();
        return t.text;
    }
    uint64_t number(const char* what) {
        const Token& t = peek();
        if (t.kind != Token::Kind::Number) fail(t, std::string("expected ") + what);
        next();
        return t.value;
    }
    void expect_end() {
        if (!at_end()) fail(peek(), "unexpected `" + peek().text + "`");
    }
    int line() const { return line_no_; }

    // Precedence low to high: | ^ & (== !=) (< >) (+ -)
    ExprPtr expr() { return parse_level(0); }

private:
    ExprPtr parse_level(int level) {
        static const std::vector<std::vector<std::pair<std::string_view, BinOp>>> levels = {
            {{"|", BinOp::Or}},
            {{"^", BinOp::Xor}},
            {{"&", BinOp::And}},
            {{"==", BinOp::Eq}, {"!=", BinOp::Ne}},
            {{"<", BinOp::Lt}, {">", BinOp::Gt}},
            {{"+", BinOp::Add}, {"-", BinOp::Sub}},
        };
        if (level == static_cast<int>(levels.size())) return primary();
        ExprPtr lhs = parse_level(level + 1);
        for (;;) {
            const Token& t = peek();
            if (t.kind != Token::Kind::Punct) return lhs;
            auto it = std::find_if(levels[level].begin(), levels[level].end(),
                                   [&](const auto& p) { return p.first == t.text; });
            if (it == levels[level].end()) return lhs;
            next();
            lhs = Expr::make_binary(it->second, lhs, parse_level(level + 1));
        }
    }

    ExprPtr primary() {
        const Token& t = peek();
        if (t.kind == Token::Kind::Number) {
            next();
            return Expr::make_literal(t.value);
        }
        if (t.kind == Token::Kind::Ident && !keywords().count(t.text)) {
            next();
            return Expr::make_var(t.text);
        }
        if (accept("(")) {
            ExprPtr e = expr();
            expect(")");
            return e;
        }
        fail(t, "expected expression");
    }

    std::vector<Token> toks_;
    Token end_;
    size_t pos_ = 0;
    int line_no_;
};

struct RawThread {
    ThreadProgram prog;
    std::map<std::string, size_t> labels;
};

class Parser {
public:
    Parser(std::string base_dir) : base_dir_(std::move(base_dir)) {}

    Program run(std::string_view text) {
        int line_no = 0;
        for (std::string_view raw : text::split_lines(text)) {
            ++line_no;
            std::string_view stripped = text::strip_comment(raw);
            std::string_view line = text::trim(stripped);
            if (line.empty()) continue;
            int col_base = static_cast<int>(line.data() - raw.data());
            parse_line(line, line_no, col_base);
        }
        finish();
        return std::move(prog_);
    }

private:
    void parse_line(std::string_view line, int line_no, int col_base) {
        auto words = text::split_ws(line);
        std::string_view head = words[0];
        auto col_of = [&](std::string_view w) { return col_base + static_cast<int>(w.data() - line.data()) + 1; };
        auto syntax = [&](std::string_view w, const std::string& msg) -> ParseError {
            return ParseError(ErrorCode::SyntaxError, line_no, col_of(w), msg);
        };

        if (head == "REG") {
            prog_.device.add_line(line, line_no);
            return;
        }
        if (head == "device") {
            if (words.size() != 2) throw syntax(head, "expected `device <path>`");
            std::filesystem::path p(words[1]);
            if (p.is_relative()) p = std::filesystem::path(base_dir_) / p;
            DeviceMap loaded = DeviceMap::load(p.string());
            for (const auto& r : loaded.registers()) prog_.device.add(r);
            return;
        }
        if (head == "shared") {
            if (words.size() != 4 || words[2] != "guard") throw syntax(head, "expected `shared <var> guard <lock>`");
            prog_.shared[std::string(words[1])] = std::string(words[3]);
            prog_.locks.insert(std::string(words[3]));
            return;
        }
        if (head == "hints") {
            if (words.size() != 2) throw syntax(head, "expected `hints exec|readonly|none`");
            if (words[1] == "exec") prog_.hints = Hints::Exec;
            else if (words[1] == "readonly") prog_.hints = Hints::Readonly;
            else if (words[1] == "none") prog_.hints = Hints::None;
            else throw syntax(words[1], "unknown hints `" + std::string(words[1]) + "`");
            return;
        }
        if (head == "job") {
            if (words.size() < 2) throw syntax(head, "expected `job <id> meta=.. in=.. out=..`");
            auto id = text::parse_u64(words[1]);
            if (!id) throw syntax(words[1], "bad job id");
            JobSpec j;
            j.id = *id;
            for (size_t i = 2; i < words.size(); ++i) {
                std::string_view w = words[i];
                size_t eq = w.find('=');
                if (eq == std::string_view::npos) throw syntax(w, "expected key=value");
                std::string_view key = w.substr(0, eq), val = w.substr(eq + 1);
                try {
                    if (key == "meta") j.meta = parse_ranges(val);
                    else if (key == "in") j.inputs = parse_ranges(val);
                    else if (key == "out") j.outputs = parse_ranges(val);
                    else if (key == "xform") {
                        if (val == "checksum") {
                            j.transform = Transform::Checksum;
                        } else if (val.substr(0, 4) == "add:") {
                            auto c = text::parse_u64(val.substr(4));
                            if (!c) throw syntax(w, "bad add constant");
                            j.transform = Transform::Add;
                            j.constant = *c;
                        } else {
                            throw syntax(w, "unknown transform");
                        }
                    } else {
                        throw syntax(w, "unknown job key `" + std::string(key) + "`");
                    }
                } catch (const ParseError&) {
                    throw;
                } catch (const Error& e) {
                    throw syntax(w, e.what());
                }
            }
            if (j.meta.empty()) throw syntax(head, "job needs at least one metastate page");
            if (prog_.jobs.count(j.id)) throw syntax(words[1], "duplicate job");
            prog_.jobs[j.id] = std::move(j);
            return;
        }
        if (head == "input") {
            if (words.size() != 3) throw syntax(head, "expected `input <pages> fill=<b>|random=<seed>`");
            InputSpec in;
            try {
                in.pages = parse_ranges(words[1]);
            } catch (const Error& e) {
                throw syntax(words[1], e.what());
            }
            std::string_view w = words[2];
            size_t eq = w.find('=');
            auto v = eq == std::string_view::npos ? std::nullopt : text::parse_u64(w.substr(eq + 1));
            if (!v) throw syntax(w, "expected fill=<byte> or random=<seed>");
            if (w.substr(0, eq) == "fill") in.kind = InputSpec::Kind::Fill;
            else if (w.substr(0, eq) == "random") in.kind = InputSpec::Kind::Random;
            else throw syntax(w, "expected fill=<byte> or random=<seed>");
            in.value = *v;
            prog_.inputs.push_back(std::move(in));
            return;
        }
        if (head == "thread") {
            auto id = words.size() == 2 ? text::parse_u64(words[1]) : std::nullopt;
            if (!id) throw syntax(head, "expected `thread <id>`");
            for (const auto& t : threads_)
                if (t.prog.id == *id) throw syntax(words[1], "duplicate thread");
            threads_.emplace_back();
            threads_.back().prog.id = static_cast<uint32_t>(*id);
            return;
        }
        if (head == "note") {
            Instr in;
            in.op = Op::Note;
            in.text = std::string(text::trim(line.substr(4)));
            push(in, line_no);
            return;
        }
        if (head == "hot_begin") {
            Instr in;
            in.op = Op::HotBegin;
            if (words.size() > 2) throw syntax(words[2], "unexpected token");
            if (words.size() == 2) {
                auto c = parse_category(words[1]);
                if (!c) throw syntax(words[1], "unknown category `" + std::string(words[1]) + "`");
                in.category = *c;
            }
            push(in, line_no);
            return;
        }

        LineLexer lx(line, line_no, col_base);
        Instr in;
        const Token first = lx.peek();
        if (first.kind == Token::Kind::Ident && lx.peek(1).text == ":" && lx.peek(1).kind == Token::Kind::Punct) {
            in.op = Op::Label;
            in.label = lx.ident("label");
            lx.expect(":");
        } else if (first.text == "hot_end") {
            lx.next();
            in.op = Op::HotEnd;
        } else if (first.text == "write") {
            lx.next();
            in.op = Op::Write;
            in.reg = reg(lx);
            lx.expect(",");
            in.expr = lx.expr();
        } else if (first.text == "if") {
            lx.next();
            in.op = Op::Branch;
            in.expr = lx.expr();
            lx.expect("goto");
            in.label = lx.ident("label");
        } else if (first.text == "lock" || first.text == "unlock") {
            lx.next();
            in.op = first.text == "lock" ? Op::Lock : Op::Unlock;
            in.lock = lx.ident("lock name");
            prog_.locks.insert(in.lock);
        } else if (first.text == "delay") {
            lx.next();
            in.op = Op::Delay;
            in.ticks = lx.number("tick count");
        } else if (first.text == "extern") {
            lx.next();
            in.op = Op::Extern;
            in.expr = lx.expr();
        } else if (first.text == "poll") {
            lx.next();
            in.op = Op::Poll;
            parse_poll(lx, in.poll);
        } else if (first.text == "submit") {
            lx.next();
            in.op = Op::Submit;
            in.job = lx.number("job id");
        } else if (first.text == "wait_irq") {
            lx.next();
            in.op = Op::WaitIrq;
        } else if (first.text == "memw") {
            lx.next();
            in.op = Op::MemWrite;
            in.page = static_cast<PageIndex>(lx.number("page"));
            in.offset = offset(lx);
            in.expr = lx.expr();
        } else if (first.text == "memr") {
            lx.next();
            in.op = Op::MemRead;
            in.dst = lx.ident("variable");
            in.page = static_cast<PageIndex>(lx.number("page"));
            in.offset = offset(lx);
        } else if (first.kind == Token::Kind::Ident && lx.peek(1).text == "=") {
            in.dst = lx.ident("variable");
            lx.expect("=");
            if (lx.peek().text == "read" && lx.peek().kind == Token::Kind::Ident) {
                lx.next();
                in.op = Op::Read;
                in.reg = reg(lx);
            } else {
                in.op = Op::Assign;
                in.expr = lx.expr();
            }
        } else {
            lx.fail(first, "unknown instruction `" + first.text + "`");
        }
        lx.expect_end();
        push(in, line_no);
    }

    uint32_t reg(LineLexer& lx) {
        const Token& t = lx.peek();
        if (t.kind != Token::Kind::Ident) lx.fail(t, "expected register name");
        const RegisterSpec* r = prog_.device.find(t.text);
        if (!r) throw ParseError(ErrorCode::UnknownRegister, lx.line(), t.col, "unknown register `" + t.text + "`");
        lx.next();
        return r->addr;
    }

    uint32_t offset(LineLexer& lx) {
        const Token& t = lx.peek();
        uint64_t off = lx.number("page offset");
        if (off > kPageSize - 8 || off % 8 != 0) lx.fail(t, "offset must be 8-aligned and inside the page");
        return static_cast<uint32_t>(off);
    }

    void parse_poll(LineLexer& lx, PollLoopSpec& p) {
        p.reg = reg(lx);
        if (lx.accept("&")) p.mask = lx.number("mask");
        const Token& c = lx.peek();
        if (c.text == "==") p.cmp = BinOp::Eq;
        else if (c.text == "!=") p.cmp = BinOp::Ne;
        else if (c.text == "<") p.cmp = BinOp::Lt;
        else if (c.text == ">") p.cmp = BinOp::Gt;
        else lx.fail(c, "expected comparison");
        lx.next();
        p.rhs = lx.expr();
        lx.expect("max");
        const Token& m = lx.peek();
        p.max_iters = lx.number("iteration bound");
        if (p.max_iters == 0) lx.fail(m, "max must be at least 1");
        while (!lx.at_end()) {
            if (lx.accept("backoff")) p.backoff = lx.number("backoff ticks");
            else if (lx.accept("into")) p.into = lx.ident("variable");
            else if (lx.accept("count")) p.count_var = lx.ident("variable");
            else if (lx.accept("ontimeout")) p.on_timeout = lx.ident("label");
            else lx.fail(lx.peek(), "unexpected `" + lx.peek().text + "` in poll");
        }
        const RegisterSpec& spec = prog_.device.at(p.reg);
        p.simple = is_idempotent_read(spec.kind) && p.count_var.empty();
    }

    void push(Instr in, int line_no) {
        in.line = line_no;
        if (threads_.empty()) {
            threads_.emplace_back();
            threads_.back().prog.id = 0;
        }
        RawThread& t = threads_.back();
        if (in.op == Op::Label) {
            if (t.labels.count(in.label))
                throw ParseError(ErrorCode::SyntaxError, line_no, 1, "duplicate label `" + in.label + "`");
            t.labels[in.label] = t.prog.code.size();
        }
        t.prog.code.push_back(std::move(in));
    }

    void finish() {
        for (RawThread& rt : threads_) {
            ThreadProgram& t = rt.prog;
            auto resolve = [&](const std::string& label, int line) -> size_t {
                auto it = rt.labels.find(label);
                if (it == rt.labels.end())
                    throw ParseError(ErrorCode::SyntaxError, line, 1, "unknown label `" + label + "`");
                return it->second;
            };
            for (Instr& in : t.code) {
                if (in.op == Op::Branch) in.target = resolve(in.label, in.line);
                if (in.op == Op::Poll && !in.poll.on_timeout.empty())
                    in.poll.on_timeout_pc = resolve(in.poll.on_timeout, in.line);
                if (in.op == Op::Submit && !prog_.jobs.count(in.job))
                    throw ParseError(ErrorCode::SyntaxError, in.line, 1, "submit of undeclared job " + std::to_string(in.job));
            }
            build_scopes(t);
            check_locks(t);
            prog_.threads.push_back(std::move(t));
        }
        std::sort(prog_.threads.begin(), prog_.threads.end(), [](auto& a, auto& b) { return a.id < b.id; });
    }

    static void build_scopes(ThreadProgram& t) {
        constexpr size_t kNone = SIZE_MAX;
        t.scope_of.assign(t.code.size(), -1);
        size_t open = kNone;
        for (size_t pc = 0; pc < t.code.size(); ++pc) {
            const Instr& in = t.code[pc];
            if (in.op == Op::HotBegin) {
                if (open != kNone) throw ParseError(ErrorCode::OverlappingHotScope, in.line, 1, "hot scope opened inside another");
                open = pc;
            } else if (in.op == Op::HotEnd) {
                if (open == kNone) throw ParseError(ErrorCode::OverlappingHotScope, in.line, 1, "hot_end without hot_begin");
                t.scopes.push_back({open, pc, t.code[open].category});
                for (size_t i = open; i <= pc; ++i) t.scope_of[i] = static_cast<int>(t.scopes.size() - 1);
                open = kNone;
            }
        }
        if (open != kNone)
            throw ParseError(ErrorCode::OverlappingHotScope, t.code[open].line, 1, "hot scope runs past the end of thread");
    }

    // Forward dataflow over the thread's CFG: the held-lock set must agree at
    // every join and be empty when control falls off the end.
    void check_locks(const ThreadProgram& t) const {
        using LockSet = std::set<std::string>;
        size_t n = t.code.size();
        std::vector<std::optional<LockSet>> in_state(n + 1);
        std::vector<size_t> work;
        in_state[0] = LockSet{};
        work.push_back(0);
        auto guard_check = [&](const Instr& in, const LockSet& held, const std::string& var) {
            auto it = prog_.shared.find(var);
            if (it != prog_.shared.end() && !held.count(it->second))
                throw ParseError(ErrorCode::UnguardedShared, in.line, 1,
                                 "shared `" + var + "` accessed without holding " + it->second);
        };
        while (!work.empty()) {
            size_t pc = work.back();
            work.pop_back();
            if (pc == n) continue;
            const Instr& in = t.code[pc];
            LockSet held = *in_state[pc];
            std::set<std::string> used;
            if (in.expr) in.expr->collect_vars(used);
            if (in.op == Op::Poll && in.poll.rhs) in.poll.rhs->collect_vars(used);
            for (const auto& v : t.writes_in(pc, pc + 1)) used.insert(v);
            for (const auto& v : used) guard_check(in, held, v);

            if (in.op == Op::Lock) {
                if (held.count(in.lock))
                    throw ParseError(ErrorCode::UnbalancedLock, in.line, 1, "lock " + in.lock + " acquired twice");
                held.insert(in.lock);
            } else if (in.op == Op::Unlock) {
                if (!held.erase(in.lock))
                    throw ParseError(ErrorCode::UnbalancedLock, in.line, 1, "unlock of " + in.lock + " which is not held");
            }
            std::vector<size_t> succ{pc + 1};
            if (in.op == Op::Branch) succ.push_back(in.target);
            if (in.op == Op::Poll && !in.poll.on_timeout.empty()) succ.push_back(in.poll.on_timeout_pc);
            for (size_t s : succ) {
                if (!in_state[s]) {
                    in_state[s] = held;
                    work.push_back(s);
                } else if (*in_state[s] != held) {
                    int line = s < n ? t.code[s].line : in.line;
                    throw ParseError(ErrorCode::UnbalancedLock, line, 1, "inconsistent locks held at join");
                }
            }
        }
        if (in_state[n] && !in_state[n]->empty())
            throw ParseError(ErrorCode::UnbalancedLock, t.code.empty() ? 1 : t.code.back().line, 1,
                             "thread " + std::to_string(t.id) + " ends holding " + *in_state[n]->begin());
    }

    std::string base_dir_;
    Program prog_;
    std::vector<RawThread> threads_;
};

}  // namespace

Program parse_workload(std::string_view text, const std::string& base_dir) { return Parser(base_dir).run(text); }

Program load_workload(const std::string& path) {
    std::filesystem::path p(path);
    return parse_workload(text::read_file(path), p.has_parent_path() ? p.parent_path().string() : ".");
}

namespace {
std::string cmp_text(BinOp op) { return std::string(to_string(op)); }
}  // namespace

std::string print_workload(const Program& p) {
    std::ostringstream os;
    os << p.device.to_text();
    for (const auto& [var, lock] : p.shared) os << "shared " << var << " guard " << lock << "\n";
    for (const auto& [id, j] : p.jobs) {
        os << "job " << id << " meta=" << format_ranges(j.meta);
        if (!j.inputs.empty()) os << " in=" << format_ranges(j.inputs);
        if (!j.outputs.empty()) os << " out=" << format_ranges(j.outputs);
        if (j.transform == Transform::Checksum) os << " xform=checksum";
        else os << " xform=add:" << j.constant;
        os << "\n";
    }
    for (const auto& in : p.inputs)
        os << "input " << format_ranges(in.pages) << (in.kind == InputSpec::Kind::Fill ? " fill=" : " random=")
           << text::hex(in.value) << "\n";
    os << "hints " << to_string(p.hints) << "\n";
    auto reg_name = [&](uint32_t addr) { return p.device.at(addr).name; };
    for (const auto& t : p.threads) {
        os << "thread " << t.id << "\n";
        for (const Instr& in : t.code) {
            if (in.op != Op::Label) os << "    ";
            switch (in.op) {
                case Op::Read: os << in.dst << " = read " << reg_name(in.reg); break;
                case Op::Write: os << "write " << reg_name(in.reg) << ", " << in.expr->to_string(); break;
                case Op::Assign: os << in.dst << " = " << in.expr->to_string(); break;
                case Op::Branch: os << "if " << in.expr->to_string() << " goto " << in.label; break;
                case Op::Label: os << in.label << ":"; break;
                case Op::Lock: os << "lock " << in.lock; break;
                case Op::Unlock: os << "unlock " << in.lock; break;
                case Op::Delay: os << "delay " << in.ticks; break;
                case Op::Extern: os << "extern " << in.expr->to_string(); break;
                case Op::Poll: {
                    const auto& q = in.poll;
                    os << "poll " << reg_name(q.reg);
                    if (q.mask) os << " & " << text::hex(*q.mask);
                    os << " " << cmp_text(q.cmp) << " " << q.rhs->to_string() << " max " << q.max_iters;
                    if (q.backoff) os << " backoff " << q.backoff;
                    if (!q.into.empty()) os << " into " << q.into;
                    if (!q.count_var.empty()) os << " count " << q.count_var;
                    if (!q.on_timeout.empty()) os << " ontimeout " << q.on_timeout;
                    break;
                }
                case Op::Submit: os << "submit " << in.job; break;
                case Op::WaitIrq: os << "wait_irq"; break;
                case Op::MemWrite: os << "memw " << in.page << " " << in.offset << " " << in.expr->to_string(); break;
                case Op::MemRead: os << "memr " << in.dst << " " << in.page << " " << in.offset; break;
                case Op::Note: os << "note " << in.text; break;
                case Op::HotBegin: os << "hot_begin " << to_string(in.category); break;
                case Op::HotEnd: os << "hot_end"; break;
            }
            os << "\n";
        }
    }
    return os.str();
}

Digest workload_hash(const Program& p) { return sha256(print_workload(p)); }

}  // namespace dryrun
