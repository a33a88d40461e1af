#include "dryrun/symexpr.hpp"

#include <algorithm>
#include <sstream>

namespace dryrun {

std::string_view to_string(BinOp op) {
    switch (op) {
        case BinOp::And: return "&";
        case BinOp::Or: return "|";
        case BinOp::Xor: return "^";
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Gt: return ">";
    }
    return "?";
}

uint64_t apply(BinOp op, uint64_t a, uint64_t b) {
    switch (op) {
        case BinOp::And: return a & b;
        case BinOp::Or: return a | b;
        case BinOp::Xor: return a ^ b;
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Eq: return a == b ? 1 : 0;
        case BinOp::Ne: return a != b ? 1 : 0;
        case BinOp::Lt: return a < b ? 1 : 0;
        case BinOp::Gt: return a > b ? 1 : 0;
    }
    return 0;
}

SymExpr::SymExpr(Kind kind, uint64_t value, BinOp op, SymExprPtr lhs, SymExprPtr rhs)
    : kind_(kind), value_(value), op_(op), lhs_(std::move(lhs)), rhs_(std::move(rhs)) {
    depth_ = 1;
    if (lhs_) depth_ = std::max(depth_, lhs_->depth_ + 1);
    if (rhs_) depth_ = std::max(depth_, rhs_->depth_ + 1);
}

SymExprPtr SymExpr::symbol(SymbolId id) {
    return SymExprPtr(new SymExpr(Kind::Symbol, id, BinOp::And, nullptr, nullptr));
}

SymExprPtr SymExpr::literal(uint64_t v) {
    return SymExprPtr(new SymExpr(Kind::Literal, v, BinOp::And, nullptr, nullptr));
}

SymExprPtr SymExpr::binary(BinOp op, SymExprPtr lhs, SymExprPtr rhs) {
    if (lhs->kind() == Kind::Literal && rhs->kind() == Kind::Literal)
        return literal(dryrun::apply(op, lhs->literal_value(), rhs->literal_value()));
    return SymExprPtr(new SymExpr(Kind::Binary, 0, op, std::move(lhs), std::move(rhs)));
}

uint64_t SymExpr::evaluate(const std::function<uint64_t(SymbolId)>& binding) const {
    switch (kind_) {
        case Kind::Symbol: return binding(value_);
        case Kind::Literal: return value_;
        case Kind::Binary: return dryrun::apply(op_, lhs_->evaluate(binding), rhs_->evaluate(binding));
    }
    return 0;
}

SymExprPtr SymExpr::substitute(const SymExprPtr& e,
                               const std::function<std::optional<uint64_t>(SymbolId)>& binding) {
    switch (e->kind()) {
        case Kind::Literal: return e;
        case Kind::Symbol: {
            if (auto v = binding(e->symbol_id())) return literal(*v);
            return e;
        }
        case Kind::Binary: {
            SymExprPtr l = substitute(e->lhs(), binding);
            SymExprPtr r = substitute(e->rhs(), binding);
            if (l == e->lhs() && r == e->rhs()) return e;
            return binary(e->op(), std::move(l), std::move(r));
        }
    }
    return e;
}

void SymExpr::collect_symbols(std::vector<SymbolId>& out) const {
    switch (kind_) {
        case Kind::Symbol: out.push_back(value_); break;
        case Kind::Literal: break;
        case Kind::Binary:
            lhs_->collect_symbols(out);
            rhs_->collect_symbols(out);
            break;
    }
}

std::string SymExpr::to_string() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Symbol: os << "S" << value_; break;
        case Kind::Literal: os << "0x" << std::hex << value_; break;
        case Kind::Binary:
            os << "(" << lhs_->to_string() << " " << dryrun::to_string(op_) << " " << rhs_->to_string() << ")";
            break;
    }
    return os.str();
}

bool structurally_equal(const SymExpr& a, const SymExpr& b) {
    if (&a == &b) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case SymExpr::Kind::Symbol: return a.symbol_id() == b.symbol_id();
        case SymExpr::Kind::Literal: return a.literal_value() == b.literal_value();
        case SymExpr::Kind::Binary:
            return a.op() == b.op() && structurally_equal(*a.lhs(), *b.lhs()) &&
                   structurally_equal(*a.rhs(), *b.rhs());
    }
    return false;
}

}  // namespace dryrun
