#pragma once

// Symbolic expressions over uncommitted register reads.
//
// An expression is an immutable tree; subtrees are shared between values so
// propagating a symbol through assignments never copies.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dryrun {

enum class BinOp : uint8_t { And, Or, Xor, Add, Sub, Eq, Ne, Lt, Gt };

std::string_view to_string(BinOp op);
uint64_t apply(BinOp op, uint64_t lhs, uint64_t rhs);

using SymbolId = uint64_t;

class SymExpr;
using SymExprPtr = std::shared_ptr<const SymExpr>;

class SymExpr {
public:
    enum class Kind : uint8_t { Symbol, Literal, Binary };

    static SymExprPtr symbol(SymbolId id);
    static SymExprPtr literal(uint64_t v);
    static SymExprPtr binary(BinOp op, SymExprPtr lhs, SymExprPtr rhs);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] SymbolId symbol_id() const { return value_; }
    [[nodiscard]] uint64_t literal_value() const { return value_; }
    [[nodiscard]] BinOp op() const { return op_; }
    [[nodiscard]] const SymExprPtr& lhs() const { return lhs_; }
    [[nodiscard]] const SymExprPtr& rhs() const { return rhs_; }
    [[nodiscard]] uint32_t depth() const { return depth_; }

    /// Full evaluation; `binding` must know every symbol in the tree.
    [[nodiscard]] uint64_t evaluate(const std::function<uint64_t(SymbolId)>& binding) const;

    /// Partial evaluation: bound symbols are replaced, constant subtrees folded.
    /// Returns the literal when the result has no free symbols left.
    [[nodiscard]] static SymExprPtr substitute(const SymExprPtr& e,
                                               const std::function<std::optional<uint64_t>(SymbolId)>& binding);

    void collect_symbols(std::vector<SymbolId>& out) const;
    [[nodiscard]] std::string to_string() const;

protected:
    SymExpr(Kind kind, uint64_t value, BinOp op, SymExprPtr lhs, SymExprPtr rhs);

private:
    Kind kind_;
    uint64_t value_;
    BinOp op_;
    SymExprPtr lhs_;
    SymExprPtr rhs_;
    uint32_t depth_;
};

bool structurally_equal(const SymExpr& a, const SymExpr& b);

}  // namespace dryrun
