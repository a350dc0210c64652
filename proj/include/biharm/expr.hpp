#pragma once

// Small expression language for weights a(x,y), g(x,y) and nonlinearities f(y), f1(x,y,s), G(y).
//
// Grammar (standard precedence, ^ binds tighter than unary minus):
//
//   expr     := term   (('+' | '-') term)*
//   term     := unary  (('*' | '/') unary)*
//   unary    := ('-' | '+') unary | power
//   power    := primary ['^' exponent]
//   exponent := ['-' | '+'] (NUMBER | '(' exponent ')') ['^' exponent]
//   primary  := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
//
// Exponents are numeric literals only, so differentiation never needs log of the base.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "biharm/error.hpp"

namespace biharm::expr {

enum class Var : std::uint8_t { x = 0, y = 1, s = 2, t = 3 };
inline constexpr std::size_t kVarCount = 4;

[[nodiscard]] std::string_view var_name(Var v) noexcept;
[[nodiscard]] std::optional<Var> var_from_name(std::string_view name) noexcept;

enum class Func : std::uint8_t { sin, cos, exp, log, sqrt, atan, abs };

[[nodiscard]] std::string_view func_name(Func f) noexcept;

enum class NodeKind : std::uint8_t { constant, variable, negate, add, subtract, multiply, divide, power, call };

/// Immutable AST node. Binary nodes use both children, unary nodes (negate, power, call) only `lhs`.
struct Node {
    NodeKind kind = NodeKind::constant;
    double value = 0.0;  // constant value, or the literal exponent of a power node
    Var var = Var::x;
    Func func = Func::sin;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

class Expr {
public:
    Expr();  // the constant 0
    explicit Expr(std::shared_ptr<const Node> root);

    static Expr constant(double value);
    static Expr variable(Var v);

    [[nodiscard]] const Node& root() const noexcept { return *root_; }
    [[nodiscard]] const std::shared_ptr<const Node>& root_ptr() const noexcept { return root_; }

    [[nodiscard]] bool uses(Var v) const noexcept;
    [[nodiscard]] bool is_constant() const noexcept { return root_->kind == NodeKind::constant; }

private:
    std::shared_ptr<const Node> root_;
};

/// Variable bindings for evaluation. Unbound variables are an evaluation error.
class Bindings {
public:
    Bindings() = default;

    Bindings& set(Var v, double value) noexcept {
        values_[static_cast<std::size_t>(v)] = value;
        mask_ = static_cast<std::uint8_t>(mask_ | (1u << static_cast<unsigned>(v)));
        return *this;
    }

    [[nodiscard]] bool bound(Var v) const noexcept { return (mask_ >> static_cast<unsigned>(v)) & 1u; }
    [[nodiscard]] double value(Var v) const noexcept { return values_[static_cast<std::size_t>(v)]; }

private:
    std::array<double, kVarCount> values_{};
    std::uint8_t mask_ = 0;
};

enum class ParseErrorKind : std::uint8_t { syntax, unknown_identifier, non_literal_exponent, too_long };

class ExprParseError : public ParseError {
public:
    ExprParseError(ParseErrorKind kind, const std::string& what, std::size_t offset)
        : ParseError(what, offset), kind_(kind) {}

    [[nodiscard]] ParseErrorKind kind() const noexcept { return kind_; }

private:
    ParseErrorKind kind_;
};

inline constexpr std::size_t kDefaultMaxLength = 4096;

[[nodiscard]] Expr parse(std::string_view text, std::size_t max_length = kDefaultMaxLength);

/// Throws EvalError on unbound variables and on domain errors (log of non-positive,
/// division by zero, non-finite results); never returns NaN silently.
[[nodiscard]] double eval(const Expr& e, const Bindings& point);

/// Symbolic derivative. Only trivial simplifications (0 and 1 identities, constant folding).
[[nodiscard]] Expr diff(const Expr& e, Var v);

/// Canonical fully parenthesized infix. parse(to_string(e)) evaluates bit-identically to e.
[[nodiscard]] std::string to_string(const Expr& e);

/// Integral of e over `var` from 0 to `upper` (signed), with the remaining variables taken
/// from `point`. Adaptive Simpson to absolute tolerance `abs_tol`; throws QuadratureError
/// when the refinement depth cap is reached.
[[nodiscard]] double antiderivative_value(const Expr& e, const Bindings& point, Var var, double upper,
                                          double abs_tol = 1e-10);

// Building helpers with light simplification; used by diff and handy in tests.
[[nodiscard]] Expr operator+(const Expr& a, const Expr& b);
[[nodiscard]] Expr operator-(const Expr& a, const Expr& b);
[[nodiscard]] Expr operator*(const Expr& a, const Expr& b);
[[nodiscard]] Expr operator/(const Expr& a, const Expr& b);
[[nodiscard]] Expr operator-(const Expr& a);
[[nodiscard]] Expr pow(const Expr& base, double exponent);
[[nodiscard]] Expr call(Func f, const Expr& arg);

}  // namespace biharm::expr
