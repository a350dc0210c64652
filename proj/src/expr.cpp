#include "biharm/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace biharm::expr {

namespace {

using NodePtr = std::shared_ptr<const Node>;

NodePtr make_constant(double value) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::constant;
    n->value = value;
    return n;
}

NodePtr make_variable(Var v) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::variable;
    n->var = v;
    return n;
}

NodePtr make_node(NodeKind kind, NodePtr lhs, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

NodePtr make_power(NodePtr base, double exponent) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::power;
    n->lhs = std::move(base);
    n->value = exponent;
    return n;
}

NodePtr make_call(Func f, NodePtr arg) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::call;
    n->func = f;
    n->lhs = std::move(arg);
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->kind == NodeKind::constant && n->value == v; }
bool is_const(const NodePtr& n) { return n->kind == NodeKind::constant; }

NodePtr fold_or(NodeKind kind, const NodePtr& a, const NodePtr& b, double folded) {
    if (is_const(a) && is_const(b) && std::isfinite(folded)) return make_constant(folded);
    return make_node(kind, a, b);
}

NodePtr simplify_add(const NodePtr& a, const NodePtr& b) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return fold_or(NodeKind::add, a, b, is_const(a) && is_const(b) ? a->value + b->value : 0.0);
}

NodePtr simplify_neg(const NodePtr& a) {
    if (is_const(a)) return make_constant(-a->value);
    if (a->kind == NodeKind::negate) return a->lhs;
    return make_node(NodeKind::negate, a);
}

NodePtr simplify_sub(const NodePtr& a, const NodePtr& b) {
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return simplify_neg(b);
    return fold_or(NodeKind::subtract, a, b, is_const(a) && is_const(b) ? a->value - b->value : 0.0);
}

NodePtr simplify_mul(const NodePtr& a, const NodePtr& b) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(a, -1.0)) return simplify_neg(b);
    if (is_const(b, -1.0)) return simplify_neg(a);
    return fold_or(NodeKind::multiply, a, b, is_const(a) && is_const(b) ? a->value * b->value : 0.0);
}

NodePtr simplify_div(const NodePtr& a, const NodePtr& b) {
    if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_constant(0.0);
    if (is_const(b, 1.0)) return a;
    if (is_const(a) && is_const(b) && b->value != 0.0) {
        return fold_or(NodeKind::divide, a, b, a->value / b->value);
    }
    return make_node(NodeKind::divide, a, b);
}

NodePtr simplify_pow(const NodePtr& base, double exponent) {
    if (exponent == 0.0) return make_constant(1.0);
    if (exponent == 1.0) return base;
    if (is_const(base)) {
        const double folded = std::pow(base->value, exponent);
        if (std::isfinite(folded)) return make_constant(folded);
    }
    return make_power(base, exponent);
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse_all() {
        NodePtr e = parse_expr();
        skip_ws();
        if (pos_ < text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what, ParseErrorKind kind = ParseErrorKind::syntax) const {
        fail_at(what, pos_, kind);
    }

    [[noreturn]] static void fail_at(const std::string& what, std::size_t at, ParseErrorKind kind) {
        throw ExprParseError(kind, what, at);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[nodiscard]] bool peek_digit() {
        skip_ws();
        return pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.');
    }

    double read_number() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string token(text_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (token.empty() || end != token.c_str() + token.size() || !std::isfinite(v)) {
            fail_at("malformed number '" + token + "'", start, ParseErrorKind::syntax);
        }
        return v;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = make_node(NodeKind::add, lhs, parse_term());
            } else if (accept('-')) {
                lhs = make_node(NodeKind::subtract, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = make_node(NodeKind::multiply, lhs, parse_unary());
            } else if (accept('/')) {
                lhs = make_node(NodeKind::divide, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make_node(NodeKind::negate, parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return make_power(base, parse_exponent());
        return base;
    }

    // Literal exponent, folded right-associatively: 2^3^2 == 2^9.
    double parse_exponent() {
        double sign = 1.0;
        if (accept('-')) {
            sign = -1.0;
        } else {
            accept('+');
        }
        double base = 0.0;
        skip_ws();
        if (accept('(')) {
            base = parse_exponent();
            if (!accept(')')) fail("expected ')' in exponent");
        } else if (peek_digit()) {
            base = read_number();
        } else {
            fail("exponent must be a numeric literal", ParseErrorKind::non_literal_exponent);
        }
        if (accept('^')) {
            base = std::pow(base, parse_exponent());
            if (!std::isfinite(base)) fail("exponent overflow");
        }
        return sign * base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return make_constant(read_number());
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view ident = text_.substr(start, pos_ - start);
            if (ident == "pi") return make_constant(std::numbers::pi);
            if (auto v = var_from_name(ident)) return make_variable(*v);
            static constexpr std::array<Func, 7> funcs{Func::sin,  Func::cos,  Func::exp, Func::log,
                                                       Func::sqrt, Func::atan, Func::abs};
            for (Func f : funcs) {
                if (ident == func_name(f)) {
                    if (!accept('(')) fail("expected '(' after function name '" + std::string(ident) + "'");
                    NodePtr arg = parse_expr();
                    if (!accept(')')) fail("expected ')'");
                    return make_call(f, arg);
                }
            }
            fail_at("unknown identifier '" + std::string(ident) + "'", start, ParseErrorKind::unknown_identifier);
        }
        fail("unexpected character '" + std::string(1, c) + "'");
    }
};

// ---------------------------------------------------------------------------
// Evaluation

[[noreturn]] void domain_error(const std::string& what) { throw EvalError("domain error: " + what); }

double eval_node(const Node& n, const Bindings& p) {
    switch (n.kind) {
    case NodeKind::constant:
        return n.value;
    case NodeKind::variable:
        if (!p.bound(n.var)) throw EvalError("unbound variable '" + std::string(var_name(n.var)) + "'");
        return p.value(n.var);
    case NodeKind::negate:
        return -eval_node(*n.lhs, p);
    case NodeKind::add:
        return eval_node(*n.lhs, p) + eval_node(*n.rhs, p);
    case NodeKind::subtract:
        return eval_node(*n.lhs, p) - eval_node(*n.rhs, p);
    case NodeKind::multiply:
        return eval_node(*n.lhs, p) * eval_node(*n.rhs, p);
    case NodeKind::divide: {
        const double num = eval_node(*n.lhs, p);
        const double den = eval_node(*n.rhs, p);
        if (den == 0.0) domain_error("division by zero");
        return num / den;
    }
    case NodeKind::power: {
        const double b = eval_node(*n.lhs, p);
        if (b < 0.0 && n.value != std::floor(n.value)) domain_error("non-integer power of a negative base");
        if (b == 0.0 && n.value < 0.0) domain_error("negative power of zero");
        return std::pow(b, n.value);
    }
    case NodeKind::call: {
        const double a = eval_node(*n.lhs, p);
        switch (n.func) {
        case Func::sin:
            return std::sin(a);
        case Func::cos:
            return std::cos(a);
        case Func::exp:
            return std::exp(a);
        case Func::log:
            if (a <= 0.0) domain_error("log of non-positive value");
            return std::log(a);
        case Func::sqrt:
            if (a < 0.0) domain_error("sqrt of negative value");
            return std::sqrt(a);
        case Func::atan:
            return std::atan(a);
        case Func::abs:
            return std::abs(a);
        }
    }
    }
    throw EvalError("malformed expression node");
}

// ---------------------------------------------------------------------------
// Differentiation

NodePtr diff_node(const NodePtr& n, Var v) {
    switch (n->kind) {
    case NodeKind::constant:
        return make_constant(0.0);
    case NodeKind::variable:
        return make_constant(n->var == v ? 1.0 : 0.0);
    case NodeKind::negate:
        return simplify_neg(diff_node(n->lhs, v));
    case NodeKind::add:
        return simplify_add(diff_node(n->lhs, v), diff_node(n->rhs, v));
    case NodeKind::subtract:
        return simplify_sub(diff_node(n->lhs, v), diff_node(n->rhs, v));
    case NodeKind::multiply:
        return simplify_add(simplify_mul(diff_node(n->lhs, v), n->rhs), simplify_mul(n->lhs, diff_node(n->rhs, v)));
    case NodeKind::divide: {
        // (a/b)' = a'/b - a b' / b^2
        const NodePtr da = diff_node(n->lhs, v);
        const NodePtr db = diff_node(n->rhs, v);
        return simplify_sub(simplify_div(da, n->rhs),
                            simplify_div(simplify_mul(n->lhs, db), simplify_pow(n->rhs, 2.0)));
    }
    case NodeKind::power: {
        const NodePtr du = diff_node(n->lhs, v);
        return simplify_mul(simplify_mul(make_constant(n->value), simplify_pow(n->lhs, n->value - 1.0)), du);
    }
    case NodeKind::call: {
        const NodePtr& u = n->lhs;
        const NodePtr du = diff_node(u, v);
        if (is_const(du, 0.0)) return make_constant(0.0);
        NodePtr outer;
        switch (n->func) {
        case Func::sin:
            outer = make_call(Func::cos, u);
            break;
        case Func::cos:
            outer = simplify_neg(make_call(Func::sin, u));
            break;
        case Func::exp:
            outer = n;
            break;
        case Func::log:
            return simplify_div(du, u);
        case Func::sqrt:
            return simplify_div(du, simplify_mul(make_constant(2.0), n));
        case Func::atan:
            return simplify_div(du, simplify_add(make_constant(1.0), simplify_pow(u, 2.0)));
        case Func::abs:
            outer = simplify_div(u, n);
            break;
        }
        return simplify_mul(outer, du);
    }
    }
    throw EvalError("malformed expression node");
}

// ---------------------------------------------------------------------------
// Printing

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print_node(const Node& n, std::string& out) {
    switch (n.kind) {
    case NodeKind::constant:
        if (n.value < 0.0 || (n.value == 0.0 && std::signbit(n.value))) {
            out += "(-" + format_number(-n.value) + ")";
        } else {
            out += format_number(n.value);
        }
        return;
    case NodeKind::variable:
        out += var_name(n.var);
        return;
    case NodeKind::negate:
        out += "(-";
        print_node(*n.lhs, out);
        out += ")";
        return;
    case NodeKind::add:
    case NodeKind::subtract:
    case NodeKind::multiply:
    case NodeKind::divide: {
        static constexpr char ops[] = {'+', '-', '*', '/'};
        const char op = ops[static_cast<int>(n.kind) - static_cast<int>(NodeKind::add)];
        out += "(";
        print_node(*n.lhs, out);
        out += op;
        print_node(*n.rhs, out);
        out += ")";
        return;
    }
    case NodeKind::power:
        out += "(";
        print_node(*n.lhs, out);
        out += "^";
        out += format_number(n.value);
        out += ")";
        return;
    case NodeKind::call:
        out += func_name(n.func);
        out += "(";
        print_node(*n.lhs, out);
        out += ")";
        return;
    }
}

bool node_uses(const Node& n, Var v) {
    switch (n.kind) {
    case NodeKind::constant:
        return false;
    case NodeKind::variable:
        return n.var == v;
    default:
        return (n.lhs && node_uses(*n.lhs, v)) || (n.rhs && node_uses(*n.rhs, v));
    }
}

// ---------------------------------------------------------------------------
// Adaptive Simpson

struct SimpsonState {
    const Expr& e;
    Bindings point;
    Var var;
    int min_depth;
    int max_depth;

    double f(double t) {
        point.set(var, t);
        return eval(e, point);
    }

    double refine(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double delta = left + right - whole;
        if (depth >= min_depth && std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
        if (depth >= max_depth) {
            throw QuadratureError("adaptive Simpson did not converge within depth " + std::to_string(max_depth));
        }
        return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
               refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    }
};

}  // namespace

std::string_view var_name(Var v) noexcept {
    switch (v) {
    case Var::x:
        return "x";
    case Var::y:
        return "y";
    case Var::s:
        return "s";
    case Var::t:
        return "t";
    }
    return "?";
}

std::optional<Var> var_from_name(std::string_view name) noexcept {
    if (name == "x") return Var::x;
    if (name == "y") return Var::y;
    if (name == "s") return Var::s;
    if (name == "t") return Var::t;
    return std::nullopt;
}

std::string_view func_name(Func f) noexcept {
    switch (f) {
    case Func::sin:
        return "sin";
    case Func::cos:
        return "cos";
    case Func::exp:
        return "exp";
    case Func::log:
        return "log";
    case Func::sqrt:
        return "sqrt";
    case Func::atan:
        return "atan";
    case Func::abs:
        return "abs";
    }
    return "?";
}

Expr::Expr() : root_(make_constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {
    if (!root_) root_ = make_constant(0.0);
}

Expr Expr::constant(double value) { return Expr(make_constant(value)); }
Expr Expr::variable(Var v) { return Expr(make_variable(v)); }

bool Expr::uses(Var v) const noexcept { return node_uses(*root_, v); }

Expr parse(std::string_view text, std::size_t max_length) {
    if (text.size() > max_length) {
        throw ExprParseError(ParseErrorKind::too_long,
                             "expression longer than " + std::to_string(max_length) + " bytes", max_length);
    }
    return Expr(Parser(text).parse_all());
}

double eval(const Expr& e, const Bindings& point) {
    const double v = eval_node(e.root(), point);
    if (!std::isfinite(v)) domain_error("non-finite result");
    return v;
}

Expr diff(const Expr& e, Var v) { return Expr(diff_node(e.root_ptr(), v)); }

std::string to_string(const Expr& e) {
    std::string out;
    print_node(e.root(), out);
    return out;
}

double antiderivative_value(const Expr& e, const Bindings& point, Var var, double upper, double abs_tol) {
    if (upper == 0.0) return 0.0;
    SimpsonState st{e, point, var, 3, 50};
    const double a = 0.0;
    const double b = upper;
    const double fa = st.f(a);
    const double fb = st.f(b);
    const double fm = st.f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return st.refine(a, b, fa, fm, fb, whole, abs_tol, 0);
}

Expr operator+(const Expr& a, const Expr& b) { return Expr(simplify_add(a.root_ptr(), b.root_ptr())); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(simplify_sub(a.root_ptr(), b.root_ptr())); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(simplify_mul(a.root_ptr(), b.root_ptr())); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(simplify_div(a.root_ptr(), b.root_ptr())); }
Expr operator-(const Expr& a) { return Expr(simplify_neg(a.root_ptr())); }
Expr pow(const Expr& base, double exponent) { return Expr(simplify_pow(base.root_ptr(), exponent)); }
Expr call(Func f, const Expr& arg) { return Expr(make_call(f, arg.root_ptr())); }

}  // namespace biharm::expr
