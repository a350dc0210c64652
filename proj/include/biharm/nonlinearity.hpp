#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "biharm/expr.hpp"

namespace biharm {

/// Outcome of one sampled structural condition (f > 0, f' >= 1, f'' <= 0, ...).
struct ConditionCheck {
    std::string name;
    bool holds = false;
    double worst_margin = 0.0;  // min over samples of the quantity required to be >= 0
    double lo = 0.0;
    double hi = 0.0;
    std::size_t samples = 0;
};

inline constexpr std::size_t kDefaultConditionSamples = 10001;
inline constexpr double kDefaultConditionTol = 1e-12;

/// A scalar function of one "value" variable (y for f and G, s for f1) with its first two
/// symbolic derivatives. Other variables (x, y for f1) are supplied through Bindings.
class Nonlinearity {
public:
    Nonlinearity(expr::Expr f, expr::Var value_var);

    static Nonlinearity parse(std::string_view text, expr::Var value_var);
    static Nonlinearity identity(expr::Var value_var);

    [[nodiscard]] const expr::Expr& f() const noexcept { return f_; }
    [[nodiscard]] const expr::Expr& f1() const noexcept { return f1_; }
    [[nodiscard]] const expr::Expr& f2() const noexcept { return f2_; }
    [[nodiscard]] expr::Var variable() const noexcept { return var_; }
    [[nodiscard]] std::string text() const { return expr::to_string(f_); }

    [[nodiscard]] double value(double y, expr::Bindings base = {}) const;
    [[nodiscard]] double d1(double y, expr::Bindings base = {}) const;
    [[nodiscard]] double d2(double y, expr::Bindings base = {}) const;

    // Dense sampling of [lo, hi]; tolerance applies to the inequality, strict positivity has none.
    [[nodiscard]] ConditionCheck check_positive(double lo, double hi,
                                                std::size_t samples = kDefaultConditionSamples) const;
    [[nodiscard]] ConditionCheck check_slope_at_least_one(double lo, double hi,
                                                          std::size_t samples = kDefaultConditionSamples,
                                                          double tol = kDefaultConditionTol) const;
    [[nodiscard]] ConditionCheck check_concave(double lo, double hi, std::size_t samples = kDefaultConditionSamples,
                                               double tol = kDefaultConditionTol) const;

private:
    expr::Expr f_;
    expr::Expr f1_;
    expr::Expr f2_;
    expr::Var var_;
};

}  // namespace biharm
