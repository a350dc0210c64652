#include "biharm/nonlinearity.hpp"

#include <algorithm>
#include <functional>
#include <limits>

namespace biharm {

namespace {

ConditionCheck sample_condition(std::string name, double lo, double hi, std::size_t samples, double tol,
                                const std::function<double(double)>& margin, bool strict) {
    ConditionCheck c;
    c.name = std::move(name);
    c.lo = lo;
    c.hi = hi;
    c.samples = std::max<std::size_t>(samples, 1);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.samples; ++k) {
        const double t = c.samples == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(c.samples - 1);
        worst = std::min(worst, margin(lo + t * (hi - lo)));
    }
    c.worst_margin = worst;
    c.holds = strict ? worst > 0.0 : worst >= -tol;
    return c;
}

}  // namespace

Nonlinearity::Nonlinearity(expr::Expr f, expr::Var value_var)
    : f_(std::move(f)), f1_(expr::diff(f_, value_var)), f2_(expr::diff(f1_, value_var)), var_(value_var) {}

Nonlinearity Nonlinearity::parse(std::string_view text, expr::Var value_var) {
    return Nonlinearity(expr::parse(text), value_var);
}

Nonlinearity Nonlinearity::identity(expr::Var value_var) {
    return Nonlinearity(expr::Expr::variable(value_var), value_var);
}

double Nonlinearity::value(double y, expr::Bindings base) const { return expr::eval(f_, base.set(var_, y)); }
double Nonlinearity::d1(double y, expr::Bindings base) const { return expr::eval(f1_, base.set(var_, y)); }
double Nonlinearity::d2(double y, expr::Bindings base) const { return expr::eval(f2_, base.set(var_, y)); }

ConditionCheck Nonlinearity::check_positive(double lo, double hi, std::size_t samples) const {
    return sample_condition("f > 0", lo, hi, samples, 0.0, [this](double y) { return value(y); }, true);
}

ConditionCheck Nonlinearity::check_slope_at_least_one(double lo, double hi, std::size_t samples, double tol) const {
    return sample_condition("f' >= 1", lo, hi, samples, tol, [this](double y) { return d1(y) - 1.0; }, false);
}

ConditionCheck Nonlinearity::check_concave(double lo, double hi, std::size_t samples, double tol) const {
    return sample_condition("f'' <= 0", lo, hi, samples, tol, [this](double y) { return -d2(y); }, false);
}

}  // namespace biharm
