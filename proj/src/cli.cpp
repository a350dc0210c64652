#include "biharm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <limits>
#include <optional>
#include <utility>

#include "biharm/eigen.hpp"
#include "biharm/grid.hpp"
#include "biharm/hardy.hpp"
#include "biharm/linalg.hpp"
#include "biharm/nonlinearity.hpp"
#include "biharm/operators.hpp"
#include "biharm/picone.hpp"
#include "biharm/stability.hpp"

#ifndef BIHARM_VERSION
#define BIHARM_VERSION "0.0.0"
#endif

namespace biharm::cli {

namespace {

using expr::Var;

// ---------------------------------------------------------------------------------------------
// Schema

enum class KeyType {
    domain,
    nodes,     // integer >= 9
    count,     // integer >= 1
    bumps,     // integer >= 0
    seed,      // unsigned 64-bit integer
    positive,  // real > 0
    nonneg,    // real >= 0
    field,     // expression in x, y
    fn_y,      // expression in y
    fn_s,      // expression in x, y, s
    mode,      // "expanded" | "direct"
};

struct Key {
    const char* name;
    KeyType type;
    bool required;
    Json fallback;  // applied when absent; null leaves the key null in the resolved config
};

std::vector<Key> schema(const std::string& command) {
    const Json none;
    if (command == "eig") {
        return {{"domain", KeyType::domain, true, none}, {"n", KeyType::nodes, true, none},
                {"a", KeyType::field, true, none},       {"k", KeyType::count, false, 2},
                {"tol", KeyType::positive, false, 1e-8}, {"seed", KeyType::seed, true, none}};
    }
    if (command == "picone") {
        return {{"domain", KeyType::domain, true, none},     {"n", KeyType::nodes, true, none},
                {"u", KeyType::field, true, none},           {"v", KeyType::field, true, none},
                {"f", KeyType::fn_y, false, none},           {"mode", KeyType::mode, false, "expanded"},
                {"eps", KeyType::positive, false, 1e-8},     {"tol", KeyType::positive, false, 1e-8}};
    }
    if (command == "hardy") {
        return {{"domain", KeyType::domain, true, none}, {"n", KeyType::nodes, true, none},
                {"v", KeyType::field, true, none},       {"g", KeyType::field, true, none},
                {"lambda", KeyType::nonneg, true, none}, {"f", KeyType::fn_y, false, "y"},
                {"bumps", KeyType::bumps, false, 100},   {"tol", KeyType::positive, false, 1e-8},
                {"seed", KeyType::seed, true, none}};
    }
    if (command == "stability") {
        return {{"domain", KeyType::domain, true, none},
                {"n", KeyType::nodes, true, none},
                {"u", KeyType::field, true, none},
                {"f1", KeyType::fn_s, true, none},
                {"delta", KeyType::nonneg, true, none},
                {"a", KeyType::field, false, none},
                {"eps", KeyType::positive, false, kDefaultDivisionFloor},
                {"bumps", KeyType::bumps, false, 100},
                {"tol", KeyType::positive, false, 1e-8},
                {"seed", KeyType::seed, true, none}};
    }
    if (command == "morse") {
        return {{"domain", KeyType::domain, true, none},   {"n", KeyType::nodes, true, none},
                {"a", KeyType::field, true, none},         {"G", KeyType::fn_y, true, none},
                {"v", KeyType::field, false, none},        {"k", KeyType::count, false, 4},
                {"y_max", KeyType::positive, false, 1.0},  {"tol", KeyType::positive, false, 1e-8},
                {"seed", KeyType::seed, true, none}};
    }
    if (command == "monotonicity") {
        return {{"domain", KeyType::domain, true, none}, {"inner", KeyType::domain, true, none},
                {"a", KeyType::field, true, none},       {"h", KeyType::positive, true, none},
                {"tol", KeyType::positive, false, 1e-8}, {"seed", KeyType::seed, true, none}};
    }
    throw ConfigError("unknown command '" + command + "'");
}

[[noreturn]] void invalid(const std::string& key, const std::string& why) {
    throw ConfigError("invalid value for key '" + key + "': " + why);
}

double real_of(const Json& j, const std::string& key) {
    if (!j.is_number()) invalid(key, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) invalid(key, "expected a finite number");
    return x;
}

std::uint64_t integer_of(const Json& j, const std::string& key) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) invalid(key, "expected a nonnegative integer");
    invalid(key, "expected an integer");
}

std::array<double, 2> pair_of(const Json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 2) invalid(key, "expected an array of two numbers");
    return {real_of(j[0], key), real_of(j[1], key)};
}

Json pair_json(const std::array<double, 2>& p) { return Json::array({p[0], p[1]}); }

DomainSpec domain_of(const Json& j, const std::string& key) {
    if (!j.is_object()) invalid(key, "expected an object");
    if (!j.contains("kind") || !j["kind"].is_string()) invalid(key, "missing string key 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    auto get = [&](const char* name, std::optional<std::array<double, 2>> fallback) {
        if (j.contains(name)) return pair_of(j[name], key + "." + name);
        if (!fallback) throw ConfigError("missing key '" + key + "." + name + "'");
        return *fallback;
    };
    auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
        for (const auto& item : j.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; })) {
                throw ConfigError("unknown key '" + key + "." + item.key() + "' for domain kind '" + kind + "'");
            }
        }
    };
    if (kind == "rectangle") {
        reject_unknown({"kind", "origin", "extent"});
        const auto extent = get("extent", std::nullopt);
        if (!(extent[0] > 0.0 && extent[1] > 0.0)) invalid(key + ".extent", "extents must be positive");
        return DomainSpec::rectangle(get("origin", std::array<double, 2>{0.0, 0.0}), extent);
    }
    if (kind == "disk") {
        reject_unknown({"kind", "center", "radius", "box_origin", "box_extent"});
        if (!j.contains("radius")) throw ConfigError("missing key '" + key + ".radius'");
        const double r = real_of(j["radius"], key + ".radius");
        if (!(r > 0.0)) invalid(key + ".radius", "radius must be positive");
        const auto box = get("box_extent", std::array<double, 2>{1.0, 1.0});
        if (!(box[0] > 0.0 && box[1] > 0.0)) invalid(key + ".box_extent", "extents must be positive");
        return DomainSpec::disk(get("center", std::nullopt), r, get("box_origin", std::array<double, 2>{0.0, 0.0}),
                                box);
    }
    invalid(key + ".kind", "expected \"rectangle\" or \"disk\"");
}

Json domain_json(const DomainSpec& d) {
    Json j;
    if (d.kind == DomainKind::rectangle) {
        j["kind"] = "rectangle";
        j["origin"] = pair_json(d.origin);
        j["extent"] = pair_json(d.extent);
    } else {
        j["kind"] = "disk";
        j["center"] = pair_json(d.center);
        j["radius"] = d.radius;
        j["box_origin"] = pair_json(d.origin);
        j["box_extent"] = pair_json(d.extent);
    }
    return j;
}

expr::Expr expression_of(const Json& j, const std::string& key, std::initializer_list<Var> allowed) {
    if (!j.is_string()) invalid(key, "expected an expression string");
    expr::Expr e = [&] {
        try {
            return expr::parse(j.get<std::string>());
        } catch (const ParseError& err) {
            throw ConfigError("expression error in key '" + key + "': " + err.what());
        }
    }();
    for (Var v : {Var::x, Var::y, Var::s, Var::t}) {
        if (e.uses(v) && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string names;
            for (Var a : allowed) names += (names.empty() ? "" : ", ") + std::string(expr::var_name(a));
            throw ConfigError("expression error in key '" + key + "': variable '" + std::string(expr::var_name(v)) +
                              "' is not allowed (allowed: " + names + ")");
        }
    }
    return e;
}

// ---------------------------------------------------------------------------------------------
// Report helpers

struct Checks {
    Json list = Json::array();
    bool failed = false;

    void add(const std::string& name, double value, const char* relation, double threshold, bool pass,
             bool asserted) {
        Json c;
        c["name"] = name;
        c["value"] = value;
        c["relation"] = relation;
        c["threshold"] = threshold;
        c["pass"] = pass;
        c["asserted"] = asserted;
        list.push_back(std::move(c));
        failed = failed || (asserted && !pass);
    }
    void at_least(const std::string& name, double value, double threshold, bool asserted) {
        add(name, value, ">=", threshold, value >= threshold, asserted);
    }
    void at_most(const std::string& name, double value, double threshold, bool asserted) {
        add(name, value, "<=", threshold, value <= threshold, asserted);
    }
};

Json condition_json(const ConditionCheck& c) {
    Json j;
    j["name"] = c.name;
    j["holds"] = c.holds;
    j["worst_margin"] = c.worst_margin;
    j["lo"] = c.lo;
    j["hi"] = c.hi;
    j["samples"] = c.samples;
    return j;
}

Json conditions_json(const std::vector<ConditionCheck>& cs) {
    Json j = Json::array();
    for (const ConditionCheck& c : cs) j.push_back(condition_json(c));
    return j;
}

Json strings_json(const std::vector<std::string>& s) {
    Json j = Json::array();
    for (const std::string& x : s) j.push_back(x);
    return j;
}

CsvFile csv(std::string name, const GridFunction& u) {
    const Grid& g = u.grid();
    std::string out = "x,y,value\n";
    char row[96];
    for (std::size_t j = 0; j < g.ny(); ++j) {
        for (std::size_t i = 0; i < g.nx(); ++i) {
            std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g\n", g.x(i), g.y(j), u(i, j));
            out += row;
        }
    }
    return {std::move(name), std::move(out)};
}

struct Outcome {
    Json results;
    Checks checks;
    std::vector<CsvFile> csv;
};

const expr::Expr& expression(const RunConfig& cfg, const char* key) { return cfg.expressions.at(key); }

Nonlinearity nonlinearity(const RunConfig& cfg, const char* key, Var var) {
    return Nonlinearity(expression(cfg, key), var);
}

GridPtr grid_of(const RunConfig& cfg) {
    return build_domain(domain_of(cfg.resolved["domain"], "domain"), cfg.resolved["n"].get<std::size_t>());
}

EigenOptions eigen_options(const RunConfig& cfg) {
    EigenOptions o;
    o.tol = cfg.resolved["tol"].get<double>();
    o.seed = cfg.resolved["seed"].get<std::uint64_t>();
    if (cfg.resolved.contains("k")) o.k = cfg.resolved["k"].get<std::size_t>();
    return o;
}

// ---------------------------------------------------------------------------------------------
// Commands

Outcome run_eig(const RunConfig& cfg, bool want_csv) {
    const GridPtr grid = grid_of(cfg);
    const GridFunction a = sample(expression(cfg, "a"), grid);
    const EigenOptions o = eigen_options(cfg);
    const std::vector<WeightedEigenpair> pairs = solve_weighted(WeightedEigenProblem(grid, a), o);

    Outcome out;
    out.results["h"] = grid->h();
    out.results["unknowns"] = grid->unknown_count();
    Json list = Json::array();
    double worst = 0.0;
    for (const WeightedEigenpair& p : pairs) {
        Json e;
        e["eigenvalue"] = p.eigenvalue;
        e["residual"] = p.residual;
        e["relative_residual"] = p.relative_residual;
        e["iterations"] = p.iterations;
        list.push_back(std::move(e));
        worst = std::max(worst, p.relative_residual);
    }
    out.results["eigenpairs"] = std::move(list);
    out.checks.at_most("max_relative_residual", worst, o.tol, true);

    if (pairs.size() >= 2) {
        const QualitativeVerdict q = qualitative_verify(pairs);
        Json v;
        v["one_sign"] = q.one_sign;
        v["u1_min"] = q.u1_min;
        v["u1_max"] = q.u1_max;
        v["superharmonic"] = q.superharmonic;
        v["min_neg_laplacian"] = q.min_neg_laplacian;
        v["laplacian_scale"] = q.laplacian_scale;
        v["lambda1"] = q.lambda1;
        v["lambda2"] = q.lambda2;
        v["gap"] = q.gap;
        v["relative_gap"] = q.relative_gap;
        v["sign_change"] = q.sign_change;
        v["u2_min"] = q.u2_min;
        v["u2_max"] = q.u2_max;
        v["thresholds"] = {{"one_sign", q.thresholds.one_sign},
                           {"superharmonic", q.thresholds.superharmonic},
                           {"sign_change", q.thresholds.sign_change}};
        v["notes"] = strings_json(q.notes);
        out.results["qualitative"] = std::move(v);

        const double u1 = std::max(std::abs(q.u1_min), std::abs(q.u1_max));
        const double u2 = std::max(std::abs(q.u2_min), std::abs(q.u2_max));
        out.checks.add("one_sign", u1 > 0.0 ? q.u1_min / u1 : 0.0, ">", -q.thresholds.one_sign, q.one_sign, true);
        out.checks.add("superharmonic", q.laplacian_scale > 0.0 ? q.min_neg_laplacian / q.laplacian_scale : 0.0,
                       ">", -q.thresholds.superharmonic, q.superharmonic, true);
        out.checks.add("u2_sign_change", u2 > 0.0 ? std::min(-q.u2_min, q.u2_max) / u2 : 0.0, ">",
                       q.thresholds.sign_change, q.sign_change, true);
    } else {
        out.results["qualitative"] = nullptr;
    }

    if (want_csv) {
        for (std::size_t n = 0; n < pairs.size(); ++n) {
            out.csv.push_back(csv("u" + std::to_string(n + 1) + ".csv", pairs[n].eigenfunction));
        }
    }
    return out;
}

Outcome run_picone(const RunConfig& cfg, bool want_csv) {
    const GridPtr grid = grid_of(cfg);
    const GridFunction u = sample(expression(cfg, "u"), grid);
    const GridFunction v = sample(expression(cfg, "v"), grid);
    const double tol = cfg.resolved["tol"].get<double>();
    PiconeOptions o;
    o.mode = cfg.resolved["mode"] == "direct" ? PiconeMode::direct : PiconeMode::expanded;
    o.eps = cfg.resolved["eps"].get<double>();
    const bool nonlinear = !cfg.resolved["f"].is_null();
    const PiconeReport r =
        nonlinear ? picone_nonlinear(u, v, nonlinearity(cfg, "f", Var::y), o) : picone_linear(u, v, o);

    Outcome out;
    Json& j = out.results;
    j["mode"] = r.mode == PiconeMode::direct ? "direct" : "expanded";
    j["nonlinear"] = r.nonlinear;
    j["orientation"] = r.orientation == Orientation::positive ? "positive" : "negative";
    j["eps"] = r.eps;
    j["admissible_count"] = r.admissible_count;
    j["reported_count"] = r.reported_count;
    j["hypothesis_count"] = r.hypothesis_count;
    j["hypotheses_hold"] = r.hypotheses_hold;
    j["scale"] = r.scale;
    j["max_abs_identity_residual"] = r.max_abs_identity_residual;
    j["min_l"] = r.min_l;
    j["min_l_hypothesis"] = r.min_l_hypothesis;
    j["integral_l"] = r.integral_l;
    j["f_conditions"] = conditions_json(r.f_conditions);
    j["f_conditions_hold"] = r.f_conditions_hold;
    j["nonnegativity_asserted"] = r.nonnegativity_asserted;
    j["alternate_denominator_residual"] =
        r.alternate_denominator_residual ? Json(*r.alternate_denominator_residual) : Json();
    if (r.equality) {
        j["equality"] = {{"c", r.equality->c},
                         {"d", r.equality->d},
                         {"max_deviation", r.equality->max_deviation},
                         {"nodes", r.equality->nodes},
                         {"degenerate", r.equality->degenerate}};
    } else {
        j["equality"] = nullptr;
    }
    j["notes"] = strings_json(r.notes);

    out.checks.at_most("identity_residual", r.max_abs_identity_residual / r.scale, tol,
                       r.mode == PiconeMode::expanded);
    out.checks.add("hypotheses", static_cast<double>(r.hypothesis_count), "==",
                   static_cast<double>(r.reported_count), r.hypotheses_hold, false);
    if (nonlinear) {
        out.checks.add("f_conditions", r.f_conditions_hold ? 1.0 : 0.0, "==", 1.0, r.f_conditions_hold, false);
    }
    out.checks.at_least("min_L", r.min_l / r.scale, -tol, r.nonnegativity_asserted);

    if (want_csv) {
        out.csv.push_back(csv("L.csv", r.l));
        out.csv.push_back(csv("R.csv", r.r));
    }
    return out;
}

Outcome run_hardy(const RunConfig& cfg, bool want_csv) {
    const GridPtr grid = grid_of(cfg);
    const GridFunction v = sample(expression(cfg, "v"), grid);
    const GridFunction g = sample(expression(cfg, "g"), grid);
    HardyOptions o;
    o.bumps = cfg.resolved["bumps"].get<std::size_t>();
    o.seed = cfg.resolved["seed"].get<std::uint64_t>();
    o.tolerance = cfg.resolved["tol"].get<double>();
    const HardyReport r =
        hardy_rellich_check(v, cfg.resolved["lambda"].get<double>(), g, nonlinearity(cfg, "f", Var::y), o);

    Outcome out;
    Json& j = out.results;
    j["lambda"] = r.lambda;
    j["supersolution"] = {{"min_residual", r.supersolution.min_residual},
                          {"min_v", r.supersolution.min_v},
                          {"min_neg_laplacian", r.supersolution.min_neg_laplacian},
                          {"scale", r.supersolution.scale},
                          {"nodes", r.supersolution.nodes}};
    j["supersolution_holds"] = r.supersolution_holds;
    j["f_conditions"] = conditions_json(r.f_conditions);
    j["f_conditions_hold"] = r.f_conditions_hold;
    j["inequality_asserted"] = r.inequality_asserted;
    j["count"] = r.count;
    j["scale"] = r.scale;
    j["min_margin"] = r.min_margin;
    j["min_quotient"] = r.min_quotient;
    j["margins_hold"] = r.margins_hold;
    Json margins = Json::array();
    for (const HardyMargin& m : r.margins) {
        margins.push_back({{"label", m.label},
                           {"laplacian_energy", m.laplacian_energy},
                           {"weighted_mass", m.weighted_mass},
                           {"margin", m.margin}});
    }
    j["margins"] = std::move(margins);
    j["notes"] = strings_json(r.notes);

    const SupersolutionCheck& s = r.supersolution;
    out.checks.at_least("supersolution", s.min_residual / s.scale, -o.tolerance, false);
    out.checks.add("f_conditions", r.f_conditions_hold ? 1.0 : 0.0, "==", 1.0, r.f_conditions_hold, false);
    out.checks.at_least("min_margin", r.min_margin / r.scale, -o.tolerance, r.inequality_asserted);

    if (want_csv) out.csv.push_back(csv("v.csv", v));
    return out;
}

Outcome run_stability(const RunConfig& cfg, bool want_csv) {
    const GridPtr grid = grid_of(cfg);
    const double delta = cfg.resolved["delta"].get<double>();
    const double eps = cfg.resolved["eps"].get<double>();
    const double tol = cfg.resolved["tol"].get<double>();
    const Nonlinearity f1 = nonlinearity(cfg, "f1", Var::s);
    const bool manufactured = cfg.resolved["a"].is_null();
    const MemsProblem p = manufactured ? manufacture(grid, delta, expression(cfg, "u"), f1, eps)
                                       : MemsProblem(grid, delta, sample(expression(cfg, "a"), grid), f1,
                                                     sample(expression(cfg, "u"), grid), false, eps);
    StabilityOptions o;
    o.bumps = cfg.resolved["bumps"].get<std::size_t>();
    o.seed = cfg.resolved["seed"].get<std::uint64_t>();
    o.eigen.tol = tol;
    o.eigen.seed = o.seed;
    const StabilityReport r = stability_report(p, o);

    Outcome out;
    Json& j = out.results;
    j["manufactured"] = manufactured;
    j["h"] = grid->h();
    j["energy_u"] = energy(p, p.u());
    j["lambda1"] = r.lambda1;
    j["lambda1_rayleigh"] = r.lambda1_rayleigh;
    j["lambda1_residual"] = r.lambda1_residual;
    j["scale"] = r.scale;
    j["stable"] = r.stable;
    j["h1_margin"] = r.h1_margin;
    j["h1_holds"] = r.h1_holds;
    j["side_condition_min"] = r.side_condition_min;
    j["side_condition_violations"] = r.side_condition_violations;
    j["side_condition_holds"] = r.side_condition_holds;
    j["theorem_applicable"] = r.theorem_applicable;
    j["bump_count"] = r.bumps.size();
    j["min_bump_quotient"] = r.min_bump_quotient;
    j["min_bump_form"] = r.min_bump_form;
    j["max_form_disagreement"] = r.max_form_disagreement;
    j["max_identity_residual"] = r.max_identity_residual;
    j["max_identity_relative"] = r.max_identity_relative;
    j["strong_residual"] = {{"max_scaled", r.strong.max_scaled}, {"floored_nodes", r.strong.floored_nodes}};
    j["notes"] = strings_json(r.notes);

    out.checks.at_most("strong_residual", r.strong.max_scaled, tol, manufactured);
    out.checks.at_most("form_agreement", r.max_form_disagreement, tol, true);
    out.checks.at_least("h1", r.h1_margin, -o.h1_tol, false);
    out.checks.at_least("side_condition", r.side_condition_min, 0.0, false);
    out.checks.at_least("stable", r.lambda1 / r.scale, -1e-8, r.theorem_applicable);

    if (want_csv) {
        out.csv.push_back(csv("u.csv", p.u()));
        out.csv.push_back(csv("a.csv", p.a()));
        out.csv.push_back(csv("c.csv", linearized_potential(p)));
    }
    return out;
}

Outcome run_morse(const RunConfig& cfg, bool) {
    const GridPtr grid = grid_of(cfg);
    const GridFunction a = sample(expression(cfg, "a"), grid);
    const Nonlinearity g = nonlinearity(cfg, "G", Var::y);
    MorseOptions o;
    o.eigen = eigen_options(cfg);
    o.y_max = cfg.resolved["y_max"].get<double>();
    const MorseResult r = morse_index(grid, a, g, o);

    Outcome out;
    Json& j = out.results;
    j["index"] = r.index;
    j["saturated"] = r.saturated;
    j["eigenvalues"] = r.eigenvalues;
    j["scale"] = r.scale;
    j["threshold"] = r.threshold;
    j["g_prime_zero"] = r.g_prime_zero;
    j["h_check"] = condition_json(r.h_check);
    j["h_holds"] = r.h_holds;

    // The statement concerns a positive solution v of Δ²v = a G(v); without v it is not asserted.
    bool solution_positive = false;
    if (!cfg.resolved["v"].is_null()) {
        const GridFunction v = sample(expression(cfg, "v"), grid);
        const GridFunction llv = neg_laplacian_apply(neg_laplacian_apply(v));
        double min_v = std::numeric_limits<double>::infinity();
        double worst = 0.0;
        for (std::size_t node : grid->interior_nodes()) {
            min_v = std::min(min_v, v[node]);
            if (!grid->deep_interior(node % grid->nx(), node / grid->nx())) continue;
            const double rhs = a[node] * g.value(v[node]);
            worst = std::max(worst, std::abs(llv[node] - rhs) / std::max({std::abs(llv[node]), std::abs(rhs), 1.0}));
        }
        solution_positive = min_v > 0.0;
        j["solution"] = {{"min_v", min_v}, {"max_scaled_residual", worst}};
    } else {
        j["solution"] = nullptr;
    }

    out.checks.add("h_check", r.h_check.worst_margin, ">=", -o.tol, r.h_holds, false);
    out.checks.add("morse_index_zero", static_cast<double>(r.index), "==", 0.0, r.index == 0 && !r.saturated,
                   r.h_holds && solution_positive);
    return out;
}

Outcome run_monotonicity(const RunConfig& cfg, bool) {
    const DomainSpec outer = domain_of(cfg.resolved["domain"], "domain");
    const DomainSpec inner = domain_of(cfg.resolved["inner"], "inner");
    EigenOptions o = eigen_options(cfg);
    o.k = 1;
    const MonotonicityResult r =
        domain_monotonicity(outer, inner, expression(cfg, "a"), cfg.resolved["h"].get<double>(), o);

    Outcome out;
    Json& j = out.results;
    j["h"] = r.h;
    j["lambda_outer"] = r.lambda_outer;
    j["lambda_inner"] = r.lambda_inner;
    j["margin"] = r.margin;
    j["strict"] = r.strict;
    j["outer_unknowns"] = r.outer_unknowns;
    j["inner_unknowns"] = r.inner_unknowns;
    j["notes"] = strings_json(r.notes);

    out.checks.add("strict_monotonicity", r.lambda_inner / r.lambda_outer - 1.0, ">", r.margin, r.strict, true);
    return out;
}

Json versions() {
    Json v;
    v["biharm"] = BIHARM_VERSION;
    v["backend"] = backend_version();
    v["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    v["compiler"] = __VERSION__;
    return v;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string render(const RunConfig& cfg, Json results, Json checks, const ExecuteOptions& options) {
    Json report;
    report["config"] = cfg.resolved;
    report["results"] = std::move(results);
    report["checks"] = std::move(checks);
    report["versions"] = versions();
    if (options.timestamp) report["timestamp"] = utc_now();
    return report.dump(2) + "\n";
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view command) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("invalid JSON: the configuration must be an object");

    RunConfig cfg;
    cfg.command = std::string(command);
    if (doc.contains("command")) {
        if (!doc["command"].is_string()) invalid("command", "expected a string");
        const std::string named = doc["command"].get<std::string>();
        if (cfg.command.empty()) cfg.command = named;
        if (named != cfg.command) {
            throw ConfigError("command '" + cfg.command + "' does not match config command '" + named + "'");
        }
    }
    if (cfg.command.empty()) throw ConfigError("missing key 'command'");
    const std::vector<Key> keys = schema(cfg.command);

    for (const auto& item : doc.items()) {
        if (item.key() == "command") continue;
        if (std::none_of(keys.begin(), keys.end(), [&](const Key& k) { return item.key() == k.name; })) {
            throw ConfigError("unknown key '" + item.key() + "' for command '" + cfg.command + "'");
        }
    }

    cfg.resolved["command"] = cfg.command;
    for (const Key& k : keys) {
        const std::string name = k.name;
        if (!doc.contains(name) || doc[name].is_null()) {
            if (k.required) throw ConfigError("missing key '" + name + "' for command '" + cfg.command + "'");
            cfg.resolved[name] = k.fallback;
            if (k.fallback.is_string() && (k.type == KeyType::fn_y || k.type == KeyType::field)) {
                cfg.expressions.emplace(name, expr::parse(k.fallback.get<std::string>()));
            }
            continue;
        }
        const Json& j = doc[name];
        switch (k.type) {
        case KeyType::domain:
            cfg.resolved[name] = domain_json(domain_of(j, name));
            break;
        case KeyType::nodes: {
            const std::uint64_t n = integer_of(j, name);
            if (n < 9) invalid(name, "n must be at least 9");
            cfg.resolved[name] = n;
            break;
        }
        case KeyType::count: {
            const std::uint64_t n = integer_of(j, name);
            if (n < 1) invalid(name, "must be at least 1");
            cfg.resolved[name] = n;
            break;
        }
        case KeyType::bumps:
        case KeyType::seed:
            cfg.resolved[name] = integer_of(j, name);
            break;
        case KeyType::positive: {
            const double x = real_of(j, name);
            if (!(x > 0.0)) invalid(name, "must be positive");
            cfg.resolved[name] = x;
            break;
        }
        case KeyType::nonneg: {
            const double x = real_of(j, name);
            if (!(x >= 0.0)) invalid(name, "must be nonnegative");
            cfg.resolved[name] = x;
            break;
        }
        case KeyType::field:
            cfg.expressions.emplace(name, expression_of(j, name, {Var::x, Var::y}));
            cfg.resolved[name] = j;
            break;
        case KeyType::fn_y:
            cfg.expressions.emplace(name, expression_of(j, name, {Var::y}));
            cfg.resolved[name] = j;
            break;
        case KeyType::fn_s:
            cfg.expressions.emplace(name, expression_of(j, name, {Var::x, Var::y, Var::s}));
            cfg.resolved[name] = j;
            break;
        case KeyType::mode:
            if (!j.is_string() || (j != "expanded" && j != "direct")) {
                invalid(name, "expected \"expanded\" or \"direct\"");
            }
            cfg.resolved[name] = j;
            break;
        }
    }

    if (cfg.command == "monotonicity") {
        try {
            const std::size_t n = nodes_for_spacing(domain_of(cfg.resolved["domain"], "domain"),
                                                    cfg.resolved["h"].get<double>());
            if (n < 9) invalid("h", "the outer domain must carry at least 9 nodes along x");
        } catch (const GeometryError& e) {
            invalid("h", e.what());
        }
    }
    return cfg;
}

RunResult execute(const RunConfig& config, const ExecuteOptions& options) {
    RunResult result;
    auto failure = [&](int code, const std::string& message, bool with_report) {
        result.exit_code = code;
        result.message = message;
        if (with_report) {
            Json results;
            results["error"] = message;
            result.report = render(config, std::move(results), Json::array(), options);
        }
        return result;
    };
    try {
        Outcome out;
        const std::string& c = config.command;
        if (c == "eig") out = run_eig(config, options.csv);
        else if (c == "picone") out = run_picone(config, options.csv);
        else if (c == "hardy") out = run_hardy(config, options.csv);
        else if (c == "stability") out = run_stability(config, options.csv);
        else if (c == "morse") out = run_morse(config, options.csv);
        else if (c == "monotonicity") out = run_monotonicity(config, options.csv);
        else throw ConfigError("unknown command '" + c + "'");

        result.exit_code = out.checks.failed ? exit_check_failed : exit_ok;
        if (out.checks.failed) result.message = "an asserted check failed";
        result.report = render(config, std::move(out.results), std::move(out.checks.list), options);
        result.csv = std::move(out.csv);
        return result;
    } catch (const ConfigError& e) {
        return failure(exit_config, e.what(), false);
    } catch (const PreconditionError& e) {
        return failure(exit_check_failed, e.what(), true);
    } catch (const ConvergenceError& e) {
        return failure(exit_no_convergence, e.what(), true);
    } catch (const GeometryError& e) {
        return failure(exit_config, std::string("invalid configuration: ") + e.what(), false);
    } catch (const UnsupportedDomainError& e) {
        return failure(exit_config, std::string("invalid configuration: ") + e.what(), false);
    } catch (const EvalError& e) {
        return failure(exit_config, std::string("invalid configuration: ") + e.what(), false);
    } catch (const std::exception& e) {
        return failure(exit_internal, std::string("internal error: ") + e.what(), false);
    }
}

RunResult run(std::string_view text, std::string_view command, const ExecuteOptions& options) {
    RunConfig cfg;
    try {
        cfg = parse_config(text, command);
    } catch (const ConfigError& e) {
        RunResult r;
        r.exit_code = exit_config;
        r.message = e.what();
        return r;
    }
    return execute(cfg, options);
}

}  // namespace biharm::cli
