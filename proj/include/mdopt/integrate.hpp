#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "objective.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "region.hpp"

namespace mdopt {

struct GridSpec {
    std::vector<std::size_t> resolution;
};

struct MonteCarloSpec {
    std::size_t n = 100000;
    std::uint64_t seed = 0;
};

struct IntegratorConfig {
    std::variant<GridSpec, MonteCarloSpec> kind = GridSpec{{1024}};
    // Grid only: level L uses `resolution`, level L-1 half of it, and so on.
    std::size_t refinement_levels = 2;

    static IntegratorConfig grid(std::vector<std::size_t> resolution, std::size_t levels = 2) {
        return {GridSpec{std::move(resolution)}, levels};
    }
    static IntegratorConfig grid(std::size_t dim, std::size_t per_axis, std::size_t levels = 2) {
        return grid(std::vector<std::size_t>(dim, per_axis), levels);
    }
    static IntegratorConfig monte_carlo(std::size_t n, std::uint64_t seed) {
        return {MonteCarloSpec{n, seed}, 1};
    }
    // Grid for dim <= 3 (1024, 256^2, 64^3), Monte Carlo above.
    static IntegratorConfig default_for(std::size_t dim) {
        switch (dim) {
            case 1: return grid(1, 1024);
            case 2: return grid(2, 256);
            case 3: return grid(3, 64);
            default: return monte_carlo(200000, 0);
        }
    }

    bool is_grid() const noexcept { return std::holds_alternative<GridSpec>(kind); }

    void validate(std::size_t dim) const {
        if (refinement_levels < 1) throw InputError("integrator: refinement_levels must be >= 1");
        if (const auto* g = std::get_if<GridSpec>(&kind)) {
            if (g->resolution.size() != dim)
                throw InputError("integrator: grid resolution needs " + std::to_string(dim) +
                                 " entries");
            for (std::size_t r : g->resolution)
                if (r < 2) throw InputError("integrator: grid resolution must be >= 2 per axis");
        } else {
            if (std::get<MonteCarloSpec>(kind).n < 100)
                throw InputError("integrator: Monte Carlo needs n >= 100");
        }
    }
};

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

struct LogEstimate {
    double log_value = 0.0;
    double error = 0.0;  // absolute error of log_value
};

// Equal-weight node set: cell centers of a grid level, or the members of a
// box-uniform Monte Carlo sample (draws counts rejected candidates too).
struct QuadratureRule {
    std::size_t dim = 1;
    double weight = 0.0;
    std::size_t draws = 0;
    std::shared_ptr<const GridMesh> mesh;
    std::vector<double> sample_coords;

    bool is_monte_carlo() const noexcept { return mesh == nullptr; }
    std::span<const double> coordinates() const noexcept {
        return mesh ? mesh->coordinates() : std::span<const double>(sample_coords);
    }
    std::size_t size() const noexcept { return coordinates().size() / dim; }
    std::span<const double> node(std::size_t i) const { return coordinates().subspan(i * dim, dim); }
    double total_weight() const noexcept {
        return is_monte_carlo() ? weight * static_cast<double>(draws)
                                : weight * static_cast<double>(size());
    }
};

// Rules ordered coarse to fine; the last one carries the reported value.
inline std::vector<QuadratureRule> make_rules(const CompactRegion& region,
                                              const IntegratorConfig& cfg) {
    cfg.validate(region.dim());
    std::vector<QuadratureRule> rules;
    if (const auto* g = std::get_if<GridSpec>(&cfg.kind)) {
        for (std::size_t level = cfg.refinement_levels; level-- > 0;) {
            std::vector<std::size_t> res(g->resolution);
            for (auto& r : res) r = std::max<std::size_t>(2, r >> level);
            QuadratureRule rule;
            rule.dim = region.dim();
            rule.mesh = std::make_shared<const GridMesh>(region, std::move(res));
            rule.weight = rule.mesh->cell_volume();
            rules.push_back(std::move(rule));
        }
        return rules;
    }
    const auto& mc = std::get<MonteCarloSpec>(cfg.kind);
    const std::size_t d = region.dim();
    std::vector<double> coords(mc.n * d);
    std::vector<std::uint8_t> ok(mc.n, 0);
    parallel_for(mc.n, [&](std::size_t i) {
        std::span<double> x(coords.data() + i * d, d);
        box_candidate(region, mc.seed, i, x);
        ok[i] = region.satisfies_constraints(x) ? 1 : 0;
    });
    QuadratureRule rule;
    rule.dim = d;
    rule.draws = mc.n;
    rule.weight = region.box_volume() / static_cast<double>(mc.n);
    for (std::size_t i = 0; i < mc.n; ++i)
        if (ok[i])
            rule.sample_coords.insert(rule.sample_coords.end(),
                                      coords.begin() + static_cast<std::ptrdiff_t>(i * d),
                                      coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    if (rule.sample_coords.empty())
        throw EmptyRegionError("integrator: no Monte Carlo sample lies inside the region");
    rules.push_back(std::move(rule));
    return rules;
}

namespace detail {

inline void require_finite(std::span<const double> values, const QuadratureRule& rule,
                           bool allow_neg_inf) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (std::isfinite(v) || (allow_neg_inf && v == -std::numeric_limits<double>::infinity()))
            continue;
        const auto x = rule.node(i);
        throw EvaluationError("integrand is not finite at " + format_point(x),
                              Point(x.begin(), x.end()));
    }
}

// 3 x standard error of the mean of y_i = total_weight * v_i over all draws,
// where rejected draws contribute zero.
inline double mc_error(std::span<const double> values, const QuadratureRule& rule) {
    const double n = static_cast<double>(rule.draws);
    const double scale = rule.total_weight();
    const double mean = scale * pairwise_sum(values) / n;
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = scale * values[i] - mean;
        dev[i] = d * d;
    }
    const double ss = pairwise_sum(dev) + (n - static_cast<double>(values.size())) * mean * mean;
    return 3.0 * std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace detail

// log(sum_i exp(l_i)) with a max shift. Returns -inf when every term is -inf.
inline double log_sum_exp(std::span<const double> logs) {
    if (logs.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(logs.begin(), logs.end());
    if (m == -std::numeric_limits<double>::infinity()) return m;
    std::vector<double> t(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) t[i] = std::exp(logs[i] - m);
    return m + std::log(pairwise_sum(t));
}

template <class Integrand>
std::vector<double> evaluate_on_rule(const QuadratureRule& rule, Integrand&& integrand) {
    std::vector<double> v(rule.size());
    parallel_for(v.size(), [&](std::size_t i) { v[i] = integrand(rule.node(i)); });
    return v;
}

// Grid: cell_volume * pairwise sum at each level; error = |finest - next|.
// Monte Carlo: box volume * member-filtered mean; error = 3 standard errors.
template <class Integrand>
Estimate integrate(const CompactRegion& region, Integrand&& integrand, const IntegratorConfig& cfg) {
    const auto rules = make_rules(region, cfg);
    std::vector<double> level_values;
    Estimate est;
    for (const auto& rule : rules) {
        const auto v = evaluate_on_rule(rule, integrand);
        detail::require_finite(v, rule, false);
        level_values.push_back(rule.weight * pairwise_sum(v));
        if (rule.is_monte_carlo()) est.error = detail::mc_error(v, rule);
    }
    est.value = level_values.back();
    if (cfg.is_grid() && level_values.size() > 1)
        est.error = std::abs(level_values.back() - level_values[level_values.size() - 2]);
    return est;
}

// log of the integral of exp(log_integrand), never forming exp(log_integrand)
// directly.
template <class LogIntegrand>
LogEstimate log_integrate_exp(const CompactRegion& region, LogIntegrand&& log_integrand,
                              const IntegratorConfig& cfg) {
    const auto rules = make_rules(region, cfg);
    std::vector<double> level_logs;
    LogEstimate est;
    for (const auto& rule : rules) {
        const auto l = evaluate_on_rule(rule, log_integrand);
        detail::require_finite(l, rule, true);
        const double lse = log_sum_exp(l);
        if (lse == -std::numeric_limits<double>::infinity())
            throw DegenerateIntegrandError("log_integrate_exp: integrand is zero on every node");
        level_logs.push_back(lse + std::log(rule.weight));
        if (rule.is_monte_carlo()) {
            std::vector<double> scaled(l.size());
            for (std::size_t i = 0; i < l.size(); ++i) scaled[i] = std::exp(l[i] - lse);
            // relative error of the sum, carried into log space
            est.error = detail::mc_error(scaled, rule) / rule.total_weight() *
                        static_cast<double>(rule.draws);
        }
    }
    est.log_value = level_logs.back();
    if (cfg.is_grid() && level_logs.size() > 1)
        est.error = std::abs(level_logs.back() - level_logs[level_logs.size() - 2]);
    return est;
}

// Lebesgue measure of the region: exact box volume without constraints,
// otherwise box volume times the member fraction.
inline MeasureEstimate measure(const CompactRegion& region, const IntegratorConfig& cfg) {
    if (!region.has_constraints()) return {region.box_volume(), 0.0};
    const auto e = integrate(region, [](std::span<const double>) { return 1.0; }, cfg);
    return {e.value, e.error};
}

}  // namespace mdopt
