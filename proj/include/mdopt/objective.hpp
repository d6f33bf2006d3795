#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "region.hpp"

namespace mdopt {

using GradientField = std::function<void(std::span<const double>, std::span<double>)>;

// Scalar target f. `grad` is optional; gradient() falls back to central
// differences without it. Oracle fields are for tests and diagnostics only.
struct Objective {
    std::string name;
    std::size_t dim = 1;
    ScalarField eval;
    GradientField grad;
    std::optional<double> oracle_fstar;
    std::vector<Point> oracle_minimizers;

    double operator()(std::span<const double> x) const { return eval(x); }
    bool has_gradient() const noexcept { return static_cast<bool>(grad); }
};

namespace detail {
inline std::string format_point(std::span<const double> x) {
    std::string s = "(";
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (j) s += ", ";
        s += std::to_string(x[j]);
    }
    return s + ")";
}

inline double checked_eval(const Objective& obj, std::span<const double> x) {
    const double v = obj.eval(x);
    if (!std::isfinite(v))
        throw EvaluationError("objective '" + obj.name + "' is not finite at " + format_point(x),
                              Point(x.begin(), x.end()));
    return v;
}
}  // namespace detail

inline std::vector<double> evaluate_batch(const Objective& obj, const std::vector<Point>& xs) {
    for (const auto& x : xs)
        if (x.size() != obj.dim)
            throw InputError("evaluate_batch: point of dimension " + std::to_string(x.size()) +
                             " for objective of dimension " + std::to_string(obj.dim));
    std::vector<double> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = detail::checked_eval(obj, xs[i]); });
    return out;
}

// Evaluates f on `count` points stored contiguously (row per point).
inline std::vector<double> evaluate_flat(const Objective& obj, std::span<const double> coords) {
    const std::size_t d = obj.dim;
    const std::size_t count = coords.size() / d;
    std::vector<double> out(count);
    parallel_for(count, [&](std::size_t i) {
        out[i] = detail::checked_eval(obj, coords.subspan(i * d, d));
    });
    return out;
}

inline double default_fd_step(double xj) {
    return std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(xj));
}

// Central differences. Every stencil point must be a member of `region`.
inline Point central_difference(const Objective& obj, std::span<const double> x,
                                const CompactRegion& region, std::optional<double> h = {}) {
    if (x.size() != obj.dim) throw InputError("gradient: dimension mismatch");
    Point g(obj.dim);
    Point probe(x.begin(), x.end());
    for (std::size_t j = 0; j < obj.dim; ++j) {
        const double step = h ? *h : default_fd_step(x[j]);
        if (!(step > 0.0)) throw InputError("gradient: step must be positive");
        probe[j] = x[j] + step;
        const bool up_ok = region.contains_unchecked(probe);
        const double fp = up_ok ? detail::checked_eval(obj, probe) : 0.0;
        probe[j] = x[j] - step;
        const bool down_ok = region.contains_unchecked(probe);
        const double fm = down_ok ? detail::checked_eval(obj, probe) : 0.0;
        probe[j] = x[j];
        if (!up_ok || !down_ok)
            throw StencilError("gradient: point " + detail::format_point(x) +
                               " is within one step of the region boundary on axis " +
                               std::to_string(j));
        g[j] = (fp - fm) / (2.0 * step);
    }
    return g;
}

// Analytic gradient when the objective has one, otherwise central differences.
inline Point gradient(const Objective& obj, std::span<const double> x, const CompactRegion& region,
                      std::optional<double> h = {}) {
    if (x.size() != obj.dim) throw InputError("gradient: dimension mismatch");
    if (obj.has_gradient()) {
        Point g(obj.dim);
        obj.grad(x, g);
        return g;
    }
    return central_difference(obj, x, region, h);
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace mdopt
