#pragma once

// Reference values computed independently of the library: brute-force
// minimization, dense midpoint quadrature in long double, and central
// differences. Nothing here calls into mdopt.

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

using Fn1 = std::function<double(double)>;

inline double paper1d(double x) { return std::cos(x * x) + x / 5.0 + 1.0; }
inline double stability1d(double x) { return std::cos(0.5 * x * x) + 1.0; }
inline double doublewell(double x) { return (x * x - 1.0) * (x * x - 1.0); }

// Golden-section search on [a, b] for a unimodal stretch.
inline std::pair<double, double> golden(const Fn1& f, double a, double b) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - r * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + r * (b - a); fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

// Global minimum on [lo, hi]: scan n+1 equispaced points (endpoints
// included), then refine around the best one.
inline std::pair<double, double> minimize_1d(const Fn1& f, double lo, double hi, std::size_t n = 1000000) {
    const double h = (hi - lo) / static_cast<double>(n);
    std::size_t best = 0;
    double fb = f(lo);
    for (std::size_t i = 1; i <= n; ++i) {
        const double v = f(lo + h * static_cast<double>(i));
        if (v < fb) { fb = v; best = i; }
    }
    const double a = std::max(lo, lo + h * (static_cast<double>(best) - 1.0));
    const double b = std::min(hi, lo + h * (static_cast<double>(best) + 1.0));
    auto r = golden(f, a, b);
    if (fb < r.second) return {lo + h * static_cast<double>(best), fb};
    return r;
}

// Grid-local minima of f on [lo, hi] (interior, strict against both
// neighbours), refined by golden section.
inline std::vector<double> local_minimizers_1d(const Fn1& f, double lo, double hi, std::size_t n = 200000) {
    const double h = (hi - lo) / static_cast<double>(n);
    std::vector<double> out;
    for (std::size_t i = 1; i < n; ++i) {
        const double x = lo + h * static_cast<double>(i);
        if (f(x) < f(x - h) && f(x) < f(x + h)) out.push_back(golden(f, x - h, x + h).first);
    }
    return out;
}

inline double second_derivative(const Fn1& f, double x, double h = 1e-4) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

struct MinResult {
    std::vector<double> x;
    double f;
};

// paper1d: min of cos(x^2) + x/5 + 1 on [0, 5].
inline MinResult paper1d_min() {
    const auto [x, f] = minimize_1d(paper1d, 0.0, 5.0);
    return {{x}, f};
}

// paper2d is cos(x1^2) + cos(x2^2) + (x1 + x2)/5 + 2 on [0, 3.5]^2. Scan a
// 2000^2 grid, then polish with alternating golden-section line searches.
inline MinResult paper2d_min() {
    auto f = [](double a, double b) {
        return std::cos(a * a) + std::cos(b * b) + a / 5.0 + b / 5.0 + 2.0;
    };
    const std::size_t n = 2000;
    const double h = 3.5 / static_cast<double>(n);
    double bx = 0, by = 0, fb = f(0, 0);
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= n; ++j) {
            const double a = h * static_cast<double>(i), b = h * static_cast<double>(j);
            const double v = f(a, b);
            if (v < fb) { fb = v; bx = a; by = b; }
        }
    for (int sweep = 0; sweep < 20; ++sweep) {
        bx = golden([&](double t) { return f(t, by); }, std::max(0.0, bx - h), std::min(3.5, bx + h)).first;
        by = golden([&](double t) { return f(bx, t); }, std::max(0.0, by - h), std::min(3.5, by + h)).first;
    }
    return {{bx, by}, std::min(fb, f(bx, by))};
}

// E(g) under the density proportional to w(x) on [lo, hi], by the midpoint
// rule with n cells in long double.
inline double expectation_1d(const Fn1& g, const Fn1& log_w, double lo, double hi, std::size_t n) {
    const long double h = (static_cast<long double>(hi) - lo) / n;
    long double shift = -INFINITY;
    std::vector<long double> lw(n);
    for (std::size_t i = 0; i < n; ++i) {
        lw[i] = log_w(static_cast<double>(lo + (i + 0.5L) * h));
        shift = std::max(shift, lw[i]);
    }
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double x = lo + (i + 0.5L) * h;
        const long double w = std::exp(lw[i] - shift);
        num += w * g(static_cast<double>(x));
        den += w;
    }
    return static_cast<double>(num / den);
}

}  // namespace oracle
