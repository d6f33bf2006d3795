#pragma once

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "objective.hpp"
#include "region.hpp"

namespace mdopt {

struct CatalogEntry {
    Objective objective;
    CompactRegion region;
    std::string description;
};

namespace catalog_detail {

inline CompactRegion box(std::size_t n, double lo, double hi) {
    return CompactRegion(std::vector<double>(n, lo), std::vector<double>(n, hi));
}

inline CatalogEntry paper1d() {
    Objective f;
    f.name = "paper1d";
    f.dim = 1;
    f.eval = [](std::span<const double> x) { return std::cos(x[0] * x[0]) + x[0] / 5.0 + 1.0; };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        g[0] = -2.0 * x[0] * std::sin(x[0] * x[0]) + 0.2;
    };
    return {f, box(1, 0.0, 5.0), "cos(x^2) + x/5 + 1 on [0,5]"};
}

inline CatalogEntry paper2d() {
    Objective f;
    f.name = "paper2d";
    f.dim = 2;
    f.eval = [](std::span<const double> x) {
        return std::cos(x[0] * x[0]) + std::cos(x[1] * x[1]) + x[0] / 5.0 + x[1] / 5.0 + 2.0;
    };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        g[0] = -2.0 * x[0] * std::sin(x[0] * x[0]) + 0.2;
        g[1] = -2.0 * x[1] * std::sin(x[1] * x[1]) + 0.2;
    };
    return {f, box(2, 0.0, 3.5), "cos(x1^2) + cos(x2^2) + x1/5 + x2/5 + 2 on [0,3.5]^2"};
}

inline CatalogEntry stability1d() {
    Objective f;
    f.name = "stability1d";
    f.dim = 1;
    f.eval = [](std::span<const double> x) { return std::cos(0.5 * x[0] * x[0]) + 1.0; };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        g[0] = -x[0] * std::sin(0.5 * x[0] * x[0]);
    };
    return {f, box(1, 0.0, 5.0), "cos(x^2/2) + 1 on [0,5]; two global minimizers"};
}

inline CatalogEntry stability2d() {
    Objective f;
    f.name = "stability2d";
    f.dim = 2;
    f.eval = [](std::span<const double> x) {
        return std::cos(x[0] * x[0]) + std::cos(x[1] * x[1]) + 2.0;
    };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        g[0] = -2.0 * x[0] * std::sin(x[0] * x[0]);
        g[1] = -2.0 * x[1] * std::sin(x[1] * x[1]);
    };
    return {f, box(2, 0.0, 3.5), "cos(x1^2) + cos(x2^2) + 2 on [0,3.5]^2"};
}

inline CatalogEntry constant(double c, std::string name) {
    Objective f;
    f.name = std::move(name);
    f.dim = 1;
    f.eval = [c](std::span<const double>) { return c; };
    f.grad = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
    return {f, box(1, 0.0, 1.0), "constant on [0,1]"};
}

inline CatalogEntry quadratic(std::size_t n, std::string name) {
    Objective f;
    f.name = std::move(name);
    f.dim = n;
    f.eval = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        for (std::size_t j = 0; j < x.size(); ++j) g[j] = 2.0 * x[j];
    };
    return {f, box(n, -0.5, 1.0), "||x||^2 on [-0.5,1]^n"};
}

inline CatalogEntry doublewell() {
    Objective f;
    f.name = "doublewell";
    f.dim = 1;
    f.eval = [](std::span<const double> x) {
        const double u = x[0] * x[0] - 1.0;
        return u * u;
    };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
    };
    return {f, box(1, -2.0, 2.0), "(x^2 - 1)^2 on [-2,2]; symmetric minimizers at +-1"};
}

inline CatalogEntry rastrigin() {
    using std::numbers::pi;
    Objective f;
    f.name = "rastrigin";
    f.dim = 2;
    f.eval = [](std::span<const double> x) {
        double s = 10.0 * static_cast<double>(x.size());
        for (double v : x) s += v * v - 10.0 * std::cos(2.0 * pi * v);
        return s;
    };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        for (std::size_t j = 0; j < x.size(); ++j)
            g[j] = 2.0 * x[j] + 20.0 * pi * std::sin(2.0 * pi * x[j]);
    };
    return {f, box(2, -5.12, 5.12), "Rastrigin on [-5.12,5.12]^2"};
}

// No analytic gradient: exercises the finite-difference path.
inline CatalogEntry ackley() {
    using std::numbers::pi;
    Objective f;
    f.name = "ackley";
    f.dim = 2;
    f.eval = [](std::span<const double> x) {
        const double n = static_cast<double>(x.size());
        double sq = 0.0, cs = 0.0;
        for (double v : x) {
            sq += v * v;
            cs += std::cos(2.0 * pi * v);
        }
        return -20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) + 20.0 +
               std::numbers::e;
    };
    return {f, box(2, -5.0, 5.0), "Ackley on [-5,5]^2"};
}

inline CatalogEntry himmelblau() {
    Objective f;
    f.name = "himmelblau";
    f.dim = 2;
    f.eval = [](std::span<const double> x) {
        const double a = x[0] * x[0] + x[1] - 11.0;
        const double b = x[0] + x[1] * x[1] - 7.0;
        return a * a + b * b;
    };
    f.grad = [](std::span<const double> x, std::span<double> g) {
        const double a = x[0] * x[0] + x[1] - 11.0;
        const double b = x[0] + x[1] * x[1] - 7.0;
        g[0] = 4.0 * a * x[0] + 2.0 * b;
        g[1] = 2.0 * a + 4.0 * b * x[1];
    };
    return {f, box(2, -5.0, 5.0), "Himmelblau on [-5,5]^2; four global minimizers"};
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && std::isfinite(out);
}

inline bool parse_size(std::string_view s, std::size_t& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

}  // namespace catalog_detail

// Names listed by `catalog`. "const<c>" and "quadratic<n>" are families.
inline std::vector<std::string> catalog_names() {
    return {"paper1d", "paper2d", "stability1d", "stability2d", "const3", "quadratic",
            "doublewell", "rastrigin", "ackley", "himmelblau"};
}

inline CatalogEntry catalog_get(std::string_view name) {
    namespace cd = catalog_detail;
    if (name == "paper1d") return cd::paper1d();
    if (name == "paper2d") return cd::paper2d();
    if (name == "stability1d") return cd::stability1d();
    if (name == "stability2d") return cd::stability2d();
    if (name == "doublewell") return cd::doublewell();
    if (name == "rastrigin") return cd::rastrigin();
    if (name == "ackley") return cd::ackley();
    if (name == "himmelblau") return cd::himmelblau();
    if (name == "quadratic") return cd::quadratic(2, "quadratic");
    if (name.starts_with("quadratic")) {
        std::size_t n = 0;
        if (cd::parse_size(name.substr(9), n) && n >= 1 && n <= 16)
            return cd::quadratic(n, std::string(name));
    }
    if (name.starts_with("const")) {
        double c = 0.0;
        if (cd::parse_double(name.substr(5), c)) return cd::constant(c, std::string(name));
    }
    throw LookupError("unknown catalog function '" + std::string(name) + "'");
}

// Constraints referenced by name from configuration. Each is built for a
// particular bounding box.
inline Constraint constraint_get(std::string_view name, const std::vector<double>& lower,
                                 const std::vector<double>& upper) {
    if (name == "disk") {
        // Inscribed ball (ellipsoid for non-square boxes).
        std::vector<double> center(lower.size()), half(lower.size());
        for (std::size_t j = 0; j < lower.size(); ++j) {
            center[j] = 0.5 * (lower[j] + upper[j]);
            half[j] = 0.5 * (upper[j] - lower[j]);
        }
        return {"disk", [center, half](std::span<const double> x) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        const double u = (x[j] - center[j]) / half[j];
                        s += u * u;
                    }
                    return 1.0 - s;
                }};
    }
    if (name == "simplex") {
        return {"simplex", [lower, upper](std::span<const double> x) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < x.size(); ++j)
                        s += (x[j] - lower[j]) / (upper[j] - lower[j]);
                    return 1.0 - s;
                }};
    }
    throw LookupError("unknown constraint '" + std::string(name) + "'");
}

inline std::vector<std::string> constraint_names() { return {"disk", "simplex"}; }

}  // namespace mdopt
