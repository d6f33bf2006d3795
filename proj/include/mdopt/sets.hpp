#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "nmd.hpp"
#include "objective.hpp"
#include "parallel.hpp"
#include "region.hpp"

namespace mdopt {

// Df: f(x) <= E(f). Dtau: tau(x) >= E(tau). D0: m^(k)(x) >= 1/mu(Omega).
enum class SetKind { Df, Dtau, D0 };

inline const char* to_string(SetKind k) {
    switch (k) {
        case SetKind::Df: return "Df";
        case SetKind::Dtau: return "Dtau";
        case SetKind::D0: return "D0";
    }
    return "?";
}

// Mask over the nodes of a shared mesh. Ties with the threshold are members.
struct SignificantSet {
    SetKind kind = SetKind::Df;
    double k = 0.0;
    std::shared_ptr<const GridMesh> mesh;
    std::vector<std::uint8_t> mask;
    double measure = 0.0;
    double threshold = 0.0;
    double threshold_error = 0.0;

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    }
};

inline SignificantSet extract_set(const NascentMD& m, SetKind kind,
                                  std::shared_ptr<const GridMesh> mesh) {
    if (!mesh) throw InputError("extract_set: no mesh");
    if (mesh->dim() != m.region().dim()) throw InputError("extract_set: mesh dimension mismatch");
    const std::size_t n = mesh->size();
    std::vector<double> fv(n), lt(n);
    parallel_for(n, [&](std::size_t i) {
        fv[i] = m.f(mesh->node(i));
        lt[i] = m.log_tau_of_value(fv[i]);
    });

    SignificantSet s;
    s.kind = kind;
    s.k = m.k();
    s.mask.assign(n, 0);
    switch (kind) {
        case SetKind::Df: {
            const auto ef = m.expect_f();
            s.threshold = ef.value;
            s.threshold_error = ef.error;
            for (std::size_t i = 0; i < n; ++i) s.mask[i] = fv[i] <= ef.value;
            break;
        }
        case SetKind::Dtau: {
            const auto le = m.log_expect_tau();
            s.threshold = std::exp(le.log_value);
            s.threshold_error = s.threshold * le.error;
            for (std::size_t i = 0; i < n; ++i) s.mask[i] = lt[i] >= le.log_value;
            break;
        }
        case SetKind::D0: {
            const double log_z = m.level_log_normalizers(m.k()).back();
            const double log_uniform = m.log_uniform_density();
            s.threshold = std::exp(log_uniform);
            s.threshold_error = s.threshold * m.log_normalizer_at(0.0).error;
            for (std::size_t i = 0; i < n; ++i) s.mask[i] = m.k() * lt[i] - log_z >= log_uniform;
            break;
        }
    }
    s.measure = mesh->cell_volume() * static_cast<double>(s.count());
    s.mesh = std::move(mesh);
    return s;
}

// Uses the finest quadrature mesh of m (grid integrators only).
inline SignificantSet extract_set(const NascentMD& m, SetKind kind) {
    const auto& rule = m.finest_rule();
    if (rule.is_monte_carlo())
        throw InputError("extract_set: Monte Carlo integrator has no mesh; pass one explicitly");
    return extract_set(m, kind, rule.mesh);
}

struct ContainmentResult {
    bool contained = true;
    std::size_t violations = 0;
};

// inner is contained in outer iff no node is in inner but not in outer.
inline ContainmentResult containment_check(const SignificantSet& inner, const SignificantSet& outer) {
    if (!inner.mesh || !outer.mesh || !inner.mesh->same_layout(*outer.mesh) ||
        inner.mask.size() != outer.mask.size())
        throw InputError("containment_check: sets live on different meshes");
    ContainmentResult r;
    for (std::size_t i = 0; i < inner.mask.size(); ++i)
        if (inner.mask[i] && !outer.mask[i]) ++r.violations;
    r.contained = r.violations == 0;
    return r;
}

// Counts nodes where tau(x) >= E(tau) and m^(k+1)(x) >= m^(k)(x) disagree.
// E(tau) comes from direct quadrature of tau * m^(k), the density ratio from
// pointwise log densities; nodes within 2x the integrator error of the
// threshold are skipped.
inline std::size_t equivalence_check_dtau(const NascentMD& m, const GridMesh& mesh) {
    const auto etau = m.expectation([&m](std::span<const double> x) { return std::exp(m.log_tau(x)); });
    const NascentMD next = m.with_k(m.k() + 1.0);
    const double band = std::max(2.0 * etau.error, 64.0 * std::numeric_limits<double>::epsilon() * etau.value);
    std::vector<std::uint8_t> bad(mesh.size(), 0);
    parallel_for(mesh.size(), [&](std::size_t i) {
        const auto x = mesh.node(i);
        const double tau = std::exp(m.log_tau(x));
        if (std::abs(tau - etau.value) <= band) return;
        const bool a = tau >= etau.value;
        const bool b = next.log_density(x) >= m.log_density(x);
        bad[i] = a != b;
    });
    return static_cast<std::size_t>(std::count(bad.begin(), bad.end(), std::uint8_t{1}));
}

namespace detail {

// g(x) = log m^(k)(x) - log m^(0); zero on Gamma_0.
inline double gamma0_residual(const NascentMD& m, std::span<const double> x) {
    return m.log_density(x) - m.log_uniform_density();
}

// Bisection on the segment a -> b where g(a) >= 0 > g(b).
inline Point refine_crossing(const NascentMD& m, std::span<const double> a, std::span<const double> b) {
    const std::size_t d = a.size();
    Point x(d);
    double lo = 0.0, hi = 1.0;
    auto at = [&](double t) {
        for (std::size_t j = 0; j < d; ++j) x[j] = a[j] + t * (b[j] - a[j]);
        return gamma0_residual(m, x);
    };
    double best_t = 0.0;
    double best_g = std::abs(at(0.0));
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double g = at(mid);
        if (std::abs(g) < best_g) {
            best_g = std::abs(g);
            best_t = mid;
        }
        if (g == 0.0) break;
        if (g > 0.0) lo = mid; else hi = mid;
        if (best_g <= 1e-13) break;
    }
    at(best_t);
    return x;
}

}  // namespace detail

// Discrete boundary of a D0 set, each crossing edge refined by bisection to
// the level set m^(k) = 1/mu(Omega).
inline std::vector<Point> boundary_points(const NascentMD& m, const SignificantSet& set) {
    if (set.kind != SetKind::D0) throw InputError("boundary_points: set must be of kind D0");
    if (!set.mesh) throw InputError("boundary_points: set has no mesh");
    const NascentMD mk = m.with_k(set.k);
    const auto& mesh = *set.mesh;
    std::vector<Point> out;
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        if (!set.mask[i]) continue;
        for (std::size_t axis = 0; axis < mesh.dim(); ++axis) {
            for (int dir : {-1, 1}) {
                const auto j = mesh.neighbor(i, axis, dir);
                if (j == GridMesh::npos || set.mask[static_cast<std::size_t>(j)]) continue;
                out.push_back(detail::refine_crossing(mk, mesh.node(i),
                                                      mesh.node(static_cast<std::size_t>(j))));
            }
        }
    }
    return out;
}

inline Point unit_gradient(const NascentMD& m, std::span<const double> x, double& norm) {
    Point g = gradient(m.objective(), x, m.region());
    norm = norm2(g);
    if (norm < 1e-8)
        throw NearCriticalError("shrink rate: ||grad f|| = " + std::to_string(norm) +
                                " at " + detail::format_point(x));
    for (double& v : g) v /= norm;
    return g;
}

// Limit of ||dx|| / dk for a point x on Gamma_0^(k):
// tau(x) |E(log tau) - log tau(x)| / (k ||grad tau(x)||).
inline double shrink_rate_theoretical(const NascentMD& m, std::span<const double> x) {
    if (!(m.k() > 0.0)) throw InputError("shrink rate: k must be positive");
    double gn = 0.0;
    unit_gradient(m, x, gn);
    if (m.exponential())
        return std::abs(m.expect_f().value - m.f(x)) / (m.k() * gn);
    return std::abs(m.expect_log_tau().value - m.log_tau(x)) / (m.k() * m.grad_log_tau_norm(x));
}

struct BoundaryMove {
    Point displacement;
    double rate = 0.0;
};

// Follows x on Gamma_0^(k) to Gamma_0^(k + dk) along grad f / ||grad f||.
inline BoundaryMove shrink_move(const NascentMD& m, std::span<const double> x, double delta_k) {
    if (!(delta_k > 0.0)) throw InputError("shrink rate: delta_k must be positive");
    double gn = 0.0;
    const Point dir = unit_gradient(m, x, gn);
    const double predicted = shrink_rate_theoretical(m, x);
    const double reach = 10.0 * predicted * delta_k;
    const NascentMD next = m.with_k(m.k() + delta_k);
    const std::size_t d = x.size();
    Point y(d);
    auto g = [&](double t) {
        for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + t * dir[j];
        return detail::gamma0_residual(next, y);
    };
    auto solve = [&](double a, double b) {
        double ga = g(a);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            if (mid == a || mid == b) break;
            const double gm = g(mid);
            if (gm == 0.0) return mid;
            if ((gm > 0.0) == (ga > 0.0)) {
                a = mid;
                ga = gm;
            } else {
                b = mid;
            }
        }
        return 0.5 * (a + b);
    };
    const double g0 = g(0.0);
    std::optional<double> best;
    if (g0 == 0.0) best = 0.0;
    for (double end : {reach, -reach}) {
        if (best || !(reach > 0.0)) break;
        const double ge = g(end);
        if ((ge > 0.0) != (g0 > 0.0)) {
            const double t = solve(0.0, end);
            if (!best || std::abs(t) < std::abs(*best)) best = t;
        }
    }
    if (!best)
        throw BracketingError("shrink rate: no crossing within 10x the predicted displacement at " +
                              detail::format_point(x));
    BoundaryMove mv;
    mv.displacement.resize(d);
    for (std::size_t j = 0; j < d; ++j) mv.displacement[j] = *best * dir[j];
    mv.rate = std::abs(*best) / delta_k;
    return mv;
}

inline double shrink_rate_empirical(const NascentMD& m, std::span<const double> x, double delta_k) {
    return shrink_move(m, x, delta_k).rate;
}

// Limit of (f(x) - f(x + dx)) / dk on Gamma_0^(k):
// tau (grad f . grad tau) / (k ||grad tau||^2) (log tau(x) - E(log tau)),
// which is (f(x) - E(f)) / k for exponential tau.
inline double descent_rate(const NascentMD& m, std::span<const double> x) {
    if (!(m.k() > 0.0)) throw InputError("descent rate: k must be positive");
    const double fx = m.f(x);
    if (m.exponential()) return (fx - m.expect_f().value) / m.k();
    const double s = fx - m.lower_shift() + m.rational_p();
    return s * (m.expect_log_tau().value - m.log_tau_of_value(fx)) / m.k();
}

struct ShrinkRateSample {
    Point x;
    double k = 0.0;
    double grad_norm = 0.0;
    double theoretical = 0.0;
    double empirical = 0.0;
    double delta_k = 0.0;
    double descent_theoretical = 0.0;
    double descent_empirical = 0.0;
};

// One sample per Gamma_0 point of the D0 set on m's finest mesh with
// ||grad f|| > min_grad.
inline std::vector<ShrinkRateSample> shrink_rate_samples(const NascentMD& m, double delta_k,
                                                         double min_grad = 0.1) {
    const auto set = extract_set(m, SetKind::D0);
    std::vector<ShrinkRateSample> out;
    for (const auto& x : boundary_points(m, set)) {
        const double gn = norm2(gradient(m.objective(), x, m.region()));
        if (!(gn > min_grad)) continue;
        ShrinkRateSample s;
        s.x = x;
        s.k = m.k();
        s.grad_norm = gn;
        s.delta_k = delta_k;
        s.theoretical = shrink_rate_theoretical(m, x);
        const auto mv = shrink_move(m, x, delta_k);
        s.empirical = mv.rate;
        Point moved(x);
        for (std::size_t j = 0; j < x.size(); ++j) moved[j] += mv.displacement[j];
        s.descent_theoretical = descent_rate(m, x);
        s.descent_empirical = (m.f(x) - m.f(moved)) / delta_k;
        out.push_back(std::move(s));
    }
    return out;
}

struct BasinReport {
    std::vector<Point> minimizers;
    double radius = 0.0;
    std::vector<double> masses;
    std::vector<double> errors;
    double k = 0.0;
};

// Probability mass of m^(k) in the ball of `radius` around each minimizer.
// Balls must be disjoint and strictly inside the box.
inline BasinReport basin_masses(const NascentMD& m, const std::vector<Point>& minimizers, double radius) {
    if (!(radius > 0.0)) throw InputError("basin_masses: radius must be positive");
    const auto& region = m.region();
    const std::size_t d = region.dim();
    for (std::size_t a = 0; a < minimizers.size(); ++a) {
        const auto& c = minimizers[a];
        if (c.size() != d) throw InputError("basin_masses: minimizer dimension mismatch");
        for (std::size_t j = 0; j < d; ++j)
            if (!(c[j] - radius > region.lower()[j] && c[j] + radius < region.upper()[j]))
                throw InputError("basin_masses: ball around minimizer " + std::to_string(a) +
                                 " touches the region boundary");
        if (!region.contains(c)) throw InputError("basin_masses: minimizer outside the region");
        for (std::size_t b = 0; b < a; ++b) {
            double dist2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) dist2 += (c[j] - minimizers[b][j]) * (c[j] - minimizers[b][j]);
            if (std::sqrt(dist2) < 2.0 * radius)
                throw InputError("basin_masses: balls " + std::to_string(b) + " and " +
                                 std::to_string(a) + " overlap");
        }
    }
    BasinReport rep;
    rep.minimizers = minimizers;
    rep.radius = radius;
    rep.k = m.k();
    const auto& log_z = m.level_log_normalizers(m.k());
    std::vector<std::vector<double>> per_level(minimizers.size());
    for (std::size_t lv = 0; lv < m.level_count(); ++lv) {
        const auto& rule = m.rule(lv);
        const auto lt = m.node_log_tau(lv);
        const double offset = std::log(rule.weight) - log_z[lv];
        std::vector<std::vector<double>> terms(minimizers.size(), std::vector<double>(rule.size(), 0.0));
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const auto x = rule.node(i);
            for (std::size_t a = 0; a < minimizers.size(); ++a) {
                double dist2 = 0.0;
                for (std::size_t j = 0; j < d; ++j) dist2 += (x[j] - minimizers[a][j]) * (x[j] - minimizers[a][j]);
                if (dist2 <= radius * radius) terms[a][i] = std::exp(m.k() * lt[i] + offset);
            }
        }
        for (std::size_t a = 0; a < minimizers.size(); ++a) {
            per_level[a].push_back(pairwise_sum(terms[a]));
            if (rule.is_monte_carlo()) {
                // terms are w*m; scale to per-draw values of the indicator * m.
                std::vector<double> v(terms[a].size());
                for (std::size_t i = 0; i < v.size(); ++i) v[i] = terms[a][i] / rule.weight;
                rep.errors.push_back(detail::mc_error(v, rule));
            }
        }
    }
    for (std::size_t a = 0; a < minimizers.size(); ++a) {
        const auto& v = per_level[a];
        rep.masses.push_back(std::clamp(v.back(), 0.0, 1.0));
        if (!m.finest_rule().is_monte_carlo())
            rep.errors.push_back(v.size() > 1 ? std::abs(v.back() - v[v.size() - 2]) : 0.0);
    }
    return rep;
}

}  // namespace mdopt
