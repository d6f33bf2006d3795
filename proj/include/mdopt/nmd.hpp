#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "integrate.hpp"
#include "objective.hpp"
#include "parallel.hpp"
#include "region.hpp"

namespace mdopt {

// tau(x) = exp(-f(x)).
struct ExponentialTau {};

// tau(x) = 1 / (f(x) - L + p). Without an explicit L the shift is resolved
// from the integration nodes as min f - max(p, 0.1 * (max f - min f)).
struct RationalTau {
    double p = 1.0;
    std::optional<double> lower_shift;
};

using TauKind = std::variant<ExponentialTau, RationalTau>;

inline bool is_exponential(const TauKind& t) noexcept {
    return std::holds_alternative<ExponentialTau>(t);
}

struct Expectation {
    double value = 0.0;
    double error = 0.0;
    double k = 0.0;
    std::string kind;
};

struct MeanLocation {
    Point value;
    Point error;
};

namespace detail {

struct NodeTable {
    QuadratureRule rule;
    std::vector<double> f;
    std::vector<double> log_tau;
};

// Everything that depends on (objective, region, tau, integrator) but not on k.
struct MinimaCache {
    Objective objective;
    CompactRegion region;
    TauKind tau;
    IntegratorConfig integrator;
    double lower_shift = 0.0;
    double p = 1.0;
    std::vector<NodeTable> levels;

    std::mutex mutex;
    std::map<double, std::vector<double>> log_z;
    std::map<double, double> mean_log_tau;

    MinimaCache(Objective obj, CompactRegion reg, TauKind t, IntegratorConfig cfg)
        : objective(std::move(obj)), region(std::move(reg)), tau(t), integrator(std::move(cfg)) {}

    double log_tau_of(double f) const {
        if (std::holds_alternative<ExponentialTau>(tau)) return -f;
        const double s = f - lower_shift + p;
        if (!(s > 0.0))
            throw InvalidShiftError("rational tau: f(x) - L + p = " + std::to_string(s) +
                                    " is not positive");
        return -std::log(s);
    }
};

}  // namespace detail

// Nascent minima distribution m^(k)(x) = tau(x)^k / integral of tau^k over the
// region, evaluated in log space. Copies share the k-independent node tables
// and the log-normalizer cache.
class NascentMD {
public:
    NascentMD(Objective objective, CompactRegion region, TauKind tau, double k,
              IntegratorConfig integrator)
        : k_(k) {
        if (objective.dim != region.dim())
            throw InputError("nascent MD: objective and region dimensions differ");
        if (!std::isfinite(k)) throw InputError("nascent MD: k must be finite");
        if (const auto* r = std::get_if<RationalTau>(&tau))
            if (!(r->p > 0.0)) throw InputError("rational tau: p must be positive");
        auto cache = std::make_shared<detail::MinimaCache>(std::move(objective), std::move(region),
                                                           tau, std::move(integrator));
        for (auto& rule : make_rules(cache->region, cache->integrator)) {
            detail::NodeTable t;
            t.f = evaluate_flat(cache->objective, rule.coordinates());
            t.rule = std::move(rule);
            cache->levels.push_back(std::move(t));
        }
        if (const auto* r = std::get_if<RationalTau>(&cache->tau)) {
            cache->p = r->p;
            if (r->lower_shift) {
                cache->lower_shift = *r->lower_shift;
            } else {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (const auto& t : cache->levels)
                    for (double v : t.f) {
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                cache->lower_shift = lo - std::max(r->p, 0.1 * (hi - lo));
            }
        }
        for (auto& t : cache->levels) {
            t.log_tau.resize(t.f.size());
            for (std::size_t i = 0; i < t.f.size(); ++i) t.log_tau[i] = cache->log_tau_of(t.f[i]);
        }
        cache_ = std::move(cache);
    }

    NascentMD with_k(double k) const {
        if (!std::isfinite(k)) throw InputError("nascent MD: k must be finite");
        NascentMD m(*this);
        m.k_ = k;
        return m;
    }

    double k() const noexcept { return k_; }
    const Objective& objective() const noexcept { return cache_->objective; }
    const CompactRegion& region() const noexcept { return cache_->region; }
    const TauKind& tau() const noexcept { return cache_->tau; }
    const IntegratorConfig& integrator() const noexcept { return cache_->integrator; }
    bool exponential() const noexcept { return is_exponential(cache_->tau); }
    // Resolved L of the rational kind (0 for exponential).
    double lower_shift() const noexcept { return cache_->lower_shift; }

    std::size_t level_count() const noexcept { return cache_->levels.size(); }
    const QuadratureRule& rule(std::size_t level) const { return cache_->levels.at(level).rule; }
    const QuadratureRule& finest_rule() const { return cache_->levels.back().rule; }
    std::span<const double> node_f(std::size_t level) const { return cache_->levels.at(level).f; }
    std::span<const double> node_log_tau(std::size_t level) const {
        return cache_->levels.at(level).log_tau;
    }

    double f(std::span<const double> x) const { return detail::checked_eval(objective(), x); }
    double log_tau_of_value(double fx) const { return cache_->log_tau_of(fx); }
    double log_tau(std::span<const double> x) const { return log_tau_of_value(f(x)); }

    // log Z(k) per quadrature level, coarse to fine.
    const std::vector<double>& level_log_normalizers(double k) const {
        {
            std::lock_guard lock(cache_->mutex);
            if (auto it = cache_->log_z.find(k); it != cache_->log_z.end()) return it->second;
        }
        std::vector<double> out;
        for (const auto& t : cache_->levels) {
            std::vector<double> l(t.log_tau.size());
            for (std::size_t i = 0; i < l.size(); ++i) l[i] = k * t.log_tau[i];
            out.push_back(log_sum_exp(l) + std::log(t.rule.weight));
        }
        std::lock_guard lock(cache_->mutex);
        return cache_->log_z.try_emplace(k, std::move(out)).first->second;
    }

    LogEstimate log_normalizer() const { return log_normalizer_at(k_); }

    LogEstimate log_normalizer_at(double k) const {
        const auto& z = level_log_normalizers(k);
        LogEstimate e{z.back(), 0.0};
        if (finest_rule().is_monte_carlo()) {
            const auto& t = cache_->levels.back();
            std::vector<double> s(t.log_tau.size());
            const double shift = z.back() - std::log(t.rule.weight);
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(k * t.log_tau[i] - shift);
            e.error = detail::mc_error(s, t.rule) / t.rule.total_weight() *
                      static_cast<double>(t.rule.draws);
        } else if (z.size() > 1) {
            e.error = std::abs(z.back() - z[z.size() - 2]);
        }
        return e;
    }

    // log m^(0) = -log mu(Omega), with mu taken from the same quadrature that
    // normalizes m^(k), so m^(k) >= m^(0) comparisons are consistent.
    double log_uniform_density() const { return -level_log_normalizers(0.0).back(); }

    double log_density(std::span<const double> x) const {
        return k_ * log_tau(x) - level_log_normalizers(k_).back();
    }
    double density(std::span<const double> x) const { return std::exp(log_density(x)); }

    // Expectation of a per-node quantity, value_fn(level, node index).
    template <class ValueFn>
    Expectation expect_nodes(ValueFn&& value_fn, std::string kind) const {
        std::vector<double> per_level;
        Expectation out;
        out.k = k_;
        out.kind = std::move(kind);
        for (std::size_t lv = 0; lv < cache_->levels.size(); ++lv) {
            const auto& t = cache_->levels[lv];
            const std::size_t n = t.log_tau.size();
            std::vector<double> h(n);
            parallel_for(n, [&](std::size_t i) { h[i] = value_fn(lv, i); });
            for (std::size_t i = 0; i < n; ++i)
                if (!std::isfinite(h[i])) {
                    const auto x = t.rule.node(i);
                    throw EvaluationError("expectation: integrand not finite at " +
                                              detail::format_point(x),
                                          Point(x.begin(), x.end()));
                }
            const auto w = weights(lv);
            std::vector<double> wh(n);
            for (std::size_t i = 0; i < n; ++i) wh[i] = w[i] * h[i];
            const double sw = pairwise_sum(w);
            const double e = pairwise_sum(wh) / sw;
            per_level.push_back(e);
            if (t.rule.is_monte_carlo()) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = w[i] * (h[i] - e);
                    wh[i] = d * d;
                }
                out.error = 3.0 * std::sqrt(pairwise_sum(wh)) / sw;
            }
        }
        out.value = per_level.back();
        if (!finest_rule().is_monte_carlo() && per_level.size() > 1)
            out.error = std::abs(per_level.back() - per_level[per_level.size() - 2]);
        return out;
    }

    // E^(k)_t[h(shift + t)^nu].
    Expectation expectation(const ScalarField& h, double nu = 1.0,
                            std::optional<Point> shift = std::nullopt) const {
        const std::size_t d = region().dim();
        if (shift && shift->size() != d) throw InputError("expectation: shift dimension mismatch");
        const bool integer_power = std::floor(nu) == nu;
        const bool plain = nu == 1.0;
        // Evaluate h once per node up front so domain errors surface here.
        std::vector<std::vector<double>> hv(cache_->levels.size());
        for (std::size_t lv = 0; lv < cache_->levels.size(); ++lv) {
            const auto& rule = cache_->levels[lv].rule;
            hv[lv].resize(rule.size());
            parallel_for(rule.size(), [&](std::size_t i) {
                const auto t = rule.node(i);
                if (shift) {
                    Point y(d);
                    for (std::size_t j = 0; j < d; ++j) y[j] = (*shift)[j] + t[j];
                    hv[lv][i] = h(y);
                } else {
                    hv[lv][i] = h(t);
                }
            });
            if (!integer_power)
                for (std::size_t i = 0; i < hv[lv].size(); ++i)
                    if (!(hv[lv][i] > 0.0))
                        throw DomainError("expectation: h <= 0 with non-integer power " +
                                          std::to_string(nu));
        }
        std::string kind = "h^" + std::to_string(nu) + (shift ? " shifted" : "");
        return expect_nodes(
            [&](std::size_t lv, std::size_t i) {
                return plain ? hv[lv][i] : std::pow(hv[lv][i], nu);
            },
            std::move(kind));
    }

    Expectation expect_f() const {
        return expect_nodes([this](std::size_t lv, std::size_t i) { return cache_->levels[lv].f[i]; },
                            "f");
    }

    Expectation expect_log_tau() const {
        return expect_nodes(
            [this](std::size_t lv, std::size_t i) { return cache_->levels[lv].log_tau[i]; },
            "log tau");
    }

    // log E^(k)(tau) = log Z(k+1) - log Z(k); stays finite when tau underflows.
    LogEstimate log_expect_tau() const {
        const auto& a = level_log_normalizers(k_ + 1.0);
        const auto& b = level_log_normalizers(k_);
        LogEstimate e{a.back() - b.back(), 0.0};
        if (finest_rule().is_monte_carlo()) {
            e.error = expect_nodes(
                          [this](std::size_t lv, std::size_t i) {
                              return std::exp(cache_->levels[lv].log_tau[i]);
                          },
                          "tau")
                          .error /
                      std::exp(e.log_value);
        } else if (a.size() > 1) {
            e.error = std::abs(e.log_value - (a[a.size() - 2] - b[b.size() - 2]));
        }
        return e;
    }

    // Var^(k)(f), computed in central form and clamped at zero.
    Expectation variance_f() const {
        std::vector<double> per_level;
        Expectation out;
        out.k = k_;
        out.kind = "Var f";
        for (std::size_t lv = 0; lv < cache_->levels.size(); ++lv) {
            const auto& t = cache_->levels[lv];
            const auto w = weights(lv);
            const std::size_t n = w.size();
            std::vector<double> tmp(n);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = w[i] * t.f[i];
            const double sw = pairwise_sum(w);
            const double mean = pairwise_sum(tmp) / sw;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = t.f[i] - mean;
                tmp[i] = w[i] * d * d;
            }
            const double var = std::max(0.0, pairwise_sum(tmp) / sw);
            per_level.push_back(var);
            if (t.rule.is_monte_carlo()) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = t.f[i] - mean;
                    const double r = w[i] * (d * d - var);
                    tmp[i] = r * r;
                }
                out.error = 3.0 * std::sqrt(pairwise_sum(tmp)) / sw;
            }
        }
        out.value = per_level.back();
        if (!finest_rule().is_monte_carlo() && per_level.size() > 1)
            out.error = std::abs(per_level.back() - per_level[per_level.size() - 2]);
        return out;
    }

    MeanLocation mean_location() const {
        const std::size_t d = region().dim();
        MeanLocation out{Point(d), Point(d)};
        for (std::size_t j = 0; j < d; ++j) {
            const auto e = expect_nodes(
                [this, j](std::size_t lv, std::size_t i) {
                    return cache_->levels[lv].rule.node(i)[j];
                },
                "x" + std::to_string(j));
            out.value[j] = e.value;
            out.error[j] = e.error;
        }
        return out;
    }

    // k m(x) grad(tau)/tau; for exponential tau this is -k m(x) grad f(x).
    Point grad_density(std::span<const double> x) const {
        const Point g = gradient(objective(), x, region());
        const double fx = f(x);
        const double m = std::exp(k_ * log_tau_of_value(fx) - level_log_normalizers(k_).back());
        const double scale = exponential() ? -k_ * m : -k_ * m / (fx - lower_shift() + cache_->p);
        Point out(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) out[j] = scale * g[j];
        return out;
    }

    // d m^(k)(x) / dk = m(x) (log tau(x) - E^(k)(log tau)).
    double ddk_density(std::span<const double> x) const {
        const double lt = log_tau(x);
        const double m = std::exp(k_ * lt - level_log_normalizers(k_).back());
        return m * (lt - cached_mean_log_tau());
    }

    // ||grad tau|| / tau at x, i.e. ||grad f|| for exponential tau and
    // ||grad f|| / (f - L + p) for rational tau.
    double grad_log_tau_norm(std::span<const double> x) const {
        const double gn = norm2(gradient(objective(), x, region()));
        return exponential() ? gn : gn / (f(x) - lower_shift() + cache_->p);
    }

    double rational_p() const noexcept { return cache_->p; }

private:
    double cached_mean_log_tau() const {
        {
            std::lock_guard lock(cache_->mutex);
            if (auto it = cache_->mean_log_tau.find(k_); it != cache_->mean_log_tau.end()) return it->second;
        }
        const double v = expect_log_tau().value;
        std::lock_guard lock(cache_->mutex);
        cache_->mean_log_tau.emplace(k_, v);
        return v;
    }

    // Unnormalized weights w_i tau_i^k / max, for one level.
    std::vector<double> weights(std::size_t level) const {
        const auto& t = cache_->levels[level];
        const std::size_t n = t.log_tau.size();
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, k_ * t.log_tau[i]);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(k_ * t.log_tau[i] - mx);
        return w;
    }

    std::shared_ptr<detail::MinimaCache> cache_;
    double k_ = 0.0;
};

// Integral of m^(k) over the region, recomputed pointwise through log_density
// on an independent call path.
inline Estimate total_mass(const NascentMD& m, const IntegratorConfig& cfg) {
    return integrate(m.region(), [&](std::span<const double> x) { return m.density(x); }, cfg);
}

}  // namespace mdopt
