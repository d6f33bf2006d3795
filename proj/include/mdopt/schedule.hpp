#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "integrate.hpp"
#include "io.hpp"
#include "nmd.hpp"
#include "objective.hpp"
#include "region.hpp"

namespace mdopt {

// Geometric k schedule k_j = k0 * growth^j. The default growth e makes each
// stage shrink the significant sets by a roughly k-independent amount.
struct ContinuationConfig {
    double k0 = 1.0;
    double growth = std::numbers::e;
    std::size_t max_stages = 16;
    double var_tol = 1e-8;
    std::optional<IntegratorConfig> integrator;  // default_for(dim) when empty
    TauKind tau = ExponentialTau{};
    // Stop after this many consecutive stages whose decrease of E(f) is below
    // its integrator error. 0 disables.
    std::size_t stall_window = 3;
    bool track_sets = true;

    void validate() const {
        if (!(k0 > 0.0) || !std::isfinite(k0)) throw InputError("continuation: k0 must be > 0");
        if (!(growth > 1.0) || !std::isfinite(growth))
            throw InputError("continuation: growth must be > 1");
        if (max_stages < 1) throw InputError("continuation: max_stages must be >= 1");
        if (!(var_tol >= 0.0)) throw InputError("continuation: var_tol must be >= 0");
    }
};

struct TraceRecord {
    double k = 0.0;
    double Ef = 0.0;
    double Ef_error = 0.0;
    double Varf = 0.0;
    double Varf_error = 0.0;
    Point mean_x;
    std::optional<double> D0_measure;
    std::optional<double> Df_measure;
};

enum class StopReason { var_tol, max_stages, stalled };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::var_tol: return "var_tol";
        case StopReason::max_stages: return "max_stages";
        case StopReason::stalled: return "stalled";
    }
    return "?";
}

struct MinimizeResult {
    double fstar_estimate = 0.0;
    Point xstar_estimate;
    std::vector<TraceRecord> trace;
    StopReason stop_reason = StopReason::max_stages;
};

namespace detail {

// Measures of D0 and Df on the finest quadrature nodes of m.
inline std::pair<double, double> node_set_measures(const NascentMD& m, double ef) {
    const std::size_t top = m.level_count() - 1;
    const auto f = m.node_f(top);
    const auto lt = m.node_log_tau(top);
    const double log_z = m.level_log_normalizers(m.k()).back();
    const double log_uniform = m.log_uniform_density();
    std::size_t d0 = 0, df = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (m.k() * lt[i] - log_z >= log_uniform) ++d0;
        if (f[i] <= ef) ++df;
    }
    const double w = m.finest_rule().weight;
    return {w * static_cast<double>(d0), w * static_cast<double>(df)};
}

}  // namespace detail

inline TraceRecord trace_stage(const NascentMD& m, bool track_sets) {
    TraceRecord r;
    r.k = m.k();
    const auto ef = m.expect_f();
    const auto var = m.variance_f();
    r.Ef = ef.value;
    r.Ef_error = ef.error;
    r.Varf = var.value;
    r.Varf_error = var.error;
    r.mean_x = m.mean_location().value;
    if (track_sets) {
        const auto [d0, df] = detail::node_set_measures(m, ef.value);
        r.D0_measure = d0;
        r.Df_measure = df;
    }
    return r;
}

// Follows E^(k)(f) down the geometric schedule until the variance (the
// negative slope dE/dk for exponential tau) falls below var_tol.
inline MinimizeResult run_continuation(const Objective& obj, const CompactRegion& region,
                                       const ContinuationConfig& cfg) {
    cfg.validate();
    const IntegratorConfig integrator = cfg.integrator.value_or(IntegratorConfig::default_for(region.dim()));
    NascentMD m(obj, region, cfg.tau, cfg.k0, integrator);

    MinimizeResult result;
    result.stop_reason = StopReason::max_stages;
    std::size_t stalled_stages = 0;
    double k = cfg.k0;
    for (std::size_t stage = 0; stage < cfg.max_stages; ++stage) {
        if (stage > 0) k *= cfg.growth;
        const NascentMD mk = m.with_k(k);
        result.trace.push_back(trace_stage(mk, cfg.track_sets));
        const auto& row = result.trace.back();
        if (row.Varf < cfg.var_tol) {
            result.stop_reason = StopReason::var_tol;
            break;
        }
        if (stage > 0 && cfg.stall_window > 0) {
            const double drop = result.trace[stage - 1].Ef - row.Ef;
            stalled_stages = drop < row.Ef_error ? stalled_stages + 1 : 0;
            if (stalled_stages >= cfg.stall_window) {
                result.stop_reason = StopReason::stalled;
                break;
            }
        }
    }
    result.fstar_estimate = result.trace.back().Ef;
    result.xstar_estimate = result.trace.back().mean_x;
    return result;
}

// Columns: stage, k, Ef, Ef_error, Varf, Varf_error, mean_x0..mean_x{n-1},
// D0_measure, Df_measure (empty when not tracked).
inline CsvTable trace_to_rows(const MinimizeResult& result) {
    CsvTable t;
    const std::size_t d = result.trace.empty() ? 0 : result.trace.front().mean_x.size();
    t.header = {"stage", "k", "Ef", "Ef_error", "Varf", "Varf_error"};
    for (std::size_t j = 0; j < d; ++j) t.header.push_back("mean_x" + std::to_string(j));
    t.header.push_back("D0_measure");
    t.header.push_back("Df_measure");
    for (std::size_t s = 0; s < result.trace.size(); ++s) {
        const auto& r = result.trace[s];
        CsvRow row{std::to_string(s), format_double(r.k), format_double(r.Ef),
                   format_double(r.Ef_error), format_double(r.Varf), format_double(r.Varf_error)};
        for (double v : r.mean_x) row.push_back(format_double(v));
        row.push_back(r.D0_measure ? format_double(*r.D0_measure) : "");
        row.push_back(r.Df_measure ? format_double(*r.Df_measure) : "");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace mdopt
