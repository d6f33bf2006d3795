#include <gtest/gtest.h>

#include <mdopt/mdopt.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace mdopt;

namespace {

MinimizeResult run(const std::string& fn, ContinuationConfig cfg = {}) {
    const auto e = catalog_get(fn);
    return run_continuation(e.objective, e.region, cfg);
}

}  // namespace

TEST(Continuation, ConstantStopsAtFirstStage) {
    const auto r = run("const3");
    ASSERT_EQ(r.trace.size(), 1u);
    EXPECT_EQ(r.fstar_estimate, 3.0);
    EXPECT_EQ(r.stop_reason, StopReason::var_tol);
}

TEST(Continuation, Paper1dMonotoneAndAccurate) {
    ContinuationConfig cfg;
    cfg.max_stages = 12;
    cfg.var_tol = 0.0;
    cfg.stall_window = 0;
    const auto r = run("paper1d", cfg);
    ASSERT_EQ(r.trace.size(), 12u);
    EXPECT_EQ(r.stop_reason, StopReason::max_stages);
    for (std::size_t j = 1; j < r.trace.size(); ++j) EXPECT_LT(r.trace[j].Ef, r.trace[j - 1].Ef) << "stage " << j;
    EXPECT_NEAR(r.fstar_estimate, oracle::paper1d_min().f, 0.05);
}

TEST(Continuation, QuadraticMeanLocationReachesOrigin) {
    const auto r = run("quadratic");
    EXPECT_LT(norm2(r.xstar_estimate), 0.05);
}

TEST(Continuation, ScheduleIsGeometric) {
    ContinuationConfig cfg;
    cfg.k0 = 0.5;
    cfg.growth = 3.0;
    cfg.max_stages = 6;
    cfg.var_tol = 0.0;
    cfg.stall_window = 0;
    const auto r = run("paper2d", cfg);
    ASSERT_EQ(r.trace.size(), 6u);
    EXPECT_EQ(r.trace[0].k, 0.5);
    for (std::size_t j = 1; j < r.trace.size(); ++j) EXPECT_EQ(r.trace[j].k, r.trace[j - 1].k * 3.0);
}

TEST(Continuation, ResultMatchesLastRow) {
    const auto r = run("himmelblau");
    EXPECT_EQ(r.fstar_estimate, r.trace.back().Ef);
    EXPECT_EQ(r.xstar_estimate, r.trace.back().mean_x);
}

TEST(Continuation, MonotoneAndBoundedAcrossCatalog) {
    for (const auto& name : catalog_names()) {
        ContinuationConfig cfg;
        cfg.max_stages = 8;
        const auto e = catalog_get(name);
        const auto r = run_continuation(e.objective, e.region, cfg);
        // Node values bound f* from above; their minimum bounds every E from below.
        const auto mesh = GridMesh(e.region, IntegratorConfig::default_for(e.objective.dim).is_grid()
                                                 ? std::get<GridSpec>(IntegratorConfig::default_for(e.objective.dim).kind).resolution
                                                 : std::vector<std::size_t>(e.objective.dim, 8));
        const auto fv = evaluate_flat(e.objective, mesh.coordinates());
        const double node_min = *std::min_element(fv.begin(), fv.end());
        for (std::size_t j = 0; j < r.trace.size(); ++j) {
            EXPECT_GE(r.trace[j].Ef, node_min - 1e-12) << name;
            if (j > 0) {
                EXPECT_LE(r.trace[j].Ef, r.trace[j - 1].Ef + 2.0 * std::max(r.trace[j].Ef_error, r.trace[j - 1].Ef_error))
                    << name << " stage " << j;
            }
        }
    }
}

TEST(Continuation, RationalTauConverges) {
    ContinuationConfig cfg;
    cfg.tau = RationalTau{};
    cfg.max_stages = 14;
    cfg.var_tol = 0.0;
    const auto r = run("paper1d", cfg);
    for (std::size_t j = 1; j < r.trace.size(); ++j) EXPECT_LE(r.trace[j].Ef, r.trace[j - 1].Ef + 1e-12);
    EXPECT_NEAR(r.fstar_estimate, oracle::paper1d_min().f, 0.05);
}

TEST(Continuation, StallRuleStopsAtQuadratureFloor) {
    ContinuationConfig cfg;
    cfg.max_stages = 40;
    cfg.var_tol = 0.0;
    cfg.integrator = IntegratorConfig::grid(1, 64);
    const auto r = run("paper1d", cfg);
    EXPECT_EQ(r.stop_reason, StopReason::stalled);
    EXPECT_LT(r.trace.size(), 40u);
}

TEST(Continuation, SetMeasuresShrink) {
    ContinuationConfig cfg;
    cfg.max_stages = 6;
    cfg.var_tol = 0.0;
    const auto r = run("paper1d", cfg);
    for (std::size_t j = 1; j < r.trace.size(); ++j) {
        ASSERT_TRUE(r.trace[j].D0_measure && r.trace[j].Df_measure);
        EXPECT_LE(*r.trace[j].D0_measure, *r.trace[j - 1].D0_measure);
        EXPECT_LE(*r.trace[j].Df_measure, *r.trace[j - 1].Df_measure);
    }
    cfg.track_sets = false;
    const auto q = run("paper1d", cfg);
    EXPECT_FALSE(q.trace.front().D0_measure.has_value());
}

TEST(Continuation, ConfigValidation) {
    ContinuationConfig cfg;
    cfg.growth = 1.0;
    EXPECT_THROW(run("paper1d", cfg), InputError);
    cfg = {};
    cfg.k0 = 0.0;
    EXPECT_THROW(run("paper1d", cfg), InputError);
    cfg = {};
    cfg.max_stages = 0;
    EXPECT_THROW(run("paper1d", cfg), InputError);
}

TEST(TraceRows, ColumnsAndRowCount) {
    ContinuationConfig cfg;
    cfg.max_stages = 3;
    cfg.var_tol = 0.0;
    const auto r = run("paper2d", cfg);
    const auto t = trace_to_rows(r);
    EXPECT_EQ(t.rows.size(), 3u);
    const std::vector<std::string> header{"stage", "k", "Ef", "Ef_error", "Varf", "Varf_error",
                                          "mean_x0", "mean_x1", "D0_measure", "Df_measure"};
    EXPECT_EQ(t.header, header);
    for (const auto& row : t.rows) EXPECT_EQ(row.size(), header.size());
    EXPECT_EQ(std::strtod(t.rows[1][2].c_str(), nullptr), r.trace[1].Ef);
}
