#include <gtest/gtest.h>

#include <mdopt/mdopt.hpp>

#include <cmath>
#include <numbers>
#include <thread>

#include "oracles.hpp"

using namespace mdopt;

namespace {

NascentMD make(const std::string& fn, double k, TauKind tau = ExponentialTau{},
               std::optional<IntegratorConfig> ic = std::nullopt) {
    const auto e = catalog_get(fn);
    return NascentMD(e.objective, e.region, tau, k, ic.value_or(IntegratorConfig::default_for(e.objective.dim)));
}

const oracle::MinResult& paper1d_oracle() {
    static const auto m = oracle::paper1d_min();
    return m;
}

}  // namespace

TEST(Tau, ExponentialAndRationalValues) {
    const auto e = catalog_get("const3");
    const NascentMD ex(e.objective, e.region, ExponentialTau{}, 1.0, IntegratorConfig::grid(1, 16));
    EXPECT_EQ(ex.log_tau_of_value(2.0), -2.0);
    const NascentMD ra(e.objective, e.region, RationalTau{1.0, 0.0}, 1.0, IntegratorConfig::grid(1, 16));
    EXPECT_EQ(ra.log_tau_of_value(0.0), 0.0);
    EXPECT_THROW(ra.log_tau_of_value(-1.0), InvalidShiftError);
}

TEST(Tau, RationalAtOracleMinimizerIsOne) {
    const auto& o = paper1d_oracle();
    const auto m = make("paper1d", 1.0, RationalTau{1.0, o.f});
    const auto mesh = m.finest_rule();
    const auto f = m.node_f(m.level_count() - 1);
    const auto it = std::min_element(f.begin(), f.end());
    EXPECT_NEAR(m.log_tau(mesh.node(static_cast<std::size_t>(it - f.begin()))), 0.0, 1e-4);
}

TEST(Tau, RationalShiftBelowNodeValues) {
    const auto m = make("paper1d", 2.0, RationalTau{});
    const auto f = m.node_f(m.level_count() - 1);
    for (double v : f) EXPECT_GT(v - m.lower_shift() + m.rational_p(), 0.0);
    EXPECT_LT(m.lower_shift(), *std::min_element(f.begin(), f.end()));
}

TEST(Tau, InvalidRationalParameters) {
    const auto e = catalog_get("paper1d");
    EXPECT_THROW(NascentMD(e.objective, e.region, RationalTau{0.0, std::nullopt}, 1.0, IntegratorConfig::grid(1, 64)), InputError);
    // An explicit L far above f* leaves f - L + p <= 0 on nodes.
    EXPECT_THROW(NascentMD(e.objective, e.region, RationalTau{1.0, 5.0}, 1.0, IntegratorConfig::grid(1, 64)),
                 InvalidShiftError);
}

TEST(Density, UniformAtZeroK) {
    const auto m = make("paper1d", 0.0);
    for (double x : {0.0, 1.3, 5.0}) EXPECT_NEAR(m.log_density(std::vector<double>{x}), std::log(0.2), 1e-13);
}

TEST(Density, ConstantFunctionIsUniformForAnyK) {
    for (const TauKind& tau : {TauKind{ExponentialTau{}}, TauKind{RationalTau{}}})
        for (double k : {-3.0, 0.0, 1.0, 1000.0}) {
            const auto m = make("const3", k, tau);
            EXPECT_NEAR(m.log_density(std::vector<double>{0.4}), 0.0, 1e-12);
        }
}

TEST(Density, NormalizationAllCatalogBothTau) {
    for (const auto& name : catalog_names()) {
        const auto e = catalog_get(name);
        const auto ic = IntegratorConfig::default_for(e.objective.dim);
        for (const TauKind& tau : {TauKind{ExponentialTau{}}, TauKind{RationalTau{}}}) {
            const NascentMD base(e.objective, e.region, tau, 0.0, ic);
            for (double k : {0.0, 1.0, 3.0, 9.0, 100.0, 1000.0}) {
                const auto mass = total_mass(base.with_k(k), ic);
                EXPECT_NEAR(mass.value, 1.0, 1e-10) << name << " k=" << k;
            }
        }
    }
}

// A different, finer grid than the one defining the normalizer.
TEST(Density, NormalizationOnIndependentGrid) {
    const auto m = make("paper1d", 9.0, ExponentialTau{}, IntegratorConfig::grid(1, 4096));
    const auto mass = total_mass(m, IntegratorConfig::grid(1, 20000));
    EXPECT_NEAR(mass.value, 1.0, 1e-6);
}

TEST(Density, NonnegativeAndFiniteAtLargeK) {
    const auto m = make("paper2d", 1000.0);
    for (const auto& x : sample_uniform(m.region(), 200, 5)) {
        const double d = m.density(x);
        EXPECT_GE(d, 0.0);
        EXPECT_TRUE(std::isfinite(d));
    }
}

TEST(Density, NegativeKIsAllowed) {
    const auto m = make("paper1d", -2.0);
    EXPECT_NEAR(total_mass(m, m.integrator()).value, 1.0, 1e-12);
    EXPECT_GT(m.expect_f().value, make("paper1d", 0.0).expect_f().value);
}

TEST(Expectation, UniformCaseIsPlainAverage) {
    const auto m = make("paper1d", 0.0);
    const auto e = m.expect_f();
    const auto avg = integrate(m.region(), [](std::span<const double> x) { return oracle::paper1d(x[0]); },
                               m.integrator());
    EXPECT_NEAR(e.value, avg.value / 5.0, 1e-14);
}

TEST(Expectation, ConstantFunction) {
    for (double k : {0.0, 4.0, 500.0}) {
        const auto m = make("const3", k);
        EXPECT_DOUBLE_EQ(m.expect_f().value, 3.0);
        EXPECT_EQ(m.variance_f().value, 0.0);
    }
}

TEST(Expectation, Paper1dMatchesDenseOracle) {
    for (double k : {1.0, 3.0, 9.0}) {
        const double ref = oracle::expectation_1d(oracle::paper1d, [k](double x) { return -k * oracle::paper1d(x); },
                                                  0.0, 5.0, 1000000);
        const auto e = make("paper1d", k).expect_f();
        EXPECT_GT(e.error, 0.0);
        EXPECT_NEAR(e.value, ref, e.error) << "k=" << k;
    }
}

TEST(Expectation, RationalMatchesDenseOracle) {
    const auto m = make("paper1d", 3.0, RationalTau{});
    const double L = m.lower_shift();
    const double ref = oracle::expectation_1d(
        oracle::paper1d, [L](double x) { return -3.0 * std::log(oracle::paper1d(x) - L + 1.0); }, 0.0, 5.0, 1000000);
    const auto e = m.expect_f();
    EXPECT_NEAR(e.value, ref, e.error);
}

TEST(Expectation, PowerAndShift) {
    const auto m = make("paper1d", 2.0);
    const ScalarField f = [](std::span<const double> x) { return oracle::paper1d(x[0]); };
    const auto e1 = m.expectation(f);
    EXPECT_NEAR(e1.value, m.expect_f().value, 1e-14);
    const auto e2 = m.expectation(f, 2.0);
    EXPECT_NEAR(e2.value - e1.value * e1.value, m.variance_f().value, 1e-12);
    const auto sq = m.expectation(f, 0.5);
    EXPECT_GT(sq.value, 0.0);

    const ScalarField id = [](std::span<const double> x) { return x[0]; };
    const auto plain = m.expectation(id);
    const auto shifted = m.expectation(id, 1.0, Point{0.75});
    EXPECT_NEAR(shifted.value, plain.value + 0.75, 1e-13);
    EXPECT_THROW(m.expectation(id, 1.0, Point{0.1, 0.2}), InputError);
}

TEST(Expectation, NonIntegerPowerOfNonPositive) {
    const auto m = make("paper1d", 1.0);
    const ScalarField g = [](std::span<const double> x) { return x[0] - 1.0; };
    EXPECT_THROW(m.expectation(g, 0.5), DomainError);
    EXPECT_NO_THROW(m.expectation(g, 3.0));
}

TEST(Variance, UniformOfIdentity) {
    Objective id;
    id.name = "x";
    id.dim = 1;
    id.eval = [](std::span<const double> x) { return x[0]; };
    const NascentMD m(id, CompactRegion({0.0}, {1.0}), ExponentialTau{}, 0.0, IntegratorConfig::grid(1, 1024));
    const auto v = m.variance_f();
    // midpoint-rule variance is 1/12 - h^2/12
    EXPECT_NEAR(v.value, 1.0 / 12.0, std::max(v.error, 1e-7));
}

TEST(Variance, Paper1dMatchesDenseOracle) {
    const auto lw = [](double x) { return -3.0 * oracle::paper1d(x); };
    const double ef = oracle::expectation_1d(oracle::paper1d, lw, 0.0, 5.0, 1000000);
    const double var = oracle::expectation_1d(
        [ef](double x) { return (oracle::paper1d(x) - ef) * (oracle::paper1d(x) - ef); }, lw, 0.0, 5.0, 1000000);
    const auto v = make("paper1d", 3.0).variance_f();
    EXPECT_NEAR(v.value, var, v.error);
}

TEST(GradDensity, ZeroAtKZeroAndAtInteriorMinimizer) {
    const auto m0 = make("paper1d", 0.0);
    EXPECT_EQ(m0.grad_density(std::vector<double>{2.0})[0], 0.0);
    const auto m = make("paper1d", 5.0);
    // The oracle locates x* to ~1e-8, so f'(x*) is only zero to ~1e-7.
    EXPECT_NEAR(m.grad_density(paper1d_oracle().x)[0], 0.0, 1e-6 * m.k() * m.density(paper1d_oracle().x));
}

TEST(GradDensity, FiniteDifferenceAtOne) {
    for (const TauKind& tau : {TauKind{ExponentialTau{}}, TauKind{RationalTau{}}}) {
        const auto m = make("paper1d", 3.0, tau);
        const double h = 1e-5;
        const double fd = (m.density(std::vector<double>{1.0 + h}) - m.density(std::vector<double>{1.0 - h})) / (2 * h);
        const double g = m.grad_density(std::vector<double>{1.0})[0];
        EXPECT_NEAR(g, fd, 1e-5 * std::abs(g));
    }
}

TEST(DdkDensity, ConstantIsZero) {
    const auto m = make("const3", 7.0);
    EXPECT_EQ(m.ddk_density(std::vector<double>{0.3}), 0.0);
}

TEST(DdkDensity, IntegratesToZero) {
    for (double k : {0.5, 3.0, 50.0}) {
        const auto m = make("paper2d", k);
        const auto e = integrate(m.region(), [&](std::span<const double> x) { return m.ddk_density(x); },
                                 m.integrator());
        EXPECT_NEAR(e.value, 0.0, std::max(e.error, 1e-10)) << "k=" << k;
    }
}

TEST(DdkDensity, FiniteDifferenceAtTwo) {
    for (const TauKind& tau : {TauKind{ExponentialTau{}}, TauKind{RationalTau{}}}) {
        const auto m = make("paper1d", 3.0, tau);
        const double dk = 1e-4;
        const Point x{2.0};
        const double fd = (m.with_k(3.0 + dk).density(x) - m.with_k(3.0 - dk).density(x)) / (2 * dk);
        const double d = m.ddk_density(x);
        EXPECT_NEAR(d, fd, 1e-3 * std::abs(d));
    }
}

TEST(MeanLocation, CentroidAtZeroK) {
    const auto m = make("paper2d", 0.0);
    const auto loc = m.mean_location();
    EXPECT_NEAR(loc.value[0], 1.75, 1e-12);
    EXPECT_NEAR(loc.value[1], 1.75, 1e-12);

    const std::vector<double> lo{0, 0}, hi{1, 1};
    const CompactRegion simplex(lo, hi, {constraint_get("simplex", lo, hi)});
    const NascentMD ms(catalog_get("quadratic").objective, simplex, ExponentialTau{}, 0.0,
                       IntegratorConfig::grid(2, 512));
    const auto c = ms.mean_location();
    EXPECT_NEAR(c.value[0], 1.0 / 3.0, 5e-3);
    EXPECT_NEAR(c.value[1], 1.0 / 3.0, 5e-3);
}

TEST(MeanLocation, SymmetricQuadratic) {
    const NascentMD m(catalog_get("quadratic").objective, CompactRegion({-1.0, -1.0}, {1.0, 1.0}), ExponentialTau{},
                      0.0, IntegratorConfig::default_for(2));
    for (double k : {0.0, 1.0, 10.0, 100.0}) {
        const auto loc = m.with_k(k).mean_location();
        EXPECT_NEAR(loc.value[0], 0.0, 1e-12);
        EXPECT_NEAR(loc.value[1], 0.0, 1e-12);
    }
}

TEST(MeanLocation, Paper1dLargeKNearArgmin) {
    const auto loc = make("paper1d", 512.0).mean_location();
    EXPECT_NEAR(loc.value[0], paper1d_oracle().x[0], 0.05);
}

TEST(Limit, MassConcentratesNearArgmin) {
    const auto m = make("paper1d", 1000.0);
    const double xs = paper1d_oracle().x[0];
    const ScalarField near = [xs](std::span<const double> x) { return std::abs(x[0] - xs) <= 0.1 ? 1.0 : 0.0; };
    EXPECT_GT(m.expectation(near).value, 0.99);
}

TEST(Monotonicity, ExpectationDecreasesForBothTau) {
    for (const TauKind& tau : {TauKind{ExponentialTau{}}, TauKind{RationalTau{}}}) {
        const auto base = make("paper2d", 0.0, tau);
        double prev = INFINITY;
        for (double k : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
            const auto e = base.with_k(k).expect_f();
            EXPECT_LT(e.value, prev) << "k=" << k;
            EXPECT_GE(e.value, oracle::paper2d_min().f);
            prev = e.value;
        }
    }
}

TEST(Cache, ConcurrentFirstUseIsConsistent) {
    const auto base = make("paper2d", 0.0);
    std::vector<double> a(8), b(8);
    {
        std::vector<std::jthread> threads;
        for (int t = 0; t < 8; ++t)
            threads.emplace_back([&, t] { a[t] = base.with_k(1.0 + t % 2).log_normalizer().log_value; });
    }
    const auto fresh = make("paper2d", 0.0);
    for (int t = 0; t < 8; ++t) EXPECT_EQ(a[t], fresh.with_k(1.0 + t % 2).log_normalizer().log_value);
}

TEST(MonteCarlo, ExpectationWithinError) {
    const auto g = make("paper2d", 2.0);
    const auto mc = make("paper2d", 2.0, ExponentialTau{}, IntegratorConfig::monte_carlo(200000, 7));
    const auto eg = g.expect_f(), em = mc.expect_f();
    EXPECT_GT(em.error, 0.0);
    EXPECT_NEAR(eg.value, em.value, eg.error + em.error);
    const auto vg = g.variance_f(), vm = mc.variance_f();
    EXPECT_NEAR(vg.value, vm.value, vg.error + vm.error);
    EXPECT_NEAR(total_mass(mc, mc.integrator()).value, 1.0, 1e-10);
}

// The reported error is 3 standard errors: over many seeds the scaled
// deviations should have unit spread and no bias.
TEST(MonteCarlo, ErrorIsCalibratedAcrossSeeds) {
    const double ref = make("paper2d", 2.0, ExponentialTau{}, IntegratorConfig::grid(2, 1024)).expect_f().value;
    const int seeds = 40;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const auto e = make("paper2d", 2.0, ExponentialTau{}, IntegratorConfig::monte_carlo(20000, 1000 + s)).expect_f();
        const double z = (e.value - ref) / (e.error / 3.0);
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / seeds, rms = std::sqrt(sum2 / seeds);
    EXPECT_LT(std::abs(mean), 0.6);
    EXPECT_GT(rms, 0.7);
    EXPECT_LT(rms, 1.4);
}

TEST(Nmd, InputValidation) {
    const auto e = catalog_get("paper2d");
    EXPECT_THROW(NascentMD(e.objective, CompactRegion({0.0}, {1.0}), ExponentialTau{}, 1.0,
                           IntegratorConfig::grid(1, 16)),
                 InputError);
    EXPECT_THROW(NascentMD(e.objective, e.region, ExponentialTau{}, NAN, IntegratorConfig::grid(2, 16)), InputError);
}
