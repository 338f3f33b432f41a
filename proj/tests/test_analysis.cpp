#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "knnmm/analysis.hpp"

using namespace knnmm;

TEST(Analysis, TailSpecPsiAndInverse) {
    EXPECT_THROW(TailSpec::power(0.0), std::invalid_argument);
    EXPECT_THROW(TailSpec::power(1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(TailSpec::power_log(1.0, -0.5), std::invalid_argument);

    const TailSpec id = TailSpec::identity();
    EXPECT_DOUBLE_EQ(id.psi(0.37), 0.37);
    EXPECT_DOUBLE_EQ(id.psi_inv(0.37), 0.37);
    EXPECT_DOUBLE_EQ(id.psi(-1.0), 0.0);  // clipped outside the domain
    EXPECT_THROW(id.psi_inv(0.0), std::invalid_argument);

    const TailSpec pw = TailSpec::power(2.0, 3.0);
    EXPECT_DOUBLE_EQ(pw.psi(0.1), 3.0 * 0.01);
    EXPECT_DOUBLE_EQ(pw.psi_inv(0.03), std::sqrt(0.01));
    for (double e : {1e-6, 1e-3, 0.2, 0.9})
        EXPECT_NEAR(pw.psi_inv(pw.psi(e)), e, 1e-12 * e);

    const TailSpec pl = TailSpec::power_log(1.0, 1.0);
    EXPECT_DOUBLE_EQ(pl.domain_cap(), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(TailSpec::power_log(2.0, 1.0).domain_cap(), std::exp(-0.5));
    EXPECT_DOUBLE_EQ(TailSpec::power(3.0).domain_cap(), 1.0);
    for (double e : {1e-8, 1e-4, 0.05, 0.3})
        EXPECT_NEAR(pl.psi_inv(pl.psi(e)), e, 1e-9 * e);
    // at/above psi(cap) the inverse saturates to the cap
    const double cap = pl.domain_cap();
    EXPECT_DOUBLE_EQ(pl.psi_inv(pl.psi(cap)), cap);
    EXPECT_DOUBLE_EQ(pl.psi_inv(pl.psi(cap) + 0.5), cap);
    EXPECT_THROW(pl.psi_inv(1e-310), NoBracket);  // below psi(1e-300)
}

TEST(Analysis, SolveBalancePinnedCases) {
    // identity tail, lower side, alpha=1, d=1: 1/n = eps^3 * eps -> eps = n^{-1/4}
    const BalanceResult lower =
        solve_balance(TailSpec::identity(), {1.0, 1, 1e5, RateQuery::Side::lower});
    EXPECT_NEAR(lower.scale, std::pow(10.0, -1.25), 1e-9 * lower.scale);
    EXPECT_NEAR(lower.rate, std::pow(10.0, -2.5), 1e-9 * lower.rate);
    EXPECT_EQ(lower.k, 0);  // k is an upper-side quantity
    // power tail g=2, upper side, alpha=1, d=1, n=1e4: nu^4 = 1e-4
    const BalanceResult upper =
        solve_balance(TailSpec::power(2.0), {1.0, 1, 1e4, RateQuery::Side::upper});
    EXPECT_NEAR(upper.scale, 0.1, 1e-9);
    EXPECT_NEAR(upper.rate, 0.01, 1e-9);
    EXPECT_EQ(upper.k, 100);
}

TEST(Analysis, SolveBalanceMatchesClosedFormOnRandomPowerTails) {
    // power tail solves in closed form:
    //   upper: nu   = (C^{1/g}/n)^{1/((1+alpha)/g + 2 + d)}
    //   lower: eps  = (C^{1/g}/n)^{1/(2 + d + alpha/g)}
    std::mt19937 gen(20240817);
    std::uniform_real_distribution<double> ug(0.5, 4.0), uc(0.5, 3.0), ua(0.3, 2.0),
        un(2.0, 8.0);
    std::uniform_int_distribution<int> ud(1, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const double g = ug(gen), C = uc(gen), alpha = ua(gen);
        const int d = ud(gen);
        const double n = std::pow(10.0, un(gen));
        const TailSpec tail = TailSpec::power(g, C);
        const double base = std::pow(C, 1.0 / g) / n;

        const BalanceResult up = solve_balance(tail, {alpha, d, n, RateQuery::Side::upper});
        const double nu = std::pow(base, 1.0 / ((1.0 + alpha) / g + 2.0 + d));
        EXPECT_NEAR(up.scale, nu, 1e-9 * nu);
        EXPECT_NEAR(up.rate, std::pow(nu, 1.0 + alpha), 1e-8 * up.rate);
        EXPECT_EQ(up.k, std::llround(1.0 / (up.scale * up.scale)));

        const BalanceResult lo = solve_balance(tail, {alpha, d, n, RateQuery::Side::lower});
        const double eps = std::pow(base, 1.0 / (2.0 + d + alpha / g));
        EXPECT_NEAR(lo.scale, eps, 1e-9 * eps);
    }
}

TEST(Analysis, SolveBalancePowerLogResidualAndValidation) {
    const TailSpec tail = TailSpec::power_log(1.0, 1.0);
    double prev_rate = 1.0;
    for (double n : {1e3, 1e4, 1e5, 1e6}) {
        const BalanceResult r = solve_balance(tail, {1.0, 1, n, RateQuery::Side::upper});
        const double residual =
            tail.psi_inv(std::pow(r.scale, 2.0)) * std::pow(r.scale, 3.0) * n;
        EXPECT_NEAR(residual, 1.0, 1e-6);
        EXPECT_LT(r.rate, prev_rate);  // rates improve with n
        prev_rate = r.rate;
    }
    EXPECT_THROW(solve_balance(TailSpec::identity(), {0.0, 1, 100.0, RateQuery::Side::upper}),
                 std::invalid_argument);
    EXPECT_THROW(solve_balance(TailSpec::identity(), {1.0, 0, 100.0, RateQuery::Side::upper}),
                 std::invalid_argument);
    EXPECT_THROW(solve_balance(TailSpec::identity(), {1.0, 1, 1.5, RateQuery::Side::upper}),
                 std::invalid_argument);
}

TEST(Analysis, FitRateRecoversExactPowerLaw) {
    std::vector<std::pair<double, double>> pts;
    for (double n : {100.0, 316.0, 1000.0, 3162.0, 10000.0}) pts.push_back({n, 3.0 * std::pow(n, -0.5)});
    const RateFit fit = fit_rate(pts);
    EXPECT_NEAR(fit.slope, -0.5, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
    EXPECT_GT(fit.r2, 1.0 - 1e-12);
    EXPECT_THROW(fit_rate({{100.0, 0.1}, {200.0, 0.05}}), std::invalid_argument);
    EXPECT_THROW(fit_rate({{100.0, 0.1}, {200.0, 0.0}, {300.0, 0.2}}), NonPositiveInput);
    EXPECT_THROW(fit_rate({{-5.0, 0.1}, {200.0, 0.1}, {300.0, 0.2}}), NonPositiveInput);
    EXPECT_THROW(fit_rate({{100.0, 0.1}, {100.0, 0.2}, {100.0, 0.3}}), std::invalid_argument);
}

TEST(Analysis, BoundOracles) {
    // 2 e^{-2 * 20 * 0.04} = 2 e^{-1.6}
    EXPECT_NEAR(hoeffding_bound(20, 0.2), 0.40379303598931077, 1e-15);
    EXPECT_DOUBLE_EQ(hoeffding_bound(5, 0.0), 2.0);
    EXPECT_THROW(hoeffding_bound(0, 0.1), std::invalid_argument);
    EXPECT_THROW(hoeffding_bound(5, -0.1), std::invalid_argument);

    EXPECT_NEAR(misclass_bound(20, 0.3, 0.1), 0.40379303598931077, 1e-15);
    EXPECT_DOUBLE_EQ(misclass_bound(20, 0.1, 0.3), 2.0);  // bias eats the whole margin
    EXPECT_THROW(misclass_bound(0, 0.1, 0.0), std::invalid_argument);

    // L (2/kappa)^{1/d} (k/(n a))^{1/d} + 2 e^{-3k/14} at L=kappa=a=d=1, k=100, n=1e6
    EXPECT_NEAR(bias_bound(1.0, 1.0, 100, 1000000, 1.0, 1), 0.00020000098791520377, 1e-18);
    EXPECT_THROW(bias_bound(0.0, 1.0, 1, 10, 1.0, 1), std::invalid_argument);
    EXPECT_THROW(bias_bound(1.0, 1.0, 0, 10, 1.0, 1), std::invalid_argument);

    EXPECT_NEAR(poisson_bound(50, 5, 0.1),
                2.0 * kPi * 50.0 * (2.0 * std::exp(-0.1) + std::exp(-50.0)), 1e-12);
    // t > 1 drops the e^{-n} sliver
    EXPECT_NEAR(poisson_bound(50, 5, 2.0), 2.0 * kPi * 50.0 * 2.0 * std::exp(-40.0), 1e-20);
    EXPECT_THROW(poisson_bound(0, 5, 0.1), std::invalid_argument);
    EXPECT_THROW(poisson_bound(50, 5, -1.0), std::invalid_argument);
}

TEST(Analysis, ConcentrationBoundsStayInRangeAndShrinkWithK) {
    for (double s : {0.01, 0.1, 0.3}) {
        double prev_h = 2.0 + 1e-9, prev_m = 2.0 + 1e-9;
        for (long long k = 1; k <= 400; k += 7) {
            const double h = hoeffding_bound(k, s);
            const double m = misclass_bound(k, s + 0.1, 0.1);
            EXPECT_GT(h, 0.0);
            EXPECT_LE(h, 2.0);
            EXPECT_LE(h, prev_h);
            EXPECT_GT(m, 0.0);
            EXPECT_LE(m, 2.0);
            EXPECT_LE(m, prev_m);
            prev_h = h;
            prev_m = m;
        }
    }
}

TEST(Analysis, EmpiricalTailMatchesLaplaceClosedForm) {
    // laplace(1), b=1: P(mu(X) < eps) = 2 eps exactly for eps < cosh(1)/(2e)
    const LocationModel m = make_location_model(ZFamily::laplace(1.0), 1.0);
    RngStream rng(20240817, 11);
    const std::size_t n_mc = 200000;
    const std::vector<double> grid{0.005, 0.01, 0.05};
    const std::vector<double> est = empirical_tail_grid(m, grid, n_mc, rng);
    ASSERT_EQ(est.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = 2.0 * grid[i];
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n_mc));
        EXPECT_NEAR(est[i], p, 5.0 * se) << "eps=" << grid[i];
        if (i > 0) EXPECT_GE(est[i], est[i - 1]);  // shared sample: exactly monotone
    }
    // scalar wrapper agrees with the grid on a fresh identical stream
    RngStream rng2(20240817, 11);
    EXPECT_DOUBLE_EQ(empirical_tail(m, 0.005, 1000, rng2),
                     [&] { RngStream r(20240817, 11); return empirical_tail_grid(m, {0.005}, 1000, r).front(); }());
    EXPECT_THROW(empirical_tail_grid(m, grid, 0, rng), std::invalid_argument);
}

TEST(Analysis, EmpiricalMarginAssouadAtomAndStrictness) {
    // constant network, c_phi/2q = 1/16 margin atom: P(0 < |eta-1/2| < 0.1)
    // equals the in-ball mass where the bump is positive = 2 * (omega q/4)(3/q)
    const AssouadNetwork net = make_assouad(8, 2, 0.25, {+1, -1});
    RngStream rng(20240817, 12);
    const double est = empirical_margin(net, 0.1, 200000, rng);
    EXPECT_NEAR(est, 0.375, 0.005);
    // uniform-Z model with disjoint supports: |eta - 1/2| == 1/2 a.s., so both
    // strict inequalities are exercised exactly
    const LocationModel sep = make_location_model(ZFamily::uniform(0.5), 1.0);
    RngStream rng2(20240817, 13);
    EXPECT_DOUBLE_EQ(empirical_margin(sep, 0.5, 2000, rng2), 0.0);   // gap < t fails at t = 1/2
    EXPECT_DOUBLE_EQ(empirical_margin(sep, 0.6, 2000, rng2), 1.0);   // gap > 0 passes
    EXPECT_THROW(empirical_margin(sep, 0.0, 10, rng2), std::invalid_argument);
    EXPECT_THROW(empirical_margin(sep, -1.0, 10, rng2), std::invalid_argument);
}

TEST(Analysis, MinimalMassRatio) {
    // smooth mixture: P(B(x,delta)) ~ 2 delta mu(x) for small delta
    const LocationModel m = make_location_model(ZFamily::gauss(2.0), 1.0);
    const std::vector<double> probes{-1.0, 0.0, 1.0, 2.0};
    const double ratio = minimal_mass_ratio(m, 0.01, probes);
    EXPECT_NEAR(ratio, 2.0, 1e-3);
    // the quadrature overload agrees with the exact-ball-mass template
    const std::function<double(double)> density_fn = [&](double x) { return density_at(m, x); };
    const double quad_ratio = minimal_mass_ratio(density_fn, 0.01, probes);
    EXPECT_NEAR(quad_ratio, ratio, 1e-7);
    // tent network concentrates mass on a q^{-gamma} spike: the whole tent mass
    // omega sits within delta, so the ratio is exactly 1/(q^gamma delta)
    const AssouadNetwork tent =
        make_assouad(32, 1, 0.25, {+1}, 1.0, AssouadNetwork::Variant::TentDensity, 2.0);
    const double spike = minimal_mass_ratio(tent, 0.05, {tent.center(0)});
    EXPECT_NEAR(spike, 1.0 / (1024.0 * 0.05), 1e-12);
    EXPECT_LT(spike, 0.1);
    EXPECT_THROW(minimal_mass_ratio(m, 0.0, probes), std::invalid_argument);
    EXPECT_THROW(minimal_mass_ratio(m, 0.1, {}), std::invalid_argument);
    const LocationModel sep = make_location_model(ZFamily::uniform(0.5), 1.0);
    EXPECT_THROW(minimal_mass_ratio(sep, 0.1, {100.0}), std::invalid_argument);
}

TEST(Analysis, DefaultProbes) {
    const LocationModel m = make_location_model(ZFamily::gauss(2.0), 1.0);
    const std::vector<double> probes = default_probes(m);
    ASSERT_EQ(probes.size(), 100u);
    EXPECT_DOUBLE_EQ(probes.front(), 0.0);
    for (int pct = 1; pct <= 99; ++pct)
        EXPECT_NEAR(mixture_cdf(m, probes[pct]), pct / 100.0, 1e-9);
    const AssouadNetwork net = make_assouad(8, 2, 0.25, {+1, -1});
    const std::vector<double> np = default_probes(net);
    ASSERT_EQ(np.size(), 3u * 2u + 2u);
    for (double x : np) EXPECT_GT(density_at(net, x), 0.0);
}

TEST(Analysis, HoeffdingCheckRows) {
    const LocationModel m = make_location_model(ZFamily::gauss(2.0), 1.0);
    RngStream rng(20240817, 14);
    const std::vector<long long> ks{5, 20};
    const std::vector<double> ss{0.05, 0.2};
    const auto rows = hoeffding_check(m, 0.5, 60, ks, ss, 1500, rng);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& row : rows) {
        EXPECT_DOUBLE_EQ(row.bound, hoeffding_bound(row.k, row.s));
        EXPECT_NEAR(row.mc_se,
                    std::sqrt(row.estimate * (1.0 - row.estimate) / 1500.0), 1e-15);
        EXPECT_GE(row.estimate, 0.0);
        EXPECT_LE(row.estimate, 1.0);
        EXPECT_LE(row.estimate, row.bound + 3.0 * row.mc_se) << "k=" << row.k << " s=" << row.s;
    }
    // same k, larger s: fewer exceedances on the shared sample
    EXPECT_GE(rows[0].estimate, rows[1].estimate);
    EXPECT_GE(rows[2].estimate, rows[3].estimate);
    // deterministic under a fresh stream with the same coordinates
    RngStream rng2(20240817, 14);
    const auto again = hoeffding_check(m, 0.5, 60, ks, ss, 1500, rng2);
    for (std::size_t i = 0; i < rows.size(); ++i)
        EXPECT_DOUBLE_EQ(rows[i].estimate, again[i].estimate);
    EXPECT_THROW(hoeffding_check(m, 0.5, 60, {0}, ss, 10, rng), std::invalid_argument);
    EXPECT_THROW(hoeffding_check(m, 0.5, 10, {20}, ss, 10, rng), std::invalid_argument);
    EXPECT_THROW(hoeffding_check(m, 0.5, 60, ks, ss, 0, rng), std::invalid_argument);
}

TEST(Analysis, GradientCriterionFrozenValues) {
    // standard normal: phi(x) = x^2/2 + ln sqrt(2 pi), phi'(x) = x
    const auto log_gauss = [](double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * kPi); };
    const auto grad_gauss = [](double x) { return -x; };
    EXPECT_NEAR(gradient_criterion(grad_gauss, log_gauss, 1.0, {10.0}),
                0.19639058252321806, 1e-15);
    // max over probes: |x|/phi(x) is larger at x=1
    EXPECT_NEAR(gradient_criterion(grad_gauss, log_gauss, 1.0, {1.0, 10.0}),
                1.0 / (0.5 + 0.5 * std::log(2.0 * kPi)), 1e-15);
    // two-sided exponential 1/2 e^{-|x|}: ratio 1/(x + ln 2)
    const auto log_lap = [](double x) { return -std::fabs(x) - std::log(2.0); };
    const auto grad_lap = [](double x) { return x >= 0.0 ? -1.0 : 1.0; };
    EXPECT_NEAR(gradient_criterion(grad_lap, log_lap, 1.0, {20.0}),
                0.048325176990933698, 1e-15);
    // mu = e^{-x}: phi = x, ratio exactly 1 at x = 1
    const auto log_exp = [](double x) { return -x; };
    const auto grad_exp = [](double) { return -1.0; };
    EXPECT_DOUBLE_EQ(gradient_criterion(grad_exp, log_exp, 1.0, {1.0}), 1.0);
    EXPECT_THROW(gradient_criterion(grad_exp, log_exp, 0.0, {1.0}), std::invalid_argument);
    EXPECT_THROW(gradient_criterion(grad_exp, log_exp, 1.0, {}), std::invalid_argument);
    EXPECT_THROW(gradient_criterion(grad_exp, log_exp, 1.0, {0.0}), std::invalid_argument);
    EXPECT_THROW(gradient_criterion(grad_exp, log_exp, 1.0, {-2.0}), std::invalid_argument);
}
