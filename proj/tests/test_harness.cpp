#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "knnmm/harness.hpp"

using namespace knnmm;

TEST(Harness, ThreadsFromEnv) {
    setenv("KNN_MINIMAX_THREADS", "3", 1);
    EXPECT_EQ(threads_from_env(), 3);
    setenv("KNN_MINIMAX_THREADS", "abc", 1);
    EXPECT_GE(threads_from_env(), 1);  // unparsable: hardware fallback
    setenv("KNN_MINIMAX_THREADS", "0", 1);
    EXPECT_GE(threads_from_env(), 1);
    unsetenv("KNN_MINIMAX_THREADS");
    EXPECT_GE(threads_from_env(), 1);
}

TEST(Harness, ParallelForWritesEverySlotOnAnyWorkerCount) {
    for (int threads : {1, 2, 7}) {
        std::vector<double> out(101, -1.0);
        parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = static_cast<double>(i * i); });
        for (std::size_t i = 0; i < out.size(); ++i)
            ASSERT_DOUBLE_EQ(out[i], static_cast<double>(i * i)) << "threads=" << threads;
    }
    // zero tasks: body never runs
    parallel_for(0, 4, [&](std::size_t) { FAIL() << "body called for empty range"; });
}

TEST(Harness, ParallelForPropagatesExceptions) {
    const auto boom = [](std::size_t i) {
        if (i == 17) throw std::runtime_error("boom");
    };
    EXPECT_THROW(parallel_for(64, 4, boom), std::runtime_error);
    EXPECT_THROW(parallel_for(64, 1, boom), std::runtime_error);
}

TEST(Harness, GeneratorModelDispatch) {
    const GeneratorModel loc = make_location_model(ZFamily::gauss(2.0), 1.0);
    EXPECT_EQ(model_label(loc), "gauss(2),b=1");
    EXPECT_DOUBLE_EQ(model_bayes_risk(loc), 0.3085375387259869);
    EXPECT_DOUBLE_EQ(model_eta(loc, 0.0), 0.5);
    EXPECT_EQ(model_bayes_classify(loc, 1.0), 1);
    EXPECT_DOUBLE_EQ(model_density(loc, 0.5),
                     density_at(std::get<LocationModel>(loc), 0.5));

    const GeneratorModel net = make_assouad(8, 2, 0.25, {+1, -1});
    EXPECT_EQ(model_label(net), "assouad-const(q=8,m=2,omega=0.25)");
    EXPECT_DOUBLE_EQ(model_bayes_risk(net), 0.48046875);

    // json routing picks the right alternative
    const GeneratorModel back_loc = model_from_json(model_to_json(loc));
    EXPECT_TRUE(std::holds_alternative<LocationModel>(back_loc));
    EXPECT_EQ(model_label(back_loc), model_label(loc));
    const GeneratorModel back_net = model_from_json(model_to_json(net));
    EXPECT_TRUE(std::holds_alternative<AssouadNetwork>(back_net));
    EXPECT_EQ(model_label(back_net), model_label(net));

    RngStream rng(5, 0);
    EXPECT_EQ(sample_model(loc, 7, rng).size(), 7u);
    EXPECT_EQ(sample_model(net, 7, rng).size(), 7u);
}

TEST(Harness, RunExcessRiskValidation) {
    ExperimentConfig cfg;
    cfg.schedules = {KSchedule::fixed(1)};
    cfg.n_train = 0;
    EXPECT_THROW(run_excess_risk(cfg), std::invalid_argument);
    cfg.n_train = 10;
    cfg.n_test = 0;
    EXPECT_THROW(run_excess_risk(cfg), std::invalid_argument);
    cfg.n_test = 10;
    cfg.replications = 0;
    EXPECT_THROW(run_excess_risk(cfg), std::invalid_argument);
    cfg.replications = 2;
    cfg.schedules.clear();
    EXPECT_THROW(run_excess_risk(cfg), std::invalid_argument);
}

TEST(Harness, DegenerateModelHasZeroExcess) {
    // Z == 0: every point sits exactly on its class center, so 1-NN is perfect
    ExperimentConfig cfg;
    cfg.model = make_location_model(ZFamily::degenerate(), 1.0);
    cfg.n_train = 50;
    cfg.n_test = 40;
    cfg.replications = 5;
    cfg.schedules = {KSchedule::fixed(1)};
    cfg.seed = 9;
    cfg.threads = 1;
    const ExperimentResult res = run_excess_risk(cfg);
    const ScheduleSummary& s = res.schedules[0];
    EXPECT_DOUBLE_EQ(s.mean_risk, 0.0);
    EXPECT_DOUBLE_EQ(s.mean_excess, 0.0);  // R* = 0 for separated classes
    EXPECT_DOUBLE_EQ(s.std_error, 0.0);
    EXPECT_DOUBLE_EQ(s.bayes_risk, 0.0);
}

TEST(Harness, SummaryIdentitiesAndPairing) {
    ExperimentConfig cfg;
    cfg.model = make_location_model(ZFamily::gauss(2.0), 1.0);
    cfg.n_train = 60;
    cfg.n_test = 50;
    cfg.replications = 12;
    cfg.schedules = {KSchedule::fixed(3), KSchedule::fixed(3), KSchedule::compact_rate()};
    cfg.seed = 21;
    cfg.threads = 1;
    const ExperimentResult res = run_excess_risk(cfg);
    ASSERT_EQ(res.schedules.size(), 3u);
    ASSERT_EQ(res.bayes_empirical_per_rep.size(), 12u);
    for (const auto& s : res.schedules) {
        ASSERT_EQ(s.per_rep_risk.size(), 12u);
        EXPECT_EQ(s.replications, 12u);
        // summaries are exact functions of the per-replication risks
        EXPECT_DOUBLE_EQ(s.mean_risk, mean(s.per_rep_risk));
        EXPECT_DOUBLE_EQ(s.std_error, standard_error(s.per_rep_risk));
        EXPECT_DOUBLE_EQ(s.mean_excess, s.mean_risk - s.bayes_risk);
        EXPECT_DOUBLE_EQ(s.mean_excess_empirical,
                         s.mean_risk - mean(res.bayes_empirical_per_rep));
        EXPECT_DOUBLE_EQ(s.bayes_risk, 0.3085375387259869);
    }
    // identical schedules on shared train/test pairs give identical risks
    EXPECT_EQ(res.schedules[0].per_rep_risk, res.schedules[1].per_rep_risk);
    EXPECT_EQ(res.schedules[0].schedule, "fixed(3)");
    EXPECT_EQ(res.schedules[2].schedule, "compact");
}

TEST(Harness, BitIdenticalAcrossThreadCountsAndDensitySources) {
    ExperimentConfig cfg;
    cfg.model = make_location_model(ZFamily::cauchy(0.5), 0.5);
    cfg.n_train = 60;
    cfg.n_test = 50;
    cfg.replications = 16;
    cfg.schedules = {KSchedule::fixed(5), KSchedule::sliced_empirical(1.0)};
    cfg.seed = 42;
    cfg.density_source = ExperimentConfig::DensitySource::kde;

    cfg.threads = 1;
    const ExperimentResult serial = run_excess_risk(cfg);
    cfg.threads = 4;
    const ExperimentResult parallel = run_excess_risk(cfg);
    for (std::size_t s = 0; s < 2; ++s)
        EXPECT_EQ(serial.schedules[s].per_rep_risk, parallel.schedules[s].per_rep_risk);
    EXPECT_EQ(serial.bayes_empirical_per_rep, parallel.bayes_empirical_per_rep);

    // analytic density source runs the same pipeline without the KDE refit
    cfg.density_source = ExperimentConfig::DensitySource::analytic;
    cfg.threads = 1;
    const ExperimentResult analytic = run_excess_risk(cfg);
    cfg.threads = 3;
    const ExperimentResult analytic_mt = run_excess_risk(cfg);
    EXPECT_EQ(analytic.schedules[1].per_rep_risk, analytic_mt.schedules[1].per_rep_risk);
    // fixed-k column ignores the density source entirely
    EXPECT_EQ(analytic.schedules[0].per_rep_risk, serial.schedules[0].per_rep_risk);
}

TEST(Harness, StandardKPinnedValues) {
    EXPECT_EQ(standard_k(100, 1.0, 1), 7);    // floor(100^{2/5}) + 1
    EXPECT_EQ(standard_k(500, 1.0, 1), 13);
    EXPECT_EQ(standard_k(1000, 1.0, 1), 16);
    EXPECT_EQ(standard_k(100, 0.5, 1), 8);    // floor(100^{2/4.5}) + 1
    EXPECT_EQ(standard_k(100, 1.0, 3), 4);    // floor(100^{2/7}) + 1
}

TEST(Harness, RunTable2ShapeOnTinyBudget) {
    const std::vector<Table2Cell> cells = run_table2(3, 8, {30, 50}, 20, 1);
    ASSERT_EQ(cells.size(), 10u);
    const std::vector<std::string> names{"gauss", "cauchy-half", "cauchy-one", "power-one",
                                         "power-two"};
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Table2Cell& c = cells[i];
        EXPECT_EQ(c.model, names[i / 2]);
        EXPECT_EQ(c.n, i % 2 == 0 ? 30u : 50u);
        EXPECT_DOUBLE_EQ(c.alpha, 1.0);
        EXPECT_GE(c.diff_se, 0.0);
        if (c.standard_excess != 0.0)
            EXPECT_NEAR(c.improvement_pct,
                        (c.standard_excess - c.sliced_excess) / c.standard_excess * 100.0, 1e-12);
    }
    const std::string csv = table2_to_csv(cells);
    EXPECT_EQ(csv.rfind("model,alpha,n,standard,standard_se,sliced,sliced_se,improvement_pct,diff_se\n",
                        0),
              0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST(Harness, RunRatesValidationAndTinyRun) {
    EXPECT_THROW(run_rates({}, {10, 20, 30, 40}, 1, 2, 10), std::invalid_argument);
    EXPECT_THROW(run_rates({0.0}, {10, 20, 30, 40}, 1, 2, 10), std::invalid_argument);
    EXPECT_THROW(run_rates({1.0}, {10, 20, 30}, 1, 2, 10), std::invalid_argument);
    EXPECT_THROW(run_rates({1.0}, {10, 20, 20, 40}, 1, 2, 10), std::invalid_argument);

    const std::vector<RateCurve> curves = run_rates({1.0}, {30, 60, 120, 240}, 11, 30, 200, 0.25, 1);
    ASSERT_EQ(curves.size(), 1u);
    const RateCurve& c = curves[0];
    EXPECT_DOUBLE_EQ(c.g, 1.0);
    ASSERT_EQ(c.points.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c.points[i].n, std::vector<std::size_t>({30, 60, 120, 240})[i]);
        EXPECT_GT(c.points[i].mean_excess, 0.0);
        EXPECT_GT(c.points[i].std_error, 0.0);
    }
    EXPECT_LT(c.fit.slope, 0.0);  // risk decays with n
    const std::string csv = rates_to_csv(curves);
    EXPECT_EQ(csv.rfind("g,n,mean_excess,se,slope,intercept,r2\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Harness, SdaBayesRiskOracle) {
    // two gauss(sigma=2) components at -1/+1: same overlap as the location model
    const ComponentDensity m0{ZFamily::gauss(2.0), -1.0};
    const ComponentDensity m1{ZFamily::gauss(2.0), 1.0};
    EXPECT_NEAR(sda_bayes_risk(m0, m1), 0.3085375387259869, 1e-9);
    // identical classes cannot be told apart
    EXPECT_NEAR(sda_bayes_risk(m0, m0), 0.5, 1e-9);
    // pushing the centers apart shrinks the overlap
    const ComponentDensity far1{ZFamily::gauss(2.0), 5.0};
    EXPECT_LT(sda_bayes_risk(m0, far1), 0.1);
}

TEST(Harness, RunSdaValidationAndSanity) {
    const ComponentDensity m0{ZFamily::gauss(2.0), -1.0};
    const ComponentDensity m1{ZFamily::gauss(2.0), 1.0};
    EXPECT_THROW(run_sda(m0, m1, 0, 1, 10, 5, 1), std::invalid_argument);
    EXPECT_THROW(run_sda(m0, m1, 10, 0, 10, 5, 1), std::invalid_argument);
    EXPECT_THROW(run_sda(m0, m1, 10, 21, 10, 5, 1), std::invalid_argument);  // k > 2n
    EXPECT_THROW(run_sda(m0, m1, 10, 1, 0, 5, 1), std::invalid_argument);
    EXPECT_THROW(run_sda(m0, m1, 10, 1, 10, 0, 1), std::invalid_argument);

    const ExperimentResult res = run_sda(m0, m1, 40, 9, 100, 20, 5, 1);
    ASSERT_EQ(res.schedules.size(), 1u);
    const ScheduleSummary& s = res.schedules[0];
    EXPECT_EQ(s.schedule, "sda(k=9)");
    EXPECT_EQ(s.replications, 20u);
    EXPECT_NEAR(s.bayes_risk, 0.3085375387259869, 1e-9);
    // the empirical risk cannot sit meaningfully below the Bayes floor
    EXPECT_GE(s.mean_risk, s.bayes_risk - 2.0 * s.std_error);
    EXPECT_LE(s.mean_risk, 0.5 + 3.0 * s.std_error);
    // deterministic in the seed
    const ExperimentResult again = run_sda(m0, m1, 40, 9, 100, 20, 5, 2);
    EXPECT_EQ(s.per_rep_risk, again.schedules[0].per_rep_risk);
}

TEST(Harness, PoissonizationCheck) {
    const ComponentDensity m0{ZFamily::gauss(2.0), -1.0};
    const ComponentDensity m1{ZFamily::gauss(2.0), 1.0};
    EXPECT_THROW(poissonization_check(m0, m1, 0.0, 30, 3, 500, 1), std::invalid_argument);
    EXPECT_THROW(poissonization_check(m0, m1, 0.0, 30, 0, 10000, 1), std::invalid_argument);

    const PoissonizationResult res = poissonization_check(m0, m1, 0.3, 30, 3, 10000, 7, 2);
    ASSERT_EQ(res.eta_two_sample.size(), 10000u);
    ASSERT_EQ(res.eta_single.size(), 10000u);
    for (double v : {res.eta_two_sample[0], res.eta_single[0], res.eta_two_sample[9999]}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    // the two constructions share one law; KS at 1e4 draws resolves ~0.02
    EXPECT_LT(res.ks_distance, 0.06);
    EXPECT_DOUBLE_EQ(res.ks_distance, ks_distance(res.eta_two_sample, res.eta_single));
}

TEST(Harness, ResultReports) {
    ExperimentConfig cfg;
    cfg.model = make_location_model(ZFamily::cauchy(0.5), 0.5);
    cfg.n_train = 30;
    cfg.n_test = 20;
    cfg.replications = 4;
    cfg.schedules = {KSchedule::fixed(3)};
    cfg.seed = 13;
    cfg.threads = 1;
    const ExperimentResult res = run_excess_risk(cfg);

    const std::string csv = result_to_csv(model_label(cfg.model), 30, res, 13);
    EXPECT_EQ(csv.rfind("model,n,schedule,mean_excess,se,mean_risk,bayes_risk,reps,seed\n", 0), 0u);
    // the comma inside the label forces RFC-4180 quoting
    EXPECT_NE(csv.find("\"cauchy(0.5),b=0.5\",30,fixed(3),"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);

    const nlohmann::json j = result_to_json(model_label(cfg.model), 30, res, 13);
    EXPECT_EQ(j.at("model").get<std::string>(), "cauchy(0.5),b=0.5");
    EXPECT_EQ(j.at("n").get<std::size_t>(), 30u);
    EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 13u);
    ASSERT_EQ(j.at("schedules").size(), 1u);
    const auto& s = j.at("schedules")[0];
    EXPECT_EQ(s.at("schedule").get<std::string>(), "fixed(3)");
    EXPECT_DOUBLE_EQ(s.at("mean_excess").get<double>(), res.schedules[0].mean_excess);
    EXPECT_EQ(s.at("reps").get<std::size_t>(), 4u);
}
