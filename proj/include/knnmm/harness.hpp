#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "knnmm/analysis.hpp"
#include "knnmm/assouad.hpp"
#include "knnmm/kde.hpp"
#include "knnmm/models.hpp"
#include "knnmm/neighbors.hpp"
#include "knnmm/rules.hpp"

namespace knnmm {

// ---- deterministic replication pool ---------------------------------------

inline int threads_from_env() {
    if (const char* env = std::getenv("KNN_MINIMAX_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Each task writes only its own slot, so results are independent of the worker
// count; aggregation stays a sequential fold in index order.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 0) threads = threads_from_env();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    const auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---- generator dispatch ----------------------------------------------------

using GeneratorModel = std::variant<LocationModel, AssouadNetwork>;

inline Dataset sample_model(const GeneratorModel& m, std::size_t n, RngStream& rng) {
    return std::visit(
        [&](const auto& mm) {
            if constexpr (std::is_same_v<std::decay_t<decltype(mm)>, LocationModel>)
                return sample_location(mm, n, rng);
            else
                return sample_assouad(mm, n, rng);
        },
        m);
}

inline double model_density(const GeneratorModel& m, double x) {
    return std::visit([&](const auto& mm) { return density_at(mm, x); }, m);
}
inline double model_eta(const GeneratorModel& m, double x) {
    return std::visit([&](const auto& mm) { return eta_at(mm, x); }, m);
}
inline int model_bayes_classify(const GeneratorModel& m, double x) {
    return std::visit([&](const auto& mm) { return bayes_classify(mm, x); }, m);
}
inline double model_bayes_risk(const GeneratorModel& m) {
    return std::visit([](const auto& mm) { return bayes_risk(mm); }, m);
}
inline std::string model_label(const GeneratorModel& m) {
    return std::visit([](const auto& mm) { return mm.label(); }, m);
}
inline nlohmann::json model_to_json(const GeneratorModel& m) {
    return std::visit([](const auto& mm) { return to_json(mm); }, m);
}
inline GeneratorModel model_from_json(const nlohmann::json& j) {
    if (j.is_object() && j.value("family", "") == std::string("assouad"))
        return assouad_from_json(j);
    return location_model_from_json(j);
}

// ---- excess-risk experiments ------------------------------------------------

struct ExperimentConfig {
    GeneratorModel model = LocationModel{ZFamily::gauss(1.0), 1.0};
    std::size_t n_train = 100;
    std::size_t n_test = 200;
    std::size_t replications = 1000;
    std::vector<KSchedule> schedules;
    std::uint64_t seed = 1;
    enum class DensitySource { analytic, kde } density_source = DensitySource::kde;
    int threads = 0;  // 0: KNN_MINIMAX_THREADS, else hardware concurrency
};

struct ScheduleSummary {
    std::string schedule;
    double mean_excess = 0.0;            // mean_risk - analytic Bayes risk
    double std_error = 0.0;              // sample SD of per-rep risk / sqrt(reps)
    double mean_risk = 0.0;
    double bayes_risk = 0.0;
    double mean_excess_empirical = 0.0;  // vs the Bayes rule's risk on the same test sets
    std::size_t replications = 0;
    std::vector<double> per_rep_risk;    // kept for paired comparisons
};

struct ExperimentResult {
    std::vector<ScheduleSummary> schedules;
    std::vector<double> bayes_empirical_per_rep;
};

// Replication r draws its training set from stream 2r and its test set from
// stream 2r+1; every schedule is scored on the same pairs (paired comparison).
inline ExperimentResult run_excess_risk(const ExperimentConfig& cfg) {
    if (cfg.n_train < 1) throw std::invalid_argument("run_excess_risk: n_train >= 1");
    if (cfg.n_test < 1) throw std::invalid_argument("run_excess_risk: n_test >= 1");
    if (cfg.replications < 1) throw std::invalid_argument("run_excess_risk: replications >= 1");
    if (cfg.schedules.empty()) throw std::invalid_argument("run_excess_risk: need schedules");

    const double rstar = model_bayes_risk(cfg.model);
    const std::size_t S = cfg.schedules.size();
    const std::size_t R = cfg.replications;
    bool any_sliced = false;
    for (const auto& s : cfg.schedules) any_sliced = any_sliced || s.sliced();

    std::vector<std::vector<double>> risk(S, std::vector<double>(R, 0.0));
    std::vector<double> bayes_emp(R, 0.0);

    parallel_for(R, cfg.threads, [&](std::size_t r) {
        RngStream train_stream = derive_stream(cfg.seed, 2 * r);
        RngStream test_stream = derive_stream(cfg.seed, 2 * r + 1);
        const Dataset train = sample_model(cfg.model, cfg.n_train, train_stream);
        const Dataset test = sample_model(cfg.model, cfg.n_test, test_stream);
        const NeighborIndex index(train, Backend::tree);

        DensityFn density;
        if (any_sliced) {
            if (cfg.density_source == ExperimentConfig::DensitySource::analytic) {
                const GeneratorModel& model = cfg.model;
                density = [&model](const std::vector<double>& x) { return model_density(model, x[0]); };
            } else {
                // refit per replication from this replication's training features only
                KdeModel kde = kde_fit(train, Bandwidth::silverman());
                density = [kde = std::move(kde)](const std::vector<double>& x) {
                    return kde_eval(kde, x);
                };
            }
        }
        for (std::size_t s = 0; s < S; ++s) {
            std::size_t miss = 0;
            for (const auto& pt : test.points)
                miss += classify_knn(index, pt.x, cfg.schedules[s], density ? &density : nullptr) != pt.y;
            risk[s][r] = static_cast<double>(miss) / static_cast<double>(cfg.n_test);
        }
        std::size_t bayes_miss = 0;
        for (const auto& pt : test.points)
            bayes_miss += model_bayes_classify(cfg.model, pt.x[0]) != pt.y;
        bayes_emp[r] = static_cast<double>(bayes_miss) / static_cast<double>(cfg.n_test);
    });

    ExperimentResult res;
    res.bayes_empirical_per_rep = bayes_emp;
    const double bayes_emp_mean = mean(bayes_emp);
    for (std::size_t s = 0; s < S; ++s) {
        ScheduleSummary sum;
        sum.schedule = cfg.schedules[s].name();
        sum.mean_risk = mean(risk[s]);
        sum.std_error = standard_error(risk[s]);
        sum.bayes_risk = rstar;
        sum.mean_excess = sum.mean_risk - rstar;
        sum.mean_excess_empirical = sum.mean_risk - bayes_emp_mean;
        sum.replications = R;
        sum.per_rep_risk = std::move(risk[s]);
        res.schedules.push_back(std::move(sum));
    }
    return res;
}

// standard comparison rule k = floor(n^{2/(3+alpha+d)}) + 1
inline long long standard_k(std::size_t n, double alpha, int d) {
    return floor_pow(static_cast<double>(n), 2.0 / (3.0 + alpha + d)) + 1;
}

// ---- benchmark table: standard vs sliced ------------------------------------

struct BenchmarkRow {
    std::string name;
    LocationModel model;
    double alpha;
};

// the five benchmark mixtures (margin exponent alpha rides with each row)
inline std::vector<BenchmarkRow> benchmark_rows() {
    return {
        {"gauss", make_location_model(ZFamily::gauss(2.0), 1.0), 1.0},
        {"cauchy-half", make_location_model(ZFamily::cauchy(0.5), 0.5), 1.0},
        {"cauchy-one", make_location_model(ZFamily::cauchy(1.0), 0.5), 1.0},
        {"power-one", make_location_model(ZFamily::power_law(1.0), 0.5), 1.0},
        {"power-two", make_location_model(ZFamily::power_law(2.0), 0.5), 1.0},
    };
}

struct Table2Cell {
    std::string model;
    double alpha = 0.0;
    std::size_t n = 0;
    double standard_excess = 0.0, standard_se = 0.0;
    double sliced_excess = 0.0, sliced_se = 0.0;
    double improvement_pct = 0.0;  // (standard - sliced) / standard * 100
    double diff_se = 0.0;          // SE of the per-replication paired difference
};

inline std::vector<Table2Cell> run_table2(std::uint64_t seed, std::size_t replications,
                                          const std::vector<std::size_t>& n_list = {100, 500, 1000},
                                          std::size_t n_test = 200, int threads = 0) {
    std::vector<Table2Cell> cells;
    for (const auto& row : benchmark_rows()) {
        for (std::size_t n : n_list) {
            ExperimentConfig cfg;
            cfg.model = row.model;
            cfg.n_train = n;
            cfg.n_test = n_test;
            cfg.replications = replications;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.density_source = ExperimentConfig::DensitySource::kde;
            cfg.schedules = {KSchedule::fixed(standard_k(n, row.alpha, 1)),
                             KSchedule::sliced_empirical(row.alpha)};
            const ExperimentResult res = run_excess_risk(cfg);
            const ScheduleSummary& std_s = res.schedules[0];
            const ScheduleSummary& sli_s = res.schedules[1];

            Table2Cell cell;
            cell.model = row.name;
            cell.alpha = row.alpha;
            cell.n = n;
            cell.standard_excess = std_s.mean_excess;
            cell.standard_se = std_s.std_error;
            cell.sliced_excess = sli_s.mean_excess;
            cell.sliced_se = sli_s.std_error;
            cell.improvement_pct = std_s.mean_excess != 0.0
                                       ? (std_s.mean_excess - sli_s.mean_excess) / std_s.mean_excess * 100.0
                                       : 0.0;
            std::vector<double> diff(replications);
            for (std::size_t r = 0; r < replications; ++r)
                diff[r] = std_s.per_rep_risk[r] - sli_s.per_rep_risk[r];
            cell.diff_se = standard_error(diff);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

inline std::string table2_to_csv(const std::vector<Table2Cell>& cells) {
    std::ostringstream out;
    out << "model,alpha,n,standard,standard_se,sliced,sliced_se,improvement_pct,diff_se\n";
    for (const auto& c : cells) {
        out << csv_field(c.model) << ',' << format_double(c.alpha) << ',' << c.n << ','
            << format_double(c.standard_excess) << ',' << format_double(c.standard_se) << ','
            << format_double(c.sliced_excess) << ',' << format_double(c.sliced_se) << ','
            << format_double(c.improvement_pct) << ',' << format_double(c.diff_se) << '\n';
    }
    return out.str();
}

// ---- power-law rate curves ---------------------------------------------------

struct RatePoint {
    std::size_t n = 0;
    double mean_excess = 0.0;
    double std_error = 0.0;
};

struct RateCurve {
    double g = 1.0;
    std::vector<RatePoint> points;
    RateFit fit;
};

// Excess-risk decay for power-law tails F(t) = 1 - (1+t)^{-g}, k = floor(n^{2/5})+1.
// b = 1/4 keeps enough boundary mass that the pre-asymptotic ordering in g is
// visible at n <= 1e4; the large test set keeps ln(excess) resolved at the top n.
inline std::vector<RateCurve> run_rates(const std::vector<double>& g_list,
                                        const std::vector<std::size_t>& n_grid, std::uint64_t seed,
                                        std::size_t replications, std::size_t n_test = 10000,
                                        double b = 0.25, int threads = 0) {
    if (g_list.empty()) throw std::invalid_argument("run_rates: need g values");
    for (double g : g_list)
        if (!(g > 0.0)) throw std::invalid_argument("run_rates: g must be positive");
    if (n_grid.size() < 4) throw std::invalid_argument("run_rates: need at least 4 grid points");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
        if (n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("run_rates: grid must increase");

    std::vector<RateCurve> curves;
    for (double g : g_list) {
        RateCurve curve;
        curve.g = g;
        std::vector<std::pair<double, double>> fit_pts;
        for (std::size_t n : n_grid) {
            ExperimentConfig cfg;
            cfg.model = make_location_model(ZFamily::power_law(g), b);
            cfg.n_train = n;
            cfg.n_test = n_test;
            cfg.replications = replications;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.schedules = {KSchedule::fixed(floor_pow(static_cast<double>(n), 0.4) + 1)};
            const ExperimentResult res = run_excess_risk(cfg);
            curve.points.push_back({n, res.schedules[0].mean_excess, res.schedules[0].std_error});
            fit_pts.emplace_back(static_cast<double>(n), res.schedules[0].mean_excess);
        }
        curve.fit = fit_rate(fit_pts);
        curves.push_back(std::move(curve));
    }
    return curves;
}

inline std::string rates_to_csv(const std::vector<RateCurve>& curves) {
    std::ostringstream out;
    out << "g,n,mean_excess,se,slope,intercept,r2\n";
    for (const auto& c : curves)
        for (const auto& p : c.points)
            out << format_double(c.g) << ',' << p.n << ',' << format_double(p.mean_excess) << ','
                << format_double(p.std_error) << ',' << format_double(c.fit.slope) << ','
                << format_double(c.fit.intercept) << ',' << format_double(c.fit.r2) << '\n';
    return out.str();
}

// ---- two-sample discrimination (fixed sample sizes per class) -----------------

namespace detail {

inline double component_quantile(const ComponentDensity& c, double p) {
    double lo = c.center - 1.0, hi = c.center + 1.0;
    while (component_cdf(c, lo) > p) lo = c.center + 2.0 * (lo - c.center);
    while (component_cdf(c, hi) < p) hi = c.center + 2.0 * (hi - c.center);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (component_cdf(c, mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// R* = 1/2 integral min(f0, f1): the best rule keeps the smaller density's mass
inline double sda_bayes_risk(const ComponentDensity& model0, const ComponentDensity& model1) {
    const double lo = std::min(detail::component_quantile(model0, 1e-12),
                               detail::component_quantile(model1, 1e-12));
    const double hi = std::max(detail::component_quantile(model0, 1.0 - 1e-12),
                               detail::component_quantile(model1, 1.0 - 1e-12));
    const auto integrand = [&](double x) {
        return std::min(density_at(model0, x), density_at(model1, x));
    };
    return 0.5 * integrate(integrand, lo, hi, 1e-9);
}

// Two samples of n points each (labels 0 from model0, 1 from model1); test points
// half from each class; the vote pools both samples with fixed k.
inline ExperimentResult run_sda(const ComponentDensity& model0, const ComponentDensity& model1,
                                std::size_t n, long long k, std::size_t n_test,
                                std::size_t replications, std::uint64_t seed, int threads = 0) {
    if (n < 1 || n_test < 1 || replications < 1)
        throw std::invalid_argument("run_sda: sizes and replications must be >= 1");
    if (k < 1 || k > 2 * static_cast<long long>(n))
        throw std::invalid_argument("run_sda: need 1 <= k <= 2n");

    const double rstar = sda_bayes_risk(model0, model1);
    const std::size_t n0_test = n_test / 2;
    std::vector<double> risk(replications, 0.0);
    std::vector<double> bayes_emp(replications, 0.0);

    parallel_for(replications, threads, [&](std::size_t r) {
        RngStream train_stream = derive_stream(seed, 2 * r);
        RngStream test_stream = derive_stream(seed, 2 * r + 1);
        const Dataset sample0 = sample_component(model0, n, 0, train_stream);
        const Dataset sample1 = sample_component(model1, n, 1, train_stream);
        Dataset test;
        test.dim = 1;
        test.points.reserve(n_test);
        for (std::size_t i = 0; i < n_test; ++i) {
            const int y = i < n0_test ? 0 : 1;
            const double x = draw_component(y == 0 ? model0 : model1, test_stream);
            test.points.push_back({{x}, y});
        }
        std::size_t miss = 0, bayes_miss = 0;
        for (const auto& pt : test.points) {
            miss += classify_sda(sample0, sample1, pt.x, k) != pt.y;
            const int bayes = density_at(model1, pt.x[0]) >= density_at(model0, pt.x[0]) ? 1 : 0;
            bayes_miss += bayes != pt.y;
        }
        risk[r] = static_cast<double>(miss) / static_cast<double>(n_test);
        bayes_emp[r] = static_cast<double>(bayes_miss) / static_cast<double>(n_test);
    });

    ExperimentResult res;
    res.bayes_empirical_per_rep = bayes_emp;
    ScheduleSummary sum;
    sum.schedule = "sda(k=" + std::to_string(k) + ")";
    sum.mean_risk = mean(risk);
    sum.std_error = standard_error(risk);
    sum.bayes_risk = rstar;
    sum.mean_excess = sum.mean_risk - rstar;
    sum.mean_excess_empirical = sum.mean_risk - mean(bayes_emp);
    sum.replications = replications;
    sum.per_rep_risk = std::move(risk);
    res.schedules.push_back(std::move(sum));
    return res;
}

// ---- Poissonization identity --------------------------------------------------

struct PoissonizationResult {
    double ks_distance = 0.0;
    std::vector<double> eta_two_sample;  // construction (i)
    std::vector<double> eta_single;      // construction (ii)
};

// Construction (i): two independent Poisson(n)-sized samples from the classes,
// pooled and randomly permuted. Construction (ii): one Poisson(2n)-sized i.i.d.
// sample from the balanced mixture with labels drawn from eta. Both average the
// first k labels by distance from x, always dividing by k (short samples pad
// with zeros). The two laws coincide; the KS distance certifies it.
inline PoissonizationResult poissonization_check(const ComponentDensity& model0,
                                                 const ComponentDensity& model1, double x,
                                                 std::size_t n, long long k,
                                                 std::size_t replications, std::uint64_t seed,
                                                 int threads = 0) {
    if (replications < 10000)
        throw std::invalid_argument("poissonization_check: replications >= 1e4");
    if (k < 1) throw std::invalid_argument("poissonization_check: k >= 1");

    struct Draw {
        double dist;
        std::size_t order;
        int label;
        bool operator<(const Draw& o) const {
            return dist != o.dist ? dist < o.dist : order < o.order;
        }
    };
    const auto eta_of = [&](double u) {
        const double f0 = density_at(model0, u), f1 = density_at(model1, u);
        if (f0 + f1 <= 0.0) return 0.5;
        return f1 / (f0 + f1);
    };

    PoissonizationResult res;
    res.eta_two_sample.resize(replications);
    res.eta_single.resize(replications);

    parallel_for(replications, threads, [&](std::size_t r) {
        {  // (i) two Poisson(n) samples, pooled, permuted
            RngStream s = derive_stream(seed, 2 * r);
            const long long n0 = s.poisson(static_cast<double>(n));
            const long long n1 = s.poisson(static_cast<double>(n));
            std::vector<std::pair<double, int>> pool;
            pool.reserve(static_cast<std::size_t>(n0 + n1));
            for (long long i = 0; i < n0; ++i) pool.emplace_back(draw_component(model0, s), 0);
            for (long long i = 0; i < n1; ++i) pool.emplace_back(draw_component(model1, s), 1);
            for (std::size_t i = pool.size(); i > 1; --i)
                std::swap(pool[i - 1], pool[s.uniform_index(i)]);
            std::vector<Draw> draws(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i)
                draws[i] = {std::fabs(pool[i].first - x), i, pool[i].second};
            std::sort(draws.begin(), draws.end());
            double acc = 0.0;
            const std::size_t take = std::min<std::size_t>(draws.size(), static_cast<std::size_t>(k));
            for (std::size_t i = 0; i < take; ++i) acc += draws[i].label;
            res.eta_two_sample[r] = acc / static_cast<double>(k);
        }
        {  // (ii) one Poisson(2n) mixture sample with Bernoulli(eta) labels
            RngStream s = derive_stream(seed, 2 * r + 1);
            const long long nn = s.poisson(2.0 * static_cast<double>(n));
            std::vector<Draw> draws(static_cast<std::size_t>(nn));
            for (long long i = 0; i < nn; ++i) {
                const double u = s.bernoulli(0.5) ? draw_component(model1, s) : draw_component(model0, s);
                const int v = s.bernoulli(eta_of(u)) ? 1 : 0;
                draws[static_cast<std::size_t>(i)] = {std::fabs(u - x), static_cast<std::size_t>(i), v};
            }
            std::sort(draws.begin(), draws.end());
            double acc = 0.0;
            const std::size_t take = std::min<std::size_t>(draws.size(), static_cast<std::size_t>(k));
            for (std::size_t i = 0; i < take; ++i) acc += draws[i].label;
            res.eta_single[r] = acc / static_cast<double>(k);
        }
    });

    res.ks_distance = ks_distance(res.eta_two_sample, res.eta_single);
    return res;
}

// ---- reports -------------------------------------------------------------------

// schema: model,n,schedule,mean_excess,se,mean_risk,bayes_risk,reps,seed
inline std::string result_to_csv(const std::string& model_label, std::size_t n,
                                 const ExperimentResult& res, std::uint64_t seed) {
    std::ostringstream out;
    out << "model,n,schedule,mean_excess,se,mean_risk,bayes_risk,reps,seed\n";
    for (const auto& s : res.schedules) {
        out << csv_field(model_label) << ',' << n << ',' << csv_field(s.schedule) << ','
            << format_double(s.mean_excess) << ',' << format_double(s.std_error) << ','
            << format_double(s.mean_risk) << ',' << format_double(s.bayes_risk) << ','
            << s.replications << ',' << seed << '\n';
    }
    return out.str();
}

inline nlohmann::json result_to_json(const std::string& model_label, std::size_t n,
                                     const ExperimentResult& res, std::uint64_t seed) {
    nlohmann::json out;
    out["model"] = model_label;
    out["n"] = n;
    out["seed"] = seed;
    out["schedules"] = nlohmann::json::array();
    for (const auto& s : res.schedules) {
        out["schedules"].push_back({{"schedule", s.schedule},
                                    {"mean_excess", s.mean_excess},
                                    {"se", s.std_error},
                                    {"mean_risk", s.mean_risk},
                                    {"bayes_risk", s.bayes_risk},
                                    {"mean_excess_empirical", s.mean_excess_empirical},
                                    {"reps", s.replications}});
    }
    return out;
}

}  // namespace knnmm
