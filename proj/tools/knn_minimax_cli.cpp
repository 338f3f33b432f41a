// knn_minimax: experiment driver for the nearest-neighbor excess-risk library.
//
// Subcommands
//   simulate  excess-risk Monte Carlo for one model, or the 15-cell benchmark table
//   rates     power-law rate curves and fitted log-log slopes
//   check     empirical assumption checkers (tail / margin / minimal-mass /
//             gradient / hoeffding), emitted as a JSON report
//   solve     balance-equation solver for the rate scale
//
// Exit codes: 0 success, 2 configuration error, 1 runtime failure.
// Precedence: command-line flags > --config JSON file > built-in defaults.
// KNN_MINIMAX_THREADS is the fallback for --threads (0 = auto).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "knnmm/analysis.hpp"
#include "knnmm/assouad.hpp"
#include "knnmm/harness.hpp"
#include "knnmm/kde.hpp"
#include "knnmm/svg.hpp"

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Applies config-file values to options the user did not pass on the command
// line; every key must name a registered option.
void apply_config(const CLI::App& app, const std::string& path,
                  const std::map<std::string, std::function<void(const json&)>>& setters,
                  const std::map<std::string, CLI::Option*>& options) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config JSON: " + std::string(e.what()));
    }
    if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
    (void)app;
    for (const auto& [key, value] : cfg.items()) {
        const auto setter = setters.find(key);
        if (setter == setters.end()) throw ConfigError("unknown config key: " + key);
        const auto opt = options.find(key);
        if (opt != options.end() && opt->second->count() > 0) continue;  // flag wins
        try {
            setter->second(value);
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
}

knnmm::GeneratorModel parse_model(const std::string& text) {
    static const std::map<std::string, const char*> shortcuts = {
        {"laplace", R"({"family":"laplace","lambda":1,"b":1})"},
        {"gauss", R"({"family":"gauss","sigma":2,"b":1})"},
        {"gauss1", R"({"family":"gauss","sigma":1,"b":1})"},
        {"cauchy", R"({"family":"cauchy","gamma":1,"b":0.5})"},
        {"powerlaw", R"({"family":"powerlaw","g":1,"b":0.5})"},
    };
    std::string body = text;
    const auto hit = shortcuts.find(text);
    if (hit != shortcuts.end()) body = hit->second;
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ConfigError("model is not valid JSON (and not a known shortcut): " +
                          std::string(e.what()));
    }
    try {
        return knnmm::model_from_json(j);
    } catch (const std::exception& e) {
        throw ConfigError("bad model descriptor: " + std::string(e.what()));
    }
}

// fixed:<k> | compact | general[:alpha] | sliced-theoretical[:alpha] |
// sliced-empirical[:alpha] | standard[:alpha]   ("standard" resolves to
// fixed k = floor(n^{2/(3+alpha+d)})+1 at the run's n, d = 1)
knnmm::KSchedule parse_schedule(const std::string& token, std::size_t n) {
    const auto colon = token.find(':');
    const std::string head = token.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : token.substr(colon + 1);
    const auto num = [&](double fallback) {
        if (arg.empty()) return fallback;
        try {
            return std::stod(arg);
        } catch (const std::exception&) {
            throw ConfigError("bad schedule argument in '" + token + "'");
        }
    };
    if (head == "fixed") {
        if (arg.empty()) throw ConfigError("schedule fixed needs a k, e.g. fixed:25");
        return knnmm::KSchedule::fixed(static_cast<long long>(num(0)));
    }
    if (head == "compact") return knnmm::KSchedule::compact_rate();
    if (head == "general") return knnmm::KSchedule::general_rate(num(1.0));
    if (head == "sliced-theoretical") return knnmm::KSchedule::sliced_theoretical(num(1.0));
    if (head == "sliced-empirical") return knnmm::KSchedule::sliced_empirical(num(1.0));
    if (head == "standard")
        return knnmm::KSchedule::fixed(knnmm::standard_k(n, num(1.0), 1));
    throw ConfigError("unknown schedule '" + token + "'");
}

// Output is composed fully in memory and written in one shot, so a failing run
// never leaves a partial file behind.
void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + out_path);
    out << content;
    if (!out) throw std::runtime_error("failed writing output file: " + out_path);
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const std::vector<std::string>& n_raw, bool table2, const std::string& model_text,
                 std::size_t n_test, std::size_t reps, std::uint64_t seed,
                 const std::vector<std::string>& schedule_tokens, const std::string& density_source,
                 const std::string& out_path, const std::string& format, int threads) {
    std::vector<std::size_t> n_list;
    for (const auto& tok : n_raw) {
        try {
            n_list.push_back(static_cast<std::size_t>(std::stoull(tok)));
        } catch (const std::exception&) {
            throw ConfigError("bad --n value '" + tok + "'");
        }
    }
    if (format != "csv" && format != "json")
        throw ConfigError("simulate supports --format csv|json");

    if (table2) {
        if (n_list.empty()) n_list = {100, 500, 1000};
        const auto cells = knnmm::run_table2(seed, reps, n_list, n_test, threads);
        if (format == "csv") {
            emit(out_path, knnmm::table2_to_csv(cells));
        } else {
            json rows = json::array();
            for (const auto& c : cells)
                rows.push_back({{"model", c.model},
                                {"alpha", c.alpha},
                                {"n", c.n},
                                {"standard", c.standard_excess},
                                {"standard_se", c.standard_se},
                                {"sliced", c.sliced_excess},
                                {"sliced_se", c.sliced_se},
                                {"improvement_pct", c.improvement_pct},
                                {"diff_se", c.diff_se}});
            emit(out_path, rows.dump(2) + "\n");
        }
        return 0;
    }

    if (model_text.empty()) throw ConfigError("simulate needs --model (or --table2)");
    const knnmm::GeneratorModel model = parse_model(model_text);
    if (n_list.empty()) n_list = {500};
    if (density_source != "kde" && density_source != "analytic")
        throw ConfigError("--density-source must be kde or analytic");

    std::ostringstream csv;
    json out_json = json::array();
    bool wrote_header = false;
    for (std::size_t n : n_list) {
        knnmm::ExperimentConfig cfg;
        cfg.model = model;
        cfg.n_train = n;
        cfg.n_test = n_test;
        cfg.replications = reps;
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.density_source = density_source == "kde"
                                 ? knnmm::ExperimentConfig::DensitySource::kde
                                 : knnmm::ExperimentConfig::DensitySource::analytic;
        for (const auto& tok : schedule_tokens) cfg.schedules.push_back(parse_schedule(tok, n));
        if (cfg.schedules.empty()) cfg.schedules.push_back(parse_schedule("standard", n));
        const knnmm::ExperimentResult res = knnmm::run_excess_risk(cfg);
        const std::string block = knnmm::result_to_csv(knnmm::model_label(model), n, res, seed);
        if (!wrote_header) {
            csv << block;
            wrote_header = true;
        } else {
            csv << block.substr(block.find('\n') + 1);  // drop repeated header
        }
        out_json.push_back(knnmm::result_to_json(knnmm::model_label(model), n, res, seed));
    }
    emit(out_path, format == "csv" ? csv.str() : out_json.dump(2) + "\n");
    return 0;
}

// ---- rates -------------------------------------------------------------------

int cmd_rates(const std::vector<double>& g_list, const std::vector<std::size_t>& n_grid,
              std::size_t reps, std::uint64_t seed, std::size_t n_test, double b,
              const std::string& out_path, const std::string& format, int threads) {
    const auto curves = knnmm::run_rates(g_list, n_grid, seed, reps, n_test, b, threads);
    if (format == "csv") {
        emit(out_path, knnmm::rates_to_csv(curves));
    } else if (format == "json") {
        json out = json::array();
        for (const auto& c : curves) {
            json pts = json::array();
            for (const auto& p : c.points)
                pts.push_back({{"n", p.n}, {"mean_excess", p.mean_excess}, {"se", p.std_error}});
            out.push_back({{"g", c.g},
                           {"slope", c.fit.slope},
                           {"intercept", c.fit.intercept},
                           {"r2", c.fit.r2},
                           {"points", pts}});
        }
        emit(out_path, out.dump(2) + "\n");
    } else if (format == "svg") {
        std::vector<knnmm::SvgSeries> series;
        for (const auto& c : curves) {
            knnmm::SvgSeries s;
            s.name = "g=" + fmt_short(c.g) + " (slope " + fmt_short(c.fit.slope) + ")";
            for (const auto& p : c.points)
                s.points.emplace_back(static_cast<double>(p.n), p.mean_excess);
            series.push_back(std::move(s));
        }
        emit(out_path, knnmm::svg_loglog(series, "excess risk vs n", "n", "mean excess risk"));
    } else {
        throw ConfigError("rates supports --format csv|json|svg");
    }
    return 0;
}

// ---- check -------------------------------------------------------------------

int cmd_check(const std::string& assumption, const std::string& model_text,
              std::vector<double> eps_grid, std::vector<double> t_grid,
              std::vector<double> delta_grid, std::vector<double> probes,
              std::vector<long long> k_list, std::vector<double> s_list, double a_exponent,
              double kappa, std::size_t mc, std::size_t n, double query_x, std::uint64_t seed,
              const std::string& out_path) {
    const knnmm::GeneratorModel model = parse_model(model_text);
    const std::string label = knnmm::model_label(model);
    knnmm::RngStream rng = knnmm::derive_stream(seed, 0);

    json report;
    report["assumption"] = assumption;
    json params = {{"model", label}, {"seed", seed}};

    if (assumption == "tail") {
        if (eps_grid.empty()) eps_grid = {1e-4, 1e-3, 1e-2};
        params["eps"] = eps_grid;
        params["mc"] = mc;
        const auto est = std::visit(
            [&](const auto& m) { return knnmm::empirical_tail_grid(m, eps_grid, mc, rng); }, model);
        json se = json::array();
        bool resolved = true;
        for (double p : est) {
            const double e = std::sqrt(p * (1.0 - p) / static_cast<double>(mc));
            se.push_back(e);
            resolved = resolved && (p == 0.0 || e <= p / 3.0);
        }
        report["estimate"] = est;
        report["mc_se"] = se;
        report["verdict"] = resolved ? "resolved" : "needs-more-samples";
    } else if (assumption == "margin") {
        if (t_grid.empty()) t_grid = {0.05, 0.1, 0.2};
        params["t"] = t_grid;
        params["mc"] = mc;
        const auto est = std::visit(
            [&](const auto& m) { return knnmm::empirical_margin_grid(m, t_grid, mc, rng); }, model);
        json se = json::array();
        for (double p : est) se.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(mc)));
        double lo = 1e300, hi = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i) {
            const double ratio = est[i] / t_grid[i];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        report["estimate"] = est;
        report["mc_se"] = se;
        // ratio stability across t is the alpha = 1 signature
        report["verdict"] = (lo > 0.0 && hi / lo <= 2.0) ? "stable" : "unstable";
    } else if (assumption == "minimal-mass") {
        if (delta_grid.empty()) delta_grid = {0.01, 0.05, 0.1};
        params["delta"] = delta_grid;
        params["kappa"] = kappa;
        if (probes.empty())
            probes = std::visit([](const auto& m) { return knnmm::default_probes(m); }, model);
        json est = json::array();
        double worst = 1e300;
        for (double d : delta_grid) {
            const double r = std::visit(
                [&](const auto& m) { return knnmm::minimal_mass_ratio(m, d, probes); }, model);
            est.push_back(r);
            worst = std::min(worst, r);
        }
        report["estimate"] = est;
        report["mc_se"] = 0.0;  // exact interval masses in d = 1
        report["verdict"] = worst >= kappa ? "pass" : "below-kappa";
    } else if (assumption == "gradient") {
        params["a"] = a_exponent;
        if (probes.empty()) {
            // default probes deep in both tails via the model CDF
            if (!std::holds_alternative<knnmm::LocationModel>(model))
                throw ConfigError("gradient check needs --probes for network models");
            const auto& m = std::get<knnmm::LocationModel>(model);
            const auto quantile_of = [&](double p) {
                double lo = -1.0, hi = 1.0;
                while (knnmm::mixture_cdf(m, lo) > p) lo *= 2.0;
                while (knnmm::mixture_cdf(m, hi) < p) hi *= 2.0;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (knnmm::mixture_cdf(m, mid) < p ? lo : hi) = mid;
                }
                return 0.5 * (lo + hi);
            };
            probes = {quantile_of(1e-6), quantile_of(1.0 - 1e-6)};
        }
        params["probes"] = probes;
        const auto log_density = [&](double x) { return std::log(knnmm::model_density(model, x)); };
        const auto log_density_grad = [&](double x) {
            const double h = 1e-5 * std::max(1.0, std::fabs(x));
            return (log_density(x + h) - log_density(x - h)) / (2.0 * h);
        };
        const double worst =
            knnmm::gradient_criterion(log_density_grad, log_density, a_exponent, probes);
        report["estimate"] = worst;
        report["mc_se"] = 0.0;
        report["verdict"] = worst <= 0.5 ? "criterion-holds" : "criterion-fails";
    } else if (assumption == "hoeffding") {
        if (k_list.empty()) k_list = {5, 20, 100};
        if (s_list.empty()) s_list = {0.05, 0.1, 0.2};
        params["k"] = k_list;
        params["s"] = s_list;
        params["n"] = n;
        params["x"] = query_x;
        params["mc"] = mc;
        const auto rows = std::visit(
            [&](const auto& m) {
                return knnmm::hoeffding_check(m, query_x, n, k_list, s_list, mc, rng);
            },
            model);
        json est = json::array(), se = json::array(), bound = json::array();
        bool ok = true;
        for (const auto& row : rows) {
            est.push_back({{"k", row.k}, {"s", row.s}, {"p", row.estimate}});
            se.push_back(row.mc_se);
            bound.push_back(row.bound);
            ok = ok && row.estimate <= row.bound + 3.0 * row.mc_se;
        }
        report["estimate"] = est;
        report["mc_se"] = se;
        report["bound"] = bound;
        report["verdict"] = ok ? "bound-holds" : "bound-violated";
    } else {
        throw ConfigError("unknown assumption '" + assumption +
                          "' (tail|margin|minimal-mass|gradient|hoeffding)");
    }
    report["parameters"] = params;
    emit(out_path, report.dump(2) + "\n");
    return 0;
}

// ---- solve -------------------------------------------------------------------

int cmd_solve(const std::string& psi, double C, double alpha, int d, double n,
              const std::string& side, const std::string& out_path) {
    knnmm::TailSpec tail;
    const auto colon = psi.find(':');
    const std::string head = psi.substr(0, colon);
    if (head == "id") {
        tail = knnmm::TailSpec::identity();
    } else if (head == "power" || head == "powerlog") {
        if (colon == std::string::npos) throw ConfigError("--psi needs arguments, e.g. power:2");
        std::istringstream args(psi.substr(colon + 1));
        std::string tok;
        std::vector<double> vals;
        while (std::getline(args, tok, ':')) {
            try {
                vals.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ConfigError("bad --psi argument '" + tok + "'");
            }
        }
        if (head == "power" && vals.size() == 1) {
            tail = knnmm::TailSpec::power(vals[0], C);
        } else if (head == "powerlog" && vals.size() == 2) {
            tail = knnmm::TailSpec::power_log(vals[0], vals[1], C);
        } else {
            throw ConfigError("--psi forms: id | power:g | powerlog:g:r");
        }
    } else {
        throw ConfigError("--psi forms: id | power:g | powerlog:g:r");
    }

    knnmm::RateQuery query;
    query.alpha = alpha;
    query.d = d;
    query.n = n;
    if (side == "lower") query.side = knnmm::RateQuery::Side::lower;
    else if (side == "upper") query.side = knnmm::RateQuery::Side::upper;
    else throw ConfigError("--side must be lower or upper");

    const knnmm::BalanceResult res = knnmm::solve_balance(tail, query);
    std::ostringstream out;
    out << (side == "lower" ? "epsilon=" : "nu=") << fmt_short(res.scale) << "\n"
        << "rate=" << fmt_short(res.rate) << "\n";
    if (side == "upper") out << "k=" << res.k << "\n";
    emit(out_path, out.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nearest-neighbor excess-risk experiments"};
    app.require_subcommand(1);

    // ---- simulate
    auto* sim = app.add_subcommand("simulate", "excess-risk Monte Carlo (single model or --table2)");
    std::vector<std::string> sim_n;
    bool sim_table2 = false;
    std::string sim_model, sim_density = "kde", sim_out, sim_format = "csv", sim_config;
    std::vector<std::string> sim_schedules;
    std::size_t sim_n_test = 200, sim_reps = 1000;
    std::uint64_t sim_seed = 1;
    int sim_threads = 0;
    std::map<std::string, CLI::Option*> sim_opts;
    sim_opts["n"] = sim->add_option("--n", sim_n, "training sizes (comma list)")->delimiter(',');
    sim_opts["table2"] = sim->add_flag("--table2", sim_table2, "run the 15-cell benchmark table");
    sim_opts["model"] = sim->add_option("--model", sim_model, "model JSON or shortcut name");
    sim_opts["n_test"] = sim->add_option("--n-test", sim_n_test, "test points per replication");
    sim_opts["reps"] = sim->add_option("--reps", sim_reps, "Monte Carlo replications");
    sim_opts["seed"] = sim->add_option("--seed", sim_seed, "base RNG seed");
    sim_opts["schedule"] = sim->add_option("--schedule", sim_schedules,
                                           "k schedules: fixed:<k> compact general[:a] "
                                           "sliced-theoretical[:a] sliced-empirical[:a] standard[:a]")
                               ->delimiter(',');
    sim_opts["density_source"] =
        sim->add_option("--density-source", sim_density, "density for sliced rules: kde|analytic");
    sim_opts["out"] = sim->add_option("--out", sim_out, "output path (default: stdout)");
    sim_opts["format"] = sim->add_option("--format", sim_format, "csv|json");
    sim_opts["threads"] = sim->add_option("--threads", sim_threads,
                                          "worker threads (0 = KNN_MINIMAX_THREADS or hardware)");
    sim->add_option("--config", sim_config, "JSON config file (flags take precedence)");

    // ---- rates
    auto* rat = app.add_subcommand("rates", "power-law rate curves and log-log slopes");
    std::vector<double> rat_g = {0.5, 1.0, 2.0, 4.0};
    std::vector<std::size_t> rat_n = {100, 316, 1000, 3162, 10000};
    std::size_t rat_reps = 200, rat_n_test = 10000;
    double rat_b = 0.25;
    std::uint64_t rat_seed = 1;
    std::string rat_out, rat_format = "csv", rat_config;
    int rat_threads = 0;
    std::map<std::string, CLI::Option*> rat_opts;
    rat_opts["g"] = rat->add_option("--g", rat_g, "power-law exponents")->delimiter(',');
    rat_opts["n"] = rat->add_option("--n", rat_n, "training-size grid")->delimiter(',');
    rat_opts["reps"] = rat->add_option("--reps", rat_reps, "replications per grid point");
    rat_opts["n_test"] = rat->add_option("--n-test", rat_n_test, "test points per replication");
    rat_opts["b"] = rat->add_option("--b", rat_b, "location offset of the class centers");
    rat_opts["seed"] = rat->add_option("--seed", rat_seed, "base RNG seed");
    rat_opts["out"] = rat->add_option("--out", rat_out, "output path (default: stdout)");
    rat_opts["format"] = rat->add_option("--format", rat_format, "csv|json|svg");
    rat_opts["threads"] = rat->add_option("--threads", rat_threads,
                                          "worker threads (0 = KNN_MINIMAX_THREADS or hardware)");
    rat->add_option("--config", rat_config, "JSON config file (flags take precedence)");

    // ---- check
    auto* chk = app.add_subcommand("check", "empirical assumption checkers (JSON report)");
    std::string chk_assumption, chk_model = "gauss", chk_out, chk_config;
    std::vector<double> chk_eps, chk_t, chk_delta, chk_probes, chk_s;
    std::vector<long long> chk_k;
    double chk_a = 1.0, chk_kappa = 0.5, chk_x = 0.5;
    std::size_t chk_mc = 1000000, chk_n = 500;
    std::uint64_t chk_seed = 1;
    std::map<std::string, CLI::Option*> chk_opts;
    chk_opts["assumption"] =
        chk->add_option("--assumption", chk_assumption,
                        "tail|margin|minimal-mass|gradient|hoeffding")
            ->required();
    chk_opts["model"] = chk->add_option("--model", chk_model, "model JSON or shortcut name");
    chk_opts["eps"] = chk->add_option("--eps", chk_eps, "density levels (tail)")->delimiter(',');
    chk_opts["t"] = chk->add_option("--t", chk_t, "margin widths")->delimiter(',');
    chk_opts["delta"] = chk->add_option("--delta", chk_delta, "ball radii (minimal-mass)")->delimiter(',');
    chk_opts["probes"] = chk->add_option("--probes", chk_probes, "probe points")->delimiter(',');
    chk_opts["k"] = chk->add_option("--k", chk_k, "neighbor counts (hoeffding)")->delimiter(',');
    chk_opts["s"] = chk->add_option("--s", chk_s, "deviation levels (hoeffding)")->delimiter(',');
    chk_opts["a"] = chk->add_option("--a", chk_a, "gradient-criterion exponent");
    chk_opts["kappa"] = chk->add_option("--kappa", chk_kappa, "minimal-mass pass threshold");
    chk_opts["mc"] = chk->add_option("--mc", chk_mc, "Monte Carlo sample size");
    chk_opts["n"] = chk->add_option("--n", chk_n, "training size (hoeffding)");
    chk_opts["x"] = chk->add_option("--x", chk_x, "query point (hoeffding)");
    chk_opts["seed"] = chk->add_option("--seed", chk_seed, "RNG seed");
    chk_opts["out"] = chk->add_option("--out", chk_out, "output path (default: stdout)");
    chk->add_option("--config", chk_config, "JSON config file (flags take precedence)");

    // ---- solve
    auto* sol = app.add_subcommand("solve", "balance-equation solver");
    std::string sol_psi = "id", sol_side = "upper", sol_out, sol_config;
    double sol_C = 1.0, sol_alpha = 1.0, sol_n = 1e4;
    int sol_d = 1;
    std::map<std::string, CLI::Option*> sol_opts;
    sol_opts["psi"] = sol->add_option("--psi", sol_psi, "tail form: id | power:g | powerlog:g:r");
    sol_opts["C"] = sol->add_option("--C", sol_C, "tail constant");
    sol_opts["alpha"] = sol->add_option("--alpha", sol_alpha, "margin exponent");
    sol_opts["d"] = sol->add_option("--d", sol_d, "dimension");
    sol_opts["n"] = sol->add_option("--n", sol_n, "sample size");
    sol_opts["side"] = sol->add_option("--side", sol_side, "lower|upper");
    sol_opts["out"] = sol->add_option("--out", sol_out, "output path (default: stdout)");
    sol->add_option("--config", sol_config, "JSON config file (flags take precedence)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) {
            if (!sim_config.empty()) {
                apply_config(
                    *sim, sim_config,
                    {{"n", [&](const json& v) {
                          sim_n.clear();
                          if (v.is_array())
                              for (const auto& e : v) sim_n.push_back(std::to_string(e.get<long long>()));
                          else sim_n.push_back(std::to_string(v.get<long long>()));
                      }},
                     {"table2", [&](const json& v) { sim_table2 = v.get<bool>(); }},
                     {"model", [&](const json& v) {
                          sim_model = v.is_string() ? v.get<std::string>() : v.dump();
                      }},
                     {"n_test", [&](const json& v) { sim_n_test = v.get<std::size_t>(); }},
                     {"reps", [&](const json& v) { sim_reps = v.get<std::size_t>(); }},
                     {"seed", [&](const json& v) { sim_seed = v.get<std::uint64_t>(); }},
                     {"schedule", [&](const json& v) {
                          sim_schedules.clear();
                          if (v.is_array())
                              for (const auto& e : v) sim_schedules.push_back(e.get<std::string>());
                          else sim_schedules.push_back(v.get<std::string>());
                      }},
                     {"density_source", [&](const json& v) { sim_density = v.get<std::string>(); }},
                     {"out", [&](const json& v) { sim_out = v.get<std::string>(); }},
                     {"format", [&](const json& v) { sim_format = v.get<std::string>(); }},
                     {"threads", [&](const json& v) { sim_threads = v.get<int>(); }}},
                    sim_opts);
            }
            return cmd_simulate(sim_n, sim_table2, sim_model, sim_n_test, sim_reps, sim_seed,
                                sim_schedules, sim_density, sim_out, sim_format, sim_threads);
        }
        if (rat->parsed()) {
            if (!rat_config.empty()) {
                apply_config(
                    *rat, rat_config,
                    {{"g", [&](const json& v) { rat_g = v.get<std::vector<double>>(); }},
                     {"n", [&](const json& v) { rat_n = v.get<std::vector<std::size_t>>(); }},
                     {"reps", [&](const json& v) { rat_reps = v.get<std::size_t>(); }},
                     {"n_test", [&](const json& v) { rat_n_test = v.get<std::size_t>(); }},
                     {"b", [&](const json& v) { rat_b = v.get<double>(); }},
                     {"seed", [&](const json& v) { rat_seed = v.get<std::uint64_t>(); }},
                     {"out", [&](const json& v) { rat_out = v.get<std::string>(); }},
                     {"format", [&](const json& v) { rat_format = v.get<std::string>(); }},
                     {"threads", [&](const json& v) { rat_threads = v.get<int>(); }}},
                    rat_opts);
            }
            return cmd_rates(rat_g, rat_n, rat_reps, rat_seed, rat_n_test, rat_b, rat_out,
                             rat_format, rat_threads);
        }
        if (chk->parsed()) {
            if (!chk_config.empty()) {
                apply_config(
                    *chk, chk_config,
                    {{"assumption", [&](const json& v) { chk_assumption = v.get<std::string>(); }},
                     {"model", [&](const json& v) {
                          chk_model = v.is_string() ? v.get<std::string>() : v.dump();
                      }},
                     {"eps", [&](const json& v) { chk_eps = v.get<std::vector<double>>(); }},
                     {"t", [&](const json& v) { chk_t = v.get<std::vector<double>>(); }},
                     {"delta", [&](const json& v) { chk_delta = v.get<std::vector<double>>(); }},
                     {"probes", [&](const json& v) { chk_probes = v.get<std::vector<double>>(); }},
                     {"k", [&](const json& v) { chk_k = v.get<std::vector<long long>>(); }},
                     {"s", [&](const json& v) { chk_s = v.get<std::vector<double>>(); }},
                     {"a", [&](const json& v) { chk_a = v.get<double>(); }},
                     {"kappa", [&](const json& v) { chk_kappa = v.get<double>(); }},
                     {"mc", [&](const json& v) { chk_mc = v.get<std::size_t>(); }},
                     {"n", [&](const json& v) { chk_n = v.get<std::size_t>(); }},
                     {"x", [&](const json& v) { chk_x = v.get<double>(); }},
                     {"seed", [&](const json& v) { chk_seed = v.get<std::uint64_t>(); }},
                     {"out", [&](const json& v) { chk_out = v.get<std::string>(); }}},
                    chk_opts);
            }
            return cmd_check(chk_assumption, chk_model, chk_eps, chk_t, chk_delta, chk_probes,
                             chk_k, chk_s, chk_a, chk_kappa, chk_mc, chk_n, chk_x, chk_seed,
                             chk_out);
        }
        if (sol->parsed()) {
            if (!sol_config.empty()) {
                apply_config(*sol, sol_config,
                             {{"psi", [&](const json& v) { sol_psi = v.get<std::string>(); }},
                              {"C", [&](const json& v) { sol_C = v.get<double>(); }},
                              {"alpha", [&](const json& v) { sol_alpha = v.get<double>(); }},
                              {"d", [&](const json& v) { sol_d = v.get<int>(); }},
                              {"n", [&](const json& v) { sol_n = v.get<double>(); }},
                              {"side", [&](const json& v) { sol_side = v.get<std::string>(); }},
                              {"out", [&](const json& v) { sol_out = v.get<std::string>(); }}},
                             sol_opts);
            }
            return cmd_solve(sol_psi, sol_C, sol_alpha, sol_d, sol_n, sol_side, sol_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
