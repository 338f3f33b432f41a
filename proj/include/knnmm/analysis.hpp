#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "knnmm/assouad.hpp"
#include "knnmm/math.hpp"
#include "knnmm/models.hpp"
#include "knnmm/rng.hpp"

namespace knnmm {

struct NoBracket : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonPositiveInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Tail description psi(eps) = C * eps^g * ln(1/eps)^r; increasing on (0, e^{-r/g}).
struct TailSpec {
    enum class Form { identity, power, power_log };
    Form form = Form::identity;
    double C = 1.0;
    double g = 1.0;
    double r = 0.0;

    static TailSpec identity() { return {}; }
    static TailSpec power(double g, double C = 1.0) {
        if (!(g > 0.0) || !(C > 0.0)) throw std::invalid_argument("TailSpec: g, C must be positive");
        return {Form::power, C, g, 0.0};
    }
    static TailSpec power_log(double g, double r, double C = 1.0) {
        if (!(g > 0.0) || !(C > 0.0) || !(r >= 0.0))
            throw std::invalid_argument("TailSpec: need g > 0, C > 0, r >= 0");
        return {Form::power_log, C, g, r};
    }

    // upper end of the monotone domain
    double domain_cap() const {
        return form == Form::power_log ? std::min(1.0, std::exp(-r / g)) : 1.0;
    }

    double psi(double eps) const {
        if (!(eps > 0.0)) return 0.0;
        switch (form) {
            case Form::identity: return eps;
            case Form::power: return C * std::pow(eps, g);
            case Form::power_log: return C * std::pow(eps, g) * std::pow(std::log(1.0 / eps), r);
        }
        return eps;
    }

    // inverse on (0, domain_cap]; values at/above psi(cap) saturate to cap so that
    // balance-equation bracketing at the high end stays monotone
    double psi_inv(double y) const {
        if (!(y > 0.0)) throw std::invalid_argument("psi_inv: need y > 0");
        switch (form) {
            case Form::identity: return y;
            case Form::power: return std::pow(y / C, 1.0 / g);
            case Form::power_log: break;
        }
        const double cap = domain_cap();
        if (y >= psi(cap)) return cap;
        // bisection on log eps, tolerance 1e-12
        double lo = std::log(1e-300), hi = std::log(cap);
        if (psi(std::exp(lo)) > y) throw NoBracket("psi_inv: target below psi(1e-300)");
        for (int it = 0; it < 400 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            (psi(std::exp(mid)) < y ? lo : hi) = mid;
        }
        return std::exp(0.5 * (lo + hi));
    }
};

struct RateQuery {
    enum class Side { lower, upper };
    double alpha = 1.0;
    int d = 1;
    double n = 2.0;
    Side side = Side::upper;
};

struct BalanceResult {
    double scale = 0.0;   // epsilon (lower) or nu (upper)
    double rate = 0.0;    // scale^{1+alpha}
    long long k = 0;      // round(scale^{-2}), upper side only
};

// lower: n^{-1} = eps^{2+d} psi_inv(eps^alpha); upper: n^{-1} = psi_inv(nu^{1+alpha}) nu^{2+d}.
// Both right-hand sides increase in the scale, so bisect on log scale in [1e-12, 1].
inline BalanceResult solve_balance(const TailSpec& tail, const RateQuery& query) {
    if (!(query.alpha > 0.0)) throw std::invalid_argument("solve_balance: alpha must be positive");
    if (query.d < 1) throw std::invalid_argument("solve_balance: d must be >= 1");
    if (!(query.n >= 2.0)) throw std::invalid_argument("solve_balance: n must be >= 2");

    const double target = 1.0 / query.n;
    const auto rhs = [&](double s) {
        if (query.side == RateQuery::Side::lower)
            return std::pow(s, 2.0 + query.d) * tail.psi_inv(std::pow(s, query.alpha));
        return tail.psi_inv(std::pow(s, 1.0 + query.alpha)) * std::pow(s, 2.0 + query.d);
    };

    double lo = std::log(1e-12), hi = std::log(1.0);
    if (rhs(std::exp(lo)) > target || rhs(std::exp(hi)) < target)
        throw NoBracket("solve_balance: no sign change on [1e-12, 1]");
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rhs(std::exp(mid)) < target ? lo : hi) = mid;
    }

    BalanceResult res;
    res.scale = std::exp(0.5 * (lo + hi));
    res.rate = std::pow(res.scale, 1.0 + query.alpha);
    if (query.side == RateQuery::Side::upper) res.k = std::llround(1.0 / (res.scale * res.scale));
    return res;
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// OLS of ln(excess) on ln(n)
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
    std::vector<double> lx, ly;
    lx.reserve(points.size());
    ly.reserve(points.size());
    for (const auto& [n, excess] : points) {
        if (!(n > 0.0) || !(excess > 0.0)) throw NonPositiveInput("fit_rate: inputs must be positive");
        lx.push_back(std::log(n));
        ly.push_back(std::log(excess));
    }
    const double mx = mean(lx), my = mean(ly);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: degenerate n grid");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += e * e;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

// ---- concentration / bias bound evaluators -------------------------------

// P(|eta_hat - E eta_hat| > s) <= 2 exp(-2 k s^2)
inline double hoeffding_bound(long long k, double s) {
    if (k < 1) throw std::invalid_argument("hoeffding_bound: k >= 1");
    if (!(s >= 0.0)) throw std::invalid_argument("hoeffding_bound: s >= 0");
    return 2.0 * std::exp(-2.0 * static_cast<double>(k) * s * s);
}

// misclassification tail 2 exp(-2 k (eps - Delta)_+^2)
inline double misclass_bound(long long k, double eps, double delta_bias) {
    if (k < 1) throw std::invalid_argument("misclass_bound: k >= 1");
    const double gap = std::max(0.0, eps - delta_bias);
    return 2.0 * std::exp(-2.0 * static_cast<double>(k) * gap * gap);
}

// L (2/kappa)^{1/d} (k/(n a))^{1/d} + 2 e^{-3k/14}
inline double bias_bound(double L, double kappa, long long k, long long n, double a, int d) {
    if (k < 1 || n < 1) throw std::invalid_argument("bias_bound: k, n >= 1");
    if (!(L > 0.0) || !(kappa > 0.0) || !(a > 0.0) || d < 1)
        throw std::invalid_argument("bias_bound: scale parameters must be positive");
    const double kd = static_cast<double>(k) / (static_cast<double>(n) * a);
    return L * std::pow(2.0 / kappa, 1.0 / d) * std::pow(kd, 1.0 / d) +
           2.0 * std::exp(-3.0 * static_cast<double>(k) / 14.0);
}

// Poisson-size deviation bound 2 pi n [2 exp(-2 k t^2) + 1{t <= 1} e^{-n}]
inline double poisson_bound(long long n, long long k, double t) {
    if (k < 1 || n < 1) throw std::invalid_argument("poisson_bound: k, n >= 1");
    if (!(t >= 0.0)) throw std::invalid_argument("poisson_bound: t >= 0");
    const double nn = static_cast<double>(n);
    double inner = 2.0 * std::exp(-2.0 * static_cast<double>(k) * t * t);
    if (t <= 1.0) inner += std::exp(-nn);
    return 2.0 * kPi * nn * inner;
}

// ---- Monte Carlo assumption checkers --------------------------------------

// fraction of X-draws with density below each eps; one shared sample per call so
// the curve is exactly monotone in eps
template <typename Model>
std::vector<double> empirical_tail_grid(const Model& m, const std::vector<double>& eps_grid,
                                        std::size_t n_mc, RngStream& rng) {
    if (n_mc < 1) throw std::invalid_argument("empirical_tail: n_mc >= 1");
    std::vector<double> dens(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) dens[i] = density_at(m, draw_point(m, rng).x[0]);
    std::vector<double> out;
    out.reserve(eps_grid.size());
    for (double eps : eps_grid) {
        std::size_t hits = 0;
        for (double v : dens) hits += v < eps;
        out.push_back(static_cast<double>(hits) / static_cast<double>(n_mc));
    }
    return out;
}

template <typename Model>
double empirical_tail(const Model& m, double eps, std::size_t n_mc, RngStream& rng) {
    return empirical_tail_grid(m, std::vector<double>{eps}, n_mc, rng).front();
}

// fraction of draws with 0 < |eta - 1/2| < t (both inequalities strict)
template <typename Model>
std::vector<double> empirical_margin_grid(const Model& m, const std::vector<double>& t_grid,
                                          std::size_t n_mc, RngStream& rng) {
    if (n_mc < 1) throw std::invalid_argument("empirical_margin: n_mc >= 1");
    for (double t : t_grid)
        if (!(t > 0.0)) throw std::invalid_argument("empirical_margin: t > 0");
    std::vector<double> gap(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i)
        gap[i] = std::fabs(eta_at(m, draw_point(m, rng).x[0]) - 0.5);
    std::vector<double> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        std::size_t hits = 0;
        for (double v : gap) hits += v > 0.0 && v < t;
        out.push_back(static_cast<double>(hits) / static_cast<double>(n_mc));
    }
    return out;
}

template <typename Model>
double empirical_margin(const Model& m, double t, std::size_t n_mc, RngStream& rng) {
    return empirical_margin_grid(m, std::vector<double>{t}, n_mc, rng).front();
}

// min over probes of P(B(x,delta)) / (mu(x) delta^d); d = 1 and ball mass exact
// for both generator families
template <typename Model>
double minimal_mass_ratio(const Model& m, double delta, const std::vector<double>& probes) {
    if (!(delta > 0.0)) throw std::invalid_argument("minimal_mass_ratio: delta > 0");
    if (probes.empty()) throw std::invalid_argument("minimal_mass_ratio: need probes");
    double best = std::numeric_limits<double>::infinity();
    for (double x : probes) {
        const double mu = density_at(m, x);
        if (!(mu > 0.0)) throw std::invalid_argument("minimal_mass_ratio: probe with zero density");
        best = std::min(best, ball_mass(m, x, delta) / (mu * delta));
    }
    return best;
}

// generic-density variant: ball mass by quadrature
inline double minimal_mass_ratio(const std::function<double(double)>& density, double delta,
                                 const std::vector<double>& probes, double tol = 1e-10) {
    if (!(delta > 0.0)) throw std::invalid_argument("minimal_mass_ratio: delta > 0");
    if (probes.empty()) throw std::invalid_argument("minimal_mass_ratio: need probes");
    double best = std::numeric_limits<double>::infinity();
    for (double x : probes) {
        const double mu = density(x);
        if (!(mu > 0.0)) throw std::invalid_argument("minimal_mass_ratio: probe with zero density");
        best = std::min(best, integrate(density, x - delta, x + delta, tol) / (mu * delta));
    }
    return best;
}

// quantile grid 1%..99% plus the inter-mode density dip at 0
inline std::vector<double> default_probes(const LocationModel& m) {
    std::vector<double> probes{0.0};
    for (int pct = 1; pct <= 99; ++pct) {
        const double p = pct / 100.0;
        double lo = -1.0, hi = 1.0;
        while (mixture_cdf(m, lo) > p) lo *= 2.0;
        while (mixture_cdf(m, hi) < p) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mixture_cdf(m, mid) < p ? lo : hi) = mid;
        }
        probes.push_back(0.5 * (lo + hi));
    }
    return probes;
}

// ball centers, tent shoulders, and segment midpoints of the support
inline std::vector<double> default_probes(const AssouadNetwork& net) {
    std::vector<double> probes;
    const double r = net.ball_radius();
    for (int j = 0; j < net.m; ++j) {
        const double c = net.center(j);
        probes.push_back(c);
        probes.push_back(c + 0.5 * r);
        probes.push_back(c - 0.5 * r);
    }
    probes.push_back(-0.5 * net.half_width());
    probes.push_back(0.0);
    return probes;
}

struct HoeffdingCheckRow {
    long long k = 0;
    double s = 0.0;
    double estimate = 0.0;  // empirical P(|eta_hat - E[eta_hat | X]| > s)
    double mc_se = 0.0;
    double bound = 0.0;     // 2 exp(-2 k s^2)
};

// Labels are independent Bernoulli(eta(X_i)) given the positions, so eta_hat
// concentrates around the k-neighborhood average of eta; the estimate is the
// empirical deviation frequency at a fixed query.
template <typename Model>
std::vector<HoeffdingCheckRow> hoeffding_check(const Model& m, double query_x, std::size_t n,
                                               const std::vector<long long>& k_list,
                                               const std::vector<double>& s_list,
                                               std::size_t replications, RngStream& rng) {
    if (replications < 1) throw std::invalid_argument("hoeffding_check: replications >= 1");
    long long k_max = 0;
    for (long long k : k_list) {
        if (k < 1) throw std::invalid_argument("hoeffding_check: k >= 1");
        k_max = std::max(k_max, k);
    }
    if (static_cast<std::size_t>(k_max) > n)
        throw std::invalid_argument("hoeffding_check: k exceeds sample size");

    std::vector<std::vector<std::size_t>> hits(k_list.size(),
                                               std::vector<std::size_t>(s_list.size(), 0));
    std::vector<double> dist(n);
    std::vector<std::size_t> order(n);
    for (std::size_t rep = 0; rep < replications; ++rep) {
        std::vector<double> xs(n);
        std::vector<int> ys(n);
        std::vector<double> etas(n);
        for (std::size_t i = 0; i < n; ++i) {
            const LabeledPoint p = draw_point(m, rng);
            xs[i] = p.x[0];
            ys[i] = p.y;
            etas[i] = eta_at(m, p.x[0]);
            dist[i] = std::fabs(p.x[0] - query_x);
            order[i] = i;
        }
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        double sum_y = 0.0, sum_eta = 0.0;
        std::size_t pos = 0;
        for (long long k = 1; k <= k_max; ++k, ++pos) {
            sum_y += ys[order[pos]];
            sum_eta += etas[order[pos]];
            for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
                if (k_list[ki] != k) continue;
                const double dev = std::fabs(sum_y - sum_eta) / static_cast<double>(k);
                for (std::size_t si = 0; si < s_list.size(); ++si)
                    hits[ki][si] += dev > s_list[si];
            }
        }
    }

    std::vector<HoeffdingCheckRow> rows;
    for (std::size_t ki = 0; ki < k_list.size(); ++ki)
        for (std::size_t si = 0; si < s_list.size(); ++si) {
            HoeffdingCheckRow row;
            row.k = k_list[ki];
            row.s = s_list[si];
            row.estimate = static_cast<double>(hits[ki][si]) / static_cast<double>(replications);
            row.mc_se = std::sqrt(row.estimate * (1.0 - row.estimate) /
                                  static_cast<double>(replications));
            row.bound = hoeffding_bound(row.k, row.s);
            rows.push_back(row);
        }
    return rows;
}

// max over probes of |grad phi| / phi^a with phi = -ln mu; log_density_grad is
// d/dx ln mu = -phi'
inline double gradient_criterion(const std::function<double(double)>& log_density_grad,
                                 const std::function<double(double)>& log_density, double a_exponent,
                                 const std::vector<double>& probes) {
    if (!(a_exponent > 0.0)) throw std::invalid_argument("gradient_criterion: a > 0");
    if (probes.empty()) throw std::invalid_argument("gradient_criterion: need probes");
    double worst = 0.0;
    for (double x : probes) {
        const double phi = -log_density(x);
        if (!(phi > 0.0))
            throw std::invalid_argument("gradient_criterion: probe outside the low-density region");
        worst = std::max(worst, std::fabs(log_density_grad(x)) / std::pow(phi, a_exponent));
    }
    return worst;
}

}  // namespace knnmm
