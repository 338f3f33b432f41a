#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "knnmm/core.hpp"
#include "knnmm/math.hpp"
#include "knnmm/rng.hpp"

namespace knnmm {

struct InvalidNetwork : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// C-infinity bump: exactly 1 on [0,1], exactly 0 on [3/2,inf), strictly
// in between on (1,3/2). Built from the standard mollifier h(t) = e^{-1/t}:
// g(t) = h(t)/(h(t)+h(1-t)) rises smoothly from 0 to 1 on [0,1]; phi(r) = g(3-2r).
inline double bump(double r) {
    const double t = 3.0 - 2.0 * r;
    if (t >= 1.0) return 1.0;
    if (t <= 0.0) return 0.0;
    const double h = std::exp(-1.0 / t);
    const double h1 = std::exp(-1.0 / (1.0 - t));
    return h / (h + h1);
}

// Disjoint-ball perturbation network: m balls B(x_j, 2/q) at x_j = 5j/q carry
// mass omega each (constant or tent-shaped density); the complement interval
// A1 takes the remaining 1 - m*omega uniformly. eta is 1/2 outside the balls
// and (1 + sigma_j Phi_j)/2 inside, Phi_j(x) = c_phi q^{-1} phi(q|x - x_j|).
struct AssouadNetwork {
    enum class Variant { ConstantDensity, TentDensity };

    int q = 8;
    int m = 1;
    double omega = 0.1;
    std::vector<int> sigma;
    double c_phi = 1.0;
    Variant variant = Variant::ConstantDensity;
    double gamma = 1.0; // tent half-width q^{-gamma}; gamma >= 1 keeps the tent inside {phi == 1}

    double center(int j) const { return 5.0 * (j + 1) / q; } // j is 0-based
    double ball_radius() const { return 2.0 / q; }
    double half_width() const { return (5.0 * m + 5.0) / q; }
    double a1_length() const { return (6.0 * m + 10.0) / q; }
    double a1_density() const { return (1.0 - m * omega) / a1_length(); }

    // -1 if x is in no ball
    int ball_of(double x) const {
        const int j = static_cast<int>(std::lround(x * q / 5.0)) - 1;
        if (j < 0 || j >= m) return -1;
        return std::fabs(x - center(j)) <= ball_radius() ? j : -1;
    }

    std::string label() const {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "assouad-%s(q=%d,m=%d,omega=%g)",
                      variant == Variant::ConstantDensity ? "const" : "tent", q, m, omega);
        return buf;
    }
};

inline AssouadNetwork make_assouad(int q, int m, double omega, std::vector<int> sigma,
                                   double c_phi = 1.0,
                                   AssouadNetwork::Variant variant =
                                       AssouadNetwork::Variant::ConstantDensity,
                                   double gamma = 1.0) {
    if (q < 2) throw InvalidNetwork("make_assouad: q must be >= 2");
    if (m < 1) throw InvalidNetwork("make_assouad: m must be >= 1");
    if (!(omega > 0.0) || omega > 1.0 / m)
        throw InvalidNetwork("make_assouad: omega must lie in (0, 1/m]");
    if (static_cast<int>(sigma.size()) != m)
        throw InvalidNetwork("make_assouad: sigma must have one entry per ball");
    for (int s : sigma)
        if (s != 1 && s != -1) throw InvalidNetwork("make_assouad: sigma entries must be +-1");
    if (!(c_phi > 0.0) || c_phi > q)
        throw InvalidNetwork("make_assouad: need 0 < c_phi <= q to keep eta in [0,1]");
    if (variant == AssouadNetwork::Variant::TentDensity && gamma < 1.0)
        throw InvalidNetwork("make_assouad: tent variant needs gamma >= 1");
    return AssouadNetwork{q, m, omega, std::move(sigma), c_phi, variant, gamma};
}

inline double assouad_density(const AssouadNetwork& net, double x) {
    const int j = net.ball_of(x);
    if (j >= 0) {
        if (net.variant == AssouadNetwork::Variant::ConstantDensity)
            return net.omega * net.q / 4.0;
        const double qg = std::pow(net.q, net.gamma);
        const double s = 1.0 - std::fabs(x - net.center(j)) * qg;
        return s > 0.0 ? net.omega * qg * s : 0.0;
    }
    return std::fabs(x) <= net.half_width() ? net.a1_density() : 0.0;
}

inline double assouad_eta(const AssouadNetwork& net, double x) {
    const int j = net.ball_of(x);
    if (j < 0) return 0.5;
    const double phi_j = net.c_phi / net.q * bump(net.q * std::fabs(x - net.center(j)));
    return 0.5 * (1.0 + net.sigma[j] * phi_j);
}

inline int bayes_classify(const AssouadNetwork& net, double x) {
    return assouad_eta(net, x) > 0.5 ? 1 : 0;
}

// R* = 1/2 - E|eta - 1/2|; both variants integrate in closed form.
// Constant: per ball (c_phi/2q)(omega q/4) * (2/q) I_phi with
// I_phi = int_0^2 phi = 1 + int_0^1 g = 5/4 (g(t) + g(1-t) = 1).
// Tent (gamma >= 1): the tent lives where phi == 1, so the integral is exactly
// omega, giving (c_phi/2q) omega per ball.
inline double bayes_risk(const AssouadNetwork& net) {
    if (net.variant == AssouadNetwork::Variant::ConstantDensity)
        return 0.5 - net.m * net.omega * net.c_phi * 1.25 / (4.0 * net.q);
    return 0.5 - net.m * net.omega * net.c_phi / (2.0 * net.q);
}

namespace detail {
inline double interval_overlap(double lo1, double hi1, double lo2, double hi2) {
    return std::max(0.0, std::min(hi1, hi2) - std::max(lo1, lo2));
}

// signed tent mass between a ball center and center + t
inline double tent_side_mass(const AssouadNetwork& net, double t) {
    const double qg = std::pow(net.q, net.gamma);
    const double u = std::min(std::fabs(t) * qg, 1.0);
    const double mass = 0.5 * net.omega * u * (2.0 - u);
    return t >= 0.0 ? mass : -mass;
}
} // namespace detail

// Exact P(B(x, delta)) under the network measure (piecewise closed form).
inline double ball_mass(const AssouadNetwork& net, double x, double delta) {
    const double lo = x - delta, hi = x + delta;
    double mass = 0.0;
    double ball_len = 0.0;
    for (int j = 0; j < net.m; ++j) {
        const double c = net.center(j), r = net.ball_radius();
        const double a = std::max(lo, c - r), b = std::min(hi, c + r);
        if (b <= a) continue;
        ball_len += b - a;
        if (net.variant == AssouadNetwork::Variant::ConstantDensity)
            mass += net.omega * net.q / 4.0 * (b - a);
        else
            mass += detail::tent_side_mass(net, b - c) - detail::tent_side_mass(net, a - c);
    }
    const double L = net.half_width();
    mass += net.a1_density() * std::max(0.0, detail::interval_overlap(lo, hi, -L, L) - ball_len);
    return mass;
}

inline LabeledPoint draw_point(const AssouadNetwork& net, RngStream& rng) {
    const double L = net.half_width(), r = net.ball_radius();
    double x;
    if (rng.uniform() < net.m * net.omega) {
        const int j = static_cast<int>(rng.uniform_index(net.m));
        const double c = net.center(j);
        if (net.variant == AssouadNetwork::Variant::ConstantDensity) {
            x = c + (2.0 * rng.uniform() - 1.0) * r;
        } else {
            // triangle radius CDF: P(R <= t) = 1 - (1 - t q^gamma)^2
            const double rad = (1.0 - std::sqrt(1.0 - rng.uniform())) / std::pow(net.q, net.gamma);
            x = c + rng.rademacher() * rad;
        }
    } else {
        // uniform over A1: walk the m+1 complement segments
        double t = rng.uniform() * net.a1_length();
        double seg_lo = -L;
        x = L;
        for (int j = 0; j <= net.m; ++j) {
            const double seg_hi = j < net.m ? net.center(j) - r : L;
            const double len = seg_hi - seg_lo;
            if (t <= len || j == net.m) { x = seg_lo + std::min(t, len); break; }
            t -= len;
            seg_lo = net.center(j) + r;
        }
    }
    const int y = rng.bernoulli(assouad_eta(net, x)) ? 1 : 0;
    return {{x}, y};
}

inline Dataset sample_assouad(const AssouadNetwork& net, std::size_t n, RngStream& rng) {
    Dataset ds;
    ds.dim = 1;
    ds.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.points.push_back(draw_point(net, rng));
    return ds;
}

// uniform names so generic checkers treat networks like any other model
inline double density_at(const AssouadNetwork& net, double x) { return assouad_density(net, x); }
inline double eta_at(const AssouadNetwork& net, double x) { return assouad_eta(net, x); }

inline nlohmann::json to_json(const AssouadNetwork& net) {
    return nlohmann::json{
        {"family", "assouad"},
        {"q", net.q},
        {"m", net.m},
        {"omega", net.omega},
        {"sigma", net.sigma},
        {"c_phi", net.c_phi},
        {"variant", net.variant == AssouadNetwork::Variant::ConstantDensity ? "constant" : "tent"},
        {"gamma", net.gamma}};
}

inline AssouadNetwork assouad_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("family", "") != std::string("assouad"))
        throw std::invalid_argument("network json: family must be \"assouad\"");
    const std::string variant = j.value("variant", "constant");
    if (variant != "constant" && variant != "tent")
        throw std::invalid_argument("network json: variant must be constant|tent");
    return make_assouad(j.at("q").get<int>(), j.at("m").get<int>(),
                        j.at("omega").get<double>(),
                        j.at("sigma").get<std::vector<int>>(),
                        j.value("c_phi", 1.0),
                        variant == "tent" ? AssouadNetwork::Variant::TentDensity
                                          : AssouadNetwork::Variant::ConstantDensity,
                        j.value("gamma", 1.0));
}

} // namespace knnmm
