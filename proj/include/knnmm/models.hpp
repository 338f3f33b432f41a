#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "knnmm/core.hpp"
#include "knnmm/math.hpp"
#include "knnmm/rng.hpp"

namespace knnmm {

// Z is a positive random variable; epsilon*Z (epsilon Rademacher) then has the
// symmetric density zeta(|u|)/2. "Folded" families are parameterized so that
// epsilon*Z recovers the familiar two-sided law (Gauss sigma, Cauchy gamma).
enum class ZKind { GaussFolded, Laplace, Gamma, CauchyFolded, Pareto, PowerLaw, Degenerate, Uniform };

struct ZFamily {
    ZKind kind = ZKind::GaussFolded;
    double p1 = 1.0, p2 = 1.0;

    static ZFamily gauss(double sigma) {
        require(sigma > 0, "gauss: sigma must be > 0");
        return {ZKind::GaussFolded, sigma, 0.0};
    }
    static ZFamily laplace(double lambda) {
        require(lambda > 0, "laplace: lambda must be > 0");
        return {ZKind::Laplace, lambda, 0.0};
    }
    static ZFamily gamma(double k, double theta) {
        require(k > 0 && theta > 0, "gamma: k and theta must be > 0");
        return {ZKind::Gamma, k, theta};
    }
    static ZFamily cauchy(double gamma) {
        require(gamma > 0, "cauchy: gamma must be > 0");
        return {ZKind::CauchyFolded, gamma, 0.0};
    }
    static ZFamily pareto(double x0, double p) {
        require(x0 > 0 && p > 0, "pareto: x0 and p must be > 0");
        return {ZKind::Pareto, x0, p};
    }
    static ZFamily power_law(double g) {
        require(g > 0, "power_law: g must be > 0");
        return {ZKind::PowerLaw, g, 0.0};
    }
    // Test hooks: Z == 0 (perfectly separated classes) and Z ~ U[0,width]
    // (compact support, exact ties).
    static ZFamily degenerate() { return {ZKind::Degenerate, 0.0, 0.0}; }
    static ZFamily uniform(double width) {
        require(width > 0, "uniform: width must be > 0");
        return {ZKind::Uniform, width, 0.0};
    }

    // density zeta(t) of Z on [0, inf)
    double density(double t) const {
        if (t < 0.0) return 0.0;
        switch (kind) {
            case ZKind::GaussFolded:
                return 2.0 / p1 * normal_pdf(t / p1);
            case ZKind::Laplace:
                return p1 * std::exp(-p1 * t);
            case ZKind::Gamma:
                if (t <= 0.0) return 0.0;
                return std::exp((p1 - 1.0) * std::log(t) - t / p2 - std::lgamma(p1) - p1 * std::log(p2));
            case ZKind::CauchyFolded:
                return 2.0 / (kPi * p1 * (1.0 + (t / p1) * (t / p1)));
            case ZKind::Pareto:
                if (t < p1) return 0.0;
                return p2 * std::pow(p1, p2) / std::pow(t, p2 + 1.0);
            case ZKind::PowerLaw:
                // F_g(t) = 1 - (1+t)^{-g}
                return p1 * std::pow(1.0 + t, -(p1 + 1.0));
            case ZKind::Degenerate:
                return 0.0; // point mass at 0: no Lebesgue density
            case ZKind::Uniform:
                return t <= p1 ? 1.0 / p1 : 0.0;
        }
        return 0.0;
    }

    double cdf(double t) const {
        if (t < 0.0) return 0.0;
        switch (kind) {
            case ZKind::GaussFolded:
                return 2.0 * normal_cdf(t / p1) - 1.0;
            case ZKind::Laplace:
                return 1.0 - std::exp(-p1 * t);
            case ZKind::Gamma:
                return reg_lower_gamma(p1, t / p2);
            case ZKind::CauchyFolded:
                return 2.0 / kPi * std::atan(t / p1);
            case ZKind::Pareto:
                return t < p1 ? 0.0 : 1.0 - std::pow(p1 / t, p2);
            case ZKind::PowerLaw:
                return 1.0 - std::pow(1.0 + t, -p1);
            case ZKind::Degenerate:
                return 1.0;
            case ZKind::Uniform:
                return t >= p1 ? 1.0 : t / p1;
        }
        return 0.0;
    }

    double sample(RngStream& rng) const {
        switch (kind) {
            case ZKind::GaussFolded: return std::fabs(p1 * rng.normal());
            case ZKind::Laplace: return rng.exponential(p1);
            case ZKind::Gamma: return rng.gamma(p1, p2);
            case ZKind::CauchyFolded: return rng.half_cauchy(p1);
            case ZKind::Pareto: return rng.pareto(p1, p2);
            case ZKind::PowerLaw: return rng.power_law(p1);
            case ZKind::Degenerate: return 0.0;
            case ZKind::Uniform: return p1 * rng.uniform();
        }
        return 0.0;
    }

    std::string name() const {
        switch (kind) {
            case ZKind::GaussFolded: return "gauss";
            case ZKind::Laplace: return "laplace";
            case ZKind::Gamma: return "gamma";
            case ZKind::CauchyFolded: return "cauchy";
            case ZKind::Pareto: return "pareto";
            case ZKind::PowerLaw: return "powerlaw";
            case ZKind::Degenerate: return "degenerate";
            case ZKind::Uniform: return "uniform";
        }
        return "?";
    }

private:
    static void require(bool ok, const char* msg) {
        if (!ok) throw std::invalid_argument(msg);
    }
};

// X = eps Z + (2Y-1) b with Y ~ Bernoulli(1/2), eps Rademacher: two mirrored
// components centered at the symmetric location pair -b and +b.
struct LocationModel {
    ZFamily z;
    double b = 1.0;

    std::string label() const {
        char buf[96];
        if (z.kind == ZKind::Gamma || z.kind == ZKind::Pareto)
            std::snprintf(buf, sizeof(buf), "%s(%g,%g),b=%g", z.name().c_str(), z.p1, z.p2, b);
        else if (z.kind == ZKind::Degenerate)
            std::snprintf(buf, sizeof(buf), "%s,b=%g", z.name().c_str(), b);
        else
            std::snprintf(buf, sizeof(buf), "%s(%g),b=%g", z.name().c_str(), z.p1, b);
        return buf;
    }
};

inline LocationModel make_location_model(ZFamily z, double b) {
    if (!(b > 0.0)) throw std::invalid_argument("make_location_model: b must be > 0");
    return LocationModel{z, b};
}

inline LabeledPoint draw_point(const LocationModel& m, RngStream& rng) {
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const int eps = rng.rademacher();
    const double zv = m.z.sample(rng);
    return {{eps * zv + (2 * y - 1) * m.b}, y};
}

inline Dataset sample_location(const LocationModel& m, std::size_t n, RngStream& rng) {
    Dataset ds;
    ds.dim = 1;
    ds.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.points.push_back(draw_point(m, rng));
    return ds;
}

// mu(x) = 1/4 [zeta(|x-b|) + zeta(|x+b|)]
inline double density_at(const LocationModel& m, double x) {
    return 0.25 * (m.z.density(std::fabs(x - m.b)) + m.z.density(std::fabs(x + m.b)));
}

// eta(x) = f1/(f0+f1) with f_y(x) = 1/2 zeta(|x - (2y-1)b|); 1/2 where both vanish
inline double eta_at(const LocationModel& m, double x) {
    const double f1 = m.z.density(std::fabs(x - m.b));
    const double f0 = m.z.density(std::fabs(x + m.b));
    if (f0 + f1 <= 0.0) return 0.5;
    return f1 / (f0 + f1);
}

inline int bayes_classify(const LocationModel&, double x) { return x > 0.0 ? 1 : 0; }

// R* = 1/2 P(Z > b): an error needs eps to carry the point across 0.
inline double bayes_risk(const LocationModel& m) {
    return 0.5 * (1.0 - m.z.cdf(m.b));
}

// CDF of eps Z: G(u) = (1 + sign(u) F_Z(|u|)) / 2
inline double signed_z_cdf(const ZFamily& z, double u) {
    return u >= 0.0 ? 0.5 * (1.0 + z.cdf(u)) : 0.5 * (1.0 - z.cdf(-u));
}

inline double mixture_cdf(const LocationModel& m, double t) {
    return 0.5 * (signed_z_cdf(m.z, t - m.b) + signed_z_cdf(m.z, t + m.b));
}

inline double ball_mass(const LocationModel& m, double x, double delta) {
    return mixture_cdf(m, x + delta) - mixture_cdf(m, x - delta);
}

// One location-model class on its own: density 1/2 zeta(|x-center|). The SDA
// experiments use a pair of these as the f/g populations.
struct ComponentDensity {
    ZFamily z;
    double center = 0.0;
};

inline double density_at(const ComponentDensity& c, double x) {
    return 0.5 * c.z.density(std::fabs(x - c.center));
}

inline double component_cdf(const ComponentDensity& c, double t) {
    return signed_z_cdf(c.z, t - c.center);
}

inline double draw_component(const ComponentDensity& c, RngStream& rng) {
    const int eps = rng.rademacher();
    const double zv = c.z.sample(rng);
    return c.center + eps * zv;
}

inline Dataset sample_component(const ComponentDensity& c, std::size_t n, int label,
                                RngStream& rng) {
    Dataset ds;
    ds.dim = 1;
    ds.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.points.push_back({{draw_component(c, rng)}, label});
    return ds;
}

// ---- JSON descriptors ------------------------------------------------------
// {"family": "...", "params": {...}, "b": ...}; flat parameter keys are also
// accepted ({"family":"powerlaw","g":1,"b":0.5}).

inline nlohmann::json to_json(const LocationModel& m) {
    nlohmann::json p;
    switch (m.z.kind) {
        case ZKind::GaussFolded: p["sigma"] = m.z.p1; break;
        case ZKind::Laplace: p["lambda"] = m.z.p1; break;
        case ZKind::Gamma: p["k"] = m.z.p1; p["theta"] = m.z.p2; break;
        case ZKind::CauchyFolded: p["gamma"] = m.z.p1; break;
        case ZKind::Pareto: p["x0"] = m.z.p1; p["p"] = m.z.p2; break;
        case ZKind::PowerLaw: p["g"] = m.z.p1; break;
        case ZKind::Degenerate: break;
        case ZKind::Uniform: p["width"] = m.z.p1; break;
    }
    return nlohmann::json{{"family", m.z.name()}, {"params", p}, {"b", m.b}};
}

inline LocationModel location_model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family"))
        throw std::invalid_argument("model json: object with a \"family\" key required");
    const std::string family = j.at("family").get<std::string>();
    const nlohmann::json& p = j.contains("params") ? j.at("params") : j;
    auto param = [&](const char* key, double fallback = std::nan("")) {
        if (p.contains(key)) return p.at(key).get<double>();
        if (std::isnan(fallback))
            throw std::invalid_argument(std::string("model json: missing parameter ") + key);
        return fallback;
    };
    ZFamily z;
    if (family == "gauss") z = ZFamily::gauss(param("sigma", 1.0));
    else if (family == "laplace") z = ZFamily::laplace(param("lambda", 1.0));
    else if (family == "gamma") z = ZFamily::gamma(param("k"), param("theta", 1.0));
    else if (family == "cauchy") z = ZFamily::cauchy(param("gamma", 1.0));
    else if (family == "pareto") z = ZFamily::pareto(param("x0", 1.0), param("p"));
    else if (family == "powerlaw") z = ZFamily::power_law(param("g"));
    else if (family == "degenerate") z = ZFamily::degenerate();
    else if (family == "uniform") z = ZFamily::uniform(param("width", 1.0));
    else throw std::invalid_argument("model json: unknown family \"" + family + "\"");
    const double b = j.contains("b") ? j.at("b").get<double>() : 1.0;
    return make_location_model(z, b);
}

} // namespace knnmm
