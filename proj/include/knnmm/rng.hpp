#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "knnmm/math.hpp"

namespace knnmm {

// Deterministic per-replication randomness. std::mt19937_64's output sequence
// is pinned by the C++ standard, so (seed, stream_id) fully determines every
// draw on every platform. All variate transforms are written out here rather
// than going through std:: distributions, whose algorithms are unspecified.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id),
          gen_(splitmix64(seed + stream_id * 0x9e3779b97f4a7c15ULL)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return gen_(); }

    // uniform on [0,1), 53-bit mantissa
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n) by rejection
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be >= 1");
        const std::uint64_t t = (-n) % n; // 2^64 mod n
        std::uint64_t x;
        do { x = gen_(); } while (x < t);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    int rademacher() { return bernoulli(0.5) ? 1 : -1; }

    // Marsaglia polar method with a cached spare.
    double normal() {
        if (have_spare_) { have_spare_ = false; return spare_; }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Exp(rate): -ln(1-U)/rate, 1-U in (0,1] so the log is finite.
    double exponential(double rate) {
        return -std::log(1.0 - uniform()) / rate;
    }

    // |Cauchy(gamma)|: gamma * tan(pi U / 2), U in [0,1)
    double half_cauchy(double gamma) {
        return gamma * std::tan(0.5 * kPi * uniform());
    }

    // Pareto(x0, p): x0 (1-U)^{-1/p}
    double pareto(double x0, double p) {
        return x0 * std::pow(1.0 - uniform(), -1.0 / p);
    }

    // Z with CDF F_g(t) = 1 - (1+t)^{-g} on [0, inf): (1-U)^{-1/g} - 1
    double power_law(double g) {
        return std::pow(1.0 - uniform(), -1.0 / g) - 1.0;
    }

    // Gamma(shape k, scale theta), Marsaglia-Tsang; k < 1 via the boost
    // Gamma(k) = Gamma(k+1) U^{1/k}.
    double gamma(double k, double theta) {
        if (k < 1.0) {
            const double u = uniform();
            return gamma(k + 1.0, theta) * std::pow(u, 1.0 / k);
        }
        const double d = k - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do { x = normal(); v = 1.0 + c * x; } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * theta;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * theta;
        }
    }

    // Poisson(lambda) by inversion-by-multiplication; fine for lambda <= ~700.
    long long poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be >= 0");
        const double limit = std::exp(-lambda);
        long long n = 0;
        double prod = uniform();
        while (prod > limit) { ++n; prod *= uniform(); }
        return n;
    }

private:
    std::uint64_t seed_, stream_id_;
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Replication r of an experiment with master seed s gets its own stream; the
// (seed + id*odd) -> splitmix64 map is a bijection, so ids never collide.
inline RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
    return RngStream(seed, stream_id);
}

} // namespace knnmm
