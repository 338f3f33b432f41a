#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "knnmm/math.hpp"
#include "knnmm/neighbors.hpp"

namespace knnmm {

struct EmptyNeighborhood : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MissingDensity : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// eta_hat = (1/k) sum of the k nearest labels: plain mean of a 0/1 list.
inline double eta_hat(const std::vector<int>& labels) {
    if (labels.empty()) throw EmptyNeighborhood("eta_hat: empty label list");
    double s = 0.0;
    for (int y : labels) s += y;
    return s / static_cast<double>(labels.size());
}

// Vote is 1 iff the label mean strictly exceeds 1/2 (an exact half votes 0).
inline int classify_vote(double eta_hat_value) {
    return eta_hat_value > 0.5 ? 1 : 0;
}

enum class ScheduleKind { Fixed, CompactRate, GeneralRate, SlicedTheoretical, SlicedEmpirical };

struct KSchedule {
    ScheduleKind kind = ScheduleKind::Fixed;
    long long k = 1;      // Fixed only
    double alpha = 1.0;   // margin exponent for the rate/sliced variants

    static KSchedule fixed(long long k) { return {ScheduleKind::Fixed, k, 1.0}; }
    static KSchedule compact_rate() { return {ScheduleKind::CompactRate, 0, 1.0}; }
    static KSchedule general_rate(double alpha) { return {ScheduleKind::GeneralRate, 0, alpha}; }
    static KSchedule sliced_theoretical(double alpha) {
        return {ScheduleKind::SlicedTheoretical, 0, alpha};
    }
    static KSchedule sliced_empirical(double alpha) {
        return {ScheduleKind::SlicedEmpirical, 0, alpha};
    }

    bool sliced() const {
        return kind == ScheduleKind::SlicedTheoretical || kind == ScheduleKind::SlicedEmpirical;
    }
    std::string name() const {
        switch (kind) {
            case ScheduleKind::Fixed: return "fixed(" + std::to_string(k) + ")";
            case ScheduleKind::CompactRate: return "compact";
            case ScheduleKind::GeneralRate: return "general";
            case ScheduleKind::SlicedTheoretical: return "sliced-theoretical";
            case ScheduleKind::SlicedEmpirical: return "sliced-empirical";
        }
        return "?";
    }
};

// Density handle for the sliced variants: either an analytic mu or a fitted KDE.
using DensityFn = std::function<double(const std::vector<double>&)>;

namespace detail {
// Dyadic slice j >= 0 of u = mu_hat(x) n^{alpha/(2+alpha+d)}:
// 2^{-(j+1)} <= u < 2^{-j}, half-open so each u lands in exactly one slice.
inline int slice_index(double u) {
    int j = static_cast<int>(std::ceil(-std::log2(u))) - 1;
    if (j < 0) j = 0;
    while (u < std::ldexp(1.0, -(j + 1))) ++j;      // repair log2 rounding at boundaries
    while (j > 0 && u >= std::ldexp(1.0, -j)) --j;
    return j;
}
} // namespace detail

inline long long choose_k(const KSchedule& s, long long n, std::size_t d,
                          const std::vector<double>* x = nullptr,
                          const DensityFn* density = nullptr) {
    if (n < 1) throw std::invalid_argument("choose_k: n must be >= 1");
    const double nd = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    long long k = 1;
    switch (s.kind) {
        case ScheduleKind::Fixed:
            k = s.k;
            break;
        case ScheduleKind::CompactRate:
            k = floor_pow(nd, 2.0 / (2.0 + dd));
            break;
        case ScheduleKind::GeneralRate:
            k = floor_pow(nd, 2.0 / (3.0 + s.alpha + dd));
            break;
        case ScheduleKind::SlicedTheoretical:
        case ScheduleKind::SlicedEmpirical: {
            if (x == nullptr || density == nullptr || !*density)
                throw MissingDensity("choose_k: sliced schedule needs x and a density source");
            const double mu = (*density)(*x);
            const double u = mu * std::pow(nd, s.alpha / (2.0 + s.alpha + dd));
            const double base_pow = std::pow(nd, 2.0 / (2.0 + s.alpha + dd));
            if (s.kind == ScheduleKind::SlicedTheoretical) {
                // k_{n,0} = floor(n^{2/(2+a+d)} ln n), floored before the slice scaling
                const double k0 = std::floor(base_pow * std::log(nd) + 1e-9);
                if (u >= 1.0) k = static_cast<long long>(k0);
                else if (mu <= 0.0) k = 1;
                else {
                    const int j = detail::slice_index(u);
                    k = static_cast<long long>(
                        std::floor(k0 * std::pow(2.0, -2.0 * j / (2.0 + dd)) + 1e-9));
                }
            } else {
                // empirical recipe: floor(n^{2/(2+a+d)} 2^{-2j/(2+d)}) + 1, no log factor
                if (u >= 1.0) k = floor_pow(nd, 2.0 / (2.0 + s.alpha + dd)) + 1;
                else if (mu <= 0.0) k = 1;
                else {
                    const int j = detail::slice_index(u);
                    k = static_cast<long long>(
                            std::floor(base_pow * std::pow(2.0, -2.0 * j / (2.0 + dd)) + 1e-9)) + 1;
                }
            }
            break;
        }
    }
    return std::clamp(k, 1LL, n);
}

inline int classify_knn(const NeighborIndex& index, const std::vector<double>& x,
                        const KSchedule& schedule, const DensityFn* density = nullptr) {
    const long long n = static_cast<long long>(index.size());
    const long long k = choose_k(schedule, n, index.data().dim, &x, density);
    const NeighborList nl = index.k_nearest(x, static_cast<std::size_t>(k));
    double s = 0.0;
    for (const Neighbor& nb : nl) s += nb.label;
    return classify_vote(s / static_cast<double>(k));
}

// SDA rule: pool the two fixed-size samples (labels 0 then 1, preserving order
// so the tie rule is reproducible) and vote among the k nearest of the pool.
inline int classify_sda(const Dataset& sample0, const Dataset& sample1,
                        const std::vector<double>& x, long long k) {
    if (sample0.empty() || sample1.empty())
        throw EmptyDataset("classify_sda: both samples must be nonempty");
    if (sample0.dim != sample1.dim) throw DimMismatch("classify_sda: sample dims differ");
    Dataset pooled;
    pooled.dim = sample0.dim;
    pooled.points.reserve(sample0.size() + sample1.size());
    for (const auto& p : sample0.points) pooled.points.push_back({p.x, 0});
    for (const auto& p : sample1.points) pooled.points.push_back({p.x, 1});
    NeighborIndex idx(pooled, Backend::brute);
    return classify_knn(idx, x, KSchedule::fixed(k));
}

} // namespace knnmm
