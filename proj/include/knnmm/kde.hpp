#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "knnmm/core.hpp"
#include "knnmm/math.hpp"

namespace knnmm {

struct DegenerateSample : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bandwidth selector: Silverman's rule of thumb or a fixed user value.
struct Bandwidth {
    enum class Kind { silverman, fixed };
    Kind kind = Kind::silverman;
    double h = 0.0;

    static Bandwidth silverman() { return {Kind::silverman, 0.0}; }
    static Bandwidth fixed(double h) {
        if (!(h > 0.0)) throw std::invalid_argument("fixed bandwidth must be positive");
        return {Kind::fixed, h};
    }
};

// Gaussian product-kernel mixture with one scalar bandwidth.
struct KdeModel {
    Dataset sample;    // features only (labels zeroed)
    double bandwidth = 1.0;
};

namespace detail {

// Robust per-coordinate scale min(sd, IQR/1.349): equals sd for Gaussian data,
// but stays finite-sensible for heavy tails, where the plain sd explodes and
// flattens the estimate.
inline double robust_scale(std::vector<double> coord) {
    const double sd = sample_sd(coord);
    const double iqr = quantile(coord, 0.75) - quantile(coord, 0.25);
    const double robust = iqr / 1.349;
    if (robust > 0.0 && robust < sd) return robust;
    return sd;
}

}  // namespace detail

// h = sigma_hat * (4 / ((d+2) n))^{1/(d+4)}, sigma_hat averaged across coordinates.
inline KdeModel kde_fit(const std::vector<std::vector<double>>& features, Bandwidth bw) {
    if (features.empty()) throw DegenerateSample("kde_fit: empty sample");
    const std::size_t d = features.front().size();
    if (d == 0) throw DegenerateSample("kde_fit: zero-dimensional sample");

    KdeModel model;
    model.sample.dim = d;
    model.sample.points.reserve(features.size());
    for (const auto& f : features) {
        if (f.size() != d) throw MixedDimensions("kde_fit: inconsistent feature dimensions");
        model.sample.points.push_back({f, 0});
    }

    if (bw.kind == Bandwidth::Kind::fixed) {
        model.bandwidth = bw.h;
        return model;
    }

    const double n = static_cast<double>(features.size());
    double sigma = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> coord(features.size());
        for (std::size_t i = 0; i < features.size(); ++i) coord[i] = features[i][c];
        sigma += detail::robust_scale(std::move(coord));
    }
    sigma /= static_cast<double>(d);
    if (!(sigma > 0.0)) throw DegenerateSample("kde_fit: zero sample scale under silverman");
    model.bandwidth = sigma * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
    return model;
}

inline KdeModel kde_fit(const Dataset& ds, Bandwidth bw) {
    std::vector<std::vector<double>> features;
    features.reserve(ds.size());
    for (const auto& p : ds.points) features.push_back(p.x);
    return kde_fit(features, bw);
}

inline double kde_eval(const KdeModel& model, const std::vector<double>& x) {
    const std::size_t d = model.sample.dim;
    if (x.size() != d) throw MixedDimensions("kde_eval: query dimension mismatch");
    const double h = model.bandwidth;
    double acc = 0.0;
    for (const auto& p : model.sample.points) {
        double prod = 1.0;
        for (std::size_t c = 0; c < d; ++c) prod *= normal_pdf((x[c] - p.x[c]) / h) / h;
        acc += prod;
    }
    return acc / static_cast<double>(model.sample.size());
}

inline double kde_eval(const KdeModel& model, double x) { return kde_eval(model, std::vector<double>{x}); }

}  // namespace knnmm
