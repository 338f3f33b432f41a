#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace knnmm {

struct MixedDimensions : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct BadLabel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LabeledPoint {
    std::vector<double> x;
    int y = 0; // label in {0,1}; kept as an int so eta_hat is a plain mean
};

struct Dataset {
    std::vector<LabeledPoint> points;
    std::size_t dim = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

inline Dataset make_dataset(std::vector<std::pair<std::vector<double>, int>> rows) {
    Dataset ds;
    for (auto& [x, y] : rows) {
        if (x.empty()) throw MixedDimensions("make_dataset: empty feature vector");
        if (ds.points.empty()) ds.dim = x.size();
        else if (x.size() != ds.dim)
            throw MixedDimensions("make_dataset: inconsistent feature dimensions");
        if (y != 0 && y != 1) throw BadLabel("make_dataset: label must be 0 or 1");
        for (double c : x)
            if (!std::isfinite(c)) throw std::invalid_argument("make_dataset: non-finite coordinate");
        ds.points.push_back({std::move(x), y});
    }
    return ds;
}

// 17 significant digits round-trips every double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// RFC-4180 quoting for fields that embed commas or quotes (model labels do)
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// CSV with header x1,...,xd,y
inline std::string dataset_to_csv(const Dataset& ds) {
    std::ostringstream out;
    for (std::size_t c = 0; c < ds.dim; ++c) out << 'x' << (c + 1) << ',';
    out << "y\n";
    for (const auto& p : ds.points) {
        for (double c : p.x) out << format_double(c) << ',';
        out << p.y << '\n';
    }
    return out.str();
}

inline Dataset dataset_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("dataset_from_csv: empty input");
    std::vector<std::pair<std::vector<double>, int>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) fields.push_back(std::stod(cell));
        if (fields.size() < 2) throw std::invalid_argument("dataset_from_csv: malformed row");
        const double yv = fields.back();
        fields.pop_back();
        if (yv != 0.0 && yv != 1.0) throw BadLabel("dataset_from_csv: label must be 0 or 1");
        rows.emplace_back(std::move(fields), static_cast<int>(yv));
    }
    return make_dataset(std::move(rows));
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_dataset_csv: cannot open " + path);
    f << dataset_to_csv(ds);
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_dataset_csv: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return dataset_from_csv(buf.str());
}

} // namespace knnmm
