#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "knnmm/core.hpp"

namespace knnmm {

struct EmptyDataset : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct KTooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DimMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Neighbor {
    std::size_t index;  // position in the original dataset
    double distance;    // Euclidean
    int label;
};
using NeighborList = std::vector<Neighbor>;

// One shared accumulation order so brute force and the tree see bit-identical
// squared distances (ties must agree exactly across backends).
inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

enum class Backend { brute, tree };

// Exact k-NN index. Tie rule everywhere: order by (distance, original index),
// both ascending. The kd-tree prunes a subtree only when the splitting-plane
// gap strictly exceeds the current worst distance; since every floating-point
// partial sum of squares is >= each of its nonnegative terms, pruning can
// never discard a point that brute force would keep, ties included.
class NeighborIndex {
public:
    NeighborIndex(const Dataset& data, Backend backend)
        : data_(&data), backend_(backend) {
        if (data.empty()) throw EmptyDataset("build_index: dataset is empty");
        if (backend_ == Backend::tree) build_tree();
    }

    const Dataset& data() const { return *data_; }
    std::size_t size() const { return data_->size(); }

    NeighborList k_nearest(const std::vector<double>& query, std::size_t k) const {
        if (k == 0) throw KTooLarge("k_nearest: k must be >= 1");
        if (k > data_->size()) throw KTooLarge("k_nearest: k exceeds dataset size");
        if (query.size() != data_->dim) throw DimMismatch("k_nearest: query dimension mismatch");

        Heap heap; // max-heap on (squared distance, index): lexicographic worst on top
        if (backend_ == Backend::brute) {
            for (std::size_t i = 0; i < data_->size(); ++i)
                consider(heap, k, squared_distance(query, data_->points[i].x), i);
        } else {
            search(0, query, k, heap);
        }

        NeighborList out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            const auto [d2, idx] = heap.top();
            heap.pop();
            out[i] = Neighbor{idx, std::sqrt(d2), data_->points[idx].y};
        }
        return out;
    }

private:
    using Entry = std::pair<double, std::size_t>;
    using Heap = std::priority_queue<Entry>;

    struct Node {
        std::size_t point;               // dataset index of the splitting point
        std::size_t split_dim;
        int left = -1, right = -1;       // child node ids, -1 if none
        std::size_t leaf_begin = 0, leaf_end = 0; // span into order_ when leaf
        bool is_leaf = false;
    };

    static void consider(Heap& heap, std::size_t k, double d2, std::size_t idx) {
        if (heap.size() < k) heap.emplace(d2, idx);
        else if (Entry{d2, idx} < heap.top()) {
            heap.pop();
            heap.emplace(d2, idx);
        }
    }

    void build_tree() {
        order_.resize(data_->size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        nodes_.reserve(2 * data_->size() / kLeafSize + 4);
        build(0, data_->size());
    }

    int build(std::size_t lo, std::size_t hi) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        if (hi - lo <= kLeafSize) {
            nodes_[id].is_leaf = true;
            nodes_[id].leaf_begin = lo;
            nodes_[id].leaf_end = hi;
            return id;
        }
        // split on the widest-spread coordinate, median element by (coord, index)
        std::size_t dim = 0;
        double best_spread = -1.0;
        for (std::size_t c = 0; c < data_->dim; ++c) {
            double mn = data_->points[order_[lo]].x[c], mx = mn;
            for (std::size_t i = lo + 1; i < hi; ++i) {
                const double v = data_->points[order_[i]].x[c];
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            if (mx - mn > best_spread) { best_spread = mx - mn; dim = c; }
        }
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             const double va = data_->points[a].x[dim];
                             const double vb = data_->points[b].x[dim];
                             return va < vb || (va == vb && a < b);
                         });
        nodes_[id].point = order_[mid];
        nodes_[id].split_dim = dim;
        const int l = build(lo, mid);
        nodes_[id].left = l;
        if (mid + 1 < hi) nodes_[id].right = build(mid + 1, hi);
        return id;
    }

    void search(int id, const std::vector<double>& q, std::size_t k, Heap& heap) const {
        const Node& node = nodes_[id];
        if (node.is_leaf) {
            for (std::size_t i = node.leaf_begin; i < node.leaf_end; ++i) {
                const std::size_t idx = order_[i];
                consider(heap, k, squared_distance(q, data_->points[idx].x), idx);
            }
            return;
        }
        consider(heap, k, squared_distance(q, data_->points[node.point].x), node.point);
        const double diff = q[node.split_dim] - data_->points[node.point].x[node.split_dim];
        const int near = diff < 0.0 ? node.left : (node.right >= 0 ? node.right : node.left);
        const int far = (near == node.left) ? node.right : node.left;
        if (near >= 0) search(near, q, k, heap);
        if (far >= 0 && (heap.size() < k || diff * diff <= heap.top().first))
            search(far, q, k, heap);
    }

    static constexpr std::size_t kLeafSize = 8;
    const Dataset* data_;
    Backend backend_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

inline NeighborIndex build_index(const Dataset& data, Backend backend) {
    return NeighborIndex(data, backend);
}

inline NeighborList k_nearest(const NeighborIndex& index, const std::vector<double>& query,
                              std::size_t k) {
    return index.k_nearest(query, k);
}

} // namespace knnmm
