#pragma once
#include "srnf/core.hpp"
#include <algorithm>
#include <numeric>
#include <vector>

namespace srnflab {

// Median-split kd-tree over an index permutation; nodes are contiguous
// ranges.  Holds a reference to the point set, which must outlive the tree.
class KdTree {
  public:
    explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts), order_(pts.size()) {
        if (pts_.empty()) throw InvalidParam("KdTree: empty point set");
        std::iota(order_.begin(), order_.end(), std::size_t(0));
        build(0, pts_.size(), 0);
    }

    std::size_t nearest(const Vec3& query) const {
        std::size_t best = order_[0];
        double best_d2 = (pts_[best] - query).squaredNorm();
        search(0, pts_.size(), 0, query, best, best_d2);
        return best;
    }

  private:
    void build(std::size_t lo, std::size_t hi, int axis) {
        if (hi - lo <= 1) return;
        std::size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::size_t a, std::size_t b) { return pts_[a][axis] < pts_[b][axis]; });
        build(lo, mid, (axis + 1) % 3);
        build(mid + 1, hi, (axis + 1) % 3);
    }

    void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q, std::size_t& best, double& best_d2) const {
        if (lo >= hi) return;
        std::size_t mid = (lo + hi) / 2;
        std::size_t p = order_[mid];
        double d2 = (pts_[p] - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = p;
        }
        double delta = q[axis] - pts_[p][axis];
        int next = (axis + 1) % 3;
        if (delta < 0) {
            search(lo, mid, next, q, best, best_d2);
            if (delta * delta < best_d2) search(mid + 1, hi, next, q, best, best_d2);
        } else {
            search(mid + 1, hi, next, q, best, best_d2);
            if (delta * delta < best_d2) search(lo, mid, next, q, best, best_d2);
        }
    }

    const std::vector<Vec3>& pts_;
    std::vector<std::size_t> order_;
};

} // namespace srnflab
