#include "jgs/knn.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace jgs {

KdTree3::KdTree3(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
    if (points_.empty()) return;
    std::vector<int> idx(points_.size());
    std::iota(idx.begin(), idx.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree3::build(std::vector<int>& idx, int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                     [&](int a, int b) {
                         if (points_[a][axis] != points_[b][axis])
                             return points_[a][axis] < points_[b][axis];
                         return a < b;  // deterministic tie-break
                     });
    Node n;
    n.point = idx[mid];
    n.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    nodes_[self].left = build(idx, lo, mid, depth + 1);
    nodes_[self].right = build(idx, mid + 1, hi, depth + 1);
    return self;
}

template <typename Visit>
void KdTree3::search(int node, const Eigen::Vector3d& q, double& worst, Visit&& visit) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Eigen::Vector3d& p = points_[n.point];
    visit(n.point, (p - q).squaredNorm());
    const double delta = q[n.axis] - p[n.axis];
    const int first = delta < 0 ? n.left : n.right;
    const int second = delta < 0 ? n.right : n.left;
    search(first, q, worst, visit);
    if (delta * delta <= worst) search(second, q, worst, visit);
}

int KdTree3::nearest(const Eigen::Vector3d& q, double* dist2) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, q, best_d2, [&](int i, double d2) {
        if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
            best_d2 = d2;
            best = i;
        }
    });
    if (dist2) *dist2 = best_d2;
    return best;
}

std::vector<int> KdTree3::k_nearest(const Eigen::Vector3d& q, int k, int exclude) const {
    // Bounded candidate list; fine for the small k used here.
    std::vector<std::pair<double, int>> heap;  // max at front
    double worst = std::numeric_limits<double>::infinity();
    search(root_, q, worst, [&](int i, double d2) {
        if (i == exclude) return;
        if (static_cast<int>(heap.size()) < k) {
            heap.emplace_back(d2, i);
            std::push_heap(heap.begin(), heap.end());
            if (static_cast<int>(heap.size()) == k) worst = heap.front().first;
        } else if (d2 < heap.front().first) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = {d2, i};
            std::push_heap(heap.begin(), heap.end());
            worst = heap.front().first;
        }
    });
    std::sort_heap(heap.begin(), heap.end());
    std::vector<int> out;
    out.reserve(heap.size());
    for (const auto& [d2, i] : heap) out.push_back(i);
    return out;
}

}  // namespace jgs
