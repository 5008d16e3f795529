#pragma once

#include <Eigen/Dense>
#include <vector>

namespace jgs {

// Static k-d tree over 3D points. Built once, queried for exact nearest
// neighbors; used for canonical-surface anchoring and init-time scales.
class KdTree3 {
public:
    KdTree3() = default;
    explicit KdTree3(std::vector<Eigen::Vector3d> points);

    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }
    const Eigen::Vector3d& point(int i) const { return points_[i]; }

    // Index of the exact nearest point; squared distance in *dist2 if given.
    int nearest(const Eigen::Vector3d& q, double* dist2 = nullptr) const;

    // Indices of the k exact nearest points, ascending distance. If
    // exclude >= 0 that index is skipped (self-queries).
    std::vector<int> k_nearest(const Eigen::Vector3d& q, int k, int exclude = -1) const;

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1, right = -1;
    };

    int build(std::vector<int>& idx, int lo, int hi, int depth);

    template <typename Visit>
    void search(int node, const Eigen::Vector3d& q, double& worst, Visit&& visit) const;

    std::vector<Eigen::Vector3d> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace jgs
