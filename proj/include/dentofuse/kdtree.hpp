#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "dentofuse/geometry.hpp"

namespace dfuse {

/// Static 3-d KD-tree over a point set. The tree stores indices into the
/// caller's point vector; queries return those indices. Construction and
/// queries are deterministic (ties resolved toward the lower index).
class KdTree3 {
  public:
    KdTree3() = default;
    explicit KdTree3(const std::vector<Vec3>& points) { build(points); }

    void build(const std::vector<Vec3>& points);

    bool empty() const { return pts_.empty(); }
    std::size_t size() const { return pts_.size(); }

    /// Index of the nearest point and its squared distance.
    /// Returns npos when the tree is empty.
    std::size_t nearest(const Vec3& q, double* sq_dist_out = nullptr) const;

    /// All indices with |p - q| <= radius, sorted ascending by index.
    std::vector<std::size_t> radius_search(const Vec3& q, double radius) const;

    /// k nearest indices ordered by increasing distance (ties by index).
    std::vector<std::size_t> knn(const Vec3& q, std::size_t k) const;

    static constexpr std::size_t npos = std::size_t(-1);

  private:
    struct Node {
        int axis = -1;          // -1 marks a leaf
        double split = 0.0;
        std::size_t begin = 0;  // leaf range into order_
        std::size_t end = 0;
        int left = -1;
        int right = -1;
    };

    int build_recursive(std::size_t begin, std::size_t end, int depth);

    void nearest_recursive(int node, const Vec3& q, std::size_t& best,
                           double& best_sq) const;
    void radius_recursive(int node, const Vec3& q, double r_sq,
                          std::vector<std::size_t>& out) const;
    void knn_recursive(int node, const Vec3& q, std::size_t k,
                       std::vector<std::pair<double, std::size_t>>& heap) const;

    std::vector<Vec3> pts_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
    static constexpr std::size_t kLeafSize = 16;
};

}  // namespace dfuse
