#include "dentofuse/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace dfuse {

void KdTree3::build(const std::vector<Vec3>& points) {
    pts_ = points;
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), std::size_t(0));
    nodes_.clear();
    nodes_.reserve(pts_.empty() ? 1 : 2 * pts_.size() / kLeafSize + 8);
    root_ = pts_.empty() ? -1 : build_recursive(0, pts_.size(), 0);
}

int KdTree3::build_recursive(std::size_t begin, std::size_t end, int depth) {
    Node n;
    if (end - begin <= kLeafSize) {
        n.begin = begin;
        n.end = end;
        nodes_.push_back(n);
        return int(nodes_.size()) - 1;
    }
    // split on the widest axis for balanced cells
    Vec3 lo = pts_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(pts_[order_[i]]);
        hi = hi.cwiseMax(pts_[order_[i]]);
    }
    Vec3 extent = hi - lo;
    int axis = 0;
    if (extent[1] > extent[axis]) axis = 1;
    if (extent[2] > extent[axis]) axis = 2;

    std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](std::size_t a, std::size_t b) {
                         double va = pts_[a][axis], vb = pts_[b][axis];
                         if (va != vb) return va < vb;
                         return a < b;  // deterministic tiebreak
                     });
    n.axis = axis;
    n.split = pts_[order_[mid]][axis];
    nodes_.push_back(n);
    int self = int(nodes_.size()) - 1;
    int left = build_recursive(begin, mid, depth + 1);
    int right = build_recursive(mid, end, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

std::size_t KdTree3::nearest(const Vec3& q, double* sq_dist_out) const {
    if (root_ < 0) return npos;
    std::size_t best = npos;
    double best_sq = std::numeric_limits<double>::infinity();
    nearest_recursive(root_, q, best, best_sq);
    if (sq_dist_out) *sq_dist_out = best_sq;
    return best;
}

void KdTree3::nearest_recursive(int node, const Vec3& q, std::size_t& best,
                                double& best_sq) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            std::size_t idx = order_[i];
            double d = (pts_[idx] - q).squaredNorm();
            if (d < best_sq || (d == best_sq && idx < best)) {
                best_sq = d;
                best = idx;
            }
        }
        return;
    }
    double delta = q[n.axis] - n.split;
    int first = delta <= 0.0 ? n.left : n.right;
    int second = delta <= 0.0 ? n.right : n.left;
    nearest_recursive(first, q, best, best_sq);
    if (delta * delta <= best_sq) nearest_recursive(second, q, best, best_sq);
}

std::vector<std::size_t> KdTree3::radius_search(const Vec3& q, double radius) const {
    std::vector<std::size_t> out;
    if (root_ < 0 || radius < 0.0) return out;
    radius_recursive(root_, q, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

void KdTree3::radius_recursive(int node, const Vec3& q, double r_sq,
                               std::vector<std::size_t>& out) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            std::size_t idx = order_[i];
            if ((pts_[idx] - q).squaredNorm() <= r_sq) out.push_back(idx);
        }
        return;
    }
    double delta = q[n.axis] - n.split;
    if (delta <= 0.0) {
        radius_recursive(n.left, q, r_sq, out);
        if (delta * delta <= r_sq) radius_recursive(n.right, q, r_sq, out);
    } else {
        radius_recursive(n.right, q, r_sq, out);
        if (delta * delta <= r_sq) radius_recursive(n.left, q, r_sq, out);
    }
}

std::vector<std::size_t> KdTree3::knn(const Vec3& q, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> heap;  // max-heap on (dist, idx)
    if (root_ >= 0 && k > 0) knn_recursive(root_, q, k, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<std::size_t> out;
    out.reserve(heap.size());
    for (auto& [d, i] : heap) out.push_back(i);
    return out;
}

void KdTree3::knn_recursive(int node, const Vec3& q, std::size_t k,
                            std::vector<std::pair<double, std::size_t>>& heap) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            std::size_t idx = order_[i];
            double d = (pts_[idx] - q).squaredNorm();
            std::pair<double, std::size_t> cand{d, idx};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    double delta = q[n.axis] - n.split;
    int first = delta <= 0.0 ? n.left : n.right;
    int second = delta <= 0.0 ? n.right : n.left;
    knn_recursive(first, q, k, heap);
    if (heap.size() < k || delta * delta <= heap.front().first)
        knn_recursive(second, q, k, heap);
}

}  // namespace dfuse
