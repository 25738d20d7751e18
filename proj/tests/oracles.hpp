#pragma once

// Brute-force reference implementations. These stay independent of the
// library's accelerated paths: everything here is O(N*M) scans or direct
// counting.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "dentofuse/geometry.hpp"
#include "dentofuse/metrics.hpp"

namespace dfuse::test {

inline double nearest_distance_brute(const Vec3& p, const std::vector<Vec3>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) best = std::min(best, (p - q).norm());
    return best;
}

inline SurfaceDistances surface_distances_brute(const std::vector<Vec3>& a,
                                                const std::vector<Vec3>& b) {
    double sum_ab = 0, max_ab = 0, sum_ba = 0, max_ba = 0;
    for (const auto& p : a) {
        double d = nearest_distance_brute(p, b);
        sum_ab += d;
        max_ab = std::max(max_ab, d);
    }
    for (const auto& q : b) {
        double d = nearest_distance_brute(q, a);
        sum_ba += d;
        max_ba = std::max(max_ba, d);
    }
    SurfaceDistances s;
    s.assd = (sum_ab + sum_ba) / double(a.size() + b.size());
    s.chamfer = 0.5 * (sum_ab / double(a.size()) + sum_ba / double(b.size()));
    s.hausdorff = std::max(max_ab, max_ba);
    return s;
}

/// Direct counting oracle for binary masks (class c vs rest).
struct BinaryCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
    double dice() const {
        double d = double(2 * tp + fp + fn);
        return d > 0 ? 2.0 * double(tp) / d : 1.0;
    }
    double iou() const {
        double d = double(tp + fp + fn);
        return d > 0 ? double(tp) / d : 1.0;
    }
    double precision() const { return tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0; }
    double recall() const { return tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0; }
};

inline BinaryCounts count_binary(const std::vector<std::int32_t>& pred,
                                 const std::vector<std::int32_t>& gt,
                                 std::int32_t cls) {
    BinaryCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = pred[i] == cls, g = gt[i] == cls;
        c.tp += p && g;
        c.fp += p && !g;
        c.fn += !p && g;
    }
    return c;
}

/// Brute-force DBSCAN by direct neighborhood counting; returns cluster id
/// per point (-1 = noise). Matches the classic algorithm semantics.
inline std::vector<int> dbscan_brute(const std::vector<Vec3>& pts, double eps,
                                     int min_pts) {
    const std::size_t n = pts.size();
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j)
            if ((pts[i] - pts[j]).norm() <= eps) out.push_back(j);
        return out;
    };
    std::vector<int> label(n, -2);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != -2) continue;
        auto nb = neighbors(i);
        if (nb.size() < std::size_t(min_pts)) {
            label[i] = -1;
            continue;
        }
        label[i] = cluster;
        std::vector<std::size_t> queue(nb.begin(), nb.end());
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            std::size_t j = queue[qi];
            if (label[j] == -1) label[j] = cluster;
            if (label[j] != -2) continue;
            label[j] = cluster;
            auto nb2 = neighbors(j);
            if (nb2.size() >= std::size_t(min_pts))
                queue.insert(queue.end(), nb2.begin(), nb2.end());
        }
        ++cluster;
    }
    return label;
}

/// Exhaustive best separating plane over all center pairs (mid-planes),
/// scored by the minimum center distance.
struct PlaneOracle {
    Vec3 point = Vec3::Zero(), normal = Vec3::UnitZ();
    double margin = -1.0;
};

inline PlaneOracle best_pair_plane_brute(const std::vector<Vec3>& centers) {
    PlaneOracle best;
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            Vec3 n = centers[j] - centers[i];
            if (n.norm() < 1e-12) continue;
            n.normalize();
            Vec3 p = 0.5 * (centers[i] + centers[j]);
            double margin = std::numeric_limits<double>::infinity();
            int above = 0, below = 0;
            for (const auto& c : centers) {
                double d = (c - p).dot(n);
                margin = std::min(margin, std::abs(d));
                (d > 0 ? above : below)++;
            }
            if (above == 0 || below == 0) continue;
            if (margin > best.margin) {
                best.margin = margin;
                best.point = p;
                best.normal = n;
            }
        }
    return best;
}

}  // namespace dfuse::test
