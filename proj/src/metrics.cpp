#include "dentofuse/metrics.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/parallel.hpp"

namespace dfuse {

OverlapScores overlap_scores(const std::vector<std::int32_t>& pred,
                             const std::vector<std::int32_t>& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("overlap_scores: shape mismatch");
    std::set<std::int32_t> gt_classes(gt.begin(), gt.end());

    OverlapScores s;
    double fg_dice = 0, fg_iou = 0, fg_prec = 0, fg_rec = 0, all_iou = 0;
    std::size_t fg_count = 0;
    for (auto c : gt_classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            bool p = pred[i] == c, g = gt[i] == c;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        double denom = double(2 * tp + fp + fn);
        double dice = denom > 0 ? 2.0 * double(tp) / denom : 1.0;
        double iou = (tp + fp + fn) > 0 ? double(tp) / double(tp + fp + fn) : 1.0;
        double prec = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        double rec = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        s.per_class_dice[c] = dice;
        s.per_class_iou[c] = iou;
        s.per_class_precision[c] = prec;
        s.per_class_recall[c] = rec;
        all_iou += iou;
        if (c != 0) {
            fg_dice += dice;
            fg_iou += iou;
            fg_prec += prec;
            fg_rec += rec;
            ++fg_count;
        }
    }
    s.mean_iou = gt_classes.empty() ? 0.0 : all_iou / double(gt_classes.size());
    if (fg_count > 0) {
        s.dice = fg_dice / double(fg_count);
        s.iou = fg_iou / double(fg_count);
        s.precision = fg_prec / double(fg_count);
        s.recall = fg_rec / double(fg_count);
    } else {
        // background-only ground truth: fall back to the background class
        s.dice = s.per_class_dice.count(0) ? s.per_class_dice[0] : 0.0;
        s.iou = s.per_class_iou.count(0) ? s.per_class_iou[0] : 0.0;
        s.precision = s.per_class_precision.count(0) ? s.per_class_precision[0] : 0.0;
        s.recall = s.per_class_recall.count(0) ? s.per_class_recall[0] : 0.0;
    }
    return s;
}

OverlapScores overlap_scores(const std::vector<std::uint8_t>& pred,
                             const std::vector<std::uint8_t>& gt) {
    std::vector<std::int32_t> p(pred.begin(), pred.end());
    std::vector<std::int32_t> g(gt.begin(), gt.end());
    return overlap_scores(p, g);
}

double label_accuracy(const std::vector<std::int32_t>& pred,
                      const std::vector<std::int32_t>& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("label_accuracy: shape mismatch");
    if (pred.empty()) return 1.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == gt[i];
    return double(hit) / double(pred.size());
}

namespace {

/// Sum, max and per-point distances from each point of `from` to its
/// nearest neighbor in `tree`.
void directed_distances(const std::vector<Vec3>& from, const KdTree3& tree,
                        double& sum, double& max_d) {
    std::vector<double> d(from.size());
    parallel_for_chunked(from.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double sq = 0.0;
            tree.nearest(from[i], &sq);
            d[i] = std::sqrt(sq);
        }
    });
    sum = 0.0;
    max_d = 0.0;
    for (double v : d) {
        sum += v;
        max_d = std::max(max_d, v);
    }
}

}  // namespace

SurfaceDistances surface_distances(const std::vector<Vec3>& a,
                                   const std::vector<Vec3>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("surface_distances: empty point set");
    KdTree3 ta(a), tb(b);
    double sum_ab = 0, max_ab = 0, sum_ba = 0, max_ba = 0;
    directed_distances(a, tb, sum_ab, max_ab);
    directed_distances(b, ta, sum_ba, max_ba);
    SurfaceDistances s;
    s.assd = (sum_ab + sum_ba) / double(a.size() + b.size());
    s.chamfer = 0.5 * (sum_ab / double(a.size()) + sum_ba / double(b.size()));
    s.hausdorff = std::max(max_ab, max_ba);
    return s;
}

SurfaceDistances surface_distances(const PointCloud& a, const PointCloud& b) {
    return surface_distances(a.points, b.points);
}

SurfaceDistances surface_distances(const TriMesh& a, const TriMesh& b,
                                   double density) {
    PointCloud ca = sample_surface(a, density, true);
    PointCloud cb = sample_surface(b, density, true);
    return surface_distances(ca.points, cb.points);
}

}  // namespace dfuse
