#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dentofuse/mesh.hpp"

namespace dfuse {

/// Counting-based overlap scores. Scalar fields average the non-background
/// classes present in the ground truth; mean_iou averages every class
/// present in the ground truth (background included).
struct OverlapScores {
    double dice = 0.0;
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double mean_iou = 0.0;
    std::map<std::int32_t, double> per_class_dice;
    std::map<std::int32_t, double> per_class_iou;
    std::map<std::int32_t, double> per_class_precision;
    std::map<std::int32_t, double> per_class_recall;
};

/// Throws std::invalid_argument on shape mismatch.
OverlapScores overlap_scores(const std::vector<std::int32_t>& pred,
                             const std::vector<std::int32_t>& gt);

/// Convenience for volumes/masks stored as bytes.
OverlapScores overlap_scores(const std::vector<std::uint8_t>& pred,
                             const std::vector<std::uint8_t>& gt);

/// Fraction of equal entries; used as per-face accuracy for labeled meshes.
double label_accuracy(const std::vector<std::int32_t>& pred,
                      const std::vector<std::int32_t>& gt);

struct SurfaceDistances {
    double assd = 0.0;      // (sum_A d(x,B) + sum_B d(y,A)) / (|A| + |B|)
    double chamfer = 0.0;   // (mean_A d(x,B) + mean_B d(y,A)) / 2
    double hausdorff = 0.0; // max(max_A d(x,B), max_B d(y,A))
};

/// KD-tree accelerated symmetric point-set distances in mm.
/// Throws std::invalid_argument when either cloud is empty.
SurfaceDistances surface_distances(const PointCloud& a, const PointCloud& b);
SurfaceDistances surface_distances(const std::vector<Vec3>& a,
                                   const std::vector<Vec3>& b);

/// Mesh-to-mesh variant via dense deterministic surface sampling
/// (`density` points per mm^2).
SurfaceDistances surface_distances(const TriMesh& a, const TriMesh& b,
                                   double density = 10.0);

}  // namespace dfuse
