#pragma once

#include <cstdint>
#include <vector>

#include "dentofuse/mesh.hpp"

namespace dfuse {

/// Median nearest-neighbor distance; 0 for clouds under 2 points.
double median_nn_spacing(const PointCloud& cloud);

struct CrownRemovalResult {
    PointCloud residual;            // surviving cbct points, original order
    std::vector<double> distances;  // nearest-IOS distance per surviving point
    std::size_t removed_count = 0;
    double cut_distance = 0.0;      // largest removed distance (0 when none)
    bool adaptive_cut = false;
};

/// Sorts CBCT points by distance to the IOS cloud and removes the closest
/// removal_fraction of them. Throws std::invalid_argument on empty inputs
/// or a fraction outside [0, 1].
CrownRemovalResult remove_cbct_crown(const PointCloud& cbct, const PointCloud& ios,
                                     double removal_fraction);

/// Valley cut on a bimodal nearest-distance histogram; falls back to the
/// fixed fraction when no clear valley exists.
CrownRemovalResult remove_cbct_crown_adaptive(const PointCloud& cbct,
                                              const PointCloud& ios,
                                              double fallback_fraction = 0.2);

/// Classic DBSCAN. Noise points and clusters smaller than min_cluster_size
/// are dropped; surviving points keep their original order and properties.
PointCloud dbscan_cleanup(const PointCloud& cloud, double eps, int min_pts,
                          std::size_t min_cluster_size = 1);

/// Ball-pivoting surface reconstruction over the given radii (ascending).
/// Output vertices are exactly the input points (same order); input normals
/// orient the triangles.
TriMesh ball_pivot(const PointCloud& cloud, const std::vector<double>& radii);

struct FuseConfig {
    std::vector<double> radius_multipliers{1.0, 2.0, 4.0};  // x median spacing
    int smooth_iterations = 1;
    double smooth_step = 0.3;
};

/// Concatenates the IOS cloud (reference, kept verbatim) with the CBCT
/// residual, tags provenance, surfaces by ball pivoting and refines with
/// Laplacian smoothing. Throws when inputs lack normals or are degenerate.
TriMesh fuse_and_reconstruct(const PointCloud& ios, const PointCloud& cbct_residual,
                             const FuseConfig& cfg = {});

}  // namespace dfuse
