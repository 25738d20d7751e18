#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dentofuse/mesh.hpp"
#include "dentofuse/transform.hpp"

namespace dfuse {

/// 33-bin fast point feature histogram (3 angular features x 11 bins).
using FpfhDescriptor = std::array<double, 33>;

struct RegistrationReport {
    bool success = false;
    double fitness = 0.0;       // inlier fraction of the source cloud
    double inlier_rmse = 0.0;   // mm, over inlier correspondences
    std::size_t correspondence_count = 0;
    SimilarityTransform transform;
    std::string message;
};

/// Converts voxel-unit geometry to mm by componentwise spacing multiply;
/// passes mm geometry through unchanged. Normals are re-normalized under
/// anisotropic scaling. Throws when spacing is not strictly positive.
TriMesh scale_align(const TriMesh& ios, const Vec3& spacing);
PointCloud scale_align(const PointCloud& cloud, const Vec3& spacing);

/// Grid average downsample; normals averaged and re-normalized, labels and
/// provenance taken from the first point of each cell. Deterministic.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

/// PCA plane-fit normals over radius neighborhoods, oriented away from the
/// cloud centroid. Only used when the input carries no normals.
void estimate_normals(PointCloud& cloud, double radius);

/// Standard FPFH. Requires >= 10 points; throws when a point has no
/// neighbor within radius_feature.
std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud,
                                         double radius_normal,
                                         double radius_feature);

struct GlobalRegistrationConfig {
    double voxel = 2.0;                  // downsample size, mm
    double inlier_threshold = 3.0;       // mm; default 1.5x voxel
    double radius_normal = 4.0;          // fpfh support radii, mm
    double radius_feature = 5.0;
    double edge_similarity = 0.9;        // RANSAC edge-length prune
    int max_iterations = 100000;
    double confidence = 0.999;           // early-exit confidence
    double min_fitness = 0.25;           // below this the result is a failure
    std::uint64_t seed = 0;

    static GlobalRegistrationConfig for_voxel(double v) {
        GlobalRegistrationConfig c;
        c.voxel = v;
        c.inlier_threshold = 1.5 * v;
        c.radius_normal = 2.0 * v;
        c.radius_feature = 2.5 * v;
        return c;
    }
};

/// RANSAC over 3-point FPFH correspondences, rigid-only (scale comes from
/// scale_align). A result under min_fitness reports success=false rather
/// than throwing.
RegistrationReport global_register(const PointCloud& src, const PointCloud& dst,
                                   const GlobalRegistrationConfig& cfg);

struct IcpScale {
    double voxel = 1.0;        // mm
    double corr_radius = 2.0;  // correspondence radius, mm
    int max_iterations = 50;
};

struct IcpConfig {
    std::vector<IcpScale> scales{{2.0, 4.0, 50}, {1.0, 2.0, 50}, {0.5, 1.0, 50}};
    double rel_tolerance = 1e-7;  // |delta rmse| convergence threshold
};

/// Point-to-plane ICP refined coarse-to-fine. Fitness and rmse are reported
/// at the finest scale. Throws std::runtime_error when the correspondence
/// set becomes empty at some scale.
RegistrationReport multiscale_icp(const PointCloud& src, const PointCloud& dst,
                                  const SimilarityTransform& init,
                                  const IcpConfig& cfg = {});

/// One damped Gauss-Newton point-to-plane solve on a fixed correspondence
/// set; the returned transform never increases the point-to-plane residual.
/// Exposed for property tests.
SimilarityTransform point_to_plane_step(const std::vector<Vec3>& src,
                                        const std::vector<Vec3>& dst,
                                        const std::vector<Vec3>& dst_normals,
                                        const SimilarityTransform& current);

/// Sum of squared point-to-plane residuals under a transform.
double point_to_plane_residual(const std::vector<Vec3>& src,
                               const std::vector<Vec3>& dst,
                               const std::vector<Vec3>& dst_normals,
                               const SimilarityTransform& t);

}  // namespace dfuse
