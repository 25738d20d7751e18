#pragma once

#include <cstdint>
#include <vector>

#include "dentofuse/mesh.hpp"
#include "dentofuse/transform.hpp"
#include "dentofuse/volume.hpp"

namespace dfuse {

/// Synthetic two-arch dental scene: capsule teeth on a parabolic arch,
/// bone as a swept tube, rasterized to a LabelVolume, plus analytic crown
/// meshes standing in for intraoral scans. Supplies ground truth for the
/// whole pipeline.
struct PhantomConfig {
    int teeth_per_jaw = 8;          // [4, 16]
    double voxel_mm = 0.25;         // [0.125, 0.5]
    double bite_gap_mm = -0.2;      // <= 0 gives a contacted bite

    double arch_width_mm = 17.0;
    double arch_depth_mm = 10.0;
    double arch_warp = 1.18;        // arc-length skew; breaks left/right symmetry

    double tooth_radius_mm = 1.35;
    double tooth_length_mm = 7.0;
    double crown_height_mm = 2.4;   // extent of the scanned crown band
    double radius_jitter = 0.12;    // relative, per tooth
    double length_jitter = 0.10;
    double lateral_jitter_mm = 0.2;

    double bone_radius_mm = 2.3;
    double bone_center_offset_mm = 5.3;  // from tip plane to tube axis

    double ios_ring_step_mm = 0.2;
    int ios_segments = 28;
    double ios_max_rotation_deg = 25.0;
    double ios_max_translation_mm = 15.0;

    double gt_sample_step_mm = 0.35;  // spacing of ground-truth surface samples
};

struct PhantomTooth {
    int fdi = 0;
    int jaw = 0;           // 0 = upper, 1 = lower
    Vec3 tip_center;       // outermost crown point, CBCT frame mm
    Vec3 axis_a, axis_b;   // capsule segment, a = crown side
    double radius = 0.0;
    double length = 0.0;
};

struct PhantomScene {
    LabelVolume volume;

    TriMesh gt_cbct_mesh;  // analytic union surface of both jaws (trimmed)

    TriMesh gt_ios_mesh_upper;  // crown meshes in their own scanner frame
    TriMesh gt_ios_mesh_lower;
    SimilarityTransform gt_ios_to_cbct_upper;
    SimilarityTransform gt_ios_to_cbct_lower;

    std::vector<PhantomTooth> teeth;  // uppers first, arch order
    int gt_tooth_count_upper = 0;
    int gt_tooth_count_lower = 0;

    // Exact per-jaw union-surface samples (CBCT frame) for distance metrics.
    PointCloud gt_surface_upper;
    PointCloud gt_surface_lower;

    // Crown meshes already placed in the CBCT frame (= gt transform applied).
    TriMesh gt_crown_mesh_upper;
    TriMesh gt_crown_mesh_lower;
};

/// Deterministic for a fixed (seed, config). Throws std::invalid_argument
/// when the config leaves the documented ranges.
PhantomScene generate_phantom(std::uint64_t seed, const PhantomConfig& config);

/// Writes volume, IOS meshes, ground-truth clouds and transforms into a
/// directory; returns the volume header path.
std::filesystem::path save_phantom(const std::filesystem::path& dir,
                                   const PhantomScene& scene);

}  // namespace dfuse
