#pragma once

#include "dentofuse/mesh.hpp"
#include "dentofuse/volume.hpp"

namespace dfuse {

/// Extracts the closed, outward-oriented surface of the target-label region
/// at the 0.5 iso-level. The grid is zero-padded, so label regions touching
/// the volume border still produce closed surfaces. Returns an empty mesh
/// when no strictly interior voxel carries the target label.
///
/// Cube cases come from the crisp indicator; edge vertices are positioned by
/// linear interpolation of a 3x3x3 box-filtered indicator when it crosses
/// the iso-level on that edge (mid-edge otherwise). This keeps the binary
/// topology while placing vertices sub-voxel, so areas of smooth regions
/// track the true surface instead of the voxelization staircase.
TriMesh marching_cubes(const LabelVolume& v, std::uint8_t target_label);

/// Half-kernel smoothing: each vertex moves toward the average of the
/// one-ring neighbors whose normals deviate from its own by less than
/// normal_gate. Crease vertices keep their position because neighbors
/// across the crease are gated out. Throws on non-manifold input.
TriMesh hlo_smooth(const TriMesh& m, int iterations, double normal_gate_rad,
                   double step = 0.5);

/// Uniform-weight umbrella operator, step in (0, 1]. iterations == 0 is the
/// identity.
TriMesh laplacian_smooth(const TriMesh& m, int iterations, double step);

}  // namespace dfuse
