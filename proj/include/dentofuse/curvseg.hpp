#pragma once

#include <cstdint>
#include <vector>

#include "dentofuse/mesh.hpp"

namespace dfuse {

/// Per-vertex point curvature: mean angle between the vertex normal and the
/// normals of its neighbors up to graph order l.
struct CurvatureField {
    std::vector<double> values;  // radians, in [0, pi]
    int neighbor_order = 1;
};

/// Throws when a normal has zero length or order < 1. Vertices without
/// neighbors get curvature 0.
CurvatureField point_curvature(const TriMesh& m, int neighbor_order);

struct ComponentLabeling {
    std::vector<int> component_of;   // one id per vertex, 0..count-1
    int count = 0;
    std::vector<Vec3> gravity_centers;
    std::vector<std::size_t> sizes;
};

struct ErosionConfig {
    double top_percent = 15.0;            // M, in (0, 100)
    int neighbor_order = 2;               // l
    std::size_t min_component_size = 30;  // smaller components count as debris
};

/// Erosion-expansion segmentation: drop the top-M-percent-curvature
/// vertices, split the rest into connected components, then give every
/// dropped vertex the id of the nearest surviving component (per-component
/// KD-trees; ties go to the larger component, then the lower id).
ComponentLabeling erosion_expansion_segment(const TriMesh& m, const ErosionConfig& cfg);

inline ComponentLabeling erosion_expansion_segment(const TriMesh& m,
                                                   double top_percent,
                                                   int neighbor_order) {
    ErosionConfig cfg;
    cfg.top_percent = top_percent;
    cfg.neighbor_order = neighbor_order;
    return erosion_expansion_segment(m, cfg);
}

struct JawSplit {
    std::vector<int> component_jaw;  // per component: 0 = upper, 1 = lower
    std::vector<int> vertex_jaw;     // per input vertex
    Vec3 plane_point = Vec3::Zero();
    Vec3 plane_normal = Vec3::UnitZ();
    double margin = 0.0;  // min gravity-center distance to the plane
    TriMesh upper;
    TriMesh lower;
};

/// Separates tooth components into two jaws with a RANSAC plane over the
/// component gravity centers; hypotheses are mid-planes of center pairs,
/// scored by the worst-case center distance. Throws std::runtime_error when
/// no plane attains a positive margin.
JawSplit split_jaws(const ComponentLabeling& components, const TriMesh& m,
                    std::uint64_t seed = 0, int iterations = 500);

/// Assigns another mesh (e.g. the bone surface) to the jaws by nearest tooth
/// vertex; returns {upper, lower} submeshes.
std::pair<TriMesh, TriMesh> assign_to_jaws(const TriMesh& other,
                                           const TriMesh& tooth_mesh,
                                           const ComponentLabeling& components,
                                           const std::vector<int>& component_jaw);

}  // namespace dfuse
