#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dentofuse/geometry.hpp"

namespace dfuse {

enum class Units : std::uint8_t { mm = 0, voxel = 1 };

enum class Provenance : std::uint8_t { none = 0, ios = 1, cbct = 2 };

/// Indexed triangle surface. Vertex labels and provenance are optional
/// per-vertex properties (empty vector = property absent).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<Vec3> vertex_normals;          // unit length when present
    std::vector<std::int32_t> labels;          // e.g. FDI codes or component ids
    std::vector<std::uint8_t> provenance;      // Provenance values
    Units units = Units::mm;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
    bool empty() const { return vertices.empty(); }
    bool has_normals() const { return vertex_normals.size() == vertices.size(); }
    bool has_labels() const { return labels.size() == vertices.size(); }
    bool has_provenance() const { return provenance.size() == vertices.size(); }
};

/// Oriented point set with the same optional properties as TriMesh.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<std::int32_t> labels;
    std::vector<std::uint8_t> provenance;
    Units units = Units::mm;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_normals() const { return normals.size() == points.size(); }
    bool has_labels() const { return labels.size() == points.size(); }
    bool has_provenance() const { return provenance.size() == points.size(); }
};

/// Area-weighted vertex normals, normalized. Zero-area stars get +z.
void compute_vertex_normals(TriMesh& m);

/// One-ring vertex adjacency, each list sorted ascending, no duplicates.
std::vector<std::vector<std::uint32_t>> vertex_adjacency(const TriMesh& m);

/// Count of incident faces per undirected edge. Key order: (min,max).
struct EdgeStats {
    std::size_t edge_count = 0;
    std::size_t boundary_edges = 0;     // exactly 1 incident face
    std::size_t nonmanifold_edges = 0;  // more than 2 incident faces
};
EdgeStats edge_statistics(const TriMesh& m);

inline bool is_watertight(const TriMesh& m) {
    if (m.faces.empty()) return false;
    EdgeStats s = edge_statistics(m);
    return s.boundary_edges == 0 && s.nonmanifold_edges == 0;
}

inline bool is_edge_manifold(const TriMesh& m) {
    return edge_statistics(m).nonmanifold_edges == 0;
}

double surface_area(const TriMesh& m);

/// Signed volume via the divergence theorem; positive for outward-oriented
/// closed surfaces.
double signed_volume(const TriMesh& m);

/// Validates index ranges, degenerate faces and normal lengths.
/// Returns an empty string when the mesh is well formed.
std::string validate_mesh(const TriMesh& m);

/// Keeps the vertices listed in `keep` (dense bool mask) and the faces whose
/// three corners survive. Properties are carried over.
TriMesh submesh_by_vertex_mask(const TriMesh& m, const std::vector<char>& keep);

/// Applies p' = s*R*p + t to vertices (and rotates normals).
TriMesh transformed(const TriMesh& m, double scale, const Mat3& rotation,
                    const Vec3& translation);
PointCloud transformed(const PointCloud& c, double scale, const Mat3& rotation,
                       const Vec3& translation);

/// Vertex positions + normals as a cloud (normals computed when missing).
PointCloud mesh_to_cloud(const TriMesh& m);

/// Deterministic area-uniform surface samples, about `density` points per
/// square unit of area (plus all vertices when include_vertices).
PointCloud sample_surface(const TriMesh& m, double density,
                          bool include_vertices = false);

/// Concatenates clouds, preserving per-point properties.
PointCloud concat(const PointCloud& a, const PointCloud& b);

}  // namespace dfuse
