#include "dentofuse/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace dfuse {

namespace {

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

}  // namespace

void compute_vertex_normals(TriMesh& m) {
    m.vertex_normals.assign(m.vertices.size(), Vec3::Zero());
    for (const auto& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        Vec3 n = (b - a).cross(c - a);  // magnitude = 2*area, weights by area
        m.vertex_normals[f[0]] += n;
        m.vertex_normals[f[1]] += n;
        m.vertex_normals[f[2]] += n;
    }
    for (auto& n : m.vertex_normals) {
        double len = n.norm();
        n = len > 1e-20 ? Vec3(n / len) : Vec3(0, 0, 1);
    }
}

std::vector<std::vector<std::uint32_t>> vertex_adjacency(const TriMesh& m) {
    std::vector<std::vector<std::uint32_t>> adj(m.vertices.size());
    for (const auto& f : m.faces) {
        for (int i = 0; i < 3; ++i) {
            std::uint32_t a = f[i], b = f[(i + 1) % 3];
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    for (auto& lst : adj) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
    return adj;
}

EdgeStats edge_statistics(const TriMesh& m) {
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(m.faces.size() * 2);
    for (const auto& f : m.faces) {
        count[edge_key(f[0], f[1])]++;
        count[edge_key(f[1], f[2])]++;
        count[edge_key(f[2], f[0])]++;
    }
    EdgeStats s;
    s.edge_count = count.size();
    for (const auto& [k, c] : count) {
        if (c == 1) s.boundary_edges++;
        if (c > 2) s.nonmanifold_edges++;
    }
    return s;
}

double surface_area(const TriMesh& m) {
    double area = 0.0;
    for (const auto& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    return area;
}

double signed_volume(const TriMesh& m) {
    double vol = 0.0;
    for (const auto& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        vol += a.dot(b.cross(c)) / 6.0;
    }
    return vol;
}

std::string validate_mesh(const TriMesh& m) {
    const std::size_t nv = m.vertices.size();
    for (const auto& f : m.faces) {
        if (f[0] >= nv || f[1] >= nv || f[2] >= nv) return "face index out of range";
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) return "degenerate face";
    }
    if (m.has_normals()) {
        for (const auto& n : m.vertex_normals) {
            if (std::abs(n.norm() - 1.0) > 1e-6) return "non-unit vertex normal";
        }
    } else if (!m.vertex_normals.empty()) {
        return "normal count mismatch";
    }
    if (!m.labels.empty() && m.labels.size() != nv) return "label count mismatch";
    if (!m.provenance.empty() && m.provenance.size() != nv)
        return "provenance count mismatch";
    return {};
}

TriMesh submesh_by_vertex_mask(const TriMesh& m, const std::vector<char>& keep) {
    TriMesh out;
    out.units = m.units;
    std::vector<std::uint32_t> remap(m.vertices.size(), std::uint32_t(-1));
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        if (!keep[i]) continue;
        remap[i] = std::uint32_t(out.vertices.size());
        out.vertices.push_back(m.vertices[i]);
        if (m.has_normals()) out.vertex_normals.push_back(m.vertex_normals[i]);
        if (m.has_labels()) out.labels.push_back(m.labels[i]);
        if (m.has_provenance()) out.provenance.push_back(m.provenance[i]);
    }
    for (const auto& f : m.faces) {
        std::uint32_t a = remap[f[0]], b = remap[f[1]], c = remap[f[2]];
        if (a != std::uint32_t(-1) && b != std::uint32_t(-1) && c != std::uint32_t(-1))
            out.faces.push_back({a, b, c});
    }
    return out;
}

TriMesh transformed(const TriMesh& m, double scale, const Mat3& rotation,
                    const Vec3& translation) {
    TriMesh out = m;
    for (auto& v : out.vertices) v = scale * (rotation * v) + translation;
    for (auto& n : out.vertex_normals) n = rotation * n;
    return out;
}

PointCloud transformed(const PointCloud& c, double scale, const Mat3& rotation,
                       const Vec3& translation) {
    PointCloud out = c;
    for (auto& p : out.points) p = scale * (rotation * p) + translation;
    for (auto& n : out.normals) n = rotation * n;
    return out;
}

PointCloud mesh_to_cloud(const TriMesh& m) {
    TriMesh tmp;
    const TriMesh* src = &m;
    if (!m.has_normals()) {
        tmp = m;
        compute_vertex_normals(tmp);
        src = &tmp;
    }
    PointCloud out;
    out.points = src->vertices;
    out.normals = src->vertex_normals;
    out.labels = src->labels;
    out.provenance = src->provenance;
    out.units = src->units;
    return out;
}

PointCloud sample_surface(const TriMesh& m, double density, bool include_vertices) {
    PointCloud out;
    out.units = m.units;
    TriMesh tmp;
    const TriMesh* src = &m;
    if (!m.has_normals()) {
        tmp = m;
        compute_vertex_normals(tmp);
        src = &tmp;
    }
    if (include_vertices) {
        out.points = src->vertices;
        out.normals = src->vertex_normals;
        if (src->has_labels()) out.labels = src->labels;
        if (src->has_provenance()) out.provenance = src->provenance;
    }
    // Low-discrepancy barycentric samples per face; count proportional to
    // area so total density is uniform. No RNG: fully deterministic.
    const double g1 = 0.7548776662466927;  // plastic-constant sequence
    const double g2 = 0.5698402909980532;
    for (std::size_t fi = 0; fi < src->faces.size(); ++fi) {
        const auto& f = src->faces[fi];
        const Vec3& a = src->vertices[f[0]];
        const Vec3& b = src->vertices[f[1]];
        const Vec3& c = src->vertices[f[2]];
        Vec3 fn = (b - a).cross(c - a);
        double area2 = fn.norm();
        std::size_t count = std::size_t(std::ceil(0.5 * area2 * density));
        Vec3 n = area2 > 1e-20 ? Vec3(fn / area2) : Vec3(0, 0, 1);
        for (std::size_t s = 0; s < count; ++s) {
            double u = std::fmod(0.5 + g1 * double(s + 1), 1.0);
            double v = std::fmod(0.5 + g2 * double(s + 1), 1.0);
            if (u + v > 1.0) {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            out.points.push_back(a + u * (b - a) + v * (c - a));
            out.normals.push_back(n);
            if (!out.labels.empty() || (include_vertices && src->has_labels())) {
                // sampled points inherit the dominant corner label
                if (src->has_labels()) out.labels.push_back(src->labels[f[0]]);
            }
            if (!out.provenance.empty() || (include_vertices && src->has_provenance())) {
                if (src->has_provenance()) out.provenance.push_back(src->provenance[f[0]]);
            }
        }
    }
    return out;
}

PointCloud concat(const PointCloud& a, const PointCloud& b) {
    PointCloud out;
    out.units = a.units;
    auto append = [&out](const PointCloud& c, std::size_t other_n) {
        out.points.insert(out.points.end(), c.points.begin(), c.points.end());
        if (c.has_normals())
            out.normals.insert(out.normals.end(), c.normals.begin(), c.normals.end());
        else if (!out.normals.empty() || other_n)
            out.normals.resize(out.points.size(), Vec3(0, 0, 1));
        if (c.has_labels())
            out.labels.insert(out.labels.end(), c.labels.begin(), c.labels.end());
        else
            out.labels.resize(out.points.size(), 0);
        if (c.has_provenance())
            out.provenance.insert(out.provenance.end(), c.provenance.begin(),
                                  c.provenance.end());
        else
            out.provenance.resize(out.points.size(),
                                  std::uint8_t(Provenance::none));
    };
    append(a, b.has_normals() ? b.size() : 0);
    append(b, a.has_normals() ? a.size() : 0);
    return out;
}

}  // namespace dfuse
