#include "dentofuse/reconstruct.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dentofuse/mc_tables.hpp"

namespace dfuse {

namespace {

// lattice corner offsets matching the table's corner numbering
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                  {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                  {0, 4}, {1, 5}, {2, 6}, {3, 7}};

/// 3x3x3 box average of the indicator over the (zero-padded) volume.
class SmoothedIndicator {
  public:
    SmoothedIndicator(const LabelVolume& v, std::uint8_t target) : v_(v), target_(target) {}

    double at(long x, long y, long z) const {
        int sum = 0;
        for (long dz = -1; dz <= 1; ++dz)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) sum += sample(x + dx, y + dy, z + dz);
        return double(sum) / 27.0;
    }

    int sample(long x, long y, long z) const {
        if (x < 0 || y < 0 || z < 0 || x >= long(v_.dims[0]) || y >= long(v_.dims[1]) ||
            z >= long(v_.dims[2]))
            return 0;
        return v_.at(std::size_t(x), std::size_t(y), std::size_t(z)) == target_ ? 1 : 0;
    }

  private:
    const LabelVolume& v_;
    std::uint8_t target_;
};

}  // namespace

TriMesh marching_cubes(const LabelVolume& v, std::uint8_t target_label) {
    TriMesh mesh;
    mesh.units = Units::mm;
    const long nx = long(v.dims[0]), ny = long(v.dims[1]), nz = long(v.dims[2]);
    if (nx == 0 || ny == 0 || nz == 0) return mesh;

    bool has_interior = false;
    for (long z = 1; z + 1 < nz && !has_interior; ++z)
        for (long y = 1; y + 1 < ny && !has_interior; ++y)
            for (long x = 1; x + 1 < nx && !has_interior; ++x)
                if (v.at(std::size_t(x), std::size_t(y), std::size_t(z)) == target_label)
                    has_interior = true;
    if (!has_interior) return mesh;

    SmoothedIndicator smooth(v, target_label);
    auto inside = [&](long x, long y, long z) { return smooth.sample(x, y, z) == 1; };

    // one welded vertex per crossing lattice edge; key = base point + axis
    const std::uint64_t px = std::uint64_t(nx) + 3, py = std::uint64_t(ny) + 3;
    auto edge_vertex_key = [&](long x, long y, long z, int axis) {
        std::uint64_t ix = std::uint64_t(x + 1), iy = std::uint64_t(y + 1),
                      iz = std::uint64_t(z + 1);
        return 3 * (ix + px * (iy + py * iz)) + std::uint64_t(axis);
    };
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertices;

    auto vertex_on_edge = [&](long x, long y, long z, int axis) -> std::uint32_t {
        std::uint64_t key = edge_vertex_key(x, y, z, axis);
        auto it = edge_vertices.find(key);
        if (it != edge_vertices.end()) return it->second;
        long bx = x, by = y, bz = z;
        long ex = x + (axis == 0), ey = y + (axis == 1), ez = z + (axis == 2);
        bool b_in = inside(bx, by, bz);
        // parameter measured from the inside end toward the outside end
        long ax0 = b_in ? bx : ex, ay0 = b_in ? by : ey, az0 = b_in ? bz : ez;
        long ax1 = b_in ? ex : bx, ay1 = b_in ? ey : by, az1 = b_in ? ez : bz;
        double s0 = smooth.at(ax0, ay0, az0) - 0.5;
        double s1 = smooth.at(ax1, ay1, az1) - 0.5;
        double t = 0.5;
        if (s0 > 0.0 && s1 < 0.0) t = std::clamp(s0 / (s0 - s1), 0.05, 0.95);
        double lx = double(ax0) + 0.5 + t * double(ax1 - ax0);
        double ly = double(ay0) + 0.5 + t * double(ay1 - ay0);
        double lz = double(az0) + 0.5 + t * double(az1 - az0);
        std::uint32_t idx = std::uint32_t(mesh.vertices.size());
        mesh.vertices.push_back(
            Vec3(lx * v.spacing[0], ly * v.spacing[1], lz * v.spacing[2]));
        edge_vertices.emplace(key, idx);
        return idx;
    };

    // cells span lattice points [-1, n-1]; padding closes border regions
    for (long z = -1; z < nz; ++z)
        for (long y = -1; y < ny; ++y)
            for (long x = -1; x < nx; ++x) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    if (!inside(x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]))
                        cube |= 1 << c;  // bit set = outside
                }
                if (kMcEdgeTable[cube] == 0) continue;
                std::uint32_t ev[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(kMcEdgeTable[cube] & (1 << e))) continue;
                    const int* c0 = kCorner[kEdgeEnds[e][0]];
                    const int* c1 = kCorner[kEdgeEnds[e][1]];
                    long bx = x + std::min(c0[0], c1[0]);
                    long by = y + std::min(c0[1], c1[1]);
                    long bz = z + std::min(c0[2], c1[2]);
                    int axis = c0[0] != c1[0] ? 0 : (c0[1] != c1[1] ? 1 : 2);
                    ev[e] = vertex_on_edge(bx, by, bz, axis);
                }
                const int* row = kMcTriTable[cube];
                for (int t = 0; row[t] != -1; t += 3)
                    mesh.faces.push_back({ev[row[t]], ev[row[t + 1]], ev[row[t + 2]]});
            }

    compute_vertex_normals(mesh);
    return mesh;
}

TriMesh hlo_smooth(const TriMesh& m, int iterations, double normal_gate_rad,
                   double step) {
    if (edge_statistics(m).nonmanifold_edges > 0)
        throw std::invalid_argument("hlo_smooth requires an edge-manifold mesh");
    TriMesh out = m;
    if (iterations <= 0 || out.vertices.empty()) return out;
    auto adjacency = vertex_adjacency(out);
    double cos_gate = std::cos(normal_gate_rad);
    std::vector<Vec3> next(out.vertices.size());
    for (int it = 0; it < iterations; ++it) {
        compute_vertex_normals(out);
        for (std::size_t vi = 0; vi < out.vertices.size(); ++vi) {
            const Vec3& n = out.vertex_normals[vi];
            Vec3 sum = Vec3::Zero();
            std::size_t count = 0;
            for (auto u : adjacency[vi]) {
                if (n.dot(out.vertex_normals[u]) > cos_gate) {
                    sum += out.vertices[u];
                    ++count;
                }
            }
            if (count == 0) {
                next[vi] = out.vertices[vi];
            } else {
                // displace along the normal only; tangential drift would
                // slide boundary and crease vertices across the surface
                Vec3 pull = sum / double(count) - out.vertices[vi];
                next[vi] = out.vertices[vi] + step * pull.dot(n) * n;
            }
        }
        out.vertices.swap(next);
    }
    compute_vertex_normals(out);
    return out;
}

TriMesh laplacian_smooth(const TriMesh& m, int iterations, double step) {
    TriMesh out = m;
    if (iterations <= 0 || out.vertices.empty()) return out;
    if (!(step > 0.0 && step <= 1.0))
        throw std::invalid_argument("laplacian step must lie in (0, 1]");
    auto adjacency = vertex_adjacency(out);
    std::vector<Vec3> next(out.vertices.size());
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t vi = 0; vi < out.vertices.size(); ++vi) {
            const auto& nb = adjacency[vi];
            if (nb.empty()) {
                next[vi] = out.vertices[vi];
                continue;
            }
            Vec3 sum = Vec3::Zero();
            for (auto u : nb) sum += out.vertices[u];
            next[vi] =
                out.vertices[vi] + step * (sum / double(nb.size()) - out.vertices[vi]);
        }
        out.vertices.swap(next);
    }
    if (out.has_normals()) compute_vertex_normals(out);
    return out;
}

}  // namespace dfuse
