#include "dentofuse/curvseg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/parallel.hpp"

namespace dfuse {

CurvatureField point_curvature(const TriMesh& m, int neighbor_order) {
    if (neighbor_order < 1) throw std::invalid_argument("neighbor order must be >= 1");
    TriMesh tmp;
    const TriMesh* src = &m;
    if (!m.has_normals()) {
        tmp = m;
        compute_vertex_normals(tmp);
        src = &tmp;
    }
    for (const auto& n : src->vertex_normals)
        if (n.norm() < 1e-12)
            throw std::invalid_argument("zero-length vertex normal");

    auto adjacency = vertex_adjacency(*src);
    CurvatureField field;
    field.neighbor_order = neighbor_order;
    field.values.assign(src->vertices.size(), 0.0);

    const std::size_t nv = src->vertices.size();
    parallel_for_chunked(nv, [&](std::size_t begin, std::size_t end) {
        // stamped visited buffer, reused across this chunk
        std::vector<std::uint32_t> stamp(nv, 0);
        std::vector<std::uint32_t> frontier, next_frontier, gathered;
        std::uint32_t tick = 0;
        for (std::size_t vi = begin; vi < end; ++vi) {
            ++tick;
            gathered.clear();
            frontier.assign(1, std::uint32_t(vi));
            stamp[vi] = tick;
            for (int depth = 0; depth < neighbor_order; ++depth) {
                next_frontier.clear();
                for (auto f : frontier)
                    for (auto u : adjacency[f])
                        if (stamp[u] != tick) {
                            stamp[u] = tick;
                            next_frontier.push_back(u);
                            gathered.push_back(u);
                        }
                frontier.swap(next_frontier);
                if (frontier.empty()) break;
            }
            if (gathered.empty()) continue;
            const Vec3& n = src->vertex_normals[vi];
            double sum = 0.0;
            for (auto u : gathered) sum += angle_between(n, src->vertex_normals[u]);
            field.values[vi] = sum / double(gathered.size());
        }
    });
    return field;
}

namespace {

/// Connected components over the subgraph induced by `alive`.
/// Ids follow discovery order from the lowest-index seed.
int label_components(const std::vector<std::vector<std::uint32_t>>& adjacency,
                     const std::vector<char>& alive, std::vector<int>& comp) {
    const std::size_t nv = alive.size();
    comp.assign(nv, -1);
    int count = 0;
    std::vector<std::uint32_t> stack;
    for (std::size_t seed = 0; seed < nv; ++seed) {
        if (!alive[seed] || comp[seed] >= 0) continue;
        stack.assign(1, std::uint32_t(seed));
        comp[seed] = count;
        while (!stack.empty()) {
            std::uint32_t v = stack.back();
            stack.pop_back();
            for (auto u : adjacency[v])
                if (alive[u] && comp[u] < 0) {
                    comp[u] = count;
                    stack.push_back(u);
                }
        }
        ++count;
    }
    return count;
}

}  // namespace

ComponentLabeling erosion_expansion_segment(const TriMesh& m, const ErosionConfig& cfg) {
    const std::size_t nv = m.vertices.size();
    if (nv < 2) throw std::invalid_argument("mesh needs at least 2 vertices");
    if (!(cfg.top_percent > 0.0 && cfg.top_percent < 100.0))
        throw std::invalid_argument("top percent must lie in (0, 100)");

    CurvatureField curv = point_curvature(m, cfg.neighbor_order);

    // erosion: remove the top M percent by curvature, ties by vertex index
    std::vector<std::uint32_t> order(nv);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (curv.values[a] != curv.values[b]) return curv.values[a] > curv.values[b];
        return a < b;
    });
    std::size_t removed_count = std::size_t(double(nv) * cfg.top_percent / 100.0);
    if (removed_count >= nv)
        throw std::invalid_argument("erosion would remove every vertex");
    std::vector<char> alive(nv, 1);
    for (std::size_t i = 0; i < removed_count; ++i) alive[order[i]] = 0;

    auto adjacency = vertex_adjacency(m);
    std::vector<int> comp;
    int raw_count = label_components(adjacency, alive, comp);
    if (raw_count == 0) throw std::invalid_argument("erosion left no retained vertices");

    // demote debris components to the removed set
    std::vector<std::size_t> raw_sizes(raw_count, 0);
    for (std::size_t v = 0; v < nv; ++v)
        if (alive[v]) raw_sizes[comp[v]]++;
    std::vector<int> remap(raw_count, -1);
    int kept = 0;
    for (int c = 0; c < raw_count; ++c)
        if (raw_sizes[c] >= cfg.min_component_size) remap[c] = kept++;
    if (kept == 0) {
        // every component is tiny; keep the largest rather than fail
        int largest = int(std::max_element(raw_sizes.begin(), raw_sizes.end()) -
                          raw_sizes.begin());
        remap[largest] = kept++;
    }
    ComponentLabeling out;
    out.count = kept;
    out.component_of.assign(nv, -1);
    for (std::size_t v = 0; v < nv; ++v) {
        if (alive[v] && remap[comp[v]] >= 0)
            out.component_of[v] = remap[comp[v]];
        else
            alive[v] = 0;
    }

    // expansion: nearest surviving component per removed vertex
    std::vector<std::vector<Vec3>> comp_points(kept);
    std::vector<std::size_t> comp_sizes(kept, 0);
    for (std::size_t v = 0; v < nv; ++v)
        if (alive[v]) {
            comp_points[out.component_of[v]].push_back(m.vertices[v]);
            comp_sizes[out.component_of[v]]++;
        }
    std::vector<KdTree3> trees(kept);
    for (int c = 0; c < kept; ++c) trees[c].build(comp_points[c]);

    for (std::size_t v = 0; v < nv; ++v) {
        if (alive[v]) continue;
        int best = -1;
        double best_sq = std::numeric_limits<double>::infinity();
        for (int c = 0; c < kept; ++c) {
            double sq = 0.0;
            trees[c].nearest(m.vertices[v], &sq);
            bool better = sq < best_sq;
            if (sq == best_sq && best >= 0) {
                if (comp_sizes[c] > comp_sizes[best]) better = true;
            }
            if (better) {
                best_sq = sq;
                best = c;
            }
        }
        out.component_of[v] = best;
    }

    out.sizes.assign(kept, 0);
    out.gravity_centers.assign(kept, Vec3::Zero());
    for (std::size_t v = 0; v < nv; ++v) {
        int c = out.component_of[v];
        out.sizes[c]++;
        out.gravity_centers[c] += m.vertices[v];
    }
    for (int c = 0; c < kept; ++c) out.gravity_centers[c] /= double(out.sizes[c]);
    return out;
}

JawSplit split_jaws(const ComponentLabeling& components, const TriMesh& m,
                    std::uint64_t seed, int iterations) {
    const int nc = components.count;
    if (nc < 2) throw std::invalid_argument("split_jaws needs at least 2 components");
    const auto& centers = components.gravity_centers;

    auto evaluate = [&](const Vec3& point, const Vec3& normal, double& margin) {
        int above = 0, below = 0;
        margin = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) {
            double d = (c - point).dot(normal);
            margin = std::min(margin, std::abs(d));
            (d > 0.0 ? above : below)++;
        }
        return above > 0 && below > 0;
    };

    double best_margin = -1.0;
    Vec3 best_point = Vec3::Zero(), best_normal = Vec3::UnitZ();
    auto consider = [&](int i, int j) {
        Vec3 n = centers[j] - centers[i];
        double len = n.norm();
        if (len < 1e-12) return;
        n /= len;
        Vec3 p = 0.5 * (centers[i] + centers[j]);
        double margin = 0.0;
        if (!evaluate(p, n, margin)) return;
        if (margin > best_margin) {
            best_margin = margin;
            best_point = p;
            best_normal = n;
        }
    };

    const long total_pairs = long(nc) * (nc - 1) / 2;
    if (total_pairs <= iterations) {
        for (int i = 0; i < nc; ++i)
            for (int j = i + 1; j < nc; ++j) consider(i, j);
    } else {
        Rng rng(seed);
        for (int it = 0; it < iterations; ++it) {
            int i = int(rng.uniform_index(nc));
            int j = int(rng.uniform_index(nc));
            if (i == j) continue;
            consider(std::min(i, j), std::max(i, j));
        }
    }
    if (best_margin <= 1e-9)
        throw std::runtime_error("jaw split failed: no separating plane with positive margin");

    // orient the normal deterministically (+z preferred) so "upper" is stable
    Vec3 n = best_normal;
    if (n[2] < 0.0 || (n[2] == 0.0 && (n[1] < 0.0 || (n[1] == 0.0 && n[0] < 0.0))))
        n = -n;

    JawSplit split;
    split.plane_point = best_point;
    split.plane_normal = n;
    split.margin = best_margin;
    split.component_jaw.resize(nc);
    for (int c = 0; c < nc; ++c)
        split.component_jaw[c] = (centers[c] - best_point).dot(n) > 0.0 ? 0 : 1;

    split.vertex_jaw.resize(m.vertices.size());
    std::vector<char> up_mask(m.vertices.size(), 0), lo_mask(m.vertices.size(), 0);
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
        int jaw = split.component_jaw[components.component_of[v]];
        split.vertex_jaw[v] = jaw;
        (jaw == 0 ? up_mask : lo_mask)[v] = 1;
    }
    split.upper = submesh_by_vertex_mask(m, up_mask);
    split.lower = submesh_by_vertex_mask(m, lo_mask);
    return split;
}

std::pair<TriMesh, TriMesh> assign_to_jaws(const TriMesh& other,
                                           const TriMesh& tooth_mesh,
                                           const ComponentLabeling& components,
                                           const std::vector<int>& component_jaw) {
    KdTree3 tree(tooth_mesh.vertices);
    std::vector<char> up_mask(other.vertices.size(), 0), lo_mask(other.vertices.size(), 0);
    for (std::size_t v = 0; v < other.vertices.size(); ++v) {
        std::size_t nearest = tree.nearest(other.vertices[v]);
        int jaw = component_jaw[components.component_of[nearest]];
        (jaw == 0 ? up_mask : lo_mask)[v] = 1;
    }
    return {submesh_by_vertex_mask(other, up_mask), submesh_by_vertex_mask(other, lo_mask)};
}

}  // namespace dfuse
