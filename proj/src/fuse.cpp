#include "dentofuse/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/parallel.hpp"
#include "dentofuse/reconstruct.hpp"

namespace dfuse {

double median_nn_spacing(const PointCloud& cloud) {
    if (cloud.size() < 2) return 0.0;
    KdTree3 tree(cloud.points);
    std::vector<double> d(cloud.size());
    parallel_for_chunked(cloud.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto two = tree.knn(cloud.points[i], 2);  // self + nearest
            d[i] = two.size() > 1
                       ? (cloud.points[two[1]] - cloud.points[i]).norm()
                       : 0.0;
        }
    });
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    return d[d.size() / 2];
}

namespace {

std::vector<double> nearest_distances(const PointCloud& cbct, const PointCloud& ios) {
    KdTree3 tree(ios.points);
    std::vector<double> d(cbct.size());
    parallel_for_chunked(cbct.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double sq = 0.0;
            tree.nearest(cbct.points[i], &sq);
            d[i] = std::sqrt(sq);
        }
    });
    return d;
}

CrownRemovalResult remove_by_count(const PointCloud& cbct,
                                   const std::vector<double>& dist,
                                   std::size_t remove_count) {
    std::vector<std::size_t> order(cbct.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return a < b;
    });
    std::vector<char> removed(cbct.size(), 0);
    CrownRemovalResult res;
    for (std::size_t i = 0; i < remove_count; ++i) {
        removed[order[i]] = 1;
        res.cut_distance = std::max(res.cut_distance, dist[order[i]]);
    }
    res.removed_count = remove_count;
    res.residual.units = cbct.units;
    for (std::size_t i = 0; i < cbct.size(); ++i) {
        if (removed[i]) continue;
        res.residual.points.push_back(cbct.points[i]);
        if (cbct.has_normals()) res.residual.normals.push_back(cbct.normals[i]);
        if (cbct.has_labels()) res.residual.labels.push_back(cbct.labels[i]);
        if (cbct.has_provenance())
            res.residual.provenance.push_back(cbct.provenance[i]);
        res.distances.push_back(dist[i]);
    }
    return res;
}

}  // namespace

CrownRemovalResult remove_cbct_crown(const PointCloud& cbct, const PointCloud& ios,
                                     double removal_fraction) {
    if (cbct.empty() || ios.empty())
        throw std::invalid_argument("remove_cbct_crown: empty input cloud");
    if (removal_fraction < 0.0 || removal_fraction > 1.0)
        throw std::invalid_argument("removal_fraction outside [0, 1]");
    auto dist = nearest_distances(cbct, ios);
    auto count = std::size_t(std::llround(removal_fraction * double(cbct.size())));
    return remove_by_count(cbct, dist, std::min(count, cbct.size()));
}

CrownRemovalResult remove_cbct_crown_adaptive(const PointCloud& cbct,
                                              const PointCloud& ios,
                                              double fallback_fraction) {
    if (cbct.empty() || ios.empty())
        throw std::invalid_argument("remove_cbct_crown: empty input cloud");
    auto dist = nearest_distances(cbct, ios);

    // histogram over [0, p99]; valley after the near-distance peak marks the
    // boundary between crown duplicates and genuine root/bone points
    std::vector<double> sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    double range = sorted[std::size_t(0.99 * double(sorted.size() - 1))];
    constexpr int kBins = 64;
    std::vector<double> hist(kBins, 0.0);
    if (range > 1e-12) {
        for (double v : dist) {
            int b = std::min(kBins - 1, int(v / range * kBins));
            hist[std::size_t(b)] += 1.0;
        }
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<double> smooth(kBins);
            for (int i = 0; i < kBins; ++i) {
                double l = hist[std::size_t(std::max(0, i - 1))];
                double r = hist[std::size_t(std::min(kBins - 1, i + 1))];
                smooth[std::size_t(i)] = 0.25 * l + 0.5 * hist[std::size_t(i)] + 0.25 * r;
            }
            hist.swap(smooth);
        }
        int peak = 0;
        for (int i = 1; i < kBins / 2; ++i)
            if (hist[std::size_t(i)] > hist[std::size_t(peak)]) peak = i;
        // first local minimum after the peak that has dropped far enough
        for (int i = peak + 1; i + 1 < kBins; ++i) {
            bool local_min = hist[std::size_t(i)] <= hist[std::size_t(i - 1)] &&
                             hist[std::size_t(i)] <= hist[std::size_t(i + 1)];
            if (!local_min || hist[std::size_t(i)] > 0.25 * hist[std::size_t(peak)])
                continue;
            double tail = 0.0, head = 0.0;
            for (int j = 0; j <= i; ++j) head += hist[std::size_t(j)];
            for (int j = i + 1; j < kBins; ++j) tail += hist[std::size_t(j)];
            if (tail < 0.1 * double(dist.size()) || head < 0.02 * double(dist.size()))
                break;  // no meaningful second mode
            double cut = (double(i) + 0.5) / kBins * range;
            std::size_t count = 0;
            for (double v : dist) count += v <= cut;
            auto res = remove_by_count(cbct, dist, count);
            res.adaptive_cut = true;
            return res;
        }
    }
    auto count = std::size_t(std::llround(fallback_fraction * double(cbct.size())));
    return remove_by_count(cbct, dist, std::min(count, cbct.size()));
}

PointCloud dbscan_cleanup(const PointCloud& cloud, double eps, int min_pts,
                          std::size_t min_cluster_size) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan eps must be positive");
    if (min_pts < 1) throw std::invalid_argument("dbscan min_pts must be >= 1");
    const std::size_t n = cloud.size();
    KdTree3 tree(cloud.points);

    constexpr int kUndefined = -2, kNoise = -1;
    std::vector<int> label(n, kUndefined);
    int cluster = 0;
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUndefined) continue;
        auto nb = tree.radius_search(cloud.points[i], eps);  // includes i
        if (nb.size() < std::size_t(min_pts)) {
            label[i] = kNoise;
            continue;
        }
        label[i] = cluster;
        queue.assign(nb.begin(), nb.end());
        while (!queue.empty()) {
            std::size_t j = queue.front();
            queue.pop_front();
            if (label[j] == kNoise) label[j] = cluster;  // border point
            if (label[j] != kUndefined) continue;
            label[j] = cluster;
            auto nb2 = tree.radius_search(cloud.points[j], eps);
            if (nb2.size() >= std::size_t(min_pts))
                queue.insert(queue.end(), nb2.begin(), nb2.end());
        }
        ++cluster;
    }

    std::vector<std::size_t> cluster_size(std::size_t(cluster), 0);
    for (auto l : label)
        if (l >= 0) cluster_size[std::size_t(l)]++;

    PointCloud out;
    out.units = cloud.units;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] < 0) continue;
        if (cluster_size[std::size_t(label[i])] < min_cluster_size) continue;
        out.points.push_back(cloud.points[i]);
        if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
        if (cloud.has_labels()) out.labels.push_back(cloud.labels[i]);
        if (cloud.has_provenance()) out.provenance.push_back(cloud.provenance[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ball pivoting
// ---------------------------------------------------------------------------

namespace {

class BallPivoter {
  public:
    BallPivoter(const PointCloud& cloud) : pts_(cloud.points), nrm_(cloud.normals) {
        tree_.build(pts_);
        vertex_type_.assign(pts_.size(), VertexType::orphan);
    }

    TriMesh run(const std::vector<double>& radii) {
        for (double r : radii) {
            if (!(r > 0.0)) continue;
            reopen_borders(r);
            drain_front(r);
            seed_scan(r);
            // any still-open front edges wait for the next radius
            for (auto ei : front_) {
                if (edges_[ei].type == EdgeType::front) {
                    edges_[ei].type = EdgeType::border;
                    border_.push_back(ei);
                }
            }
            front_.clear();
        }
        TriMesh mesh;
        mesh.vertices = pts_;
        mesh.faces = std::move(faces_);
        compute_vertex_normals(mesh);
        return mesh;
    }

  private:
    enum class VertexType : std::uint8_t { orphan, front, inner };
    enum class EdgeType : std::uint8_t { front, border, inner };

    struct Edge {
        std::uint32_t a = 0, b = 0;
        std::uint32_t opposite = 0;  // third vertex of the first face
        Vec3 center = Vec3::Zero();  // ball center of the first face
        int face_count = 0;
        EdgeType type = EdgeType::front;
    };

    static std::uint64_t key_of(std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (std::uint64_t(a) << 32) | b;
    }

    int find_edge(std::uint32_t a, std::uint32_t b) const {
        auto it = edge_index_.find(key_of(a, b));
        return it == edge_index_.end() ? -1 : it->second;
    }

    /// Ball center for triangle (i0,i1,i2); when prefer is set, picks the
    /// side continuing the pivot, otherwise the side the normals point to.
    bool ball_center(std::uint32_t i0, std::uint32_t i1, std::uint32_t i2, double r,
                     const Vec3* mid, const Vec3* prefer, Vec3& out) const {
        const Vec3 &p0 = pts_[i0], &p1 = pts_[i1], &p2 = pts_[i2];
        Vec3 e01 = p1 - p0, e02 = p2 - p0;
        Vec3 tri_n = e01.cross(e02);
        double n_sq = tri_n.squaredNorm();
        if (n_sq < 1e-18) return false;
        double a = (p1 - p2).squaredNorm();
        double b = (p2 - p0).squaredNorm();
        double c = (p0 - p1).squaredNorm();
        double abg = a * (b + c - a) + b * (a + c - b) + c * (a + b - c);
        if (std::abs(abg) < 1e-18) return false;
        Vec3 circum = (a * (b + c - a) * p0 + b * (a + c - b) * p1 +
                       c * (a + b - c) * p2) /
                      abg;
        double la = std::sqrt(a), lb = std::sqrt(b), lc = std::sqrt(c);
        double denom = (la + lb + lc) * (lb + lc - la) * (lc + la - lb) * (la + lb - lc);
        if (std::abs(denom) < 1e-18) return false;
        double circum_r_sq = a * b * c / denom;
        double h_sq = r * r - circum_r_sq;
        if (h_sq < 0.0) return false;
        Vec3 n = tri_n / std::sqrt(n_sq);
        Vec3 cpos = circum + std::sqrt(h_sq) * n;
        Vec3 cneg = circum - std::sqrt(h_sq) * n;
        if (mid && prefer) {
            Vec3 pref = (*prefer - *mid).normalized();
            double dpos = pref.dot((cpos - *mid).normalized());
            double dneg = pref.dot((cneg - *mid).normalized());
            out = dpos >= dneg ? cpos : cneg;
        } else {
            Vec3 nsum = nrm_[i0] + nrm_[i1] + nrm_[i2];
            out = n.dot(nsum) >= 0.0 ? cpos : cneg;
        }
        return true;
    }

    bool ball_empty(const Vec3& center, double r, std::uint32_t i0, std::uint32_t i1,
                    std::uint32_t i2) const {
        auto nb = tree_.radius_search(center, r * (1.0 - 1e-12));
        for (auto j : nb)
            if (j != i0 && j != i1 && j != i2) return false;
        return true;
    }

    bool normals_compatible(std::uint32_t i0, std::uint32_t i1, std::uint32_t i2) const {
        Vec3 nsum = nrm_[i0] + nrm_[i1] + nrm_[i2];
        double mag = nsum.norm();
        if (mag < 1e-12) return true;
        Vec3 fn = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]);
        double fmag = fn.norm();
        if (fmag < 1e-18) return false;
        return std::abs(fn.dot(nsum) / (fmag * mag)) >= kMinNormalDot;
    }

    void register_edge(std::uint32_t a, std::uint32_t b, std::uint32_t opp,
                       const Vec3& center) {
        int ei = find_edge(a, b);
        if (ei < 0) {
            Edge e;
            e.a = a;
            e.b = b;
            e.opposite = opp;
            e.center = center;
            e.type = EdgeType::front;
            ei = int(edges_.size());
            edges_.push_back(e);
            edge_index_.emplace(key_of(a, b), ei);
            front_.push_back(std::size_t(ei));
        } else {
            Edge& e = edges_[std::size_t(ei)];
            e.face_count++;
            e.type = EdgeType::inner;
        }
        edges_[std::size_t(ei)].face_count =
            std::max(edges_[std::size_t(ei)].face_count, 1);
    }

    void make_face(std::uint32_t v0, std::uint32_t v1, std::uint32_t v2,
                   const Vec3& center) {
        Vec3 nsum = nrm_[v0] + nrm_[v1] + nrm_[v2];
        Vec3 fn = (pts_[v1] - pts_[v0]).cross(pts_[v2] - pts_[v0]);
        if (fn.dot(nsum) < 0.0)
            faces_.push_back({v0, v2, v1});
        else
            faces_.push_back({v0, v1, v2});
        register_edge(v0, v1, v2, center);
        register_edge(v1, v2, v0, center);
        register_edge(v2, v0, v1, center);
        for (auto v : {v0, v1, v2})
            if (vertex_type_[v] == VertexType::orphan) vertex_type_[v] = VertexType::front;
    }

    /// Smallest-pivot-angle candidate for the front edge, or -1.
    int next_vertex(const Edge& e, double r, Vec3& center_out) const {
        Vec3 mid = 0.5 * (pts_[e.a] + pts_[e.b]);
        Vec3 axis = (pts_[e.b] - pts_[e.a]).normalized();
        Vec3 from = (e.center - mid).normalized();
        auto candidates = tree_.radius_search(mid, 2.0 * r);
        double best_angle = 2.0 * kPi;
        int best = -1;
        Vec3 best_center = Vec3::Zero();
        for (auto cand : candidates) {
            std::uint32_t c = std::uint32_t(cand);
            if (c == e.a || c == e.b || c == e.opposite) continue;
            if (vertex_type_[c] == VertexType::inner) continue;
            if (!normals_compatible(e.a, e.b, c)) continue;
            Vec3 nc;
            if (!ball_center(e.a, e.b, c, r, &mid, &e.center, nc)) continue;
            Vec3 to = (nc - mid).normalized();
            double ang = std::acos(std::clamp(from.dot(to), -1.0, 1.0));
            if (from.cross(to).dot(axis) < 0.0) ang = 2.0 * kPi - ang;
            if (ang >= best_angle) continue;
            if (!ball_empty(nc, r, e.a, e.b, c)) continue;
            best_angle = ang;
            best = int(c);
            best_center = nc;
        }
        center_out = best_center;
        return best;
    }

    void drain_front(double r) {
        while (!front_.empty()) {
            std::size_t ei = front_.front();
            front_.pop_front();
            if (edges_[ei].type != EdgeType::front) continue;
            Edge e = edges_[ei];
            Vec3 center;
            int cand = next_vertex(e, r, center);
            if (cand < 0) {
                edges_[ei].type = EdgeType::border;
                border_.push_back(ei);
                continue;
            }
            std::uint32_t c = std::uint32_t(cand);
            int ea = find_edge(c, e.a);
            int eb = find_edge(c, e.b);
            if ((ea >= 0 && edges_[std::size_t(ea)].type != EdgeType::front) ||
                (eb >= 0 && edges_[std::size_t(eb)].type != EdgeType::front)) {
                edges_[ei].type = EdgeType::border;
                border_.push_back(ei);
                continue;
            }
            edges_[ei].type = EdgeType::inner;
            edges_[ei].face_count++;
            make_face(e.a, c, e.b, center);
            // freshly created/updated edges to the candidate continue the front
            for (auto pair : {std::pair<std::uint32_t, std::uint32_t>{c, e.a},
                              {c, e.b}}) {
                int idx = find_edge(pair.first, pair.second);
                if (idx >= 0 && edges_[std::size_t(idx)].type == EdgeType::front)
                    front_.push_front(std::size_t(idx));
            }
        }
    }

    void seed_scan(double r) {
        for (std::size_t v = 0; v < pts_.size(); ++v) {
            if (vertex_type_[v] != VertexType::orphan) continue;
            if (try_seed(std::uint32_t(v), r)) drain_front(r);
        }
    }

    bool try_seed(std::uint32_t v, double r) {
        auto nb = tree_.radius_search(pts_[v], 2.0 * r);
        if (nb.size() < 3) return false;
        // closest-first makes compact, well-shaped seed triangles
        std::sort(nb.begin(), nb.end(), [&](std::size_t x, std::size_t y) {
            double dx = (pts_[x] - pts_[v]).squaredNorm();
            double dy = (pts_[y] - pts_[v]).squaredNorm();
            if (dx != dy) return dx < dy;
            return x < y;
        });
        for (std::size_t i0 = 0; i0 < nb.size(); ++i0) {
            std::uint32_t n0 = std::uint32_t(nb[i0]);
            if (n0 == v || vertex_type_[n0] != VertexType::orphan) continue;
            for (std::size_t i1 = i0 + 1; i1 < nb.size(); ++i1) {
                std::uint32_t n1 = std::uint32_t(nb[i1]);
                if (n1 == v || vertex_type_[n1] != VertexType::orphan) continue;
                if (!normals_compatible(v, n0, n1)) continue;
                Vec3 center;
                if (!ball_center(v, n0, n1, r, nullptr, nullptr, center)) continue;
                if (!ball_empty(center, r, v, n0, n1)) continue;
                make_face(v, n0, n1, center);
                return true;
            }
        }
        return false;
    }

    void reopen_borders(double r) {
        std::vector<std::size_t> still_border;
        for (auto ei : border_) {
            Edge& e = edges_[ei];
            if (e.type != EdgeType::border) continue;
            Vec3 center;
            bool reopen = ball_center(e.a, e.b, e.opposite, r, nullptr, nullptr, center) &&
                          ball_empty(center, r, e.a, e.b, e.opposite);
            if (reopen) {
                e.center = center;
                e.type = EdgeType::front;
                front_.push_back(ei);
            } else {
                still_border.push_back(ei);
            }
        }
        border_.swap(still_border);
    }

    static constexpr double kMinNormalDot = 0.5;  // cos 60 degrees

    const std::vector<Vec3>& pts_;
    const std::vector<Vec3>& nrm_;
    KdTree3 tree_;
    std::vector<VertexType> vertex_type_;
    std::vector<Edge> edges_;
    std::unordered_map<std::uint64_t, int> edge_index_;
    std::deque<std::size_t> front_;
    std::vector<std::size_t> border_;
    std::vector<std::array<std::uint32_t, 3>> faces_;
};

}  // namespace

TriMesh ball_pivot(const PointCloud& cloud, const std::vector<double>& radii) {
    if (!cloud.has_normals())
        throw std::invalid_argument("ball_pivot requires oriented normals");
    if (cloud.size() < 3)
        throw std::invalid_argument("ball_pivot needs at least 3 points");
    BallPivoter pivoter(cloud);
    std::vector<double> sorted = radii;
    std::sort(sorted.begin(), sorted.end());
    TriMesh mesh = pivoter.run(sorted);
    mesh.units = cloud.units;
    mesh.labels = cloud.labels;
    mesh.provenance = cloud.provenance;
    return mesh;
}

TriMesh fuse_and_reconstruct(const PointCloud& ios, const PointCloud& cbct_residual,
                             const FuseConfig& cfg) {
    if (ios.empty())
        throw std::invalid_argument("fuse_and_reconstruct: empty IOS cloud");
    if (!ios.has_normals() ||
        (!cbct_residual.empty() && !cbct_residual.has_normals()))
        throw std::invalid_argument("fuse_and_reconstruct: clouds must carry normals");

    PointCloud a = ios;
    a.provenance.assign(a.size(), std::uint8_t(Provenance::ios));
    PointCloud b = cbct_residual;
    b.provenance.assign(b.size(), std::uint8_t(Provenance::cbct));
    PointCloud fused = concat(a, b);

    double spacing = median_nn_spacing(fused);
    if (!(spacing > 0.0))
        throw std::invalid_argument("fuse_and_reconstruct: degenerate point cloud");
    std::vector<double> radii;
    radii.reserve(cfg.radius_multipliers.size());
    for (double m : cfg.radius_multipliers) radii.push_back(m * spacing);

    TriMesh mesh = ball_pivot(fused, radii);
    if (cfg.smooth_iterations > 0)
        mesh = laplacian_smooth(mesh, cfg.smooth_iterations, cfg.smooth_step);
    return mesh;
}

}  // namespace dfuse
