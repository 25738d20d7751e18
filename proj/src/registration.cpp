#include "dentofuse/registration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/parallel.hpp"

namespace dfuse {

namespace {

void check_spacing(const Vec3& spacing) {
    if (!(spacing[0] > 0.0 && spacing[1] > 0.0 && spacing[2] > 0.0))
        throw std::invalid_argument("missing or non-positive voxel spacing");
}

}  // namespace

TriMesh scale_align(const TriMesh& ios, const Vec3& spacing) {
    check_spacing(spacing);
    if (ios.units == Units::mm) return ios;
    TriMesh out = ios;
    for (auto& v : out.vertices) v = v.cwiseProduct(spacing);
    if (out.has_normals()) {
        // normals transform with the inverse scale, then re-normalize
        for (auto& n : out.vertex_normals) {
            n = Vec3(n[0] / spacing[0], n[1] / spacing[1], n[2] / spacing[2]);
            double len = n.norm();
            if (len > 1e-20) n /= len;
        }
    }
    out.units = Units::mm;
    return out;
}

PointCloud scale_align(const PointCloud& cloud, const Vec3& spacing) {
    check_spacing(spacing);
    if (cloud.units == Units::mm) return cloud;
    PointCloud out = cloud;
    for (auto& p : out.points) p = p.cwiseProduct(spacing);
    for (auto& n : out.normals) {
        n = Vec3(n[0] / spacing[0], n[1] / spacing[1], n[2] / spacing[2]);
        double len = n.norm();
        if (len > 1e-20) n /= len;
    }
    out.units = Units::mm;
    return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
    if (!(voxel > 0.0)) throw std::invalid_argument("voxel size must be positive");
    struct Cell {
        Vec3 pos_sum = Vec3::Zero();
        Vec3 n_sum = Vec3::Zero();
        std::size_t count = 0;
        std::int32_t label = 0;
        std::uint8_t prov = 0;
    };
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::vector<Cell> cells;
    auto key_of = [voxel](const Vec3& p) {
        auto q = [voxel](double v) {
            return std::uint64_t(std::int64_t(std::floor(v / voxel)) + (1ll << 20)) &
                   0x1fffff;
        };
        return (q(p[0]) << 42) | (q(p[1]) << 21) | q(p[2]);
    };
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        std::uint64_t key = key_of(cloud.points[i]);
        auto [it, fresh] = index.try_emplace(key, cells.size());
        if (fresh) {
            cells.emplace_back();
            if (cloud.has_labels()) cells.back().label = cloud.labels[i];
            if (cloud.has_provenance()) cells.back().prov = cloud.provenance[i];
        }
        Cell& c = cells[it->second];
        c.pos_sum += cloud.points[i];
        if (cloud.has_normals()) c.n_sum += cloud.normals[i];
        c.count++;
    }
    PointCloud out;
    out.units = cloud.units;
    out.points.reserve(cells.size());
    for (const auto& c : cells) {
        out.points.push_back(c.pos_sum / double(c.count));
        if (cloud.has_normals()) {
            Vec3 n = c.n_sum;
            double len = n.norm();
            out.normals.push_back(len > 1e-20 ? Vec3(n / len) : Vec3(0, 0, 1));
        }
        if (cloud.has_labels()) out.labels.push_back(c.label);
        if (cloud.has_provenance()) out.provenance.push_back(c.prov);
    }
    return out;
}

void estimate_normals(PointCloud& cloud, double radius) {
    KdTree3 tree(cloud.points);
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cloud.points) centroid += p;
    if (!cloud.points.empty()) centroid /= double(cloud.points.size());
    cloud.normals.assign(cloud.points.size(), Vec3(0, 0, 1));
    parallel_for_chunked(cloud.points.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto nb = tree.radius_search(cloud.points[i], radius);
            if (nb.size() < 3) continue;
            Vec3 mean = Vec3::Zero();
            for (auto j : nb) mean += cloud.points[j];
            mean /= double(nb.size());
            Mat3 cov = Mat3::Zero();
            for (auto j : nb) {
                Vec3 d = cloud.points[j] - mean;
                cov += d * d.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
            Vec3 n = eig.eigenvectors().col(0);
            if (n.dot(cloud.points[i] - centroid) < 0.0) n = -n;
            cloud.normals[i] = n;
        }
    });
}

std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud,
                                         double radius_normal,
                                         double radius_feature) {
    if (cloud.points.size() < 10)
        throw std::invalid_argument("compute_fpfh needs at least 10 points");
    PointCloud work = cloud;
    if (!work.has_normals()) estimate_normals(work, radius_normal);

    KdTree3 tree(work.points);
    const std::size_t n = work.points.size();
    std::vector<std::vector<std::size_t>> neighborhoods(n);
    parallel_for_chunked(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto nb = tree.radius_search(work.points[i], radius_feature);
            nb.erase(std::remove(nb.begin(), nb.end(), i), nb.end());
            neighborhoods[i] = std::move(nb);
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        if (neighborhoods[i].empty())
            throw std::runtime_error("compute_fpfh: isolated point with no neighbors in radius");

    // pair features (alpha, phi, theta), PFH source/target convention
    auto pair_features = [](const Vec3& p1, const Vec3& n1_in, const Vec3& p2,
                            const Vec3& n2_in, double& alpha, double& phi,
                            double& theta) {
        Vec3 ps = p1, pt = p2, ns = n1_in, nt = n2_in;
        Vec3 d = pt - ps;
        double dist = d.norm();
        if (dist < 1e-12) {
            alpha = phi = theta = 0.0;
            return;
        }
        double a1 = ns.dot(d) / dist;
        double a2 = nt.dot(d) / dist;
        if (std::acos(std::clamp(std::abs(a1), 0.0, 1.0)) >
            std::acos(std::clamp(std::abs(a2), 0.0, 1.0))) {
            std::swap(ps, pt);
            std::swap(ns, nt);
            d = -d;
            phi = a2;
        } else {
            phi = a1;
        }
        Vec3 v = d.cross(ns);
        double vlen = v.norm();
        if (vlen < 1e-12) {
            alpha = phi = theta = 0.0;
            return;
        }
        v /= vlen;
        Vec3 w = ns.cross(v);
        alpha = v.dot(nt);
        theta = std::atan2(w.dot(nt), ns.dot(nt));
    };

    auto bin11 = [](double value, double lo, double hi) {
        int b = int(std::floor((value - lo) / (hi - lo) * 11.0));
        return std::clamp(b, 0, 10);
    };

    std::vector<FpfhDescriptor> spfh(n);
    parallel_for_chunked(n, [&](std::size_t be, std::size_t en) {
        for (std::size_t i = be; i < en; ++i) {
            spfh[i].fill(0.0);
            double incr = 100.0 / double(neighborhoods[i].size());
            for (auto j : neighborhoods[i]) {
                double alpha, phi, theta;
                pair_features(work.points[i], work.normals[i], work.points[j],
                              work.normals[j], alpha, phi, theta);
                spfh[i][bin11(alpha, -1.0, 1.0)] += incr;
                spfh[i][11 + bin11(phi, -1.0, 1.0)] += incr;
                spfh[i][22 + bin11(theta, -kPi, kPi)] += incr;
            }
        }
    });

    std::vector<FpfhDescriptor> fpfh(n);
    parallel_for_chunked(n, [&](std::size_t be, std::size_t en) {
        for (std::size_t i = be; i < en; ++i) {
            fpfh[i] = spfh[i];
            double k = double(neighborhoods[i].size());
            for (auto j : neighborhoods[i]) {
                double w = (work.points[i] - work.points[j]).norm();
                if (w < 1e-12) continue;
                for (int b = 0; b < 33; ++b) fpfh[i][b] += spfh[j][b] / (w * k);
            }
        }
    });
    return fpfh;
}

namespace {

double fpfh_distance_sq(const FpfhDescriptor& a, const FpfhDescriptor& b) {
    double s = 0.0;
    for (int i = 0; i < 33; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Kabsch rigid fit of src onto dst (equal-size pairs).
bool rigid_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
               Mat3& r_out, Vec3& t_out) {
    Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs /= double(src.size());
    cd /= double(src.size());
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        h += (src[i] - cs) * (dst[i] - cd).transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    r_out = svd.matrixV() * d * svd.matrixU().transpose();
    t_out = cd - r_out * cs;
    return true;
}

}  // namespace

RegistrationReport global_register(const PointCloud& src, const PointCloud& dst,
                                   const GlobalRegistrationConfig& cfg) {
    RegistrationReport report;
    PointCloud s = voxel_downsample(src, cfg.voxel);
    PointCloud d = voxel_downsample(dst, cfg.voxel);
    if (s.size() < 10 || d.size() < 10) {
        report.message = "too few points after downsampling";
        return report;
    }
    auto fs = compute_fpfh(s, cfg.radius_normal, cfg.radius_feature);
    auto fd = compute_fpfh(d, cfg.radius_normal, cfg.radius_feature);

    // nearest-FPFH correspondence per source point (brute force in 33-d)
    std::vector<std::size_t> corr(s.size());
    parallel_for_chunked(s.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_j = 0;
            for (std::size_t j = 0; j < d.size(); ++j) {
                double v = fpfh_distance_sq(fs[i], fd[j]);
                if (v < best) {
                    best = v;
                    best_j = j;
                }
            }
            corr[i] = best_j;
        }
    });

    KdTree3 dst_tree(d.points);
    const double thr_sq = cfg.inlier_threshold * cfg.inlier_threshold;
    const double edge_lo = cfg.edge_similarity, edge_hi = 1.0 / cfg.edge_similarity;

    struct Hypothesis {
        double fitness = -1.0;
        double rmse = std::numeric_limits<double>::infinity();
        Mat3 r;
        Vec3 t;
        bool valid = false;
    };

    auto evaluate_samples = [&](const std::array<std::size_t, 3>& sample) {
        Hypothesis h;
        std::vector<Vec3> ps(3), pd(3);
        for (int i = 0; i < 3; ++i) {
            ps[i] = s.points[sample[i]];
            pd[i] = d.points[corr[sample[i]]];
        }
        for (int i = 0; i < 3; ++i) {
            double es = (ps[i] - ps[(i + 1) % 3]).norm();
            double ed = (pd[i] - pd[(i + 1) % 3]).norm();
            if (es < 1e-9 || ed < 1e-9) return h;
            double ratio = es / ed;
            if (ratio < edge_lo || ratio > edge_hi) return h;
        }
        rigid_fit(ps, pd, h.r, h.t);
        // quick check on the sample itself before the full sweep
        for (int i = 0; i < 3; ++i)
            if ((h.r * ps[i] + h.t - pd[i]).squaredNorm() > thr_sq) return h;
        std::size_t inliers = 0;
        double err_sq = 0.0;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            Vec3 p = h.r * s.points[i] + h.t;
            double sq = 0.0;
            dst_tree.nearest(p, &sq);
            if (sq <= thr_sq) {
                inliers++;
                err_sq += sq;
            }
        }
        h.fitness = double(inliers) / double(s.points.size());
        h.rmse = inliers > 0 ? std::sqrt(err_sq / double(inliers)) : 0.0;
        h.valid = true;
        return h;
    };

    Rng rng(cfg.seed);
    Hypothesis best;
    const int block = 512;
    int done = 0;
    std::vector<std::array<std::size_t, 3>> samples(block);
    std::vector<Hypothesis> results(block);
    while (done < cfg.max_iterations) {
        int count = std::min(block, cfg.max_iterations - done);
        for (int i = 0; i < count; ++i) {
            std::array<std::size_t, 3> smp;
            smp[0] = rng.uniform_index(s.size());
            do {
                smp[1] = rng.uniform_index(s.size());
            } while (smp[1] == smp[0]);
            do {
                smp[2] = rng.uniform_index(s.size());
            } while (smp[2] == smp[0] || smp[2] == smp[1]);
            samples[i] = smp;
        }
        parallel_for_chunked(std::size_t(count), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) results[i] = evaluate_samples(samples[i]);
        });
        for (int i = 0; i < count; ++i) {
            const Hypothesis& h = results[i];
            if (!h.valid) continue;
            if (h.fitness > best.fitness ||
                (h.fitness == best.fitness && h.rmse < best.rmse)) {
                best = h;
            }
        }
        done += count;
        if (best.fitness > 0.0 && best.fitness < 1.0) {
            double w3 = best.fitness * best.fitness * best.fitness;
            double needed = std::log(1.0 - cfg.confidence) / std::log(1.0 - w3);
            if (double(done) >= needed) break;
        } else if (best.fitness >= 1.0) {
            break;
        }
    }

    if (!best.valid || best.fitness < cfg.min_fitness) {
        report.fitness = std::max(0.0, best.fitness);
        report.inlier_rmse = best.valid ? best.rmse : 0.0;
        report.message = "global registration failed: fitness below threshold";
        return report;
    }
    report.success = true;
    report.fitness = best.fitness;
    report.inlier_rmse = best.rmse;
    report.correspondence_count =
        std::size_t(std::llround(best.fitness * double(s.points.size())));
    report.transform.scale = 1.0;
    report.transform.rotation = best.r;
    report.transform.translation = best.t;
    return report;
}

double point_to_plane_residual(const std::vector<Vec3>& src,
                               const std::vector<Vec3>& dst,
                               const std::vector<Vec3>& dst_normals,
                               const SimilarityTransform& t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        double r = (t.apply(src[i]) - dst[i]).dot(dst_normals[i]);
        sum += r * r;
    }
    return sum;
}

SimilarityTransform point_to_plane_step(const std::vector<Vec3>& src,
                                        const std::vector<Vec3>& dst,
                                        const std::vector<Vec3>& dst_normals,
                                        const SimilarityTransform& current) {
    using Vec6 = Eigen::Matrix<double, 6, 1>;
    using Mat6 = Eigen::Matrix<double, 6, 6>;
    Mat6 ata = Mat6::Zero();
    Vec6 atb = Vec6::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        Vec3 p = current.apply(src[i]);
        const Vec3& n = dst_normals[i];
        Vec6 a;
        a.head<3>() = p.cross(n);
        a.tail<3>() = n;
        double b = -(p - dst[i]).dot(n);
        ata += a * a.transpose();
        atb += a * b;
    }
    Vec6 x = ata.ldlt().solve(atb);
    if (!x.allFinite()) return current;

    double before = point_to_plane_residual(src, dst, dst_normals, current);
    double step = 1.0;
    for (int tries = 0; tries < 20; ++tries) {
        Vec3 omega = step * x.head<3>();
        Vec3 dt = step * x.tail<3>();
        SimilarityTransform inc;
        double angle = omega.norm();
        inc.rotation = angle > 1e-18
                           ? rotation_about_axis(omega / angle, angle)
                           : Mat3::Identity();
        inc.translation = dt;
        SimilarityTransform candidate = SimilarityTransform::compose(inc, current);
        if (point_to_plane_residual(src, dst, dst_normals, candidate) <= before)
            return candidate;
        step *= 0.5;
    }
    return current;
}

RegistrationReport multiscale_icp(const PointCloud& src, const PointCloud& dst,
                                  const SimilarityTransform& init,
                                  const IcpConfig& cfg) {
    RegistrationReport report;
    report.transform = init;

    for (std::size_t level = 0; level < cfg.scales.size(); ++level) {
        const IcpScale& sc = cfg.scales[level];
        PointCloud s = voxel_downsample(src, sc.voxel);
        PointCloud d = voxel_downsample(dst, sc.voxel);
        if (!d.has_normals()) estimate_normals(d, 2.0 * sc.voxel);
        KdTree3 dst_tree(d.points);

        double prev_rmse = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < sc.max_iterations; ++iter) {
            std::vector<Vec3> cs, cd, cn;
            cs.reserve(s.size());
            const double r_sq = sc.corr_radius * sc.corr_radius;
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                Vec3 p = report.transform.apply(s.points[i]);
                double sq = 0.0;
                std::size_t j = dst_tree.nearest(p, &sq);
                if (sq <= r_sq) {
                    cs.push_back(s.points[i]);
                    cd.push_back(d.points[j]);
                    cn.push_back(d.normals[j]);
                }
            }
            if (cs.empty())
                throw std::runtime_error("multiscale_icp: empty correspondence set at scale " +
                                         std::to_string(level));
            report.transform = point_to_plane_step(cs, cd, cn, report.transform);
            double rmse = std::sqrt(
                point_to_plane_residual(cs, cd, cn, report.transform) / double(cs.size()));
            if (std::abs(prev_rmse - rmse) < cfg.rel_tolerance) break;
            prev_rmse = rmse;
        }

        if (level + 1 == cfg.scales.size()) {
            // final report at the finest scale
            std::size_t inliers = 0;
            double err_sq = 0.0;
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                Vec3 p = report.transform.apply(s.points[i]);
                double sq = 0.0;
                dst_tree.nearest(p, &sq);
                if (sq <= sc.corr_radius * sc.corr_radius) {
                    inliers++;
                    err_sq += sq;
                }
            }
            report.fitness = s.points.empty() ? 0.0 : double(inliers) / double(s.size());
            report.inlier_rmse = inliers > 0 ? std::sqrt(err_sq / double(inliers)) : 0.0;
            report.correspondence_count = inliers;
            report.success = inliers > 0;
        }
    }
    return report;
}

}  // namespace dfuse
