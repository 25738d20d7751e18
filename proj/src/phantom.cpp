#include "dentofuse/phantom.hpp"

#include <cmath>
#include <stdexcept>

#include "dentofuse/mesh_io.hpp"

namespace dfuse {

namespace {

struct Capsule {
    Vec3 a, b;  // segment endpoints, a = crown/tip side
    double r = 0.0;
};

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    Vec3 ab = b - a;
    double len_sq = ab.squaredNorm();
    double t = len_sq > 0.0 ? std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

double capsule_sdf(const Capsule& c, const Vec3& p) {
    return segment_distance(p, c.a, c.b) - c.r;
}

struct Tube {
    std::vector<Vec3> centers;  // dense polyline
    double r = 0.0;
};

double tube_sdf(const Tube& t, const Vec3& p) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < t.centers.size(); ++i)
        d = std::min(d, segment_distance(p, t.centers[i], t.centers[i + 1]));
    return d - t.r;
}

struct JawPrimitives {
    std::vector<Capsule> teeth;
    Tube bone;

    /// Signed distance to the union.
    double sdf(const Vec3& p) const {
        double d = tube_sdf(bone, p);
        for (const auto& c : teeth) d = std::min(d, capsule_sdf(c, p));
        return d;
    }
    /// Is p strictly inside any primitive other than the one identified by
    /// (is_tooth, index)?
    bool inside_other(const Vec3& p, bool is_tooth, std::size_t index,
                      double margin) const {
        for (std::size_t i = 0; i < teeth.size(); ++i) {
            if (is_tooth && i == index) continue;
            if (capsule_sdf(teeth[i], p) < -margin) return true;
        }
        if (is_tooth && tube_sdf(bone, p) < -margin) return true;
        return false;
    }
};

/// Parabolic arch in the xy-plane. t in [-1,1].
struct Arch {
    double half_width, depth;
    Vec3 at(double t) const {
        return Vec3(half_width * t, depth * (1.0 - t * t), 0.0);
    }
};

/// Cumulative arc length table for equal-spacing placement.
std::vector<double> arch_arclength(const Arch& arch, int samples) {
    std::vector<double> cum(samples + 1, 0.0);
    Vec3 prev = arch.at(-1.0);
    for (int i = 1; i <= samples; ++i) {
        double t = -1.0 + 2.0 * double(i) / samples;
        Vec3 p = arch.at(t);
        cum[i] = cum[i - 1] + (p - prev).norm();
        prev = p;
    }
    return cum;
}

double param_at_arclength(const Arch& arch, const std::vector<double>& cum,
                          double s) {
    int samples = int(cum.size()) - 1;
    s = std::clamp(s, 0.0, cum.back());
    auto it = std::lower_bound(cum.begin(), cum.end(), s);
    std::size_t hi = std::size_t(it - cum.begin());
    if (hi == 0) return -1.0;
    std::size_t lo = hi - 1;
    double f = (s - cum[lo]) / std::max(1e-12, cum[hi] - cum[lo]);
    return -1.0 + 2.0 * (double(lo) + f) / samples;
}

int fdi_code(int jaw, int pos, int teeth_per_jaw) {
    int right = (teeth_per_jaw + 1) / 2;  // count in the x<0 quadrant
    if (jaw == 0)
        return pos < right ? 10 + (right - pos) : 20 + (pos - right + 1);
    return pos < right ? 40 + (right - pos) : 30 + (pos - right + 1);
}

/// Capsule crown band: tip hemisphere plus cylinder wall up to crown_height
/// above the tip, open at the gingival margin. Analytic outward normals.
/// tip_dir points from the capsule body toward the tip (e.g. -z for upper).
TriMesh crown_band_mesh(const Capsule& cap, const Vec3& tip_dir,
                        double crown_height, double ring_step, int segments,
                        int fdi) {
    TriMesh m;
    const Vec3 axis = -tip_dir;                  // from tip toward root
    const Vec3 tip_sphere_center = cap.a;        // a is the crown-side endpoint
    const Vec3 tip_point = cap.a + tip_dir * cap.r;
    // orthonormal frame around the axis
    Vec3 u = std::abs(axis[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    u = (u - u.dot(axis) * axis).normalized();
    Vec3 v = axis.cross(u);

    crown_height = std::max(crown_height, cap.r * 1.05);
    // profile: polar angle phi in [0, pi/2] over the tip cap, then height h
    // in [r, crown_height] along the cylinder
    int cap_rings = std::max(3, int(std::ceil((kPi / 2.0) * cap.r / ring_step)));
    int cyl_rings = std::max(1, int(std::ceil((crown_height - cap.r) / ring_step)));

    m.vertices.push_back(tip_point);
    m.vertex_normals.push_back(tip_dir);
    m.labels.push_back(fdi);

    std::vector<std::uint32_t> prev_ring;  // most recent full ring
    auto add_ring = [&](double radius, double height, const Vec3& sphere_c,
                        bool spherical) {
        std::vector<std::uint32_t> ring;
        ring.reserve(segments);
        for (int sgt = 0; sgt < segments; ++sgt) {
            double ang = 2.0 * kPi * double(sgt) / segments;
            Vec3 radial = std::cos(ang) * u + std::sin(ang) * v;
            Vec3 p = tip_sphere_center + axis * height + radial * radius;
            Vec3 n = spherical ? Vec3((p - sphere_c).normalized()) : radial;
            ring.push_back(std::uint32_t(m.vertices.size()));
            m.vertices.push_back(p);
            m.vertex_normals.push_back(n);
            m.labels.push_back(fdi);
        }
        return ring;
    };
    auto stitch = [&](const std::vector<std::uint32_t>& a,
                      const std::vector<std::uint32_t>& b) {
        for (int sgt = 0; sgt < segments; ++sgt) {
            std::uint32_t a0 = a[sgt], a1 = a[(sgt + 1) % segments];
            std::uint32_t b0 = b[sgt], b1 = b[(sgt + 1) % segments];
            m.faces.push_back({a0, b0, b1});
            m.faces.push_back({a0, b1, a1});
        }
    };

    for (int i = 1; i <= cap_rings; ++i) {
        double phi = (kPi / 2.0) * double(i) / cap_rings;
        double radius = cap.r * std::sin(phi);
        double height = -cap.r * std::cos(phi);  // from sphere center, along axis
        auto ring = add_ring(radius, height, tip_sphere_center, true);
        if (i == 1) {
            for (int sgt = 0; sgt < segments; ++sgt)
                m.faces.push_back({0, ring[sgt], ring[(sgt + 1) % segments]});
        } else {
            stitch(prev_ring, ring);
        }
        prev_ring = ring;
    }
    for (int i = 1; i <= cyl_rings; ++i) {
        double h = cap.r + (crown_height - cap.r) * double(i) / cyl_rings;
        auto ring = add_ring(cap.r, h - cap.r, tip_sphere_center, false);
        stitch(prev_ring, ring);
        prev_ring = ring;
    }

    // winding check: make normals point outward
    TriMesh probe = m;
    compute_vertex_normals(probe);
    double agree = 0.0;
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        agree += probe.vertex_normals[i].dot(m.vertex_normals[i]);
    if (agree < 0.0)
        for (auto& f : m.faces) std::swap(f[1], f[2]);
    return m;
}

/// Full capsule surface mesh (tip cap, wall, root cap).
TriMesh capsule_mesh(const Capsule& cap, double ring_step, int segments, int fdi) {
    TriMesh m;
    Vec3 axis = (cap.b - cap.a).normalized();
    double body = (cap.b - cap.a).norm();
    Vec3 u = std::abs(axis[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    u = (u - u.dot(axis) * axis).normalized();
    Vec3 v = axis.cross(u);

    int cap_rings = std::max(3, int(std::ceil((kPi / 2.0) * cap.r / ring_step)));
    int cyl_rings = std::max(1, int(std::ceil(body / ring_step)));

    m.vertices.push_back(cap.a - axis * cap.r);
    m.vertex_normals.push_back(-axis);
    m.labels.push_back(fdi);
    std::vector<std::uint32_t> prev;
    auto add_ring = [&](double radius, double along, const Vec3& sphere_c,
                        bool spherical) {
        std::vector<std::uint32_t> ring;
        for (int sgt = 0; sgt < segments; ++sgt) {
            double ang = 2.0 * kPi * double(sgt) / segments;
            Vec3 radial = std::cos(ang) * u + std::sin(ang) * v;
            Vec3 p = cap.a + axis * along + radial * radius;
            Vec3 n = spherical ? Vec3((p - sphere_c).normalized()) : radial;
            ring.push_back(std::uint32_t(m.vertices.size()));
            m.vertices.push_back(p);
            m.vertex_normals.push_back(n);
            m.labels.push_back(fdi);
        }
        return ring;
    };
    auto stitch = [&](const std::vector<std::uint32_t>& a,
                      const std::vector<std::uint32_t>& b) {
        for (int sgt = 0; sgt < segments; ++sgt) {
            m.faces.push_back({a[sgt], b[sgt], b[(sgt + 1) % segments]});
            m.faces.push_back({a[sgt], b[(sgt + 1) % segments], a[(sgt + 1) % segments]});
        }
    };
    for (int i = 1; i <= cap_rings; ++i) {
        double phi = (kPi / 2.0) * double(i) / cap_rings;
        auto ring = add_ring(cap.r * std::sin(phi), -cap.r * std::cos(phi), cap.a, true);
        if (i == 1)
            for (int sgt = 0; sgt < segments; ++sgt)
                m.faces.push_back({0, ring[sgt], ring[(sgt + 1) % segments]});
        else
            stitch(prev, ring);
        prev = ring;
    }
    for (int i = 1; i <= cyl_rings; ++i) {
        auto ring = add_ring(cap.r, body * double(i) / cyl_rings, Vec3::Zero(), false);
        stitch(prev, ring);
        prev = ring;
    }
    for (int i = 1; i <= cap_rings; ++i) {
        double phi = (kPi / 2.0) * double(i) / cap_rings;
        auto ring = add_ring(cap.r * std::cos(phi), body + cap.r * std::sin(phi), cap.b, true);
        stitch(prev, ring);
        prev = ring;
    }
    std::uint32_t pole = std::uint32_t(m.vertices.size());
    m.vertices.push_back(cap.b + axis * cap.r);
    m.vertex_normals.push_back(axis);
    m.labels.push_back(fdi);
    for (int sgt = 0; sgt < segments; ++sgt)
        m.faces.push_back({pole, prev[(sgt + 1) % segments], prev[sgt]});

    TriMesh probe = m;
    compute_vertex_normals(probe);
    double agree = 0.0;
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        agree += probe.vertex_normals[i].dot(m.vertex_normals[i]);
    if (agree < 0.0)
        for (auto& f : m.faces) std::swap(f[1], f[2]);
    return m;
}

TriMesh tube_mesh(const Tube& t, int segments) {
    // sweep a circle along the polyline; hemispherical end caps
    TriMesh m;
    auto frame_at = [&](std::size_t i) {
        Vec3 tan;
        if (i == 0)
            tan = (t.centers[1] - t.centers[0]).normalized();
        else if (i + 1 == t.centers.size())
            tan = (t.centers[i] - t.centers[i - 1]).normalized();
        else
            tan = (t.centers[i + 1] - t.centers[i - 1]).normalized();
        return tan;
    };
    std::vector<std::uint32_t> prev;
    Vec3 u_prev;
    for (std::size_t i = 0; i < t.centers.size(); ++i) {
        Vec3 tan = frame_at(i);
        Vec3 u;
        if (i == 0) {
            u = std::abs(tan[2]) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
            u = (u - u.dot(tan) * tan).normalized();
        } else {
            u = (u_prev - u_prev.dot(tan) * tan).normalized();  // parallel transport
        }
        u_prev = u;
        Vec3 v = tan.cross(u);
        std::vector<std::uint32_t> ring;
        for (int sgt = 0; sgt < segments; ++sgt) {
            double ang = 2.0 * kPi * double(sgt) / segments;
            Vec3 radial = std::cos(ang) * u + std::sin(ang) * v;
            ring.push_back(std::uint32_t(m.vertices.size()));
            m.vertices.push_back(t.centers[i] + radial * t.r);
            m.vertex_normals.push_back(radial);
            m.labels.push_back(0);
        }
        if (i > 0) {
            for (int sgt = 0; sgt < segments; ++sgt) {
                m.faces.push_back({prev[sgt], ring[sgt], ring[(sgt + 1) % segments]});
                m.faces.push_back({prev[sgt], ring[(sgt + 1) % segments],
                                   prev[(sgt + 1) % segments]});
            }
        }
        prev = ring;
    }
    return m;
}

PointCloud sample_capsule_surface(const Capsule& cap, double step) {
    PointCloud out;
    Vec3 axis = (cap.b - cap.a).normalized();
    double body = (cap.b - cap.a).norm();
    Vec3 u = std::abs(axis[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    u = (u - u.dot(axis) * axis).normalized();
    Vec3 v = axis.cross(u);
    auto ring = [&](double radius, double along, const Vec3& sphere_c, bool sph) {
        int k = std::max(3, int(std::ceil(2.0 * kPi * std::max(radius, 1e-6) / step)));
        for (int sgt = 0; sgt < k; ++sgt) {
            double ang = 2.0 * kPi * (double(sgt) + 0.5) / k;
            Vec3 radial = std::cos(ang) * u + std::sin(ang) * v;
            Vec3 p = cap.a + axis * along + radial * radius;
            out.points.push_back(p);
            out.normals.push_back(sph ? Vec3((p - sphere_c).normalized()) : radial);
        }
    };
    int cap_rings = std::max(2, int(std::ceil((kPi / 2.0) * cap.r / step)));
    for (int i = 0; i < cap_rings; ++i) {
        double phi = (kPi / 2.0) * (double(i) + 0.5) / cap_rings;
        ring(cap.r * std::sin(phi), -cap.r * std::cos(phi), cap.a, true);
        ring(cap.r * std::sin(phi), body + cap.r * std::cos(phi), cap.b, true);
    }
    int cyl_rings = std::max(1, int(std::ceil(body / step)));
    for (int i = 0; i < cyl_rings; ++i)
        ring(cap.r, body * (double(i) + 0.5) / cyl_rings, Vec3::Zero(), false);
    return out;
}

PointCloud sample_tube_surface(const Tube& t, double step) {
    PointCloud out;
    Vec3 u_prev;
    for (std::size_t i = 0; i + 1 < t.centers.size(); ++i) {
        Vec3 a = t.centers[i], b = t.centers[i + 1];
        Vec3 tan = (b - a).normalized();
        Vec3 u;
        if (i == 0) {
            u = std::abs(tan[2]) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
            u = (u - u.dot(tan) * tan).normalized();
        } else {
            u = (u_prev - u_prev.dot(tan) * tan).normalized();
        }
        u_prev = u;
        Vec3 v = tan.cross(u);
        double seg_len = (b - a).norm();
        int rings = std::max(1, int(std::ceil(seg_len / step)));
        int k = std::max(3, int(std::ceil(2.0 * kPi * t.r / step)));
        for (int ri = 0; ri < rings; ++ri) {
            Vec3 c = a + tan * (seg_len * (double(ri) + 0.5) / rings);
            for (int sgt = 0; sgt < k; ++sgt) {
                double ang = 2.0 * kPi * (double(sgt) + 0.5) / k;
                Vec3 radial = std::cos(ang) * u + std::sin(ang) * v;
                out.points.push_back(c + radial * t.r);
                out.normals.push_back(radial);
            }
        }
    }
    // rounded ends
    for (int end = 0; end < 2; ++end) {
        Vec3 c = end == 0 ? t.centers.front() : t.centers.back();
        Vec3 tan = end == 0
                       ? Vec3((t.centers.front() - t.centers[1]).normalized())
                       : Vec3((t.centers.back() - t.centers[t.centers.size() - 2])
                                  .normalized());
        Vec3 u = std::abs(tan[2]) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
        u = (u - u.dot(tan) * tan).normalized();
        Vec3 v = tan.cross(u);
        int cap_rings = std::max(2, int(std::ceil((kPi / 2.0) * t.r / step)));
        for (int i = 0; i < cap_rings; ++i) {
            double phi = (kPi / 2.0) * (double(i) + 0.5) / cap_rings;
            double radius = t.r * std::sin(phi);
            int k = std::max(3, int(std::ceil(2.0 * kPi * std::max(radius, 1e-6) / step)));
            for (int sgt = 0; sgt < k; ++sgt) {
                double ang = 2.0 * kPi * (double(sgt) + 0.5) / k;
                Vec3 radial = std::cos(ang) * u + std::sin(ang) * v;
                Vec3 p = c + tan * (t.r * std::cos(phi)) + radial * radius;
                out.points.push_back(p);
                out.normals.push_back((p - c).normalized());
            }
        }
    }
    return out;
}

/// Drop faces that dip inside any other primitive of the same jaw.
TriMesh trim_against(const TriMesh& m, const JawPrimitives& jaw, bool is_tooth,
                     std::size_t index) {
    TriMesh out = m;
    out.faces.clear();
    for (const auto& f : m.faces) {
        bool buried = false;
        for (int i = 0; i < 3 && !buried; ++i)
            buried = jaw.inside_other(m.vertices[f[i]], is_tooth, index, 1e-6);
        if (!buried) out.faces.push_back(f);
    }
    return out;
}

void append_mesh(TriMesh& dst, const TriMesh& src) {
    std::uint32_t base = std::uint32_t(dst.vertices.size());
    dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
    dst.vertex_normals.insert(dst.vertex_normals.end(), src.vertex_normals.begin(),
                              src.vertex_normals.end());
    dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
    for (const auto& f : src.faces)
        dst.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

}  // namespace

PhantomScene generate_phantom(std::uint64_t seed, const PhantomConfig& cfg) {
    if (cfg.teeth_per_jaw < 4 || cfg.teeth_per_jaw > 16)
        throw std::invalid_argument("teeth_per_jaw outside [4, 16]");
    if (cfg.voxel_mm < 0.125 || cfg.voxel_mm > 0.5)
        throw std::invalid_argument("voxel_mm outside [0.125, 0.5]");
    if (cfg.bite_gap_mm > 5.0)
        throw std::invalid_argument("bite_gap_mm implausibly large");

    Rng rng(seed);
    const int n = cfg.teeth_per_jaw;
    Arch arch{cfg.arch_width_mm / 2.0, cfg.arch_depth_mm};
    auto cum = arch_arclength(arch, 4096);
    const double total_len = cum.back();

    PhantomScene scene;
    JawPrimitives jaws[2];

    // teeth; same arch positions for both jaws so opposing tips meet
    std::vector<Vec3> base_xy(n);
    for (int k = 0; k < n; ++k) {
        double frac = std::pow((double(k) + 0.5) / n, cfg.arch_warp);
        double t = param_at_arclength(arch, cum, frac * total_len);
        base_xy[k] = arch.at(t);
    }
    for (int jaw = 0; jaw < 2; ++jaw) {
        double sign = jaw == 0 ? +1.0 : -1.0;  // upper occupies z > 0
        for (int k = 0; k < n; ++k) {
            double r = cfg.tooth_radius_mm * (1.0 + cfg.radius_jitter * rng.uniform(-1.0, 1.0));
            double len = cfg.tooth_length_mm * (1.0 + cfg.length_jitter * rng.uniform(-1.0, 1.0));
            double jx = rng.uniform(-cfg.lateral_jitter_mm, cfg.lateral_jitter_mm);
            double jy = rng.uniform(-cfg.lateral_jitter_mm, cfg.lateral_jitter_mm);
            Vec3 c = base_xy[k] + Vec3(jx, jy, 0.0);
            double tip_z = sign * cfg.bite_gap_mm / 2.0;
            Capsule cap;
            cap.a = Vec3(c[0], c[1], tip_z + sign * r);
            cap.b = Vec3(c[0], c[1], tip_z + sign * (len - r));
            cap.r = r;
            jaws[jaw].teeth.push_back(cap);

            PhantomTooth info;
            info.fdi = fdi_code(jaw, k, n);
            info.jaw = jaw;
            info.tip_center = Vec3(c[0], c[1], tip_z);
            info.axis_a = cap.a;
            info.axis_b = cap.b;
            info.radius = r;
            info.length = len;
            scene.teeth.push_back(info);
        }
        // bone tube along the arch at root level
        Tube bone;
        bone.r = cfg.bone_radius_mm;
        double bone_z = sign * (cfg.bite_gap_mm / 2.0 + cfg.bone_center_offset_mm);
        int segs = 64;
        for (int i = 0; i <= segs; ++i) {
            double t = -1.0 + 2.0 * double(i) / segs;
            Vec3 p = arch.at(t);
            bone.centers.push_back(Vec3(p[0], p[1], bone_z));
        }
        jaws[jaw].bone = bone;
    }
    scene.gt_tooth_count_upper = n;
    scene.gt_tooth_count_lower = n;

    // bounding box over primitives -> volume frame shift
    Vec3 lo(1e30, 1e30, 1e30), hi = -lo;
    auto grow = [&](const Vec3& p, double r) {
        lo = lo.cwiseMin(p - Vec3(r, r, r));
        hi = hi.cwiseMax(p + Vec3(r, r, r));
    };
    for (int jaw = 0; jaw < 2; ++jaw) {
        for (const auto& c : jaws[jaw].teeth) {
            grow(c.a, c.r);
            grow(c.b, c.r);
        }
        for (const auto& p : jaws[jaw].bone.centers) grow(p, jaws[jaw].bone.r);
    }
    const double margin = 4.0 * cfg.voxel_mm;
    Vec3 shift = -(lo - Vec3(margin, margin, margin));
    auto apply_shift = [&shift](Vec3& p) { p += shift; };
    for (int jaw = 0; jaw < 2; ++jaw) {
        for (auto& c : jaws[jaw].teeth) {
            apply_shift(c.a);
            apply_shift(c.b);
        }
        for (auto& p : jaws[jaw].bone.centers) apply_shift(p);
    }
    for (auto& t : scene.teeth) {
        apply_shift(t.tip_center);
        apply_shift(t.axis_a);
        apply_shift(t.axis_b);
    }
    Vec3 extent = hi - lo + Vec3(2 * margin, 2 * margin, 2 * margin);

    LabelVolume& vol = scene.volume;
    vol.spacing = Vec3(cfg.voxel_mm, cfg.voxel_mm, cfg.voxel_mm);
    for (int i = 0; i < 3; ++i)
        vol.dims[i] = std::size_t(std::ceil(extent[i] / cfg.voxel_mm)) + 1;
    vol.labels.assign(vol.voxel_count(), kLabelBackground);

    // rasterize primitive-by-primitive over each primitive's voxel AABB;
    // teeth override bone
    auto raster = [&](auto&& sdf, const Vec3& blo, const Vec3& bhi, std::uint8_t label) {
        std::array<std::size_t, 3> vlo, vhi;
        for (int i = 0; i < 3; ++i) {
            double l = (blo[i]) / vol.spacing[i] - 1.0;
            double h = (bhi[i]) / vol.spacing[i] + 1.0;
            vlo[i] = std::size_t(std::max(0.0, std::floor(l)));
            vhi[i] = std::min(vol.dims[i] - 1, std::size_t(std::max(0.0, std::ceil(h))));
        }
        for (std::size_t z = vlo[2]; z <= vhi[2]; ++z)
            for (std::size_t y = vlo[1]; y <= vhi[1]; ++y)
                for (std::size_t x = vlo[0]; x <= vhi[0]; ++x) {
                    Vec3 p = vol.voxel_center_mm(x, y, z);
                    if (sdf(p) <= 0.0) {
                        std::uint8_t& cell = vol.at(x, y, z);
                        if (label == kLabelTooth || cell == kLabelBackground)
                            cell = label;
                    }
                }
    };
    for (int jaw = 0; jaw < 2; ++jaw) {
        Vec3 blo(1e30, 1e30, 1e30), bhi = -blo;
        for (const auto& p : jaws[jaw].bone.centers) {
            blo = blo.cwiseMin(p - Vec3::Constant(jaws[jaw].bone.r));
            bhi = bhi.cwiseMax(p + Vec3::Constant(jaws[jaw].bone.r));
        }
        const Tube& bone = jaws[jaw].bone;
        raster([&bone](const Vec3& p) { return tube_sdf(bone, p); }, blo, bhi,
               kLabelBone);
    }
    for (int jaw = 0; jaw < 2; ++jaw)
        for (const auto& c : jaws[jaw].teeth) {
            Vec3 blo = c.a.cwiseMin(c.b) - Vec3::Constant(c.r);
            Vec3 bhi = c.a.cwiseMax(c.b) + Vec3::Constant(c.r);
            raster([&c](const Vec3& p) { return capsule_sdf(c, p); }, blo, bhi,
                   kLabelTooth);
        }

    // ground-truth union-surface samples per jaw
    for (int jaw = 0; jaw < 2; ++jaw) {
        PointCloud& gt = jaw == 0 ? scene.gt_surface_upper : scene.gt_surface_lower;
        for (std::size_t i = 0; i < jaws[jaw].teeth.size(); ++i) {
            PointCloud s = sample_capsule_surface(jaws[jaw].teeth[i], cfg.gt_sample_step_mm);
            for (std::size_t k = 0; k < s.points.size(); ++k)
                if (!jaws[jaw].inside_other(s.points[k], true, i, 1e-9)) {
                    gt.points.push_back(s.points[k]);
                    gt.normals.push_back(s.normals[k]);
                }
        }
        PointCloud s = sample_tube_surface(jaws[jaw].bone, cfg.gt_sample_step_mm);
        for (std::size_t k = 0; k < s.points.size(); ++k)
            if (!jaws[jaw].inside_other(s.points[k], false, 0, 1e-9)) {
                gt.points.push_back(s.points[k]);
                gt.normals.push_back(s.normals[k]);
            }
    }

    // analytic union mesh (both jaws) for inspection artifacts
    for (int jaw = 0; jaw < 2; ++jaw) {
        for (std::size_t i = 0; i < jaws[jaw].teeth.size(); ++i) {
            TriMesh cm = capsule_mesh(jaws[jaw].teeth[i], 0.3, 24,
                                      scene.teeth[jaw * n + int(i)].fdi);
            append_mesh(scene.gt_cbct_mesh, trim_against(cm, jaws[jaw], true, i));
        }
        TriMesh bm = tube_mesh(jaws[jaw].bone, 32);
        append_mesh(scene.gt_cbct_mesh, trim_against(bm, jaws[jaw], false, 0));
    }

    // IOS crown meshes: build in CBCT frame, then displace by a recorded
    // random similarity (scale 1; physical scale comes from scanner metadata)
    for (int jaw = 0; jaw < 2; ++jaw) {
        double sign = jaw == 0 ? +1.0 : -1.0;
        TriMesh crowns;
        for (std::size_t i = 0; i < jaws[jaw].teeth.size(); ++i) {
            TriMesh cm = crown_band_mesh(jaws[jaw].teeth[i], Vec3(0, 0, -sign),
                                         cfg.crown_height_mm, cfg.ios_ring_step_mm,
                                         cfg.ios_segments,
                                         scene.teeth[jaw * n + int(i)].fdi);
            append_mesh(crowns, cm);
        }
        SimilarityTransform t;
        t.scale = 1.0;
        t.rotation = rng.random_rotation(deg2rad(cfg.ios_max_rotation_deg));
        t.translation = rng.in_ball(cfg.ios_max_translation_mm);
        SimilarityTransform inv = t.inverse();
        TriMesh ios = transformed(crowns, inv.scale, inv.rotation, inv.translation);
        if (jaw == 0) {
            scene.gt_crown_mesh_upper = crowns;
            scene.gt_ios_mesh_upper = ios;
            scene.gt_ios_to_cbct_upper = t;
        } else {
            scene.gt_crown_mesh_lower = crowns;
            scene.gt_ios_mesh_lower = ios;
            scene.gt_ios_to_cbct_lower = t;
        }
    }
    return scene;
}

std::filesystem::path save_phantom(const std::filesystem::path& dir,
                                   const PhantomScene& scene) {
    std::filesystem::create_directories(dir);
    auto vol_path = dir / "volume.lvol";
    save_volume(vol_path, scene.volume);
    save_mesh(dir / "ios_upper.msh", scene.gt_ios_mesh_upper);
    save_mesh(dir / "ios_lower.msh", scene.gt_ios_mesh_lower);
    save_mesh(dir / "gt_surface.msh", scene.gt_cbct_mesh);
    save_transform(dir / "gt_ios_to_cbct_upper.txt",
                   scene.gt_ios_to_cbct_upper.matrix());
    save_transform(dir / "gt_ios_to_cbct_lower.txt",
                   scene.gt_ios_to_cbct_lower.matrix());
    TriMesh gt_up, gt_lo;
    gt_up.vertices = scene.gt_surface_upper.points;
    gt_up.vertex_normals = scene.gt_surface_upper.normals;
    gt_lo.vertices = scene.gt_surface_lower.points;
    gt_lo.vertex_normals = scene.gt_surface_lower.normals;
    save_mesh(dir / "gt_samples_upper.msh", gt_up);
    save_mesh(dir / "gt_samples_lower.msh", gt_lo);
    return vol_path;
}

}  // namespace dfuse
