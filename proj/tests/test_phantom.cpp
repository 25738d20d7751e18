#include <doctest.h>

#include <set>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/phantom.hpp"

using namespace dfuse;

namespace {

/// Face-adjacent voxel pairs where one side belongs to an upper tooth and
/// the other to a lower tooth (membership from the recorded capsules).
bool teeth_touch_across_jaws(const PhantomScene& scene) {
    const LabelVolume& v = scene.volume;
    auto inside_jaw = [&](const Vec3& p, int jaw) {
        for (const auto& t : scene.teeth) {
            if (t.jaw != jaw) continue;
            Vec3 ab = t.axis_b - t.axis_a;
            double len_sq = ab.squaredNorm();
            double u = len_sq > 0 ? std::clamp((p - t.axis_a).dot(ab) / len_sq, 0.0, 1.0)
                                  : 0.0;
            if ((p - (t.axis_a + u * ab)).norm() <= t.radius) return true;
        }
        return false;
    };
    const long dirs[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (std::size_t z = 0; z + 1 < v.dims[2]; ++z)
        for (std::size_t y = 0; y + 1 < v.dims[1]; ++y)
            for (std::size_t x = 0; x + 1 < v.dims[0]; ++x) {
                if (v.at(x, y, z) != kLabelTooth) continue;
                Vec3 p = v.voxel_center_mm(x, y, z);
                bool up = inside_jaw(p, 0), lo = inside_jaw(p, 1);
                if (up && lo) return true;  // shared voxel counts as contact
                for (const auto& d : dirs) {
                    std::size_t nx = x + std::size_t(d[0]);
                    std::size_t ny = y + std::size_t(d[1]);
                    std::size_t nz = z + std::size_t(d[2]);
                    if (v.at(nx, ny, nz) != kLabelTooth) continue;
                    Vec3 q = v.voxel_center_mm(nx, ny, nz);
                    bool up2 = inside_jaw(q, 0), lo2 = inside_jaw(q, 1);
                    if ((up && lo2) || (lo && up2)) return true;
                }
            }
    return false;
}

}  // namespace

TEST_CASE("same seed gives identical scenes") {
    PhantomConfig cfg;
    cfg.teeth_per_jaw = 6;
    PhantomScene a = generate_phantom(7, cfg);
    PhantomScene b = generate_phantom(7, cfg);
    CHECK(a.volume.labels == b.volume.labels);
    REQUIRE(a.gt_ios_mesh_upper.vertices.size() == b.gt_ios_mesh_upper.vertices.size());
    for (std::size_t i = 0; i < a.gt_ios_mesh_upper.vertices.size(); ++i)
        CHECK((a.gt_ios_mesh_upper.vertices[i] - b.gt_ios_mesh_upper.vertices[i]).norm() ==
              0.0);
    CHECK((a.gt_ios_to_cbct_upper.matrix() - b.gt_ios_to_cbct_upper.matrix())
              .cwiseAbs()
              .maxCoeff() == 0.0);

    PhantomScene c = generate_phantom(8, cfg);
    CHECK(a.volume.labels != c.volume.labels);
}

TEST_CASE("contacted bite creates cross-jaw tooth contact") {
    PhantomConfig cfg;
    cfg.teeth_per_jaw = 6;
    cfg.bite_gap_mm = -0.2;
    PhantomScene scene = generate_phantom(3, cfg);
    CHECK(teeth_touch_across_jaws(scene));
}

TEST_CASE("open bite leaves no face-adjacent cross-jaw voxels") {
    PhantomConfig cfg;
    cfg.teeth_per_jaw = 6;
    cfg.bite_gap_mm = 2.0;
    PhantomScene scene = generate_phantom(3, cfg);
    CHECK_FALSE(teeth_touch_across_jaws(scene));
}

TEST_CASE("config validation") {
    PhantomConfig cfg;
    cfg.teeth_per_jaw = 3;
    CHECK_THROWS_AS(generate_phantom(1, cfg), std::invalid_argument);
    cfg.teeth_per_jaw = 8;
    cfg.voxel_mm = 0.6;
    CHECK_THROWS_AS(generate_phantom(1, cfg), std::invalid_argument);
}

TEST_CASE("IOS crowns land on the tooth label region under the gt transform") {
    PhantomConfig cfg;
    PhantomScene scene = generate_phantom(11, cfg);
    const LabelVolume& v = scene.volume;

    // collect tooth voxel centers
    std::vector<Vec3> tooth_voxels;
    for (std::size_t z = 0; z < v.dims[2]; ++z)
        for (std::size_t y = 0; y < v.dims[1]; ++y)
            for (std::size_t x = 0; x < v.dims[0]; ++x)
                if (v.at(x, y, z) == kLabelTooth)
                    tooth_voxels.push_back(v.voxel_center_mm(x, y, z));
    REQUIRE(!tooth_voxels.empty());
    KdTree3 tree(tooth_voxels);

    auto check_jaw = [&](const TriMesh& ios, const SimilarityTransform& t) {
        double voxel_diag = v.spacing.norm();
        for (const auto& p : ios.vertices) {
            double sq = 0.0;
            tree.nearest(t.apply(p), &sq);
            CHECK(std::sqrt(sq) <= voxel_diag);  // within one voxel
        }
    };
    check_jaw(scene.gt_ios_mesh_upper, scene.gt_ios_to_cbct_upper);
    check_jaw(scene.gt_ios_mesh_lower, scene.gt_ios_to_cbct_lower);
}

TEST_CASE("FDI labels come from the legal code set") {
    PhantomConfig cfg;
    cfg.teeth_per_jaw = 8;
    PhantomScene scene = generate_phantom(5, cfg);
    std::set<int> legal;
    for (int q = 1; q <= 4; ++q)
        for (int i = 1; i <= 8; ++i) legal.insert(q * 10 + i);
    std::set<int> seen;
    for (const auto& t : scene.teeth) {
        CHECK(legal.count(t.fdi) == 1);
        seen.insert(t.fdi);
    }
    CHECK(seen.size() == 16);  // all distinct
    for (auto l : scene.gt_ios_mesh_upper.labels) CHECK(legal.count(l) == 1);
    CHECK(scene.gt_tooth_count_upper == 8);
    CHECK(scene.gt_tooth_count_lower == 8);
    // jaw assignment recorded per tooth
    int upper = 0;
    for (const auto& t : scene.teeth) upper += t.jaw == 0;
    CHECK(upper == 8);
}

TEST_CASE("tooth voxels are a small fraction of the volume") {
    PhantomScene scene = generate_phantom(2, PhantomConfig{});
    std::size_t tooth = 0;
    for (auto l : scene.volume.labels) tooth += l == kLabelTooth;
    CHECK(double(tooth) / double(scene.volume.voxel_count()) < 0.15);
    CHECK(tooth > 0);
}

TEST_CASE("ground-truth surface samples lie outside other primitives") {
    PhantomScene scene = generate_phantom(4, PhantomConfig{});
    CHECK(scene.gt_surface_upper.size() > 1000);
    CHECK(scene.gt_surface_lower.size() > 1000);
    // samples must respect the jaw's z side (upper above the bite plane)
    double bite_z = 0.0;
    for (const auto& t : scene.teeth)
        if (t.jaw == 0) bite_z = t.tip_center[2];
    for (std::size_t i = 0; i < scene.gt_surface_upper.size(); i += 50)
        CHECK(scene.gt_surface_upper.points[i][2] > bite_z - 1.0);
}
