#include <doctest.h>

#include <set>

#include "dentofuse/geometry.hpp"
#include "dentofuse/reconstruct.hpp"
#include "test_shapes.hpp"

using namespace dfuse;

namespace {

LabelVolume sphere_volume(double radius_voxels, std::size_t n, double spacing) {
    LabelVolume v;
    v.dims = {n, n, n};
    v.spacing = Vec3(spacing, spacing, spacing);
    v.labels.assign(v.voxel_count(), kLabelBackground);
    double c = double(n) / 2.0;  // in voxel units of the center lattice
    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                double dx = double(x) + 0.5 - c;
                double dy = double(y) + 0.5 - c;
                double dz = double(z) + 0.5 - c;
                if (dx * dx + dy * dy + dz * dz <= radius_voxels * radius_voxels)
                    v.at(x, y, z) = kLabelTooth;
            }
    return v;
}

std::size_t count_edges(const TriMesh& m) { return edge_statistics(m).edge_count; }

}  // namespace

TEST_CASE("all-background volume gives an empty mesh") {
    LabelVolume v;
    v.dims = {8, 8, 8};
    v.spacing = Vec3(0.25, 0.25, 0.25);
    v.labels.assign(v.voxel_count(), kLabelBackground);
    CHECK(marching_cubes(v, kLabelTooth).empty());
}

TEST_CASE("boundary-only labels give an empty mesh") {
    LabelVolume v;
    v.dims = {6, 6, 6};
    v.spacing = Vec3(0.25, 0.25, 0.25);
    v.labels.assign(v.voxel_count(), kLabelBackground);
    v.at(0, 0, 0) = kLabelTooth;
    v.at(5, 3, 3) = kLabelTooth;
    CHECK(marching_cubes(v, kLabelTooth).empty());
}

TEST_CASE("single interior voxel gives a closed surface with Euler characteristic 2") {
    LabelVolume v;
    v.dims = {5, 5, 5};
    v.spacing = Vec3(0.25, 0.25, 0.25);
    v.labels.assign(v.voxel_count(), kLabelBackground);
    v.at(2, 2, 2) = kLabelTooth;
    TriMesh m = marching_cubes(v, kLabelTooth);
    REQUIRE(!m.empty());
    CHECK(is_watertight(m));
    long euler = long(m.vertices.size()) - long(count_edges(m)) + long(m.faces.size());
    CHECK(euler == 2);
    CHECK(m.vertices.size() == 6);
    CHECK(m.faces.size() == 8);
    CHECK(signed_volume(m) > 0.0);  // outward orientation
    CHECK(validate_mesh(m).empty());
}

TEST_CASE("rasterized sphere surface area is within 5 percent of analytic") {
    const double r_vox = 8.0, spacing = 0.25;
    LabelVolume v = sphere_volume(r_vox, 64, spacing);
    TriMesh m = marching_cubes(v, kLabelTooth);
    REQUIRE(!m.empty());
    CHECK(is_watertight(m));
    double r_mm = r_vox * spacing;
    double analytic = 4.0 * kPi * r_mm * r_mm;
    CHECK(surface_area(m) == doctest::Approx(analytic).epsilon(0.05));
    CHECK(signed_volume(m) > 0.0);
}

TEST_CASE("marching cubes is watertight on random binary volumes") {
    // ambiguous-face stress: random noise exercises every neighbor pairing
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        LabelVolume v;
        v.dims = {7, 7, 7};
        v.spacing = Vec3(0.3, 0.3, 0.3);
        v.labels.resize(v.voxel_count());
        for (auto& l : v.labels)
            l = rng.uniform() < 0.45 ? kLabelTooth : kLabelBackground;
        bool interior = false;
        for (std::size_t z = 1; z < 6 && !interior; ++z)
            for (std::size_t y = 1; y < 6 && !interior; ++y)
                for (std::size_t x = 1; x < 6 && !interior; ++x)
                    interior = v.at(x, y, z) == kLabelTooth;
        if (!interior) continue;
        TriMesh m = marching_cubes(v, kLabelTooth);
        CHECK(is_watertight(m));
        CHECK(validate_mesh(m).empty());
    }
}

TEST_CASE("spacing covariance is exact under power-of-two scaling") {
    LabelVolume v = sphere_volume(5.0, 24, 0.25);
    TriMesh a = marching_cubes(v, kLabelTooth);
    v.spacing = Vec3(0.5, 0.5, 0.5);
    TriMesh b = marching_cubes(v, kLabelTooth);
    REQUIRE(a.vertices.size() == b.vertices.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        for (int k = 0; k < 3; ++k) CHECK(b.vertices[i][k] == 2.0 * a.vertices[i][k]);
}

TEST_CASE("hlo leaves a flat noise-free patch unchanged") {
    TriMesh plane = test::plane_grid(8, 8, 0.5);
    TriMesh out = hlo_smooth(plane, 10, deg2rad(30.0));
    for (std::size_t i = 0; i < plane.vertices.size(); ++i)
        CHECK((out.vertices[i] - plane.vertices[i]).norm() < 1e-9);
}

TEST_CASE("hlo halves the rms plane deviation of a noisy flat patch") {
    TriMesh plane = test::plane_grid(20, 20, 0.5);
    Rng rng(5);
    for (auto& v : plane.vertices) v[2] += 0.1 * rng.normal();
    compute_vertex_normals(plane);
    auto rms_z = [](const TriMesh& m) {
        double mean = 0.0;
        for (const auto& v : m.vertices) mean += v[2];
        mean /= double(m.vertices.size());
        double sum = 0.0;
        for (const auto& v : m.vertices) sum += (v[2] - mean) * (v[2] - mean);
        return std::sqrt(sum / double(m.vertices.size()));
    };
    double before = rms_z(plane);
    TriMesh out = hlo_smooth(plane, 10, deg2rad(60.0));
    CHECK(rms_z(out) < 0.5 * before);
    CHECK(out.vertices.size() == plane.vertices.size());
    CHECK(out.faces.size() == plane.faces.size());
}

TEST_CASE("hlo preserves a 90 degree crest while smoothing the faces") {
    TriMesh w = test::wedge(12, 8, 0.5);
    // mild position noise everywhere
    Rng rng(17);
    TriMesh noisy = w;
    for (std::size_t i = 0; i < noisy.vertices.size(); ++i) {
        Vec3 n = noisy.vertex_normals[i];
        noisy.vertices[i] += 0.03 * rng.normal() * n;
    }
    compute_vertex_normals(noisy);
    TriMesh out = hlo_smooth(noisy, 10, deg2rad(30.0));

    double crest_move = 0.0, interior_move = 0.0;
    std::size_t interior_count = 0;
    for (std::size_t i = 0; i < w.vertices.size(); ++i) {
        double d = (out.vertices[i] - noisy.vertices[i]).norm();
        bool crest = std::abs(w.vertices[i][0]) < 1e-12 && w.vertices[i][2] < 1e-12;
        if (crest) {
            crest_move = std::max(crest_move, d);
        } else if (std::abs(w.vertices[i][0]) > 0.6 || w.vertices[i][2] > 0.6) {
            interior_move += d;
            interior_count++;
        }
    }
    interior_move /= double(interior_count);
    CHECK(crest_move <= 0.1 * interior_move + 1e-12);
}

TEST_CASE("hlo rejects non-manifold meshes") {
    TriMesh m = test::plane_grid(2, 2, 1.0);
    m.vertices.push_back(Vec3(0.5, 0.5, 1.0));
    m.faces.push_back({0, 1, std::uint32_t(m.vertices.size() - 1)});
    m.faces.push_back({0, 1, 4});  // third face on edge (0,1)
    CHECK_THROWS_AS(hlo_smooth(m, 1, 0.5), std::invalid_argument);
}

TEST_CASE("laplacian with zero iterations is the identity") {
    TriMesh sphere = test::icosphere(2, 1.0);
    TriMesh out = laplacian_smooth(sphere, 0, 0.5);
    for (std::size_t i = 0; i < sphere.vertices.size(); ++i)
        CHECK((out.vertices[i] - sphere.vertices[i]).norm() == 0.0);
}

TEST_CASE("one full-step umbrella move lands on the neighbor centroid") {
    // hexagonal fan: center vertex ringed by 6 neighbors
    TriMesh m;
    m.vertices.push_back(Vec3(0.3, -0.2, 0.7));  // displaced center
    std::vector<Vec3> ring;
    for (int i = 0; i < 6; ++i) {
        double a = kPi * i / 3.0;
        m.vertices.push_back(Vec3(std::cos(a), std::sin(a), 0.0));
    }
    for (int i = 0; i < 6; ++i)
        m.faces.push_back({0, std::uint32_t(1 + i), std::uint32_t(1 + (i + 1) % 6)});
    TriMesh out = laplacian_smooth(m, 1, 1.0);
    Vec3 centroid = Vec3::Zero();
    for (int i = 1; i <= 6; ++i) centroid += m.vertices[std::size_t(i)];
    centroid /= 6.0;
    CHECK((out.vertices[0] - centroid).norm() < 1e-12);
}

TEST_CASE("five smoothing steps shrink an icosphere by less than 15 percent") {
    TriMesh sphere = test::icosphere(3, 1.0);
    double before = signed_volume(sphere);
    TriMesh out = laplacian_smooth(sphere, 5, 0.5);
    double after = signed_volume(out);
    CHECK(after > 0.85 * before);
    CHECK(after < before);  // umbrella smoothing always shrinks a sphere
    CHECK(out.vertices.size() == sphere.vertices.size());
    CHECK(out.faces.size() == sphere.faces.size());
    CHECK(count_edges(out) == count_edges(sphere));
}
