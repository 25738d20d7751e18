#include <doctest.h>

#include "dentofuse/geometry.hpp"
#include "dentofuse/metrics.hpp"
#include "oracles.hpp"
#include "test_shapes.hpp"

using namespace dfuse;

TEST_CASE("perfect prediction scores ones") {
    std::vector<std::int32_t> gt{0, 1, 1, 2, 0, 2};
    OverlapScores s = overlap_scores(gt, gt);
    CHECK(s.dice == 1.0);
    CHECK(s.iou == 1.0);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.mean_iou == 1.0);
}

TEST_CASE("half-overlapping equal masks give dice 0.5 and iou one third") {
    // |A| = |B| = 100, overlap 50
    std::vector<std::int32_t> pred(200, 0), gt(200, 0);
    for (int i = 0; i < 100; ++i) pred[std::size_t(i)] = 1;        // A = [0,100)
    for (int i = 50; i < 150; ++i) gt[std::size_t(i)] = 1;         // B = [50,150)
    OverlapScores s = overlap_scores(pred, gt);
    CHECK(s.per_class_dice[1] == doctest::Approx(0.5));
    CHECK(s.per_class_iou[1] == doctest::Approx(1.0 / 3.0));
    CHECK(s.dice == doctest::Approx(0.5));  // foreground scalar
    // dice = 2 iou / (1 + iou) consistency
    CHECK(s.per_class_dice[1] ==
          doctest::Approx(2.0 * s.per_class_iou[1] / (1.0 + s.per_class_iou[1])));
}

TEST_CASE("disjoint nonempty masks score zero") {
    std::vector<std::int32_t> pred(100, 0), gt(100, 0);
    for (int i = 0; i < 30; ++i) pred[std::size_t(i)] = 1;
    for (int i = 50; i < 80; ++i) gt[std::size_t(i)] = 1;
    OverlapScores s = overlap_scores(pred, gt);
    CHECK(s.dice == 0.0);
    CHECK(s.iou == 0.0);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
}

TEST_CASE("shape mismatch is rejected") {
    std::vector<std::int32_t> a(5, 0), b(6, 0);
    CHECK_THROWS_AS(overlap_scores(a, b), std::invalid_argument);
}

TEST_CASE("overlap matches the counting oracle on random masks") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 50 + rng.uniform_index(200);
        std::vector<std::int32_t> pred(n), gt(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = std::int32_t(rng.uniform_index(3));
            gt[i] = std::int32_t(rng.uniform_index(3));
        }
        OverlapScores s = overlap_scores(pred, gt);
        for (std::int32_t c : {1, 2}) {
            bool present = false;
            for (auto g : gt) present = present || g == c;
            if (!present) continue;
            test::BinaryCounts counts = test::count_binary(pred, gt, c);
            CHECK(s.per_class_dice[c] == doctest::Approx(counts.dice()).epsilon(1e-12));
            CHECK(s.per_class_iou[c] == doctest::Approx(counts.iou()).epsilon(1e-12));
            CHECK(s.per_class_precision[c] ==
                  doctest::Approx(counts.precision()).epsilon(1e-12));
            CHECK(s.per_class_recall[c] ==
                  doctest::Approx(counts.recall()).epsilon(1e-12));
        }
    }
}

TEST_CASE("identical clouds are at zero distance") {
    Rng rng(1);
    std::vector<Vec3> a;
    for (int i = 0; i < 60; ++i)
        a.push_back(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)));
    SurfaceDistances d = surface_distances(a, a);
    CHECK(d.assd == 0.0);
    CHECK(d.chamfer == 0.0);
    CHECK(d.hausdorff == 0.0);
}

TEST_CASE("two parallel dense planes at offset 1 mm") {
    std::vector<Vec3> a, b;
    for (int x = 0; x < 30; ++x)
        for (int y = 0; y < 30; ++y) {
            a.push_back(Vec3(x * 0.2, y * 0.2, 0.0));
            b.push_back(Vec3(x * 0.2, y * 0.2, 1.0));
        }
    SurfaceDistances d = surface_distances(a, b);
    CHECK(d.assd == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.chamfer == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.hausdorff == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single pair 3-4-5") {
    std::vector<Vec3> a{Vec3(0, 0, 0)}, b{Vec3(3, 4, 0)};
    SurfaceDistances d = surface_distances(a, b);
    CHECK(d.assd == doctest::Approx(5.0));
    CHECK(d.chamfer == doctest::Approx(5.0));
    CHECK(d.hausdorff == doctest::Approx(5.0));
}

TEST_CASE("empty clouds are rejected") {
    std::vector<Vec3> a{Vec3(0, 0, 0)}, empty;
    CHECK_THROWS_AS(surface_distances(a, empty), std::invalid_argument);
    CHECK_THROWS_AS(surface_distances(empty, a), std::invalid_argument);
}

TEST_CASE("kd-paths match the brute-force oracle within 1e-9") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t na = 1 + rng.uniform_index(500);
        std::size_t nb = 1 + rng.uniform_index(500);
        std::vector<Vec3> a(na), b(nb);
        for (auto& p : a)
            p = Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
        for (auto& p : b)
            p = Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
        SurfaceDistances fast = surface_distances(a, b);
        SurfaceDistances brute = test::surface_distances_brute(a, b);
        CHECK(std::abs(fast.assd - brute.assd) < 1e-9);
        CHECK(std::abs(fast.chamfer - brute.chamfer) < 1e-9);
        CHECK(std::abs(fast.hausdorff - brute.hausdorff) < 1e-9);
        // definitional invariants
        CHECK(fast.hausdorff >= fast.assd - 1e-12);
        SurfaceDistances swapped = surface_distances(b, a);
        CHECK(swapped.assd == doctest::Approx(fast.assd).epsilon(1e-12));
        CHECK(swapped.chamfer == doctest::Approx(fast.chamfer).epsilon(1e-12));
        CHECK(swapped.hausdorff == doctest::Approx(fast.hausdorff).epsilon(1e-12));
    }
}

TEST_CASE("rigid motion of both clouds leaves the distances unchanged") {
    Rng rng(5);
    std::vector<Vec3> a, b;
    for (int i = 0; i < 200; ++i) {
        a.push_back(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)));
        b.push_back(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)));
    }
    SurfaceDistances before = surface_distances(a, b);
    Mat3 r = rng.random_rotation(2.0);
    Vec3 t(4, 5, -6);
    for (auto& p : a) p = r * p + t;
    for (auto& p : b) p = r * p + t;
    SurfaceDistances after = surface_distances(a, b);
    CHECK(std::abs(after.assd - before.assd) < 1e-9);
    CHECK(std::abs(after.chamfer - before.chamfer) < 1e-9);
    CHECK(std::abs(after.hausdorff - before.hausdorff) < 1e-9);
}

TEST_CASE("mesh-to-mesh distances via dense sampling") {
    TriMesh a = test::icosphere(3, 2.0);
    TriMesh b = test::icosphere(3, 2.1);  // concentric, 0.1 apart
    SurfaceDistances d = surface_distances(a, b, 20.0);
    CHECK(d.assd == doctest::Approx(0.1).epsilon(0.15));
    CHECK(d.hausdorff < 0.2);
}

TEST_CASE("label accuracy counts equal entries") {
    std::vector<std::int32_t> a{1, 2, 3, 4}, b{1, 2, 0, 4};
    CHECK(label_accuracy(a, b) == doctest::Approx(0.75));
}
