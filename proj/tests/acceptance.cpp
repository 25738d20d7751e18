// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dentofuse/curvseg.hpp"
#include "dentofuse/losses.hpp"
#include "dentofuse/mesh_io.hpp"
#include "dentofuse/metrics.hpp"
#include "dentofuse/phantom.hpp"
#include "dentofuse/pipeline.hpp"
#include "dentofuse/reconstruct.hpp"
#include "dentofuse/registration.hpp"
#include "oracles.hpp"
#include "test_shapes.hpp"

using namespace dfuse;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool passed, const std::string& detail) {
    std::printf("%-28s %s  %s\n", name.c_str(), passed ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!passed) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// --- 1. registration success rate -----------------------------------------

void criterion_registration() {
    const int trials = 30;
    int successes = 0;
    double worst_seconds = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        auto t0 = Clock::now();
        PhantomConfig pcfg;
        pcfg.teeth_per_jaw = 8;
        // the recorded IOS displacement is the perturbation under test
        pcfg.ios_max_rotation_deg = 30.0;
        pcfg.ios_max_translation_mm = 20.0;
        PhantomScene scene = generate_phantom(1000 + std::uint64_t(trial), pcfg);

        TriMesh tooth = marching_cubes(scene.volume, kLabelTooth);
        TriMesh bone = marching_cubes(scene.volume, kLabelBone);
        tooth = hlo_smooth(tooth, 6, deg2rad(35.0));
        bone = hlo_smooth(bone, 6, deg2rad(35.0));
        double bite_z = scene.teeth.front().tip_center[2];
        auto upper_only = [&](const TriMesh& m) {
            std::vector<char> keep(m.vertices.size(), 0);
            for (std::size_t i = 0; i < m.vertices.size(); ++i)
                keep[i] = m.vertices[i][2] > bite_z - 0.05;
            return submesh_by_vertex_mask(m, keep);
        };
        PointCloud cbct =
            concat(mesh_to_cloud(upper_only(tooth)), mesh_to_cloud(upper_only(bone)));
        PointCloud ios = mesh_to_cloud(scene.gt_ios_mesh_upper);

        GlobalRegistrationConfig gcfg = GlobalRegistrationConfig::for_voxel(2.0);
        gcfg.seed = std::uint64_t(trial) * 31 + 7;
        RegistrationReport rep = global_register(ios, cbct, gcfg);
        if (rep.success)
            rep = multiscale_icp(ios, cbct, rep.transform, IcpConfig{});
        double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        worst_seconds = std::max(worst_seconds, seconds);

        const SimilarityTransform& gt = scene.gt_ios_to_cbct_upper;
        bool ok = rep.success &&
                  rad2deg(SimilarityTransform::rotation_error_rad(rep.transform, gt)) <
                      1.0 &&
                  SimilarityTransform::translation_error(rep.transform, gt) < 0.5 &&
                  seconds < 60.0;
        successes += ok;
    }
    double rate = double(successes) / double(trials);
    report("1_registration_success",
           rate >= 0.9,
           fmt(100.0 * rate) + "% of " + std::to_string(trials) +
               " trials, slowest " + fmt(worst_seconds) + " s");
}

// --- 2. jaw separation rate ------------------------------------------------

void criterion_jaw_split() {
    const int trials = 20;
    int correct = 0;
    for (int trial = 0; trial < trials; ++trial) {
        PhantomConfig pcfg;
        pcfg.teeth_per_jaw = 8;
        pcfg.bite_gap_mm = -0.2;  // contacted
        PhantomScene scene = generate_phantom(2000 + std::uint64_t(trial), pcfg);
        try {
            TriMesh tooth = marching_cubes(scene.volume, kLabelTooth);
            tooth = hlo_smooth(tooth, 10, deg2rad(35.0));
            ComponentLabeling comp = erosion_expansion_segment(tooth, ErosionConfig{});
            JawSplit split = split_jaws(comp, tooth, 0);
            double bite_z = scene.teeth.front().tip_center[2];
            bool all_ok = true;
            for (int c = 0; c < comp.count; ++c) {
                bool truth_upper = comp.gravity_centers[std::size_t(c)][2] > bite_z;
                all_ok = all_ok &&
                         ((split.component_jaw[std::size_t(c)] == 0) == truth_upper);
            }
            // both jaws must also have received teeth
            bool has_both = false, has_upper = false, has_lower = false;
            for (int j : split.component_jaw) {
                has_upper = has_upper || j == 0;
                has_lower = has_lower || j == 1;
            }
            has_both = has_upper && has_lower;
            correct += all_ok && has_both;
        } catch (const std::exception&) {
            // a failed split counts against the rate
        }
    }
    double rate = double(correct) / double(trials);
    report("2_jaw_separation", rate >= 0.9,
           fmt(100.0 * rate) + "% of " + std::to_string(trials) +
               " contacted-bite phantoms");
}

// --- 3. fusion fidelity ----------------------------------------------------

void criterion_fusion() {
    PhantomConfig pcfg;  // 0.25 mm voxels
    PhantomScene scene = generate_phantom(3000, pcfg);
    PipelineConfig cfg;
    cfg.seed = 5;
    PipelineResult result =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    if (!result.success || !result.upper.processed || !result.lower.processed) {
        report("3_fusion_fidelity", false, "pipeline failed");
        return;
    }
    auto measure = [](const TriMesh& fused, const PointCloud& gt) {
        PointCloud sampled = sample_surface(fused, 12.0, true);
        return surface_distances(sampled.points, gt.points);
    };
    SurfaceDistances up = measure(result.upper.fused, scene.gt_surface_upper);
    SurfaceDistances lo = measure(result.lower.fused, scene.gt_surface_lower);
    bool ok = up.assd <= 0.25 && up.chamfer <= 0.25 && up.hausdorff <= 0.5 &&
              lo.assd <= 0.25 && lo.chamfer <= 0.25 && lo.hausdorff <= 0.5;
    report("3_fusion_fidelity", ok,
           "upper ASSD/CD/HD " + fmt(up.assd) + "/" + fmt(up.chamfer) + "/" +
               fmt(up.hausdorff) + " mm, lower " + fmt(lo.assd) + "/" +
               fmt(lo.chamfer) + "/" + fmt(lo.hausdorff) + " mm");
}

// --- 4. metric oracle equivalence -------------------------------------------

void criterion_metric_oracles() {
    Rng rng(4040);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t na = 1 + rng.uniform_index(500);
        std::size_t nb = 1 + rng.uniform_index(500);
        std::vector<Vec3> a(na), b(nb);
        for (auto& p : a)
            p = Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
        for (auto& p : b)
            p = Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
        SurfaceDistances fast = surface_distances(a, b);
        SurfaceDistances brute = test::surface_distances_brute(a, b);
        worst = std::max({worst, std::abs(fast.assd - brute.assd),
                          std::abs(fast.chamfer - brute.chamfer),
                          std::abs(fast.hausdorff - brute.hausdorff)});
    }
    bool masks_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 20 + rng.uniform_index(300);
        std::vector<std::int32_t> pred(n), gt(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = std::int32_t(rng.uniform_index(3));
            gt[i] = std::int32_t(rng.uniform_index(3));
        }
        OverlapScores s = overlap_scores(pred, gt);
        for (std::int32_t c : {0, 1, 2}) {
            bool present = false;
            for (auto g : gt) present = present || g == c;
            if (!present) continue;
            test::BinaryCounts counts = test::count_binary(pred, gt, c);
            masks_ok = masks_ok && s.per_class_dice[c] == counts.dice() &&
                       s.per_class_iou[c] == counts.iou() &&
                       s.per_class_precision[c] == counts.precision() &&
                       s.per_class_recall[c] == counts.recall();
        }
    }
    report("4_metric_oracles", worst < 1e-9 && masks_ok,
           "distance max dev " + fmt(worst) + ", masks " +
               (masks_ok ? "exact" : "MISMATCH"));
}

// --- 5. loss correctness -----------------------------------------------------

void criterion_losses() {
    auto checks = run_loss_checks(5050);
    std::size_t passed = 0;
    std::string first_fail;
    for (const auto& c : checks) {
        passed += c.passed;
        if (!c.passed && first_fail.empty()) first_fail = c.name;
    }
    bool ok = passed == checks.size();
    report("5_loss_correctness", ok,
           std::to_string(passed) + "/" + std::to_string(checks.size()) +
               " checks" + (ok ? "" : ", first failure: " + first_fail));
}

// --- 6. geometry invariants ---------------------------------------------------

void criterion_geometry() {
    // watertightness on a solid contacted phantom
    PhantomScene scene = generate_phantom(6000, PhantomConfig{});
    TriMesh tooth = marching_cubes(scene.volume, kLabelTooth);
    TriMesh bone = marching_cubes(scene.volume, kLabelBone);
    bool watertight = is_watertight(tooth) && is_watertight(bone);

    // sphere area within 5%
    LabelVolume sphere;
    sphere.dims = {64, 64, 64};
    sphere.spacing = Vec3(0.25, 0.25, 0.25);
    sphere.labels.assign(sphere.voxel_count(), kLabelBackground);
    double c = 32.0, r = 8.0;
    for (std::size_t z = 0; z < 64; ++z)
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x) {
                double dx = double(x) + 0.5 - c, dy = double(y) + 0.5 - c,
                       dz = double(z) + 0.5 - c;
                if (dx * dx + dy * dy + dz * dz <= r * r)
                    sphere.at(x, y, z) = kLabelTooth;
            }
    TriMesh sm = marching_cubes(sphere, kLabelTooth);
    double analytic = 4.0 * kPi * 2.0 * 2.0;  // r = 2 mm
    double area_err = std::abs(surface_area(sm) - analytic) / analytic;

    // curvature rotation invariance
    TriMesh shape = test::dumbbell(1.0, 1.2, 0.35).mesh;
    CurvatureField before = point_curvature(shape, 2);
    Rng rng(61);
    TriMesh rotated = transformed(shape, 1.0, rng.random_rotation(2.0), Vec3(1, 2, 3));
    CurvatureField after = point_curvature(rotated, 2);
    double rot_dev = 0.0;
    for (std::size_t i = 0; i < before.values.size(); ++i)
        rot_dev = std::max(rot_dev, std::abs(before.values[i] - after.values[i]));

    // exact pi/4 dihedral case
    TriMesh fan;
    fan.vertices.push_back(Vec3(0, 0, 0));
    for (int i = 0; i < 6; ++i) {
        double a = kPi * i / 3.0;
        fan.vertices.push_back(Vec3(std::cos(a), std::sin(a), 0.0));
    }
    for (int i = 0; i < 6; ++i)
        fan.faces.push_back({0, std::uint32_t(1 + i), std::uint32_t(1 + (i + 1) % 6)});
    fan.vertex_normals = {Vec3(0, 0, 1), Vec3(0, 0, 1), Vec3(0, 0, 1), Vec3(0, 0, 1),
                          Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)};
    double dihedral_dev =
        std::abs(point_curvature(fan, 1).values[0] - kPi / 4.0);

    bool ok = watertight && area_err < 0.05 && rot_dev < 1e-9 && dihedral_dev < 1e-9;
    report("6_geometry_invariants", ok,
           std::string("watertight ") + (watertight ? "yes" : "NO") + ", area err " +
               fmt(100 * area_err) + "%, rot dev " + fmt(rot_dev) + ", dihedral dev " +
               fmt(dihedral_dev));
}

// --- 7. determinism -----------------------------------------------------------

void criterion_determinism() {
    PhantomScene scene = generate_phantom(7000, PhantomConfig{});
    auto dir = std::filesystem::temp_directory_path() / "dfuse_acceptance_ckpt";
    std::filesystem::remove_all(dir);

    PipelineConfig cfg;
    cfg.seed = 7;
    cfg.checkpoint = true;
    cfg.checkpoint_dir = dir;

    auto bytes = [](const TriMesh& m) {
        auto tmp = std::filesystem::temp_directory_path() / "dfuse_acc_bytes.msh";
        save_mesh(tmp, m);
        std::ifstream is(tmp, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };

    PipelineResult a =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    PipelineResult b =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    bool reruns_equal = a.success && b.success &&
                        bytes(a.upper.fused) == bytes(b.upper.fused) &&
                        bytes(a.lower.fused) == bytes(b.lower.fused) &&
                        pipeline_report_json(a, false) == pipeline_report_json(b, false);

    bool restart_equal = true;
    for (const std::string& stage : {"smooth", "split", "register"}) {
        PipelineConfig resume = cfg;
        resume.resume_from = stage;
        PipelineResult r = run_pipeline(scene.volume, scene.gt_ios_mesh_upper,
                                        scene.gt_ios_mesh_lower, resume);
        restart_equal = restart_equal && r.success &&
                        bytes(r.upper.fused) == bytes(a.upper.fused) &&
                        bytes(r.lower.fused) == bytes(a.lower.fused);
    }
    report("7_determinism", reruns_equal && restart_equal,
           std::string("reruns ") + (reruns_equal ? "identical" : "DIFFER") +
               ", restarts " + (restart_equal ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
    criterion_registration();
    criterion_jaw_split();
    criterion_fusion();
    criterion_metric_oracles();
    criterion_losses();
    criterion_geometry();
    criterion_determinism();
    if (failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
