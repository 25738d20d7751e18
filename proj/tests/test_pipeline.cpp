#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/metrics.hpp"
#include "dentofuse/mesh_io.hpp"
#include "dentofuse/phantom.hpp"
#include "dentofuse/pipeline.hpp"

using namespace dfuse;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

SurfaceDistances fused_vs_gt(const TriMesh& fused, const PointCloud& gt) {
    PointCloud sampled = sample_surface(fused, 12.0, true);
    return surface_distances(sampled.points, gt.points);
}

std::string mesh_bytes(const TriMesh& m) {
    auto tmp = std::filesystem::temp_directory_path() / "dfuse_bytes.msh";
    save_mesh(tmp, m);
    std::ifstream is(tmp, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("phantom end-to-end pipeline meets the fusion error budget") {
    PhantomConfig pcfg;  // 0.25 mm voxels, contacted bite
    PhantomScene scene = generate_phantom(100, pcfg);
    PipelineConfig cfg;
    cfg.seed = 1;
    PipelineResult result =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    REQUIRE(result.success);
    for (const auto& s : result.stages) {
        INFO(s.name, ": ", s.message);
        CHECK(s.success);
    }
    REQUIRE(result.upper.processed);
    REQUIRE(result.lower.processed);

    SurfaceDistances up = fused_vs_gt(result.upper.fused, scene.gt_surface_upper);
    SurfaceDistances lo = fused_vs_gt(result.lower.fused, scene.gt_surface_lower);
    INFO("upper assd=", up.assd, " cd=", up.chamfer, " hd=", up.hausdorff);
    INFO("lower assd=", lo.assd, " cd=", lo.chamfer, " hd=", lo.hausdorff);
    CHECK(up.assd <= 0.25);
    CHECK(up.chamfer <= 0.25);
    CHECK(lo.assd <= 0.25);
    CHECK(lo.chamfer <= 0.25);
    CHECK(up.hausdorff <= 0.5);
    CHECK(lo.hausdorff <= 0.5);

    // crown region carries only ios-provenance vertices: fused vertices
    // within half a voxel of the true crown surface must be ios-tagged
    PointCloud crown = mesh_to_cloud(scene.gt_crown_mesh_upper);
    KdTree3 crown_tree(crown.points);
    for (std::size_t i = 0; i < result.upper.fused.vertices.size(); ++i) {
        double sq = 0.0;
        crown_tree.nearest(result.upper.fused.vertices[i], &sq);
        if (sq < 0.125 * 0.125)
            CHECK(result.upper.fused.provenance[i] == std::uint8_t(Provenance::ios));
    }

    // FDI inheritance found real codes for most upper components
    std::size_t coded = 0;
    for (auto [comp, fdi] : result.upper.component_fdi) coded += fdi >= 11;
    CHECK(coded >= 6);
}

TEST_CASE("missing lower IOS skips that jaw but processes the upper") {
    PhantomScene scene = generate_phantom(101, PhantomConfig{});
    PipelineConfig cfg;
    cfg.seed = 2;
    PipelineResult result =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, std::nullopt, cfg);
    REQUIRE(result.success);
    CHECK(result.upper.processed);
    CHECK_FALSE(result.lower.processed);
    CHECK(result.lower.skip_reason == "missing IOS mesh");
    std::string report = pipeline_report_json(result, true);
    CHECK(report.find("missing IOS mesh") != std::string::npos);
}

TEST_CASE("fixed seeds give byte-identical fused meshes and reports") {
    PhantomScene scene = generate_phantom(102, PhantomConfig{});
    PipelineConfig cfg;
    cfg.seed = 3;
    PipelineResult a =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    PipelineResult b =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    REQUIRE(a.success);
    REQUIRE(b.success);
    CHECK(mesh_bytes(a.upper.fused) == mesh_bytes(b.upper.fused));
    CHECK(mesh_bytes(a.lower.fused) == mesh_bytes(b.lower.fused));
    CHECK(pipeline_report_json(a, false) == pipeline_report_json(b, false));
}

TEST_CASE("checkpoint restart reproduces downstream outputs byte-identically") {
    PhantomScene scene = generate_phantom(103, PhantomConfig{});
    auto dir = fresh_dir("dfuse_ckpt_test");
    PipelineConfig cfg;
    cfg.seed = 4;
    cfg.checkpoint = true;
    cfg.checkpoint_dir = dir;
    PipelineResult full =
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, scene.gt_ios_mesh_lower, cfg);
    REQUIRE(full.success);

    for (const std::string& stage : {"segment", "split", "register"}) {
        PipelineConfig resume = cfg;
        resume.resume_from = stage;
        PipelineResult again = run_pipeline(scene.volume, scene.gt_ios_mesh_upper,
                                            scene.gt_ios_mesh_lower, resume);
        REQUIRE(again.success);
        CHECK(mesh_bytes(again.upper.fused) == mesh_bytes(full.upper.fused));
        CHECK(mesh_bytes(again.lower.fused) == mesh_bytes(full.lower.fused));
    }
}

TEST_CASE("stage failure surfaces the stage name") {
    LabelVolume empty;
    empty.dims = {8, 8, 8};
    empty.spacing = Vec3(0.25, 0.25, 0.25);
    empty.labels.assign(empty.voxel_count(), kLabelBackground);
    PipelineResult result = run_pipeline(empty, std::nullopt, std::nullopt, PipelineConfig{});
    CHECK_FALSE(result.success);
    REQUIRE(!result.stages.empty());
    CHECK(result.stages.back().name == "reconstruct");
    CHECK_FALSE(result.stages.back().success);
    CHECK(!result.stages.back().message.empty());
}

TEST_CASE("unknown resume stage is rejected") {
    PhantomScene scene = generate_phantom(104, PhantomConfig{});
    PipelineConfig cfg;
    cfg.resume_from = "bogus";
    CHECK_THROWS_AS(
        run_pipeline(scene.volume, scene.gt_ios_mesh_upper, std::nullopt, cfg),
        std::invalid_argument);
}
