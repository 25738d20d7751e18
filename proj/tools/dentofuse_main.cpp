// dentofuse: reconstruct tooth/bone surfaces from labeled CBCT-style
// volumes, separate contacted jaws, register intraoral-scan meshes and fuse
// the crowns into a crown-root-bone model.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

#include "dentofuse/curvseg.hpp"
#include "dentofuse/fuse.hpp"
#include "dentofuse/losses.hpp"
#include "dentofuse/mesh_io.hpp"
#include "dentofuse/metrics.hpp"
#include "dentofuse/parallel.hpp"
#include "dentofuse/phantom.hpp"
#include "dentofuse/pipeline.hpp"
#include "dentofuse/reconstruct.hpp"
#include "dentofuse/registration.hpp"
#include "dentofuse/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dfuse;

namespace {

json registration_json(const RegistrationReport& r) {
    json j;
    j["success"] = r.success;
    j["fitness"] = r.fitness;
    j["inlier_rmse"] = r.inlier_rmse;
    j["correspondence_count"] = r.correspondence_count;
    if (!r.message.empty()) j["message"] = r.message;
    json m = json::array();
    Mat4 t = r.transform.matrix();
    for (int row = 0; row < 4; ++row) {
        json rj = json::array();
        for (int col = 0; col < 4; ++col) rj.push_back(t(row, col));
        m.push_back(rj);
    }
    j["transform"] = m;
    return j;
}

int run_phantom(std::uint64_t seed, const PhantomConfig& cfg, const fs::path& out,
                bool as_json) {
    PhantomScene scene = generate_phantom(seed, cfg);
    fs::path volume = save_phantom(out, scene);
    json j;
    j["volume"] = volume.string();
    j["ios_upper"] = (out / "ios_upper.msh").string();
    j["ios_lower"] = (out / "ios_lower.msh").string();
    j["teeth"] = scene.teeth.size();
    j["dims"] = {scene.volume.dims[0], scene.volume.dims[1], scene.volume.dims[2]};
    if (as_json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << "phantom written to " << out.string() << " ("
                  << scene.teeth.size() << " teeth, volume "
                  << scene.volume.dims[0] << "x" << scene.volume.dims[1] << "x"
                  << scene.volume.dims[2] << ")\n";
    return 0;
}

int run_metrics(const fs::path& pred, const fs::path& gt, const std::string& mode,
                double density, bool as_json) {
    TriMesh a = load_mesh(pred);
    TriMesh b = load_mesh(gt);
    SurfaceDistances d = mode == "mesh" ? surface_distances(a, b, density)
                                        : surface_distances(mesh_to_cloud(a),
                                                            mesh_to_cloud(b));
    json j;
    j["assd_mm"] = d.assd;
    j["chamfer_mm"] = d.chamfer;
    j["hausdorff_mm"] = d.hausdorff;
    if (a.has_labels() && b.has_labels() && a.labels.size() == b.labels.size()) {
        OverlapScores s = overlap_scores(a.labels, b.labels);
        j["dice"] = s.dice;
        j["iou"] = s.iou;
        j["precision"] = s.precision;
        j["recall"] = s.recall;
        j["mean_iou"] = s.mean_iou;
        j["label_accuracy"] = label_accuracy(a.labels, b.labels);
    }
    if (as_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "ASSD,CD,HD\n"
                  << d.assd << "," << d.chamfer << "," << d.hausdorff << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dental label-volume and intraoral-scan fusion toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI file");

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = logical cores)")
        ->capture_default_str();

    bool print_config = false;
    app.add_flag("--print-config", print_config, "print effective options and exit");

    // ---- phantom ----
    auto* phantom_cmd = app.add_subcommand("phantom", "generate a synthetic dental scene");
    std::uint64_t phantom_seed = 0;
    fs::path phantom_out = "phantom";
    PhantomConfig phantom_cfg;
    bool phantom_json = false;
    phantom_cmd->add_option("--seed", phantom_seed, "rng seed")->capture_default_str();
    phantom_cmd->add_option("--out", phantom_out, "output directory")->capture_default_str();
    phantom_cmd->add_option("--teeth", phantom_cfg.teeth_per_jaw, "teeth per jaw [4,16]")
        ->capture_default_str();
    phantom_cmd->add_option("--voxel", phantom_cfg.voxel_mm, "voxel size mm [0.125,0.5]")
        ->capture_default_str();
    phantom_cmd->add_option("--bite-gap", phantom_cfg.bite_gap_mm,
                            "gap between arches mm (<=0 gives a contacted bite)")
        ->capture_default_str();
    phantom_cmd->add_flag("--json", phantom_json, "machine readable output");

    // ---- reconstruct ----
    auto* rec_cmd = app.add_subcommand("reconstruct", "marching-cubes surface of one label");
    fs::path rec_volume, rec_out = "surface.msh";
    std::string rec_label = "tooth";
    int rec_hlo_iters = 0;
    double rec_gate_deg = 35.0, rec_step = 0.5;
    bool rec_json = false;
    rec_cmd->add_option("--volume", rec_volume, "volume header file")->required();
    rec_cmd->add_option("--label", rec_label, "tooth|bone|0|1|2")->capture_default_str();
    rec_cmd->add_option("--out", rec_out, "output mesh path")->capture_default_str();
    rec_cmd->add_option("--smooth-iters", rec_hlo_iters, "half-kernel smoothing iterations")
        ->capture_default_str();
    rec_cmd->add_option("--normal-gate", rec_gate_deg, "smoothing normal gate, degrees")
        ->capture_default_str();
    rec_cmd->add_option("--smooth-step", rec_step, "smoothing step in (0,1]")
        ->capture_default_str();
    rec_cmd->add_flag("--json", rec_json, "machine readable output");

    // ---- curvseg ----
    auto* seg_cmd = app.add_subcommand("curvseg", "curvature segmentation and jaw split");
    fs::path seg_mesh;
    std::string seg_out_prefix = "segmented";
    ErosionConfig seg_cfg;
    std::uint64_t seg_seed = 0;
    bool seg_json = false, seg_split = true;
    seg_cmd->add_option("--mesh", seg_mesh, "input mesh")->required();
    seg_cmd->add_option("--order", seg_cfg.neighbor_order, "neighbor order l")
        ->capture_default_str();
    seg_cmd->add_option("--top-percent", seg_cfg.top_percent, "erosion percentile M")
        ->capture_default_str();
    seg_cmd->add_option("--min-component", seg_cfg.min_component_size,
                        "debris threshold, vertices")
        ->capture_default_str();
    seg_cmd->add_option("--out-prefix", seg_out_prefix, "output path prefix")
        ->capture_default_str();
    seg_cmd->add_option("--seed", seg_seed, "rng seed for the split plane")
        ->capture_default_str();
    seg_cmd->add_flag("--json", seg_json, "machine readable output");
    seg_cmd->add_flag("!--no-split", seg_split, "skip the jaw split");

    // ---- register ----
    auto* reg_cmd = app.add_subcommand("register", "two-stage registration src -> dst");
    fs::path reg_src, reg_dst, reg_out_transform;
    std::uint64_t reg_seed = 0;
    double reg_voxel = 2.0, reg_min_fitness = 0.25;
    bool reg_json = false, reg_skip_icp = false;
    reg_cmd->add_option("--src", reg_src, "source mesh (IOS)")->required();
    reg_cmd->add_option("--dst", reg_dst, "destination mesh (CBCT)")->required();
    reg_cmd->add_option("--out-transform", reg_out_transform, "write 4x4 transform here");
    reg_cmd->add_option("--seed", reg_seed, "rng seed")->capture_default_str();
    reg_cmd->add_option("--voxel", reg_voxel, "downsample voxel mm")->capture_default_str();
    reg_cmd->add_option("--min-fitness", reg_min_fitness, "failure threshold")
        ->capture_default_str();
    reg_cmd->add_flag("--skip-icp", reg_skip_icp, "global alignment only");
    reg_cmd->add_flag("--json", reg_json, "machine readable output");

    // ---- fuse ----
    auto* fuse_cmd = app.add_subcommand("fuse", "crown replacement fusion of two clouds");
    fs::path fuse_ios, fuse_cbct, fuse_out = "fused.msh";
    double fuse_fraction = 0.2;
    bool fuse_adaptive = true, fuse_json = false;
    double fuse_eps_factor = 3.0;
    int fuse_min_pts = 8;
    std::size_t fuse_min_cluster = 50;
    fuse_cmd->add_option("--ios", fuse_ios, "registered IOS mesh")->required();
    fuse_cmd->add_option("--cbct", fuse_cbct, "CBCT jaw mesh")->required();
    fuse_cmd->add_option("--out", fuse_out, "output mesh")->capture_default_str();
    fuse_cmd->add_option("--removal-fraction", fuse_fraction, "crown removal share")
        ->capture_default_str();
    fuse_cmd->add_flag("--adaptive,!--no-adaptive", fuse_adaptive,
                       "valley cut on the distance histogram");
    fuse_cmd->add_option("--dbscan-eps-factor", fuse_eps_factor, "eps as x median spacing")
        ->capture_default_str();
    fuse_cmd->add_option("--dbscan-min-pts", fuse_min_pts, "core point threshold")
        ->capture_default_str();
    fuse_cmd->add_option("--dbscan-min-cluster", fuse_min_cluster,
                         "smallest surviving cluster")
        ->capture_default_str();
    fuse_cmd->add_flag("--json", fuse_json, "machine readable output");

    // ---- metrics ----
    auto* met_cmd = app.add_subcommand("metrics", "overlap and surface-distance metrics");
    fs::path met_pred, met_gt;
    std::string met_mode = "cloud";
    double met_density = 10.0;
    bool met_json = false;
    met_cmd->add_option("--pred", met_pred, "prediction mesh")->required();
    met_cmd->add_option("--gt", met_gt, "ground truth mesh")->required();
    met_cmd->add_option("--mode", met_mode, "cloud|mesh (mesh = dense sampling)")
        ->capture_default_str();
    met_cmd->add_option("--density", met_density, "samples per mm^2 in mesh mode")
        ->capture_default_str();
    met_cmd->add_flag("--json", met_json, "machine readable output");

    // ---- losses-check ----
    auto* loss_cmd = app.add_subcommand("losses-check",
                                        "oracle and gradient checks for the loss module");
    std::uint64_t loss_seed = 0;
    bool loss_json = false;
    loss_cmd->add_option("--seed", loss_seed, "rng seed")->capture_default_str();
    loss_cmd->add_flag("--json", loss_json, "machine readable output");

    // ---- pipeline ----
    auto* pipe_cmd = app.add_subcommand("pipeline", "end-to-end fusion pipeline");
    fs::path pipe_volume, pipe_ios_upper, pipe_ios_lower, pipe_out = "pipeline_out";
    PipelineConfig pipe_cfg;
    bool pipe_json = false;
    pipe_cmd->add_option("--volume", pipe_volume, "volume header file")->required();
    pipe_cmd->add_option("--ios-upper", pipe_ios_upper, "upper jaw IOS mesh");
    pipe_cmd->add_option("--ios-lower", pipe_ios_lower, "lower jaw IOS mesh");
    pipe_cmd->add_option("--out", pipe_out, "output directory")->capture_default_str();
    pipe_cmd->add_option("--seed", pipe_cfg.seed, "rng seed")->capture_default_str();
    pipe_cmd->add_option("--top-percent", pipe_cfg.erosion.top_percent,
                         "erosion percentile M")
        ->capture_default_str();
    pipe_cmd->add_option("--order", pipe_cfg.erosion.neighbor_order, "neighbor order l")
        ->capture_default_str();
    pipe_cmd->add_option("--hlo-iters", pipe_cfg.hlo_iterations, "smoothing iterations")
        ->capture_default_str();
    bool pipe_checkpoint = false;
    std::string pipe_resume;
    pipe_cmd->add_flag("--checkpoint", pipe_checkpoint, "write stage artifacts");
    pipe_cmd->add_option("--resume-from", pipe_resume,
                         "restart from a checkpointed stage");
    pipe_cmd->add_flag("--json", pipe_json, "print the report to stdout");

    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);

    if (print_config) {
        std::cout << app.config_to_str(true, true);
        return 0;
    }

    try {
        if (app.got_subcommand(phantom_cmd))
            return run_phantom(phantom_seed, phantom_cfg, phantom_out, phantom_json);

        if (app.got_subcommand(rec_cmd)) {
            LabelVolume v = load_volume(rec_volume);
            std::uint8_t label = kLabelTooth;
            if (rec_label == "tooth" || rec_label == "1") label = kLabelTooth;
            else if (rec_label == "bone" || rec_label == "2") label = kLabelBone;
            else if (rec_label == "0" || rec_label == "background") label = kLabelBackground;
            else throw std::invalid_argument("unknown label " + rec_label);
            TriMesh m = marching_cubes(v, label);
            if (rec_hlo_iters > 0)
                m = hlo_smooth(m, rec_hlo_iters, deg2rad(rec_gate_deg), rec_step);
            save_mesh(rec_out, m);
            json j;
            j["vertices"] = m.vertices.size();
            j["faces"] = m.faces.size();
            j["watertight"] = is_watertight(m);
            j["out"] = rec_out.string();
            if (rec_json) std::cout << j.dump(2) << "\n";
            else
                std::cout << "wrote " << rec_out.string() << ": " << m.vertices.size()
                          << " vertices, " << m.faces.size() << " faces\n";
            return 0;
        }

        if (app.got_subcommand(seg_cmd)) {
            TriMesh m = load_mesh(seg_mesh);
            ComponentLabeling comp = erosion_expansion_segment(m, seg_cfg);
            TriMesh labeled = m;
            labeled.labels.assign(comp.component_of.begin(), comp.component_of.end());
            fs::path mesh_out = seg_out_prefix + "_components.msh";
            save_mesh(mesh_out, labeled);
            json j;
            j["component_count"] = comp.count;
            json centers = json::array();
            for (const auto& c : comp.gravity_centers)
                centers.push_back({c[0], c[1], c[2]});
            j["gravity_centers"] = centers;
            j["sizes"] = comp.sizes;
            j["components_mesh"] = mesh_out.string();
            if (seg_split && comp.count >= 2) {
                JawSplit split = split_jaws(comp, m, seg_seed);
                save_mesh(seg_out_prefix + "_upper.msh", split.upper);
                save_mesh(seg_out_prefix + "_lower.msh", split.lower);
                j["jaw_assignment"] = split.component_jaw;
                j["split_margin"] = split.margin;
                j["upper_mesh"] = seg_out_prefix + "_upper.msh";
                j["lower_mesh"] = seg_out_prefix + "_lower.msh";
            }
            if (seg_json) std::cout << j.dump(2) << "\n";
            else
                std::cout << comp.count << " components written to " << mesh_out.string()
                          << "\n";
            return 0;
        }

        if (app.got_subcommand(reg_cmd)) {
            TriMesh src = load_mesh(reg_src);
            TriMesh dst = load_mesh(reg_dst);
            PointCloud src_cloud = mesh_to_cloud(src);
            PointCloud dst_cloud = mesh_to_cloud(dst);
            GlobalRegistrationConfig gcfg = GlobalRegistrationConfig::for_voxel(reg_voxel);
            gcfg.seed = reg_seed;
            gcfg.min_fitness = reg_min_fitness;
            RegistrationReport rep = global_register(src_cloud, dst_cloud, gcfg);
            if (rep.success && !reg_skip_icp)
                rep = multiscale_icp(src_cloud, dst_cloud, rep.transform, IcpConfig{});
            if (reg_json) std::cout << registration_json(rep).dump(2) << "\n";
            else
                std::cout << (rep.success ? "registered" : "FAILED") << " fitness "
                          << rep.fitness << " rmse " << rep.inlier_rmse << " mm\n";
            if (!reg_out_transform.empty())
                save_transform(reg_out_transform, rep.transform.matrix());
            return rep.success ? 0 : 1;
        }

        if (app.got_subcommand(fuse_cmd)) {
            PointCloud ios = mesh_to_cloud(load_mesh(fuse_ios));
            PointCloud cbct = mesh_to_cloud(load_mesh(fuse_cbct));
            CrownRemovalResult removal =
                fuse_adaptive ? remove_cbct_crown_adaptive(cbct, ios, fuse_fraction)
                              : remove_cbct_crown(cbct, ios, fuse_fraction);
            double spacing = median_nn_spacing(removal.residual);
            PointCloud residual = removal.residual;
            std::size_t dbscan_removed = 0;
            if (spacing > 0.0) {
                residual = dbscan_cleanup(removal.residual, fuse_eps_factor * spacing,
                                          fuse_min_pts, fuse_min_cluster);
                dbscan_removed = removal.residual.size() - residual.size();
            }
            TriMesh fused = fuse_and_reconstruct(ios, residual, FuseConfig{});
            save_mesh(fuse_out, fused);
            json j;
            j["removed_points"] = removal.removed_count;
            j["dbscan_removed"] = dbscan_removed;
            j["residual_points"] = residual.size();
            j["adaptive_cut"] = removal.adaptive_cut;
            j["cut_distance_mm"] = removal.cut_distance;
            j["fused_vertices"] = fused.vertices.size();
            j["fused_faces"] = fused.faces.size();
            j["out"] = fuse_out.string();
            if (fuse_json) std::cout << j.dump(2) << "\n";
            else std::cout << "fused mesh written to " << fuse_out.string() << "\n";
            return 0;
        }

        if (app.got_subcommand(met_cmd))
            return run_metrics(met_pred, met_gt, met_mode, met_density, met_json);

        if (app.got_subcommand(loss_cmd)) {
            auto checks = run_loss_checks(loss_seed);
            bool all = true;
            json entries = json::array();
            for (const auto& c : checks) {
                all = all && c.passed;
                entries.push_back({{"name", c.name}, {"passed", c.passed},
                                   {"detail", c.detail}});
                if (!loss_json)
                    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "\n";
            }
            if (loss_json) {
                json j;
                j["all_passed"] = all;
                j["checks"] = entries;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << (all ? "all checks passed" : "SOME CHECKS FAILED") << "\n";
            }
            return all ? 0 : 1;
        }

        if (app.got_subcommand(pipe_cmd)) {
            fs::create_directories(pipe_out);
            pipe_cfg.checkpoint = pipe_checkpoint;
            pipe_cfg.checkpoint_dir = pipe_out / "checkpoints";
            pipe_cfg.resume_from = pipe_resume;
            PipelineResult result =
                run_pipeline(pipe_volume, pipe_ios_upper, pipe_ios_lower, pipe_cfg);
            if (result.upper.processed)
                save_mesh(pipe_out / "fused_upper.msh", result.upper.fused);
            if (result.lower.processed)
                save_mesh(pipe_out / "fused_lower.msh", result.lower.fused);
            std::string report = pipeline_report_json(result, true);
            {
                std::ofstream os(pipe_out / "report.json");
                os << report << "\n";
            }
            std::ofstream det(pipe_out / "report_deterministic.json");
            det << pipeline_report_json(result, false) << "\n";
            if (pipe_json) std::cout << report << "\n";
            else
                std::cout << (result.success ? "pipeline complete" : "pipeline FAILED")
                          << "; report at " << (pipe_out / "report.json").string() << "\n";
            return result.success ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
