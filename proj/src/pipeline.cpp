#include "dentofuse/pipeline.hpp"

#include <chrono>
#include <future>
#include <stdexcept>

#include <json.hpp>

#include "dentofuse/kdtree.hpp"
#include "dentofuse/mesh_io.hpp"
#include "dentofuse/reconstruct.hpp"

namespace dfuse {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Context {
    const PipelineConfig* cfg = nullptr;
    const LabelVolume* volume = nullptr;
    std::optional<TriMesh> ios_upper, ios_lower;

    TriMesh tooth_mc, bone_mc;
    TriMesh tooth_smooth, bone_smooth;
    ComponentLabeling components;
    JawSplit split;
    TriMesh bone_upper, bone_lower;
};

std::filesystem::path ck(const Context& ctx, const std::string& name) {
    return ctx.cfg->checkpoint_dir / name;
}

void save_stage(const Context& ctx, const std::string& stage) {
    if (!ctx.cfg->checkpoint) return;
    std::filesystem::create_directories(ctx.cfg->checkpoint_dir);
    if (stage == "reconstruct") {
        save_mesh(ck(ctx, "tooth_mc.msh"), ctx.tooth_mc);
        save_mesh(ck(ctx, "bone_mc.msh"), ctx.bone_mc);
    } else if (stage == "smooth") {
        save_mesh(ck(ctx, "tooth_smooth.msh"), ctx.tooth_smooth);
        save_mesh(ck(ctx, "bone_smooth.msh"), ctx.bone_smooth);
    } else if (stage == "segment") {
        TriMesh labeled = ctx.tooth_smooth;
        labeled.labels.assign(ctx.components.component_of.begin(),
                              ctx.components.component_of.end());
        save_mesh(ck(ctx, "tooth_components.msh"), labeled);
    } else if (stage == "split") {
        save_mesh(ck(ctx, "tooth_upper.msh"), ctx.split.upper);
        save_mesh(ck(ctx, "tooth_lower.msh"), ctx.split.lower);
        save_mesh(ck(ctx, "bone_upper.msh"), ctx.bone_upper);
        save_mesh(ck(ctx, "bone_lower.msh"), ctx.bone_lower);
    }
}

void load_stage(Context& ctx, const std::string& stage) {
    if (stage == "reconstruct") {
        ctx.tooth_mc = load_mesh(ck(ctx, "tooth_mc.msh"));
        ctx.bone_mc = load_mesh(ck(ctx, "bone_mc.msh"));
    } else if (stage == "smooth") {
        ctx.tooth_smooth = load_mesh(ck(ctx, "tooth_smooth.msh"));
        ctx.bone_smooth = load_mesh(ck(ctx, "bone_smooth.msh"));
    } else if (stage == "segment") {
        TriMesh labeled = load_mesh(ck(ctx, "tooth_components.msh"));
        ctx.components.component_of.assign(labeled.labels.begin(), labeled.labels.end());
        int count = 0;
        for (int c : ctx.components.component_of) count = std::max(count, c + 1);
        ctx.components.count = count;
        ctx.components.sizes.assign(std::size_t(count), 0);
        ctx.components.gravity_centers.assign(std::size_t(count), Vec3::Zero());
        for (std::size_t v = 0; v < labeled.vertices.size(); ++v) {
            int c = ctx.components.component_of[v];
            ctx.components.sizes[std::size_t(c)]++;
            ctx.components.gravity_centers[std::size_t(c)] += labeled.vertices[v];
        }
        for (int c = 0; c < count; ++c)
            ctx.components.gravity_centers[std::size_t(c)] /=
                double(ctx.components.sizes[std::size_t(c)]);
    } else if (stage == "split") {
        ctx.split.upper = load_mesh(ck(ctx, "tooth_upper.msh"));
        ctx.split.lower = load_mesh(ck(ctx, "tooth_lower.msh"));
        ctx.bone_upper = load_mesh(ck(ctx, "bone_upper.msh"));
        ctx.bone_lower = load_mesh(ck(ctx, "bone_lower.msh"));
    }
}

/// CBCT half-jaw cloud: tooth points labeled with their component id, bone
/// points labeled -1.
PointCloud jaw_cloud(const TriMesh& tooth_jaw, const TriMesh& bone_jaw) {
    PointCloud teeth = mesh_to_cloud(tooth_jaw);
    // tooth component ids already live in the labels
    PointCloud bone = mesh_to_cloud(bone_jaw);
    bone.labels.assign(bone.size(), -1);
    return concat(teeth, bone);
}

JawResult process_jaw(const Context& ctx, int jaw) {
    const PipelineConfig& cfg = *ctx.cfg;
    JawResult result;
    const std::optional<TriMesh>& ios_in = jaw == 0 ? ctx.ios_upper : ctx.ios_lower;
    if (!ios_in.has_value()) {
        result.skip_reason = "missing IOS mesh";
        return result;
    }
    const TriMesh& tooth_jaw = jaw == 0 ? ctx.split.upper : ctx.split.lower;
    const TriMesh& bone_jaw = jaw == 0 ? ctx.bone_upper : ctx.bone_lower;
    if (tooth_jaw.vertices.empty()) {
        result.skip_reason = "no tooth surface on this jaw";
        return result;
    }

    TriMesh ios_mm = scale_align(*ios_in, ctx.volume->spacing);
    PointCloud ios_cloud = mesh_to_cloud(ios_mm);
    PointCloud cbct_cloud = jaw_cloud(tooth_jaw, bone_jaw);

    GlobalRegistrationConfig gcfg = GlobalRegistrationConfig::for_voxel(cfg.global_voxel);
    gcfg.min_fitness = cfg.global_min_fitness;
    gcfg.seed = cfg.seed ^ (jaw == 0 ? 0x5eedu : 0xfeedu);
    result.global_report = global_register(ios_cloud, cbct_cloud, gcfg);
    if (!result.global_report.success) return result;

    result.icp_report =
        multiscale_icp(ios_cloud, cbct_cloud, result.global_report.transform, cfg.icp);
    if (!result.icp_report.success) return result;
    const SimilarityTransform& t = result.icp_report.transform;

    PointCloud ios_reg = transformed(ios_cloud, t.scale, t.rotation, t.translation);

    CrownRemovalResult removal =
        cfg.adaptive_removal
            ? remove_cbct_crown_adaptive(cbct_cloud, ios_reg, cfg.removal_fraction)
            : remove_cbct_crown(cbct_cloud, ios_reg, cfg.removal_fraction);
    result.removed_points = removal.removed_count;
    result.adaptive_cut = removal.adaptive_cut;

    double spacing = median_nn_spacing(removal.residual);
    PointCloud residual = removal.residual;
    if (spacing > 0.0) {
        residual = dbscan_cleanup(removal.residual, cfg.dbscan_eps_factor * spacing,
                                  cfg.dbscan_min_pts, cfg.dbscan_min_cluster);
    }
    result.dbscan_removed = removal.residual.size() - residual.size();
    result.residual_points = residual.size();

    // FDI inheritance: removed tooth points vote with the code of their
    // nearest IOS point; each component takes the majority code
    if (ios_reg.has_labels()) {
        KdTree3 ios_tree(ios_reg.points);
        KdTree3 res_tree(residual.points);
        std::map<int, std::map<int, int>> votes;  // component -> fdi -> count
        for (std::size_t i = 0; i < cbct_cloud.size(); ++i) {
            if (!cbct_cloud.has_labels() || cbct_cloud.labels[i] < 0) continue;
            // removed = not present in the residual cloud
            double sq = 1.0;
            if (!residual.empty()) {
                std::size_t j = res_tree.nearest(cbct_cloud.points[i], &sq);
                if (sq < 1e-20 && residual.points[j] == cbct_cloud.points[i]) continue;
            }
            std::size_t nearest_ios = ios_tree.nearest(cbct_cloud.points[i]);
            votes[cbct_cloud.labels[i]][ios_reg.labels[nearest_ios]]++;
        }
        for (const auto& [comp, tally] : votes) {
            int best_fdi = 0, best_count = 0;
            bool tie = false;
            for (const auto& [fdi, count] : tally) {
                if (count > best_count) {
                    best_count = count;
                    best_fdi = fdi;
                    tie = false;
                } else if (count == best_count) {
                    tie = true;
                }
            }
            result.component_fdi[comp] = tie ? 0 : best_fdi;
        }
        for (std::size_t i = 0; i < residual.size(); ++i) {
            int comp = residual.labels[i];
            auto it = result.component_fdi.find(comp);
            residual.labels[i] = comp >= 0 && it != result.component_fdi.end()
                                     ? it->second
                                     : 0;
        }
    }

    result.fused = fuse_and_reconstruct(ios_reg, residual, cfg.fuse);
    result.processed = true;
    return result;
}

}  // namespace

const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names{"reconstruct", "smooth", "segment",
                                                "split",       "register", "fuse"};
    return names;
}

PipelineResult run_pipeline(const LabelVolume& volume,
                            const std::optional<TriMesh>& ios_upper,
                            const std::optional<TriMesh>& ios_lower,
                            const PipelineConfig& config) {
    PipelineResult result;
    Context ctx;
    ctx.cfg = &config;
    ctx.volume = &volume;
    ctx.ios_upper = ios_upper;
    ctx.ios_lower = ios_lower;

    const auto& stages = pipeline_stage_names();
    std::size_t start_index = 0;
    if (!config.resume_from.empty()) {
        auto it = std::find(stages.begin(), stages.end(), config.resume_from);
        if (it == stages.end())
            throw std::invalid_argument("unknown pipeline stage: " + config.resume_from);
        start_index = std::size_t(it - stages.begin());
        for (std::size_t s = 0; s < start_index; ++s) {
            load_stage(ctx, stages[s]);
            StageReport sr;
            sr.name = stages[s];
            sr.success = true;
            sr.skipped = true;
            sr.message = "restored from checkpoint";
            result.stages.push_back(sr);
        }
    }

    auto run_stage = [&](const std::string& name, auto&& body) {
        StageReport sr;
        sr.name = name;
        auto start = Clock::now();
        try {
            body();
            sr.success = true;
        } catch (const std::exception& e) {
            sr.success = false;
            sr.message = e.what();
        }
        sr.seconds = seconds_since(start);
        result.stages.push_back(sr);
        if (sr.success) save_stage(ctx, name);
        return sr.success;
    };

    for (std::size_t s = start_index; s < stages.size(); ++s) {
        const std::string& stage = stages[s];
        bool ok = true;
        if (stage == "reconstruct") {
            ok = run_stage(stage, [&] {
                ctx.tooth_mc = marching_cubes(volume, kLabelTooth);
                ctx.bone_mc = marching_cubes(volume, kLabelBone);
                if (ctx.tooth_mc.empty())
                    throw std::runtime_error("no tooth surface in volume");
            });
        } else if (stage == "smooth") {
            ok = run_stage(stage, [&] {
                double gate = deg2rad(config.hlo_gate_deg);
                ctx.tooth_smooth =
                    hlo_smooth(ctx.tooth_mc, config.hlo_iterations, gate, config.hlo_step);
                ctx.bone_smooth =
                    ctx.bone_mc.empty()
                        ? ctx.bone_mc
                        : hlo_smooth(ctx.bone_mc, config.hlo_iterations, gate,
                                     config.hlo_step);
            });
        } else if (stage == "segment") {
            ok = run_stage(stage, [&] {
                ctx.components = erosion_expansion_segment(ctx.tooth_smooth, config.erosion);
                result.component_count = ctx.components.count;
            });
        } else if (stage == "split") {
            ok = run_stage(stage, [&] {
                // tooth mesh labels carry component ids downstream
                ctx.tooth_smooth.labels.assign(ctx.components.component_of.begin(),
                                               ctx.components.component_of.end());
                ctx.split = split_jaws(ctx.components, ctx.tooth_smooth, config.seed,
                                       config.plane_iterations);
                result.component_jaw = ctx.split.component_jaw;
                result.split_margin = ctx.split.margin;
                if (ctx.bone_smooth.empty()) {
                    ctx.bone_upper = ctx.bone_smooth;
                    ctx.bone_lower = ctx.bone_smooth;
                } else {
                    auto [up, lo] = assign_to_jaws(ctx.bone_smooth, ctx.tooth_smooth,
                                                   ctx.components, ctx.split.component_jaw);
                    ctx.bone_upper = up;
                    ctx.bone_lower = lo;
                }
            });
        } else if (stage == "register" || stage == "fuse") {
            // the two jaws run in parallel through registration + fusion;
            // stage boundaries are kept for reporting and checkpointing
            if (stage == "register") {
                ok = run_stage("register_and_fuse", [&] {
                    auto up = std::async(std::launch::async,
                                         [&] { return process_jaw(ctx, 0); });
                    auto lo = std::async(std::launch::async,
                                         [&] { return process_jaw(ctx, 1); });
                    result.upper = up.get();
                    result.lower = lo.get();
                    bool upper_ok = result.upper.processed || !ctx.ios_upper.has_value();
                    bool lower_ok = result.lower.processed || !ctx.ios_lower.has_value();
                    if (!upper_ok || !lower_ok) {
                        std::string why;
                        if (!upper_ok)
                            why += "upper: " + (result.upper.global_report.success
                                                    ? result.upper.icp_report.message
                                                    : result.upper.global_report.message);
                        if (!lower_ok)
                            why += (why.empty() ? "" : "; ") +
                                   std::string("lower: ") +
                                   (result.lower.global_report.success
                                        ? result.lower.icp_report.message
                                        : result.lower.global_report.message);
                        throw std::runtime_error("registration failed: " + why);
                    }
                    if (config.checkpoint) {
                        std::filesystem::create_directories(config.checkpoint_dir);
                        if (result.upper.processed)
                            save_mesh(config.checkpoint_dir / "fused_upper.msh",
                                      result.upper.fused);
                        if (result.lower.processed)
                            save_mesh(config.checkpoint_dir / "fused_lower.msh",
                                      result.lower.fused);
                    }
                });
                if (!ok) break;
            }
            continue;
        }
        if (!ok) break;
    }

    result.success = !result.stages.empty() &&
                     std::all_of(result.stages.begin(), result.stages.end(),
                                 [](const StageReport& s) { return s.success; });
    return result;
}

PipelineResult run_pipeline(const std::filesystem::path& volume_path,
                            const std::filesystem::path& ios_upper_path,
                            const std::filesystem::path& ios_lower_path,
                            const PipelineConfig& config) {
    LabelVolume volume = load_volume(volume_path);
    std::optional<TriMesh> upper, lower;
    if (!ios_upper_path.empty()) upper = load_mesh(ios_upper_path);
    if (!ios_lower_path.empty()) lower = load_mesh(ios_lower_path);
    return run_pipeline(volume, upper, lower, config);
}

std::string pipeline_report_json(const PipelineResult& result, bool include_timing) {
    using nlohmann::json;
    json j;
    j["schema_version"] = 1;
    j["success"] = result.success;
    json stages = json::array();
    for (const auto& s : result.stages) {
        json e;
        e["name"] = s.name;
        e["success"] = s.success;
        e["skipped"] = s.skipped;
        e["seconds"] = include_timing ? s.seconds : 0.0;
        if (!s.message.empty()) e["message"] = s.message;
        stages.push_back(e);
    }
    j["stages"] = stages;
    j["segmentation"] = {{"component_count", result.component_count},
                         {"component_jaw", result.component_jaw},
                         {"split_margin", result.split_margin}};
    auto jaw_json = [&](const JawResult& r) {
        json e;
        e["processed"] = r.processed;
        if (!r.skip_reason.empty()) e["skip_reason"] = r.skip_reason;
        auto reg_json = [](const RegistrationReport& rep) {
            json g;
            g["success"] = rep.success;
            g["fitness"] = rep.fitness;
            g["inlier_rmse"] = rep.inlier_rmse;
            g["correspondence_count"] = rep.correspondence_count;
            if (!rep.message.empty()) g["message"] = rep.message;
            return g;
        };
        e["global"] = reg_json(r.global_report);
        e["icp"] = reg_json(r.icp_report);
        e["removed_points"] = r.removed_points;
        e["residual_points"] = r.residual_points;
        e["dbscan_removed"] = r.dbscan_removed;
        e["adaptive_cut"] = r.adaptive_cut;
        json fdi = json::object();
        for (const auto& [comp, code] : r.component_fdi)
            fdi[std::to_string(comp)] = code;
        e["component_fdi"] = fdi;
        e["fused_vertices"] = r.fused.vertices.size();
        e["fused_faces"] = r.fused.faces.size();
        return e;
    };
    j["upper"] = jaw_json(result.upper);
    j["lower"] = jaw_json(result.lower);
    return j.dump(2);
}

}  // namespace dfuse
