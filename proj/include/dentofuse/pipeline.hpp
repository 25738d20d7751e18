#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dentofuse/curvseg.hpp"
#include "dentofuse/fuse.hpp"
#include "dentofuse/registration.hpp"
#include "dentofuse/volume.hpp"

namespace dfuse {

struct PipelineConfig {
    std::uint64_t seed = 0;

    // reconstruction + smoothing
    int hlo_iterations = 10;
    double hlo_gate_deg = 35.0;
    double hlo_step = 0.5;

    // tooth/jaw segmentation
    ErosionConfig erosion;            // top 15 percent, order 2
    int plane_iterations = 500;

    // registration
    double global_voxel = 2.0;        // mm
    double global_min_fitness = 0.25;
    IcpConfig icp;

    // fusion
    bool adaptive_removal = true;
    double removal_fraction = 0.2;
    double dbscan_eps_factor = 3.0;   // x median residual spacing
    int dbscan_min_pts = 8;
    std::size_t dbscan_min_cluster = 50;
    FuseConfig fuse;

    // checkpointing
    bool checkpoint = false;
    std::filesystem::path checkpoint_dir;
    std::string resume_from;  // empty = run everything
};

struct StageReport {
    std::string name;
    bool success = false;
    bool skipped = false;
    double seconds = 0.0;
    std::string message;
};

struct JawResult {
    bool processed = false;
    std::string skip_reason;
    RegistrationReport global_report;
    RegistrationReport icp_report;
    std::size_t removed_points = 0;
    std::size_t residual_points = 0;
    std::size_t dbscan_removed = 0;
    bool adaptive_cut = false;
    std::map<int, int> component_fdi;  // tooth component -> inherited FDI code
    TriMesh fused;
};

struct PipelineResult {
    bool success = false;
    std::vector<StageReport> stages;
    int component_count = 0;
    std::vector<int> component_jaw;  // 0 upper / 1 lower per component
    double split_margin = 0.0;
    JawResult upper;
    JawResult lower;
};

/// Stage names accepted by PipelineConfig::resume_from, in execution order.
const std::vector<std::string>& pipeline_stage_names();

/// End-to-end fusion: reconstruct -> smooth -> segment -> split ->
/// register -> fuse, the two jaws in parallel. Missing IOS paths skip the
/// corresponding jaw. A stage failure stops the pipeline and reports the
/// stage name; already-computed checkpoint artifacts stay on disk.
PipelineResult run_pipeline(const std::filesystem::path& volume_path,
                            const std::filesystem::path& ios_upper_path,
                            const std::filesystem::path& ios_lower_path,
                            const PipelineConfig& config);

/// Same pipeline over already-loaded inputs (empty optional = jaw skipped).
PipelineResult run_pipeline(const LabelVolume& volume,
                            const std::optional<TriMesh>& ios_upper,
                            const std::optional<TriMesh>& ios_lower,
                            const PipelineConfig& config);

/// Versioned JSON report. Timing fields are zeroed when include_timing is
/// false so reports can be compared byte-for-byte across runs.
std::string pipeline_report_json(const PipelineResult& result, bool include_timing);

}  // namespace dfuse
