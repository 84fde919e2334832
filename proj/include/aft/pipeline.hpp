#pragma once

#include "aft/alignment.hpp"
#include "aft/correspondence.hpp"
#include "aft/grasp.hpp"
#include "aft/ply.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aft
{

enum class CorrespondenceMode
{
    Nearest,       ///< row argmax of the descriptor similarity
    FunctionalMap, ///< spectral embedding transported by a fitted functional map
};

std::string_view to_string(CorrespondenceMode mode);
CorrespondenceMode correspondence_mode_from_string(std::string_view name);

struct PipelineConfig
{
    DescriptorKind descriptor = DescriptorKind::Xyz;
    int hks_times = 16;
    int wks_energies = 100;
    SpectralConfig spectral;
    CorrespondenceMode correspondence = CorrespondenceMode::Nearest;
    double functional_map_mu = 1e-3;
    SinkhornConfig sinkhorn;
    bool sinkhorn_enabled = false;
    /// Either side of the dense similarity is voxel-reduced to at most this many points.
    int max_points = max_dense_points;

    std::string reasoner = "rule";
    int num_regions = 3;
    bool alignment = true;
    AlignmentOptions alignment_options;

    std::uint64_t seed = 0;
    int grasp_candidates = 64;
    double max_width = 0.08;
    Vec3 reference_approach = Vec3(0.0, 0.0, -1.0);
    Vec3 human_direction = Vec3(1.0, 0.0, 0.0);
    ScoreWeights weights;
    bool invert_distance_term = false;

    void validate() const;
};

nlohmann::json config_to_json(const PipelineConfig& config);
/// Fields present in `j` override `base`; unknown keys throw InvalidArgument.
PipelineConfig config_from_json(const nlohmann::json& j, const PipelineConfig& base = {});
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& config, const std::filesystem::path& path);

enum class Stage
{
    Input,
    Reasoning,
    Alignment,
    Spectral,
    Grasp,
};

std::string_view to_string(Stage stage);
/// 2 input, 3 reasoning, 4 alignment, 5 spectral, 6 grasp.
int exit_code(Stage stage);

/// A library error tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error
{
  public:
    StageError(Stage stage, const Error& cause)
        : std::runtime_error(std::string(to_string(stage)) + ": " + cause.what()), stage_(stage), code_(cause.code())
    {
    }

    Stage stage() const noexcept { return stage_; }
    ErrorCode code() const noexcept { return code_; }

  private:
    Stage stage_;
    ErrorCode code_;
};

/// Backend named by `config.reasoner`: "rule", or "llm" configured from the environment.
std::unique_ptr<ReasoningBackend> make_backend(const PipelineConfig& config);

struct TransferOptions
{
    /// Skip retrieval and transfer from this database entry.
    std::optional<std::size_t> proxy_index;
    bool select_grasp = true;
};

struct PipelineResult
{
    TaskPlan plan;
    RegionLabeling labeling;
    PartMapping mapping;
    /// Input query frame to the proxy's canonical frame.
    RigidTransform to_proxy;
    std::optional<AlignmentResult> alignment;
    PointMap point_map;
    /// Transferred field on the query points, input order.
    AffordanceField field;
    std::vector<GraspCandidate> candidates;
    std::optional<GraspSelection> selection;
    Mat3 handover = Mat3::Identity();
    std::vector<std::string> warnings;
};

/// Normalize, localize, plan, match, align, describe, correspond, transfer and, unless
/// disabled, sample and select a grasp on the query in its input frame. Failures surface as
/// StageError.
PipelineResult run_transfer(const PointCloud& query, const TaskRequest& request, const Database& db,
                            const ReasoningBackend& backend, const PipelineConfig& config,
                            const TransferOptions& options = {});

/// Descriptor of the configured kind for both clouds. Spectral kinds share the reference
/// basis' time or energy grid.
std::pair<Descriptor, Descriptor> describe_pair(const PointCloud& query, const PointCloud& reference,
                                                const PipelineConfig& config);

/// Grasp record written by the CLI: row-major pose, width and score breakdown.
nlohmann::json grasp_to_json(const GraspSelection& selection, const Mat3& handover);

/// Red (255,0,0) for label 1, blue (0,0,255) for label 0.
Colors label_colors(const std::vector<std::uint8_t>& labels);

} // namespace aft
