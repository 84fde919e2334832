#pragma once

#include "aft/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aft
{

struct EvalReport
{
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    /// False when the denominator was zero and the rate was defined as 0.
    bool precision_defined = true;
    bool recall_defined = true;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

EvalReport compute_metrics(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& truth);

/// Each partial point takes the heat of its nearest reference point, then the labels are
/// recomputed with the reference threshold. Both clouds must share a frame.
AffordanceField propagate_ground_truth(const PointCloud& partial, const PointCloud& reference,
                                       const AffordanceField& reference_field);

// Synthetic fixtures.

enum class SyntheticShape
{
    HammerLike,
    ScrewdriverLike,
    MugLike,
    Rod,
    PanLike,
    BottleLike,
};

std::string_view to_string(SyntheticShape shape);
SyntheticShape synthetic_shape_from_string(std::string_view name);
/// Object class and default task the shape stands in for, e.g. ("hammer", "hammer").
std::pair<std::string, std::string> synthetic_class(SyntheticShape shape);

struct SyntheticObject
{
    /// Points with analytic outward normals, in meters.
    PointCloud cloud;
    /// Heat 1 on the part a person holds, 0 elsewhere.
    AffordanceField field;
    /// Area-weighted centroids of the parametric parts.
    std::vector<Subpart> subparts;
    std::string object_class;
    std::string task;
};

/// Area-uniform samples of a parametric tool. `variation` jitters every dimension by up to
/// that relative amount, drawn from `seed`.
SyntheticObject make_synthetic(SyntheticShape shape, int n_points, std::uint64_t seed, double variation = 0.0);

/// A database entry in canonical orientation, subpart centers moved along.
DatabaseEntry make_reference_entry(const SyntheticObject& object);

/// Database of the given shapes at nominal dimensions.
Database make_synthetic_database(const std::vector<SyntheticShape>& shapes, int n_points = 2000);

/// Viewpoint for a simulated capture: a side view from a seeded direction at
/// `distance_factor` bounding-sphere radii.
Vec3 random_viewpoint(const PointCloud& cloud, std::uint64_t seed, double distance_factor = 3.0);

/// A test query: a partial view of a jittered instance, optionally randomly rotated, with
/// analytic labels.
struct EvalInstance
{
    PointCloud cloud;
    std::vector<std::uint8_t> truth;
    SyntheticShape shape = SyntheticShape::HammerLike;
};

struct InstanceOptions
{
    int n_points = 2000;
    bool partial = true;
    double variation = 0.1;
    double max_rotation = 0.0;
    /// Fixes the shape's dimensions and samples; the trial seed then only picks the view and
    /// the rotation.
    std::optional<std::uint64_t> shape_seed;
};

EvalInstance make_eval_instance(SyntheticShape shape, std::uint64_t seed, const InstanceOptions& options = {});

// Harnesses.

struct AblationSpec
{
    /// Upper bounds of the rotation angle ranges [0, max].
    std::vector<double> rotation_ranges{0.0, 2.0 * 3.14159265358979323846};
    int trials = 8;
    std::uint64_t seed = 0;
    std::vector<DescriptorKind> descriptors{DescriptorKind::Xyz};
    /// Target classes; cross-class runs pair every database source with every target.
    std::vector<SyntheticShape> targets{SyntheticShape::HammerLike, SyntheticShape::ScrewdriverLike,
                                        SyntheticShape::MugLike};
    /// Rotation runs sweep these alignment settings.
    std::vector<bool> alignment{true, false};
    InstanceOptions instance;

    void validate() const;
};

struct AblationCell
{
    std::string source;
    std::string target;
    DescriptorKind descriptor = DescriptorKind::Xyz;
    double rotation_range = 0.0;
    bool alignment = true;
    /// Mean rates over trials; counts summed.
    EvalReport mean;
    std::vector<EvalReport> trials;
};

/// Per (descriptor, rotation range, alignment, target): full pipeline with the rule backend
/// against `db`, compared with the analytic labels.
std::vector<AblationCell> run_rotation_ablation(const AblationSpec& spec, const Database& db,
                                                const PipelineConfig& config = {});

/// Per (source entry, target class): the source is forced as proxy, then align and transfer.
std::vector<AblationCell> run_crossclass(const AblationSpec& spec, const Database& db,
                                         const PipelineConfig& config = {});

std::string cells_to_csv(const std::vector<AblationCell>& cells);
std::string cells_summary(const std::vector<AblationCell>& cells);

} // namespace aft
