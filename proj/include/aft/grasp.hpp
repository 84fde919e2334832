#pragma once

#include "aft/affordance.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace aft
{

/// Parallel-jaw grasp. The pose's local +z is the approach axis and local +x the closing
/// axis; its translation is the midpoint between the jaws.
struct GraspCandidate
{
    RigidTransform pose;
    double width = 0.0;
    /// Cloud points within the contact radius of the closing segment.
    std::vector<int> contacts;

    Vec3 center() const { return pose.translation; }
    Vec3 closing_axis() const { return pose.rotation.col(0); }
    Vec3 approach_axis() const { return pose.rotation.col(2); }
};

struct ScoreWeights
{
    double w_heat = 1.0;
    double w_dist = 0.05;
    double w_feas = 1.0;

    void validate() const;
};

struct ScoreBreakdown
{
    double s_heat = 0.0;
    double d_human = 0.0;
    double s_feas = 0.0;
    double total = 0.0;
};

/// Robot-specific cost in [0,1] of executing a grasp.
using FeasibilityFn = std::function<double(const GraspCandidate&)>;

struct SamplerOptions
{
    double max_width = 0.08;
    /// Minimum angle between the two contact normals.
    double min_normal_angle = 150.0 * 3.14159265358979323846 / 180.0;
    /// Maximum angle between the contact line and either inward normal.
    double friction_cone = 30.0 * 3.14159265358979323846 / 180.0;
    /// The approach is this direction projected perpendicular to the closing axis.
    Vec3 preferred_approach = Vec3(0.0, 0.0, -1.0);
    double dedup_distance = 0.005;
    double dedup_angle = 10.0 * 3.14159265358979323846 / 180.0;
    /// Sampling attempts per requested candidate.
    int attempts_per_candidate = 50;
};

/// max(5 mm, 0.02 x max extent).
double contact_radius(const PointCloud& cloud);

/// Indices of points within `radius` of the segment between the jaws.
std::vector<int> touched_points(const GraspCandidate& grasp, const Points& points, double radius);

/// Builds a candidate closing from contact `a` to contact `b`.
GraspCandidate make_grasp(const Vec3& a, const Vec3& b, const Vec3& preferred_approach);

/// Antipodal pairs with opposed normals, deduplicated; deterministic per seed. Normals are
/// estimated when the cloud has none. Throws NoCandidates.
std::vector<GraspCandidate> sample_grasps(const PointCloud& cloud, int n, std::uint64_t seed,
                                          const SamplerOptions& options = {});

/// Angle between the grasp's approach axis and `reference_approach`, divided by pi.
double feasibility_angular(const GraspCandidate& grasp, const Vec3& reference_approach);

struct ScoringOptions
{
    /// Scores 1 - d_human instead of d_human, preferring grasps far from the receiver's region.
    bool invert_distance_term = false;
};

/// s = w_heat s_heat + w_dist d_human + w_feas s_feas. Without label-1 points s_heat = 0
/// and d_human = 1.
ScoreBreakdown score_grasp(const GraspCandidate& grasp, const AffordanceField& field, const PointCloud& cloud,
                           const ScoreWeights& weights, const FeasibilityFn& feasibility,
                           const ScoringOptions& options = {});

struct GraspSelection
{
    std::size_t index = 0;
    GraspCandidate grasp;
    ScoreBreakdown score;
    std::vector<ScoreBreakdown> all_scores;
};

/// Lowest total; ties go to the lower s_heat, then the lower index. Throws EmptyCandidates.
GraspSelection select_grasp(const std::vector<GraspCandidate>& candidates, const AffordanceField& field,
                            const PointCloud& cloud, const ScoreWeights& weights, const FeasibilityFn& feasibility,
                            const ScoringOptions& options = {});

/// Smallest rotation turning the direction from the grasp center to the label-1 centroid
/// onto `human_direction`. Throws NoHumanRegion.
Mat3 handover_orientation(const GraspCandidate& selected, const AffordanceField& field, const PointCloud& cloud,
                          const Vec3& human_direction);

} // namespace aft
