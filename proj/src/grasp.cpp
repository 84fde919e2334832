#include "aft/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace aft
{

void ScoreWeights::validate() const
{
    if (!(w_heat >= 0.0 && w_dist >= 0.0 && w_feas >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "score weights must be nonnegative");
    if (w_heat + w_dist + w_feas <= 0.0)
        throw Error(ErrorCode::InvalidArgument, "score weights must not all be zero");
}

double contact_radius(const PointCloud& cloud)
{
    return std::max(0.005, 0.02 * max_extent(cloud));
}

std::vector<int> touched_points(const GraspCandidate& grasp, const Points& points, double radius)
{
    const Vec3 half = 0.5 * grasp.width * grasp.closing_axis();
    const Vec3 a = grasp.center() - half;
    const Vec3 ab = 2.0 * half;
    const double len2 = ab.squaredNorm();
    std::vector<int> out;
    for (Eigen::Index i = 0; i < points.cols(); ++i)
    {
        const Vec3 ap = points.col(i) - a;
        const double t = len2 > 0.0 ? std::clamp(ap.dot(ab) / len2, 0.0, 1.0) : 0.0;
        if ((ap - t * ab).squaredNorm() <= radius * radius)
            out.push_back(static_cast<int>(i));
    }
    return out;
}

GraspCandidate make_grasp(const Vec3& a, const Vec3& b, const Vec3& preferred_approach)
{
    GraspCandidate g;
    const Vec3 closing = (b - a).normalized();
    Vec3 approach = preferred_approach - preferred_approach.dot(closing) * closing;
    if (approach.norm() < 1e-9)
    {
        approach = closing.cross(Vec3::UnitY());
        if (approach.norm() < 1e-9)
            approach = closing.cross(Vec3::UnitZ());
    }
    approach.normalize();
    g.pose.rotation.col(0) = closing;
    g.pose.rotation.col(1) = approach.cross(closing);
    g.pose.rotation.col(2) = approach;
    g.pose.translation = 0.5 * (a + b);
    g.width = (b - a).norm();
    return g;
}

std::vector<GraspCandidate> sample_grasps(const PointCloud& cloud, int n, std::uint64_t seed,
                                          const SamplerOptions& options)
{
    if (n < 1)
        throw Error(ErrorCode::InvalidArgument, "at least one grasp must be requested");
    if (cloud.size() < 2)
        throw Error(ErrorCode::NoCandidates, "cloud too small for a two-contact grasp");
    const Points normals = cloud.has_normals() ? *cloud.normals : estimate_normals(cloud.points);
    const Points& pts = cloud.points;
    const auto count = static_cast<std::uint64_t>(pts.cols());
    const double radius = contact_radius(cloud);
    const double cos_normals = std::cos(options.min_normal_angle);
    const double cos_cone = std::cos(options.friction_cone);
    const double cos_dedup = std::cos(options.dedup_angle);

    std::mt19937_64 rng(seed);
    std::vector<GraspCandidate> out;
    std::vector<int> partners;
    const long long attempts = static_cast<long long>(n) * options.attempts_per_candidate;
    for (long long attempt = 0; attempt < attempts && static_cast<int>(out.size()) < n; ++attempt)
    {
        const auto i = static_cast<Eigen::Index>(rng() % count);
        const Vec3 ni = normals.col(i);
        partners.clear();
        for (Eigen::Index j = 0; j < pts.cols(); ++j)
        {
            const Vec3 d = pts.col(j) - pts.col(i);
            const double len = d.norm();
            if (len <= 0.0 || len > options.max_width)
                continue;
            const Vec3 nj = normals.col(j);
            if (ni.dot(nj) > cos_normals)
                continue;
            // Inward normals must both point along the contact line.
            if (-ni.dot(d) < cos_cone * len || nj.dot(d) < cos_cone * len)
                continue;
            partners.push_back(static_cast<int>(j));
        }
        if (partners.empty())
            continue;
        const int j = partners[rng() % partners.size()];

        GraspCandidate g = make_grasp(pts.col(i), pts.col(j), options.preferred_approach);
        bool duplicate = false;
        for (const GraspCandidate& k : out)
            if ((k.center() - g.center()).norm() < options.dedup_distance &&
                std::abs(k.closing_axis().dot(g.closing_axis())) > cos_dedup)
            {
                duplicate = true;
                break;
            }
        if (duplicate)
            continue;
        g.contacts = touched_points(g, pts, radius);
        out.push_back(std::move(g));
    }
    if (out.empty())
        throw Error(ErrorCode::NoCandidates, "no antipodal contact pair within the jaw width");
    return out;
}

double feasibility_angular(const GraspCandidate& grasp, const Vec3& reference_approach)
{
    const double c = std::clamp(grasp.approach_axis().normalized().dot(reference_approach.normalized()), -1.0, 1.0);
    return std::acos(c) / 3.14159265358979323846;
}

namespace
{

struct HumanRegion
{
    std::size_t count = 0;
    Vec3 centroid = Vec3::Zero();
};

HumanRegion human_region(const AffordanceField& field, const PointCloud& cloud)
{
    if (field.labels.size() != static_cast<std::size_t>(cloud.size()))
        throw Error(ErrorCode::LengthMismatch, "affordance field does not match the cloud");
    HumanRegion r;
    for (std::size_t i = 0; i < field.labels.size(); ++i)
        if (field.labels[i])
        {
            r.centroid += cloud.point(static_cast<Eigen::Index>(i));
            ++r.count;
        }
    if (r.count > 0)
        r.centroid /= static_cast<double>(r.count);
    return r;
}

ScoreBreakdown score_with(const GraspCandidate& grasp, const AffordanceField& field, const PointCloud& cloud,
                          const HumanRegion& region, double extent, double radius, const ScoreWeights& weights,
                          const FeasibilityFn& feasibility, const ScoringOptions& options)
{
    ScoreBreakdown s;
    if (region.count == 0)
    {
        s.s_heat = 0.0;
        s.d_human = 1.0;
    }
    else
    {
        std::size_t touched = 0;
        for (int i : touched_points(grasp, cloud.points, radius))
            touched += field.labels[static_cast<std::size_t>(i)];
        s.s_heat = static_cast<double>(touched) / static_cast<double>(region.count);
        s.d_human = extent > 0.0 ? std::clamp((grasp.center() - region.centroid).norm() / extent, 0.0, 1.0) : 0.0;
    }
    if (options.invert_distance_term)
        s.d_human = 1.0 - s.d_human;
    s.s_feas = std::clamp(feasibility(grasp), 0.0, 1.0);
    s.total = weights.w_heat * s.s_heat + weights.w_dist * s.d_human + weights.w_feas * s.s_feas;
    return s;
}

} // namespace

ScoreBreakdown score_grasp(const GraspCandidate& grasp, const AffordanceField& field, const PointCloud& cloud,
                           const ScoreWeights& weights, const FeasibilityFn& feasibility, const ScoringOptions& options)
{
    weights.validate();
    return score_with(grasp, field, cloud, human_region(field, cloud), max_extent(cloud), contact_radius(cloud),
                      weights, feasibility, options);
}

GraspSelection select_grasp(const std::vector<GraspCandidate>& candidates, const AffordanceField& field,
                            const PointCloud& cloud, const ScoreWeights& weights, const FeasibilityFn& feasibility,
                            const ScoringOptions& options)
{
    if (candidates.empty())
        throw Error(ErrorCode::EmptyCandidates, "no grasp candidates to select from");
    weights.validate();
    const HumanRegion region = human_region(field, cloud);
    const double extent = max_extent(cloud);
    const double radius = contact_radius(cloud);

    GraspSelection out;
    out.all_scores.reserve(candidates.size());
    for (const GraspCandidate& g : candidates)
        out.all_scores.push_back(score_with(g, field, cloud, region, extent, radius, weights, feasibility, options));
    for (std::size_t i = 1; i < candidates.size(); ++i)
    {
        const ScoreBreakdown& a = out.all_scores[i];
        const ScoreBreakdown& best = out.all_scores[out.index];
        if (a.total < best.total || (a.total == best.total && a.s_heat < best.s_heat))
            out.index = i;
    }
    out.grasp = candidates[out.index];
    out.score = out.all_scores[out.index];
    return out;
}

Mat3 handover_orientation(const GraspCandidate& selected, const AffordanceField& field, const PointCloud& cloud,
                          const Vec3& human_direction)
{
    const HumanRegion region = human_region(field, cloud);
    if (region.count == 0)
        throw Error(ErrorCode::NoHumanRegion, "the affordance field has no human-grasp points");
    const Vec3 axis = region.centroid - selected.center();
    if (axis.norm() < 1e-12 || human_direction.norm() < 1e-12)
        return Mat3::Identity();
    return minimal_rotation(axis.normalized(), human_direction.normalized());
}

} // namespace aft
