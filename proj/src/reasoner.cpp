#include "aft/reasoner.hpp"

#include <algorithm>
#include <cmath>

namespace aft
{

void TaskRequest::validate() const
{
    if (object_name.empty() || task.empty())
        throw Error(ErrorCode::InvalidArgument, "a task request needs an object name and a task");
}

std::optional<Vec3> RegionLabeling::part_center(const PointCloud& cloud, std::string_view label) const
{
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    for (std::size_t i = 0; i < point_region.size(); ++i)
        if (regions[static_cast<std::size_t>(point_region[i])].label == label)
        {
            sum += cloud.point(static_cast<Eigen::Index>(i));
            ++count;
        }
    if (count == 0)
        return std::nullopt;
    return Vec3(sum / static_cast<double>(count));
}

std::vector<std::string> RegionLabeling::distinct_labels() const
{
    std::vector<std::string> out;
    for (const Region& r : regions)
        if (std::find(out.begin(), out.end(), r.label) == out.end())
            out.push_back(r.label);
    return out;
}

RegionLabeling localize_parts(const PointCloud& cloud, const TaskRequest& request, const ReasoningBackend& backend,
                              int num_regions)
{
    request.validate();
    if (num_regions < 1)
        throw Error(ErrorCode::InvalidArgument, "at least one region is required");
    if (cloud.size() < 4)
        throw Error(ErrorCode::DegenerateCloud, "part localization needs at least 4 points");

    const PrincipalAxes pca = pca_axes(cloud);
    RegionLabeling out;
    out.axis = pca.axes.col(0);
    out.origin = pca.centroid;

    const VectorX t = (cloud.points.colwise() - out.origin).transpose() * out.axis;
    const double lo = t.minCoeff();
    const double hi = t.maxCoeff();
    const double width = (hi - lo) / num_regions;

    out.point_region.resize(static_cast<std::size_t>(cloud.size()));
    std::vector<Vec3> sums(static_cast<std::size_t>(num_regions), Vec3::Zero());
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_regions), 0);
    std::vector<double> radial(static_cast<std::size_t>(num_regions), 0.0);
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
    {
        int r = width > 0.0 ? static_cast<int>(std::floor((t(i) - lo) / width)) : 0;
        r = std::clamp(r, 0, num_regions - 1);
        out.point_region[static_cast<std::size_t>(i)] = r;
        sums[static_cast<std::size_t>(r)] += cloud.point(i);
        ++counts[static_cast<std::size_t>(r)];
        const Vec3 offset = cloud.point(i) - out.origin;
        radial[static_cast<std::size_t>(r)] += (offset - offset.dot(out.axis) * out.axis).squaredNorm();
    }

    std::vector<RegionSummary> summaries;
    for (int r = 0; r < num_regions; ++r)
    {
        Region region;
        region.index = r;
        region.axis_min = lo + r * width;
        region.axis_max = r + 1 == num_regions ? hi : lo + (r + 1) * width;
        region.point_count = counts[static_cast<std::size_t>(r)];
        region.center = region.point_count > 0
                            ? Vec3(sums[static_cast<std::size_t>(r)] / static_cast<double>(region.point_count))
                            : Vec3(out.origin + 0.5 * (region.axis_min + region.axis_max) * out.axis);
        out.regions.push_back(region);
        const double spread =
            region.point_count > 0 && hi > lo
                ? std::sqrt(radial[static_cast<std::size_t>(r)] / static_cast<double>(region.point_count)) / (hi - lo)
                : 0.0;
        summaries.push_back({r, static_cast<double>(region.point_count) / static_cast<double>(cloud.size()),
                             region.axis_min, region.axis_max, spread});
    }

    const std::vector<std::string> labels = backend.label_regions(request, summaries, out.warnings);
    if (labels.size() != out.regions.size())
        throw Error(ErrorCode::SchemaViolation, "backend returned " + std::to_string(labels.size()) +
                                                    " labels for " + std::to_string(out.regions.size()) + " regions");
    for (std::size_t r = 0; r < labels.size(); ++r)
    {
        if (labels[r].empty())
            throw Error(ErrorCode::SchemaViolation, "backend returned an empty region label");
        out.regions[r].label = labels[r];
    }
    return out;
}

TaskPlan plan_task(const TaskRequest& request, const ReasoningBackend& backend)
{
    request.validate();
    TaskPlan plan = backend.plan(request);
    if (plan.grasp_part.empty() || plan.free_part.empty() || plan.grasp_part == plan.free_part)
        throw Error(ErrorCode::SchemaViolation, "plan must name two different parts");
    return plan;
}

PartMapping match_parts(const TaskRequest& request, const RegionLabeling& labeling, const PointCloud& cloud,
                        const Database& db, const ReasoningBackend& backend)
{
    request.validate();
    if (db.empty())
        throw Error(ErrorCode::NoViableProxy, "the database is empty");
    if (labeling.point_region.size() != static_cast<std::size_t>(cloud.size()))
        throw Error(ErrorCode::LengthMismatch, "labeling belongs to a different cloud");

    PartMapping mapping = backend.match(request, labeling, db);
    if (mapping.proxy_index >= db.entries.size())
        throw Error(ErrorCode::SchemaViolation, "proxy index out of range");
    if (mapping.pairs.empty())
        throw Error(ErrorCode::NoViableProxy, "no part pairs");
    const DatabaseEntry& proxy = mapping.proxy(db);
    for (const PartPair& p : mapping.pairs)
    {
        if (proxy.find_subpart(p.proxy_part) == nullptr)
            throw Error(ErrorCode::SchemaViolation, "proxy has no subpart '" + p.proxy_part + "'");
        const auto center = labeling.part_center(cloud, p.query_part);
        if (!center)
            throw Error(ErrorCode::SchemaViolation, "no query region is labeled '" + p.query_part + "'");
        mapping.query_part_centers[p.query_part] = *center;
    }
    return mapping;
}

} // namespace aft
