#pragma once

#include "aft/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aft
{

/// Ordered set of 3D points (meters) with optional unit normals.
struct PointCloud
{
    Points points;
    std::optional<Points> normals;
    std::string source_id;

    PointCloud() = default;
    explicit PointCloud(Points pts, std::string id = {})
        : points(std::move(pts)), source_id(std::move(id))
    {
    }

    Eigen::Index size() const noexcept { return points.cols(); }
    bool empty() const noexcept { return points.cols() == 0; }
    bool has_normals() const noexcept { return normals.has_value(); }
    Vec3 point(Eigen::Index i) const { return points.col(i); }

    /// Throws InvalidArgument when the normals violate the cardinality or unit-norm invariant.
    void validate() const;

    /// Returns the cloud restricted to `indices`, in that order.
    PointCloud subset(const std::vector<int>& indices) const;
};

/// Similarity transform p -> scale * rotation * p + translation.
struct RigidTransform
{
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
    Points apply(const Points& pts) const;
    PointCloud apply(const PointCloud& cloud) const;

    /// `(*this) ∘ first`: applies `first`, then this transform.
    RigidTransform compose(const RigidTransform& first) const;
    RigidTransform inverse() const;

    Mat4 matrix() const;

    /// Orthonormality, det = +1 and positive scale, all within `tol`.
    bool is_valid(double tol = 1e-9) const;
};

struct PrincipalAxes
{
    Vec3 centroid = Vec3::Zero();
    /// Columns are the principal axes, by descending variance.
    Mat3 axes = Mat3::Identity();
    Vec3 variances = Vec3::Zero();

    /// Variance ratio of the first two axes below 1.05: the principal axis is unreliable.
    bool near_isotropic() const;
};

Vec3 centroid(const Points& pts);

/// PCA of the point covariance. Each axis is signed so that its largest-magnitude
/// component is positive; exact ties resolve toward +x, then +y.
PrincipalAxes pca_axes(const PointCloud& cloud);

/// Largest side of the bounding box in the PCA-aligned frame.
double max_extent(const PointCloud& cloud);

struct NormalizedCloud
{
    PointCloud cloud;
    RigidTransform transform;
    bool near_isotropic = false;
};

/// Centers the cloud, rotates its principal axes onto x/y/z and scales the largest
/// PCA-aligned bounding-box side to 1. `transform` maps input to output.
NormalizedCloud normalize_cloud(const PointCloud& cloud);

/// Axis uniform on the sphere, angle uniform in [0, max_angle]. Deterministic per seed.
RigidTransform random_rotation(std::uint64_t seed, double max_angle);

/// Rotation by `angle` radians about unit `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);

/// Smallest rotation taking unit `from` onto unit `to`. For antiparallel input the
/// rotation is 180 degrees about the perpendicular with zero x-component
/// (or +y when `from` is along x).
Mat3 minimal_rotation(const Vec3& from, const Vec3& to);

struct PartialViewOptions
{
    /// Spherical-flip radius, as a multiple of the cloud's bounding-sphere radius,
    /// added to the farthest point distance from the viewpoint.
    double radius_factor = 3.0;
};

/// Indices (ascending) of points visible from `viewpoint` under hidden-point removal.
std::vector<int> visible_indices(const PointCloud& cloud, const Vec3& viewpoint,
                                 const PartialViewOptions& options = {});

/// The visible subset of `cloud` seen from `viewpoint`.
PointCloud partial_view(const PointCloud& cloud, const Vec3& viewpoint,
                        const PartialViewOptions& options = {});

/// Center and radius of the centroid-centred bounding sphere.
std::pair<Vec3, double> bounding_sphere(const Points& pts);

/// k nearest neighbours of every point (self excluded), ordered by distance then index.
std::vector<std::vector<int>> knn_graph(const Points& pts, int k);

/// Index of the nearest column of `reference` to `query` (lowest index on ties).
int nearest_index(const Points& reference, const Vec3& query);

/// Nearest reference index for every query column.
std::vector<int> nearest_indices(const Points& reference, const Points& query);

/// PCA normals over `k` neighbours, oriented away from the cloud centroid.
Points estimate_normals(const Points& pts, int k = 10);

} // namespace aft
