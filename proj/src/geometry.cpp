#include "aft/geometry.hpp"

#include "convex_hull.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace aft
{

void PointCloud::validate() const
{
    if (!normals)
        return;
    if (normals->cols() != points.cols())
        throw Error(ErrorCode::InvalidArgument, "normals and points differ in count");
    for (Eigen::Index i = 0; i < normals->cols(); ++i)
        if (std::abs(normals->col(i).norm() - 1.0) > 1e-6)
            throw Error(ErrorCode::InvalidArgument, "normal " + std::to_string(i) + " is not unit length");
}

PointCloud PointCloud::subset(const std::vector<int>& indices) const
{
    PointCloud out;
    out.source_id = source_id;
    out.points.resize(3, static_cast<Eigen::Index>(indices.size()));
    if (normals)
        out.normals = Points(3, static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k)
    {
        out.points.col(k) = points.col(indices[k]);
        if (normals)
            out.normals->col(k) = normals->col(indices[k]);
    }
    return out;
}

Points RigidTransform::apply(const Points& pts) const
{
    Points out = scale * (rotation * pts);
    out.colwise() += translation;
    return out;
}

PointCloud RigidTransform::apply(const PointCloud& cloud) const
{
    PointCloud out;
    out.source_id = cloud.source_id;
    out.points = apply(cloud.points);
    if (cloud.normals)
        out.normals = Points(rotation * *cloud.normals);
    return out;
}

RigidTransform RigidTransform::compose(const RigidTransform& first) const
{
    RigidTransform out;
    out.rotation = rotation * first.rotation;
    out.scale = scale * first.scale;
    out.translation = scale * (rotation * first.translation) + translation;
    return out;
}

RigidTransform RigidTransform::inverse() const
{
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.scale = 1.0 / scale;
    out.translation = -out.scale * (out.rotation * translation);
    return out;
}

Mat4 RigidTransform::matrix() const
{
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = scale * rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

bool RigidTransform::is_valid(double tol) const
{
    return scale > 0.0 && (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
}

bool PrincipalAxes::near_isotropic() const
{
    if (variances(1) <= 0.0)
        return false;
    return variances(0) / variances(1) < 1.05;
}

Vec3 centroid(const Points& pts)
{
    if (pts.cols() == 0)
        throw Error(ErrorCode::DegenerateCloud, "empty cloud has no centroid");
    return pts.rowwise().mean();
}

namespace
{

// Largest-magnitude component positive; exact ties go to the lowest coordinate index.
void apply_sign_rule(Eigen::Ref<Vec3> axis)
{
    int arg = 0;
    for (int c = 1; c < 3; ++c)
        if (std::abs(axis(c)) > std::abs(axis(arg)) + 1e-12)
            arg = c;
    if (axis(arg) < 0.0)
        axis = -axis;
}

int covariance_rank(const Vec3& variances)
{
    const double top = variances(0);
    if (!(top > 1e-300))
        return 0;
    int rank = 0;
    for (int i = 0; i < 3; ++i)
        if (variances(i) > 1e-12 * top)
            ++rank;
    return rank;
}

} // namespace

PrincipalAxes pca_axes(const PointCloud& cloud)
{
    if (cloud.size() < 4)
        throw Error(ErrorCode::DegenerateCloud, "PCA needs at least 4 points");
    PrincipalAxes out;
    out.centroid = centroid(cloud.points);
    const Points centered = cloud.points.colwise() - out.centroid;
    const Mat3 cov = centered * centered.transpose() / static_cast<double>(cloud.size());

    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    // Eigen sorts ascending; flip to descending variance.
    for (int i = 0; i < 3; ++i)
    {
        out.variances(i) = std::max(solver.eigenvalues()(2 - i), 0.0);
        out.axes.col(i) = solver.eigenvectors().col(2 - i);
        apply_sign_rule(out.axes.col(i));
    }
    if (covariance_rank(out.variances) == 0)
        throw Error(ErrorCode::DegenerateCloud, "all points coincide");
    return out;
}

double max_extent(const PointCloud& cloud)
{
    const PrincipalAxes pca = pca_axes(cloud);
    const Points local = pca.axes.transpose() * (cloud.points.colwise() - pca.centroid);
    return (local.rowwise().maxCoeff() - local.rowwise().minCoeff()).maxCoeff();
}

NormalizedCloud normalize_cloud(const PointCloud& cloud)
{
    const PrincipalAxes pca = pca_axes(cloud);
    if (covariance_rank(pca.variances) < 2)
        throw Error(ErrorCode::DegenerateCloud, "points are collinear");

    Mat3 rot = pca.axes.transpose();
    if (rot.determinant() < 0.0)
        rot.row(2) *= -1.0;

    const Points local = rot * (cloud.points.colwise() - pca.centroid);
    const double extent = (local.rowwise().maxCoeff() - local.rowwise().minCoeff()).maxCoeff();

    NormalizedCloud out;
    out.transform.rotation = rot;
    out.transform.scale = 1.0 / extent;
    out.transform.translation = -out.transform.scale * (rot * pca.centroid);
    out.cloud = out.transform.apply(cloud);
    out.near_isotropic = pca.near_isotropic();
    return out;
}

Mat3 axis_angle(const Vec3& axis, double angle)
{
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

RigidTransform random_rotation(std::uint64_t seed, double max_angle)
{
    if (!(max_angle >= 0.0 && max_angle <= 2.0 * std::numbers::pi + 1e-12))
        throw Error(ErrorCode::InvalidArgument, "max_angle must lie in [0, 2pi]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Vec3 axis;
    do
    {
        axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (axis.norm() < 1e-12);
    const double angle = max_angle * uniform(rng);

    RigidTransform out;
    out.rotation = max_angle == 0.0 ? Mat3::Identity() : axis_angle(axis, angle);
    return out;
}

Mat3 minimal_rotation(const Vec3& from, const Vec3& to)
{
    const Vec3 a = from.normalized();
    const Vec3 b = to.normalized();
    const double c = std::clamp(a.dot(b), -1.0, 1.0);
    const Vec3 cross = a.cross(b);
    const double s = cross.norm();
    if (s < 1e-12)
    {
        if (c > 0.0)
            return Mat3::Identity();
        Vec3 perp = a.cross(Vec3::UnitX());
        if (perp.norm() < 1e-9)
            perp = Vec3::UnitY();
        return axis_angle(perp.normalized(), std::numbers::pi);
    }
    return axis_angle(cross / s, std::atan2(s, c));
}

std::pair<Vec3, double> bounding_sphere(const Points& pts)
{
    const Vec3 c = centroid(pts);
    return {c, (pts.colwise() - c).colwise().norm().maxCoeff()};
}

std::vector<int> visible_indices(const PointCloud& cloud, const Vec3& viewpoint,
                                 const PartialViewOptions& options)
{
    if (cloud.empty())
        throw Error(ErrorCode::EmptyView, "cloud is empty");
    const auto [center, radius] = bounding_sphere(cloud.points);
    if ((viewpoint - center).norm() <= radius)
        throw Error(ErrorCode::InvalidArgument, "viewpoint lies inside the bounding sphere");

    const Eigen::Index n = cloud.size();
    const Points rel = cloud.points.colwise() - viewpoint;
    const Eigen::RowVectorXd dist = rel.colwise().norm();
    const double flip_radius = dist.maxCoeff() + options.radius_factor * radius;

    // Spherical flip about the viewpoint, which itself joins the hull as the last point.
    Points flipped(3, n + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        flipped.col(i) = rel.col(i) * ((2.0 * flip_radius - dist(i)) / dist(i));
    flipped.col(n).setZero();

    std::vector<int> hull = detail::convex_hull_vertices(flipped);
    std::vector<int> out;
    out.reserve(hull.size());
    for (int v : hull)
        if (v != n)
            out.push_back(v);
    if (out.empty())
        throw Error(ErrorCode::EmptyView, "no point is visible from the viewpoint");
    return out;
}

PointCloud partial_view(const PointCloud& cloud, const Vec3& viewpoint, const PartialViewOptions& options)
{
    PointCloud out = cloud.subset(visible_indices(cloud, viewpoint, options));
    out.source_id = cloud.source_id.empty() ? "partial" : cloud.source_id + "#partial";
    return out;
}

std::vector<std::vector<int>> knn_graph(const Points& pts, int k)
{
    const int n = static_cast<int>(pts.cols());
    if (k < 1 || k >= n)
        throw Error(ErrorCode::InvalidArgument, "knn must lie in [1, N-1]");
    std::vector<std::vector<int>> out(n);
    std::vector<std::pair<double, int>> dist(n);
    for (int i = 0; i < n; ++i)
    {
        const Vec3 p = pts.col(i);
        for (int j = 0; j < n; ++j)
            dist[j] = {(pts.col(j) - p).squaredNorm(), j};
        dist[i].first = std::numeric_limits<double>::infinity();
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        out[i].resize(k);
        for (int m = 0; m < k; ++m)
            out[i][m] = dist[m].second;
    }
    return out;
}

int nearest_index(const Points& reference, const Vec3& query)
{
    if (reference.cols() == 0)
        throw Error(ErrorCode::InvalidArgument, "empty reference");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < reference.cols(); ++j)
    {
        const double dx = reference(0, j) - query(0);
        const double dy = reference(1, j) - query(1);
        const double dz = reference(2, j) - query(2);
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best_d)
        {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

std::vector<int> nearest_indices(const Points& reference, const Points& query)
{
    std::vector<int> out(query.cols());
    for (Eigen::Index i = 0; i < query.cols(); ++i)
        out[i] = nearest_index(reference, query.col(i));
    return out;
}

Points estimate_normals(const Points& pts, int k)
{
    const int n = static_cast<int>(pts.cols());
    const int kk = std::min(k, n - 1);
    if (kk < 2)
        throw Error(ErrorCode::DegenerateCloud, "too few points for normal estimation");
    const auto graph = knn_graph(pts, kk);
    const Vec3 c = centroid(pts);
    Points normals(3, n);
    for (int i = 0; i < n; ++i)
    {
        Vec3 mean = pts.col(i);
        for (int j : graph[i])
            mean += pts.col(j);
        mean /= static_cast<double>(kk + 1);
        Mat3 cov = (pts.col(i) - mean) * (pts.col(i) - mean).transpose();
        for (int j : graph[i])
            cov += (pts.col(j) - mean) * (pts.col(j) - mean).transpose();
        Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
        Vec3 nrm = solver.eigenvectors().col(0).normalized();
        if (nrm.dot(pts.col(i) - c) < 0.0)
            nrm = -nrm;
        normals.col(i) = nrm;
    }
    return normals;
}

} // namespace aft
