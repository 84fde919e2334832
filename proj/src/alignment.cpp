#include "aft/alignment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace aft
{

std::string_view to_string(AlignmentMethod method)
{
    return method == AlignmentMethod::PartAxis ? "part_axis" : "pca_fallback";
}

namespace
{

/// Proper rotations that permute and sign-flip the coordinate axes: the exact candidates
/// between two PCA-canonical clouds. Identity first.
const std::vector<Mat3>& axis_permutations()
{
    static const std::vector<Mat3> all = [] {
        std::vector<Mat3> out;
        const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        for (const auto& p : perms)
            for (int signs = 0; signs < 8; ++signs)
            {
                Mat3 m = Mat3::Zero();
                for (int r = 0; r < 3; ++r)
                    m(r, p[static_cast<std::size_t>(r)]) = (signs >> r) & 1 ? -1.0 : 1.0;
                if (m.determinant() > 0.0)
                    out.push_back(m);
            }
        return out;
    }();
    return all;
}

double rotation_angle_between(const Mat3& a, const Mat3& b)
{
    const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

/// Mean squared distance from a subsample of `query` to its nearest `reference` point.
double one_sided_chamfer(const Points& query, const Points& reference)
{
    const Eigen::Index step = std::max<Eigen::Index>(1, query.cols() / 400);
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < query.cols(); i += step, ++count)
        sum += (reference.colwise() - query.col(i)).colwise().squaredNorm().minCoeff();
    return sum / static_cast<double>(std::max<Eigen::Index>(count, 1));
}

struct CenterPair
{
    Vec3 query;
    Vec3 proxy;
};

double rms(const Mat3& r, const std::vector<CenterPair>& pairs)
{
    double sum = 0.0;
    for (const CenterPair& p : pairs)
        sum += (r * p.query - p.proxy).squaredNorm();
    return std::sqrt(sum / static_cast<double>(pairs.size()));
}

} // namespace

AlignmentResult align_query(const PointCloud& query, const PartMapping& mapping, const DatabaseEntry& proxy,
                            const AlignmentOptions& options)
{
    std::vector<CenterPair> pairs;
    for (const PartPair& p : mapping.pairs)
    {
        const auto q = mapping.query_part_centers.find(p.query_part);
        const Subpart* s = proxy.find_subpart(p.proxy_part);
        if (q == mapping.query_part_centers.end() || s == nullptr)
            continue;
        if (!q->second.allFinite() || !s->center.allFinite())
            continue;
        pairs.push_back({q->second, s->center});
    }
    if (pairs.empty())
        throw Error(ErrorCode::NoMappedCenters, "no mapped pair has centers on both sides");

    const double query_extent = max_extent(query);
    const double proxy_extent = max_extent(proxy.reference);

    AlignmentResult out;
    Mat3 r = Mat3::Identity();
    if (pairs.size() == 1)
    {
        out.method = AlignmentMethod::PcaFallback;
        const Vec3& q = pairs[0].query;
        const Vec3& p = pairs[0].proxy;
        bool flip = false;
        if (std::abs(q.x()) >= options.min_center_separation * query_extent &&
            std::abs(p.x()) >= options.min_center_separation * proxy_extent)
        {
            flip = (q.x() > 0.0) != (p.x() > 0.0);
        }
        else
        {
            // Center too close to the middle: match the heavier halves instead.
            auto heavier_positive = [](const Points& pts) {
                return (pts.row(0).array() > 0.0).count() >= (pts.row(0).array() < 0.0).count();
            };
            flip = heavier_positive(query.points) != heavier_positive(proxy.reference.points);
        }
        if (flip)
            r = Mat3(Vec3(-1, -1, 1).asDiagonal());
    }
    else
    {
        out.method = AlignmentMethod::PartAxis;
        const Vec3 a = pairs[1].query - pairs[0].query;
        const Vec3 b = pairs[1].proxy - pairs[0].proxy;
        if (a.norm() < options.min_center_separation * query_extent ||
            b.norm() < options.min_center_separation * proxy_extent)
            throw Error(ErrorCode::NoMappedCenters, "mapped part centers nearly coincide");
        const Vec3 bn = b.normalized();
        r = minimal_rotation(a.normalized(), bn);

        if (pairs.size() >= 3)
        {
            // Planar Procrustes about the part axis.
            double sin_sum = 0.0;
            double cos_sum = 0.0;
            for (const CenterPair& p : pairs)
            {
                Vec3 u = r * p.query;
                Vec3 v = p.proxy;
                u -= u.dot(bn) * bn;
                v -= v.dot(bn) * bn;
                sin_sum += bn.dot(u.cross(v));
                cos_sum += u.dot(v);
            }
            r = axis_angle(bn, std::atan2(sin_sum, cos_sum)) * r;
        }

        if (pairs.size() == 2)
        {
            // Two centers leave the roll about the part axis free. Candidates: the roll in
            // 10-degree steps, plus every axis permutation that keeps the part axis within
            // 45 degrees (slab centers of a partial view tilt the axis). The one whose
            // rotated query sits closest to the proxy surface wins.
            constexpr int steps = 36;
            const Mat3 base = r;
            const Vec3 an = a.normalized();
            double best = one_sided_chamfer(r * query.points, proxy.reference.points);
            auto consider = [&](const Mat3& candidate) {
                const double d = one_sided_chamfer(candidate * query.points, proxy.reference.points);
                if (d < best)
                {
                    best = d;
                    r = candidate;
                }
            };
            for (int s = 1; s < steps; ++s)
                consider(axis_angle(bn, 2.0 * 3.14159265358979323846 * s / steps) * base);
            for (const Mat3& f : axis_permutations())
                if ((f * an).dot(bn) >= std::cos(3.14159265358979323846 / 4.0))
                    consider(f);
        }

        for (const Mat3& f : axis_permutations())
            if (rotation_angle_between(r, f) <= options.snap_angle)
            {
                r = f;
                out.snapped = true;
                break;
            }
    }

    // A query that is the proxy itself up to an axis permutation aligns exactly, whatever
    // the slab centers said.
    for (const Mat3& f : axis_permutations())
        if (one_sided_chamfer(f * query.points, proxy.reference.points) <= 1e-12 * proxy_extent * proxy_extent)
        {
            r = f;
            out.snapped = true;
            break;
        }

    out.transform.rotation = r;
    out.aligned_query = out.transform.apply(query);
    out.residual = rms(r, pairs);
    return out;
}

} // namespace aft
