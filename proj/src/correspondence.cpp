#include "aft/correspondence.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace aft
{

void SinkhornConfig::validate() const
{
    if (iterations < 1)
        throw Error(ErrorCode::InvalidArgument, "Sinkhorn needs at least one iteration");
    if (!(lambda > 0.0))
        throw Error(ErrorCode::InvalidArgument, "Sinkhorn temperature must be positive");
}

MatrixX similarity_matrix(const MatrixX& query, const MatrixX& reference)
{
    if (query.cols() != reference.cols())
        throw Error(ErrorCode::DimensionMismatch, "descriptor dimensions differ: " + std::to_string(query.cols()) +
                                                      " vs " + std::to_string(reference.cols()));
    const Eigen::Index d = query.cols();
    // Transposed copies keep each descriptor contiguous in the inner loop.
    const MatrixX qt = query.transpose();
    const MatrixX rt = reference.transpose();
    MatrixX s(query.rows(), reference.rows());
    for (Eigen::Index j = 0; j < rt.cols(); ++j)
    {
        const double* r = rt.col(j).data();
        for (Eigen::Index i = 0; i < qt.cols(); ++i)
        {
            const double* q = qt.col(i).data();
            double acc = 0.0;
            for (Eigen::Index c = 0; c < d; ++c)
            {
                const double diff = q[c] - r[c];
                acc += diff * diff;
            }
            s(i, j) = -acc;
        }
    }
    return s;
}

MatrixX similarity_matrix(const Descriptor& query, const Descriptor& reference)
{
    return similarity_matrix(query.values, reference.values);
}

MatrixX sinkhorn_normalize(const MatrixX& similarity, const SinkhornConfig& config)
{
    config.validate();
    if (!similarity.allFinite())
        throw Error(ErrorCode::InvalidArgument, "similarity matrix has non-finite entries");
    MatrixX p = ((similarity.colwise() - similarity.rowwise().maxCoeff()) / config.lambda).array().exp();

    auto normalize_rows = [&] {
        for (Eigen::Index i = 0; i < p.rows(); ++i)
            p.row(i) /= p.row(i).sum();
    };
    for (int it = 0; it < config.iterations; ++it)
    {
        normalize_rows();
        for (Eigen::Index j = 0; j < p.cols(); ++j)
        {
            const double sum = p.col(j).sum();
            if (sum > 0.0)
                p.col(j) /= sum;
        }
    }
    normalize_rows();
    return p;
}

FunctionalMap fit_functional_map(const SpectralBasis& query_basis, const SpectralBasis& reference_basis,
                                 const Descriptor& query, const Descriptor& reference, double mu)
{
    if (query.values.rows() != query_basis.eigenfunctions.rows() ||
        reference.values.rows() != reference_basis.eigenfunctions.rows())
        throw Error(ErrorCode::DimensionMismatch, "descriptors and bases live on different point sets");
    if (query.dimension() != reference.dimension())
        throw Error(ErrorCode::DimensionMismatch, "descriptor dimensions differ");
    if (mu < 0.0)
        throw Error(ErrorCode::InvalidArgument, "mu must be nonnegative");

    const MatrixX a = query_basis.eigenfunctions.transpose() * query_basis.mass.asDiagonal() * query.values;
    const MatrixX b =
        reference_basis.eigenfunctions.transpose() * reference_basis.mass.asDiagonal() * reference.values;
    const Eigen::Index kq = a.rows();
    const Eigen::Index kr = b.rows();

    FunctionalMap out;
    Eigen::ColPivHouseholderQR<MatrixX> qr(a);
    out.rank_deficient = qr.rank() < std::min(a.rows(), a.cols());

    const MatrixX gram = a * a.transpose();
    const double ridge = out.rank_deficient ? 1e-10 * std::max(gram.trace() / static_cast<double>(kq), 1e-300) : 0.0;
    out.C.resize(kr, kq);
    for (Eigen::Index i = 0; i < kr; ++i)
    {
        MatrixX system = gram;
        for (Eigen::Index j = 0; j < kq; ++j)
        {
            const double delta = reference_basis.eigenvalues(i) - query_basis.eigenvalues(j);
            system(j, j) += mu * delta * delta + ridge;
        }
        const VectorX rhs = a * b.row(i).transpose();
        Eigen::LDLT<MatrixX> ldlt(system);
        out.C.row(i) = ldlt.solve(rhs).transpose();
    }
    return out;
}

namespace
{

int row_argmax(const MatrixX& m, Eigen::Index row)
{
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j)
        if (m(row, j) > m(row, best))
            best = j;
    return static_cast<int>(best);
}

} // namespace

PointMap point_map_from_similarity(const MatrixX& similarity, const std::optional<SinkhornConfig>& sinkhorn,
                                   double softmax_temperature)
{
    if (similarity.cols() == 0)
        throw Error(ErrorCode::DimensionMismatch, "empty reference");
    PointMap map;
    map.target_index.resize(static_cast<std::size_t>(similarity.rows()));
    map.confidence.resize(similarity.rows());
    if (sinkhorn)
    {
        const MatrixX plan = sinkhorn_normalize(similarity, *sinkhorn);
        for (Eigen::Index i = 0; i < plan.rows(); ++i)
        {
            const int j = row_argmax(plan, i);
            map.target_index[static_cast<std::size_t>(i)] = j;
            map.confidence(i) = plan(i, j);
        }
        return map;
    }
    if (!(softmax_temperature > 0.0))
        throw Error(ErrorCode::InvalidArgument, "softmax temperature must be positive");
    for (Eigen::Index i = 0; i < similarity.rows(); ++i)
    {
        const int j = row_argmax(similarity, i);
        map.target_index[static_cast<std::size_t>(i)] = j;
        const double mass = ((similarity.row(i).array() - similarity(i, j)) / softmax_temperature).exp().sum();
        map.confidence(i) = 1.0 / mass;
    }
    return map;
}

PointMap point_map_from_functional_map(const FunctionalMap& map, const SpectralBasis& query_basis,
                                       const SpectralBasis& reference_basis)
{
    if (map.C.cols() != query_basis.size() || map.C.rows() != reference_basis.size())
        throw Error(ErrorCode::DimensionMismatch, "functional map does not match the bases");
    const MatrixX transported = query_basis.eigenfunctions * map.C.transpose();
    return point_map_from_similarity(similarity_matrix(transported, reference_basis.eigenfunctions), std::nullopt);
}

AffordanceField transfer_affordance(const PointMap& map, const AffordanceField& reference_field)
{
    AffordanceField out;
    out.threshold = reference_field.threshold;
    out.heat.resize(static_cast<Eigen::Index>(map.size()));
    for (std::size_t i = 0; i < map.size(); ++i)
    {
        const int t = map.target_index[i];
        if (t < 0 || t >= reference_field.size())
            throw Error(ErrorCode::DimensionMismatch, "point map target outside the reference field");
        out.heat(static_cast<Eigen::Index>(i)) = reference_field.heat(t);
    }
    out.relabel();
    return out;
}

PointMap Downsampling::lift(const PointMap& reduced) const
{
    PointMap out;
    out.target_index.resize(assignment.size());
    out.confidence.resize(static_cast<Eigen::Index>(assignment.size()));
    for (std::size_t i = 0; i < assignment.size(); ++i)
    {
        out.target_index[i] = reduced.target_index[static_cast<std::size_t>(assignment[i])];
        out.confidence(static_cast<Eigen::Index>(i)) = reduced.confidence(assignment[i]);
    }
    return out;
}

namespace
{

using VoxelKey = std::tuple<long long, long long, long long>;

std::map<VoxelKey, std::vector<int>> bucket(const Points& points, const Vec3& origin, double size)
{
    std::map<VoxelKey, std::vector<int>> cells;
    for (Eigen::Index i = 0; i < points.cols(); ++i)
    {
        const Vec3 c = ((points.col(i) - origin) / size).array().floor();
        cells[{static_cast<long long>(c.x()), static_cast<long long>(c.y()), static_cast<long long>(c.z())}]
            .push_back(static_cast<int>(i));
    }
    return cells;
}

} // namespace

Downsampling voxel_downsample(const Points& points, int cap)
{
    if (cap < 1)
        throw Error(ErrorCode::InvalidArgument, "downsampling cap must be positive");
    const auto n = static_cast<int>(points.cols());
    Downsampling out;
    out.assignment.resize(static_cast<std::size_t>(n));
    if (n <= cap)
    {
        out.representatives.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            out.representatives[static_cast<std::size_t>(i)] = out.assignment[static_cast<std::size_t>(i)] = i;
        return out;
    }

    const Vec3 origin = points.rowwise().minCoeff();
    const double diag = (points.rowwise().maxCoeff() - origin).norm();
    // Largest cell count not above the cap: bisect on the voxel size.
    double lo = diag * 1e-6;
    double hi = diag;
    for (int it = 0; it < 60; ++it)
    {
        const double mid = std::sqrt(lo * hi);
        if (static_cast<int>(bucket(points, origin, mid).size()) > cap)
            lo = mid;
        else
            hi = mid;
    }

    const auto cells = bucket(points, origin, hi);
    std::vector<std::pair<int, std::vector<int>>> groups;
    for (const auto& [key, members] : cells)
    {
        Vec3 mean = Vec3::Zero();
        for (int i : members)
            mean += points.col(i);
        mean /= static_cast<double>(members.size());
        int best = members.front();
        for (int i : members)
            if ((points.col(i) - mean).squaredNorm() < (points.col(best) - mean).squaredNorm())
                best = i;
        groups.emplace_back(best, members);
    }
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t g = 0; g < groups.size(); ++g)
    {
        out.representatives.push_back(groups[g].first);
        for (int i : groups[g].second)
            out.assignment[static_cast<std::size_t>(i)] = static_cast<int>(g);
    }
    return out;
}

} // namespace aft
