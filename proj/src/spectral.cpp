#include "aft/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <queue>

namespace aft
{

int SpectralConfig::effective_count(Eigen::Index num_points) const
{
    const auto cap = static_cast<int>(std::max<Eigen::Index>(num_points - 2, 1));
    return std::max(1, std::min(num_eigenpairs, cap));
}

namespace
{

std::vector<int> component_labels(const std::vector<std::vector<int>>& adjacency, int& count)
{
    const int n = static_cast<int>(adjacency.size());
    std::vector<int> label(n, -1);
    count = 0;
    for (int s = 0; s < n; ++s)
    {
        if (label[s] >= 0)
            continue;
        std::queue<int> q;
        q.push(s);
        label[s] = count;
        while (!q.empty())
        {
            const int u = q.front();
            q.pop();
            for (int v : adjacency[u])
                if (label[v] < 0)
                {
                    label[v] = count;
                    q.push(v);
                }
        }
        ++count;
    }
    return label;
}

} // namespace

GraphLaplacian build_laplacian(const PointCloud& cloud, const SpectralConfig& config)
{
    const int n = static_cast<int>(cloud.size());
    if (config.knn < 1)
        throw Error(ErrorCode::InvalidArgument, "knn must be positive");
    if (n < config.knn + 1)
        throw Error(ErrorCode::InvalidArgument, "cloud has fewer than knn + 1 points");

    const auto graph = knn_graph(cloud.points, config.knn);

    GraphLaplacian out;
    if (config.bandwidth)
    {
        if (!(*config.bandwidth > 0.0))
            throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
        out.bandwidth = *config.bandwidth;
    }
    else
    {
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j : graph[i])
                sum += (cloud.points.col(i) - cloud.points.col(j)).norm();
        out.bandwidth = sum / static_cast<double>(n * config.knn);
        if (!(out.bandwidth > 0.0))
            throw Error(ErrorCode::DegenerateCloud, "all k-NN distances are zero");
    }

    // Union symmetrization: i~j when either lists the other.
    std::vector<std::vector<int>> adjacency(n);
    for (int i = 0; i < n; ++i)
        for (int j : graph[i])
        {
            adjacency[i].push_back(j);
            adjacency[j].push_back(i);
        }
    for (auto& row : adjacency)
    {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }

    int num_components = 0;
    const std::vector<int> label = component_labels(adjacency, num_components);
    out.num_components = num_components;
    int keep = 0;
    if (num_components > 1)
    {
        std::vector<int> sizes(num_components, 0);
        for (int l : label)
            ++sizes[l];
        keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
        out.warnings.push_back("k-NN graph has " + std::to_string(num_components) +
                               " components; keeping the largest (" + std::to_string(sizes[keep]) + " of " +
                               std::to_string(n) + " points)");
    }

    std::vector<int> local(n, -1);
    for (int i = 0; i < n; ++i)
        if (label[i] == keep)
        {
            local[i] = static_cast<int>(out.vertex_map.size());
            out.vertex_map.push_back(i);
        }
    const int m = static_cast<int>(out.vertex_map.size());

    const double inv_s2 = 1.0 / (out.bandwidth * out.bandwidth);
    std::vector<Eigen::Triplet<double>> triplets;
    VectorX degree = VectorX::Zero(m);
    for (int a = 0; a < m; ++a)
    {
        const int i = out.vertex_map[a];
        for (int j : adjacency[i])
        {
            const int b = local[j];
            double w = 1.0;
            if (config.weighting == SpectralConfig::Weighting::Gaussian)
                w = std::exp(-(cloud.points.col(i) - cloud.points.col(j)).squaredNorm() * inv_s2);
            triplets.emplace_back(a, b, -w);
            degree(a) += w;
        }
    }
    for (int a = 0; a < m; ++a)
        triplets.emplace_back(a, a, degree(a));
    out.stiffness.resize(m, m);
    out.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    out.stiffness.makeCompressed();

    if (config.mass == SpectralConfig::Mass::Degree)
    {
        out.mass = degree;
        if ((out.mass.array() <= 0.0).any())
            throw Error(ErrorCode::DegenerateCloud, "vertex with zero weighted degree");
    }
    else
    {
        out.mass = VectorX::Ones(m);
    }
    return out;
}

CloudSpectrum compute_spectrum(const PointCloud& cloud, const SpectralConfig& config,
                               const EigenSolverOptions& options)
{
    CloudSpectrum out;
    out.laplacian = build_laplacian(cloud, config);
    const auto m = static_cast<Eigen::Index>(out.laplacian.vertex_map.size());
    out.basis = eigendecompose(out.laplacian.stiffness, out.laplacian.mass, config.effective_count(m), options);
    return out;
}

VectorX eigen_residuals(const SparseMatrix& stiffness, const SpectralBasis& basis)
{
    VectorX out(basis.size());
    for (Eigen::Index i = 0; i < basis.size(); ++i)
    {
        const VectorX phi = basis.eigenfunctions.col(i);
        out(i) = (stiffness * phi - basis.eigenvalues(i) * basis.mass.cwiseProduct(phi)).norm();
    }
    return out;
}

std::string_view to_string(DescriptorKind kind)
{
    switch (kind)
    {
    case DescriptorKind::Xyz: return "xyz";
    case DescriptorKind::Hks: return "hks";
    case DescriptorKind::Wks: return "wks";
    case DescriptorKind::External: return "external";
    }
    return "external";
}

DescriptorKind descriptor_kind_from_string(std::string_view name)
{
    if (name == "xyz")
        return DescriptorKind::Xyz;
    if (name == "hks")
        return DescriptorKind::Hks;
    if (name == "wks")
        return DescriptorKind::Wks;
    if (name == "external")
        return DescriptorKind::External;
    throw Error(ErrorCode::InvalidArgument, "unknown descriptor kind '" + std::string(name) + "'");
}

double eigenvalue_floor(const SpectralBasis& basis)
{
    const double top = basis.size() > 0 ? basis.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
    return 1e-8 * std::max(1.0, top);
}

Descriptor compute_hks(const SpectralBasis& basis, std::span<const double> times, bool normalize)
{
    if (times.empty())
        throw Error(ErrorCode::InvalidArgument, "HKS needs at least one time");
    for (double t : times)
        if (!(t > 0.0))
            throw Error(ErrorCode::InvalidArgument, "HKS times must be positive");

    const MatrixX squared = basis.eigenfunctions.array().square();
    const auto nt = static_cast<Eigen::Index>(times.size());
    MatrixX weights(basis.size(), nt);
    for (Eigen::Index c = 0; c < nt; ++c)
        weights.col(c) = (-basis.eigenvalues.cwiseMax(0.0).array() * times[c]).exp();

    Descriptor out;
    out.kind = DescriptorKind::Hks;
    out.params.assign(times.begin(), times.end());
    out.values = squared * weights;
    if (normalize)
        for (Eigen::Index c = 0; c < nt; ++c)
        {
            const double s = out.values.col(c).cwiseAbs().sum();
            if (s > 0.0)
                out.values.col(c) /= s;
        }
    return out;
}

Descriptor compute_wks(const SpectralBasis& basis, std::span<const double> energies, double sigma)
{
    if (energies.empty())
        throw Error(ErrorCode::InvalidArgument, "WKS needs at least one energy");
    if (!(sigma > 0.0))
        throw Error(ErrorCode::InvalidArgument, "WKS sigma must be positive");

    const double floor = eigenvalue_floor(basis);
    std::vector<Eigen::Index> modes;
    for (Eigen::Index i = 0; i < basis.size(); ++i)
        if (basis.eigenvalues(i) > floor)
            modes.push_back(i);
    if (modes.empty())
        throw Error(ErrorCode::NoPositiveEigenvalues, "every eigenvalue is at or below the floor");

    const auto ne = static_cast<Eigen::Index>(energies.size());
    const auto nm = static_cast<Eigen::Index>(modes.size());
    MatrixX weights(nm, ne);
    for (Eigen::Index c = 0; c < ne; ++c)
    {
        for (Eigen::Index r = 0; r < nm; ++r)
        {
            const double d = energies[c] - std::log(basis.eigenvalues(modes[r]));
            weights(r, c) = std::exp(-d * d / (2.0 * sigma * sigma));
        }
        const double total = weights.col(c).sum();
        if (total > 0.0)
            weights.col(c) /= total;
    }

    MatrixX squared(basis.eigenfunctions.rows(), nm);
    for (Eigen::Index r = 0; r < nm; ++r)
        squared.col(r) = basis.eigenfunctions.col(modes[r]).array().square();

    Descriptor out;
    out.kind = DescriptorKind::Wks;
    out.params.assign(energies.begin(), energies.end());
    out.values = squared * weights;
    return out;
}

namespace
{

std::pair<double, double> positive_range(const SpectralBasis& basis)
{
    const double floor = eigenvalue_floor(basis);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < basis.size(); ++i)
    {
        const double l = basis.eigenvalues(i);
        if (l > floor)
        {
            lo = std::min(lo, l);
            hi = std::max(hi, l);
        }
    }
    if (!(hi > 0.0))
        throw Error(ErrorCode::NoPositiveEigenvalues, "no positive eigenvalue for the default grid");
    return {lo, hi};
}

std::vector<double> log_spaced(double a, double b, int count)
{
    std::vector<double> out(count);
    if (count == 1)
    {
        out[0] = std::sqrt(a * b);
        return out;
    }
    const double la = std::log(a);
    const double lb = std::log(b);
    for (int i = 0; i < count; ++i)
        out[i] = std::exp(la + (lb - la) * i / (count - 1));
    return out;
}

} // namespace

std::vector<double> default_hks_times(const SpectralBasis& basis, int count)
{
    if (count < 1)
        throw Error(ErrorCode::InvalidArgument, "HKS grid needs at least one time");
    const auto [lo, hi] = positive_range(basis);
    const double c = 4.0 * std::numbers::ln10;
    return log_spaced(c / hi, c / lo, count);
}

WksGrid default_wks_grid(const SpectralBasis& basis, int count)
{
    if (count < 1)
        throw Error(ErrorCode::InvalidArgument, "WKS grid needs at least one energy");
    const auto [lo, hi] = positive_range(basis);
    WksGrid out;
    const double a = std::log(lo);
    const double b = std::log(hi);
    const double step = count > 1 ? (b - a) / (count - 1) : 0.0;
    out.energies.resize(count);
    for (int i = 0; i < count; ++i)
        out.energies[i] = a + step * i;
    // A single-mode spectrum has zero span; fall back to a unit band.
    out.sigma = step > 0.0 ? 7.0 * step : 1.0;
    return out;
}

namespace
{

constexpr char kBasisMagic[8] = {'A', 'F', 'T', 'B', 'A', 'S', 'I', 'S'};

struct Fnv1a
{
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i)
        {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
    template <typename T>
    void value(const T& v)
    {
        bytes(&v, sizeof(T));
    }
};

template <typename T>
void put(std::string& out, T v)
{
    static_assert(std::endian::native == std::endian::little, "cache layout assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos)
{
    if (pos + sizeof(T) > in.size())
        throw Error(ErrorCode::IoError, "basis cache truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

std::uint64_t basis_cache_key(const PointCloud& cloud, const SpectralConfig& config)
{
    Fnv1a h;
    h.value(static_cast<std::uint64_t>(cloud.size()));
    h.bytes(cloud.points.data(), sizeof(double) * static_cast<std::size_t>(cloud.points.size()));
    h.value(config.num_eigenpairs);
    h.value(config.knn);
    h.value(config.bandwidth.value_or(-1.0));
    h.value(static_cast<int>(config.weighting));
    h.value(static_cast<int>(config.mass));
    return h.h;
}

std::filesystem::path basis_cache_path(const std::filesystem::path& cloud_path, std::uint64_t key)
{
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(key));
    std::filesystem::path out = cloud_path;
    out += std::string(".basis-") + hex + ".bin";
    return out;
}

std::string encode_basis(const SpectralBasis& basis)
{
    const auto n = static_cast<std::uint64_t>(basis.eigenfunctions.rows());
    const auto k = static_cast<std::uint64_t>(basis.eigenvalues.size());
    std::string out(kBasisMagic, sizeof(kBasisMagic));
    put(out, n);
    put(out, k);
    for (std::uint64_t i = 0; i < k; ++i)
        put(out, basis.eigenvalues(i));
    for (std::uint64_t i = 0; i < n; ++i)
        put(out, basis.mass(i));
    for (std::uint64_t c = 0; c < k; ++c)
        for (std::uint64_t r = 0; r < n; ++r)
            put(out, basis.eigenfunctions(r, c));
    return out;
}

SpectralBasis decode_basis(const std::string& bytes)
{
    if (bytes.size() < sizeof(kBasisMagic) || std::memcmp(bytes.data(), kBasisMagic, sizeof(kBasisMagic)) != 0)
        throw Error(ErrorCode::IoError, "basis cache has the wrong magic");
    std::size_t pos = sizeof(kBasisMagic);
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(bytes, pos));
    const auto k = static_cast<Eigen::Index>(get<std::uint64_t>(bytes, pos));
    SpectralBasis out;
    out.eigenvalues.resize(k);
    out.mass.resize(n);
    out.eigenfunctions.resize(n, k);
    for (Eigen::Index i = 0; i < k; ++i)
        out.eigenvalues(i) = get<double>(bytes, pos);
    for (Eigen::Index i = 0; i < n; ++i)
        out.mass(i) = get<double>(bytes, pos);
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index r = 0; r < n; ++r)
            out.eigenfunctions(r, c) = get<double>(bytes, pos);
    if (pos != bytes.size())
        throw Error(ErrorCode::IoError, "basis cache has trailing bytes");
    return out;
}

} // namespace aft
