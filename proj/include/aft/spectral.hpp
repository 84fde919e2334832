#pragma once

#include "aft/geometry.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aft
{

using SparseMatrix = Eigen::SparseMatrix<double>;

struct SpectralConfig
{
    enum class Weighting
    {
        Gaussian, ///< exp(-d^2 / sigma^2)
        Binary,   ///< unit edge weights
    };
    enum class Mass
    {
        Degree,   ///< M_ii = weighted vertex degree
        Identity, ///< M = I
    };

    int num_eigenpairs = 200;
    /// Graph degree before symmetrization; a point is never its own neighbour.
    int knn = 8;
    /// Gaussian bandwidth; empty selects the mean k-NN distance.
    std::optional<double> bandwidth;
    Weighting weighting = Weighting::Gaussian;
    Mass mass = Mass::Degree;

    /// min(num_eigenpairs, N - 2), never below 1.
    int effective_count(Eigen::Index num_points) const;
};

/// Symmetrized k-NN graph Laplacian restricted to its largest connected component.
struct GraphLaplacian
{
    SparseMatrix stiffness;
    VectorX mass;
    /// Original cloud index of every retained vertex, ascending.
    std::vector<int> vertex_map;
    int num_components = 1;
    double bandwidth = 0.0;
    std::vector<std::string> warnings;

    bool disconnected() const { return num_components > 1; }
};

GraphLaplacian build_laplacian(const PointCloud& cloud, const SpectralConfig& config);

/// Generalized eigenpairs of L phi = lambda M phi, ascending.
struct SpectralBasis
{
    VectorX eigenvalues;
    /// N x k, columns M-orthonormal.
    MatrixX eigenfunctions;
    VectorX mass;

    Eigen::Index size() const { return eigenvalues.size(); }
};

struct EigenSolverOptions
{
    /// Ritz-residual tolerance relative to the shifted-inverse eigenvalue.
    double tolerance = 1e-11;
    int max_restarts = 500;
    std::uint64_t seed = 0x5eed;
    /// Problems up to this size are solved densely.
    int dense_threshold = 400;
    /// Post-condition enforced on every returned pair.
    double residual_bound = 1e-6;
};

/// Smallest-k generalized eigenpairs by shift-invert Lanczos with thick restarts.
/// Throws ConvergenceFailure when the restart budget is exhausted or the
/// residual post-condition fails.
SpectralBasis eigendecompose(const SparseMatrix& stiffness, const VectorX& mass, int k,
                             const EigenSolverOptions& options = {});

/// build_laplacian followed by eigendecompose with the effective pair count.
struct CloudSpectrum
{
    GraphLaplacian laplacian;
    SpectralBasis basis;
};
CloudSpectrum compute_spectrum(const PointCloud& cloud, const SpectralConfig& config,
                               const EigenSolverOptions& options = {});

/// Per-pair generalized residual norms ||L phi_i - lambda_i M phi_i||.
VectorX eigen_residuals(const SparseMatrix& stiffness, const SpectralBasis& basis);

enum class DescriptorKind
{
    Xyz,
    Hks,
    Wks,
    External,
};

std::string_view to_string(DescriptorKind kind);
DescriptorKind descriptor_kind_from_string(std::string_view name);

/// Per-point features, one row per point.
struct Descriptor
{
    MatrixX values;
    DescriptorKind kind = DescriptorKind::External;
    /// Time or energy grid the columns were evaluated on.
    std::vector<double> params;

    Eigen::Index dimension() const { return values.cols(); }
};

/// Eigenvalues at or below this are treated as zero modes.
double eigenvalue_floor(const SpectralBasis& basis);

/// hks_t(x) = sum_i exp(-lambda_i t) phi_i(x)^2; columns optionally L1-normalized.
Descriptor compute_hks(const SpectralBasis& basis, std::span<const double> times, bool normalize = true);

/// wks_e(x) = C_e sum_i phi_i(x)^2 exp(-(e - log lambda_i)^2 / (2 sigma^2)), where C_e makes
/// the band weights sum to one. Zero modes are skipped.
Descriptor compute_wks(const SpectralBasis& basis, std::span<const double> energies, double sigma);

/// `count` times log-spaced in [4 ln10 / lambda_max, 4 ln10 / lambda_min_positive].
std::vector<double> default_hks_times(const SpectralBasis& basis, int count = 16);

struct WksGrid
{
    std::vector<double> energies;
    double sigma = 1.0;
};
/// `count` energies over [log lambda_min_positive, log lambda_max], sigma = 7 x step.
WksGrid default_wks_grid(const SpectralBasis& basis, int count = 100);

/// Content hash of the points and every configuration field (FNV-1a, 64 bit).
std::uint64_t basis_cache_key(const PointCloud& cloud, const SpectralConfig& config);

/// `<cloud>.basis-<16 hex digits>.bin` next to the cloud file.
std::filesystem::path basis_cache_path(const std::filesystem::path& cloud_path, std::uint64_t key);

/// Layout: 8-byte magic "AFTBASIS", N and k as little-endian uint64, then little-endian
/// float64 eigenvalues (k), mass (N) and eigenfunctions (N x k, column-major).
std::string encode_basis(const SpectralBasis& basis);
SpectralBasis decode_basis(const std::string& bytes);

} // namespace aft
