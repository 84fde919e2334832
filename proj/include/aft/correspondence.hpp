#pragma once

#include "aft/affordance.hpp"
#include "aft/spectral.hpp"

#include <optional>
#include <vector>

namespace aft
{

struct SinkhornConfig
{
    int iterations = 10;
    /// Temperature of the exponentiation exp(S / lambda).
    double lambda = 0.2;

    void validate() const;
};

/// One reference index per query point, with a diagnostic confidence in [0,1].
struct PointMap
{
    std::vector<int> target_index;
    VectorX confidence;

    std::size_t size() const noexcept { return target_index.size(); }
};

/// Maps query spectral coefficients to reference coefficients (k_ref x k_query).
struct FunctionalMap
{
    MatrixX C;
    /// The query coefficient matrix lost rank; C came from the ridge-regularized system.
    bool rank_deficient = false;
};

/// S(i,j) = -||q_i - r_j||^2, accumulated per entry so results do not depend on blocking.
MatrixX similarity_matrix(const MatrixX& query, const MatrixX& reference);
MatrixX similarity_matrix(const Descriptor& query, const Descriptor& reference);

/// exp((S - rowmax) / lambda), then `iterations` row/column L1 passes, closing with a row pass.
MatrixX sinkhorn_normalize(const MatrixX& similarity, const SinkhornConfig& config = {});

/// Least-squares map C minimizing ||C A - B||^2 + mu ||C o (lambda_r 1^T - 1 lambda_q^T)||^2,
/// A and B being the mass-weighted spectral coefficients of the two descriptors.
FunctionalMap fit_functional_map(const SpectralBasis& query_basis, const SpectralBasis& reference_basis,
                                 const Descriptor& query, const Descriptor& reference, double mu = 1e-3);

/// Row argmax of the similarity (lowest index on ties). With `sinkhorn` the argmax and the
/// confidence are read from the normalized plan; otherwise the confidence is the winner's
/// share of the row softmax at `softmax_temperature`.
PointMap point_map_from_similarity(const MatrixX& similarity, const std::optional<SinkhornConfig>& sinkhorn,
                                   double softmax_temperature = 0.2);

/// Nearest neighbour between C-transported query spectral embeddings and reference embeddings.
PointMap point_map_from_functional_map(const FunctionalMap& map, const SpectralBasis& query_basis,
                                       const SpectralBasis& reference_basis);

/// Query point i receives the heat of reference point target_index[i].
AffordanceField transfer_affordance(const PointMap& map, const AffordanceField& reference_field);

/// Voxel-grid reduction to at most `cap` representatives.
struct Downsampling
{
    /// Original indices of the kept points, ascending.
    std::vector<int> representatives;
    /// For every original point, its position in `representatives`.
    std::vector<int> assignment;

    /// Lifts a map computed on the representatives back to every original point.
    PointMap lift(const PointMap& reduced) const;
};

Downsampling voxel_downsample(const Points& points, int cap);

/// Default upper bound on either side of a dense similarity matrix.
inline constexpr int max_dense_points = 5000;

} // namespace aft
