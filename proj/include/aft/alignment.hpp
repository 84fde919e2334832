#pragma once

#include "aft/reasoner.hpp"

namespace aft
{

enum class AlignmentMethod
{
    PartAxis,
    PcaFallback,
};

std::string_view to_string(AlignmentMethod method);

struct AlignmentOptions
{
    /// A part-axis rotation within this angle of a signed axis permutation is replaced by it.
    /// Both clouds are PCA-canonical, so those are the exact candidates.
    double snap_angle = 20.0 * 3.14159265358979323846 / 180.0;
    /// Mapped centers closer than this fraction of the extent are rejected.
    double min_center_separation = 0.05;
};

struct AlignmentResult
{
    /// Maps the normalized query into the proxy frame.
    RigidTransform transform;
    PointCloud aligned_query;
    AlignmentMethod method = AlignmentMethod::PartAxis;
    /// RMS distance between transformed query centers and their proxy subparts.
    double residual = 0.0;
    bool snapped = false;
};

/// Rotates the normalized `query` so that the axis through its first two mapped part
/// centers lies on the corresponding proxy axis. A third pair fixes the roll in closed
/// form; with two pairs the roll minimizes the one-sided nearest-point distance to the proxy
/// over 10-degree steps. A single pair falls back to a 180-degree flip about z decided by
/// half-spaces.
AlignmentResult align_query(const PointCloud& query, const PartMapping& mapping, const DatabaseEntry& proxy,
                            const AlignmentOptions& options = {});

} // namespace aft
