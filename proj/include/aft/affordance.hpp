#pragma once

#include "aft/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace aft
{

/// Per-point heat in [0,1] with labels derived as heat >= threshold (1 = human grasp).
struct AffordanceField
{
    VectorX heat;
    double threshold = 0.5;
    std::vector<std::uint8_t> labels;

    Eigen::Index size() const noexcept { return heat.size(); }
    std::size_t positives() const;

    /// Recomputes `labels` from `heat` and `threshold`.
    void relabel();
    /// True when `labels` equal the thresholded heat.
    bool consistent() const;
};

AffordanceField binarize(const VectorX& heat, double threshold = 0.5);

/// Pointwise mean of the per-user fields, clamped to [0,1].
VectorX average_contacts(std::span<const VectorX> per_user_heats);

enum class SubpartRole
{
    GraspSide,    ///< where the human hand goes
    FunctionSide, ///< the working end
    Neutral,
};

std::string_view to_string(SubpartRole role);
SubpartRole subpart_role_from_string(std::string_view name);

struct Subpart
{
    std::string name;
    Vec3 center = Vec3::Zero();
    SubpartRole role = SubpartRole::Neutral;
};

struct DatabaseEntry
{
    std::string object_class;
    std::string task;
    PointCloud reference;
    std::vector<Subpart> subparts;
    AffordanceField affordance;

    const Subpart* find_subpart(std::string_view name) const;
};

/// Checks the entry invariants. Hard violations throw ManifestError; soft ones
/// (several label-1 regions, non-canonical reference) are returned as warnings.
std::vector<std::string> validate_entry(const DatabaseEntry& entry);

/// Number of connected label-1 regions on the symmetrized k-NN graph.
int count_label_regions(const PointCloud& cloud, const std::vector<std::uint8_t>& labels, int knn = 8);

struct Database
{
    static constexpr int current_version = 1;

    int version = current_version;
    std::vector<DatabaseEntry> entries;

    /// Appends `entry`; a repeated (object_class, task) pair throws DuplicateEntry.
    void add(DatabaseEntry entry);
    const DatabaseEntry* find(std::string_view object_class, std::string_view task) const;
    bool empty() const noexcept { return entries.empty(); }
};

/// Writes `manifest` (JSON) and one cloud and one heat PLY per entry next to it.
void save_database(const Database& db, const std::filesystem::path& manifest);
Database load_database(const std::filesystem::path& manifest);

} // namespace aft
