#include "aft/affordance.hpp"

#include "aft/ply.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

namespace aft
{

std::size_t AffordanceField::positives() const
{
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

void AffordanceField::relabel()
{
    labels.resize(static_cast<std::size_t>(heat.size()));
    for (Eigen::Index i = 0; i < heat.size(); ++i)
        labels[static_cast<std::size_t>(i)] = heat(i) >= threshold ? 1 : 0;
}

bool AffordanceField::consistent() const
{
    if (labels.size() != static_cast<std::size_t>(heat.size()))
        return false;
    for (Eigen::Index i = 0; i < heat.size(); ++i)
        if (labels[static_cast<std::size_t>(i)] != (heat(i) >= threshold ? 1 : 0))
            return false;
    return true;
}

AffordanceField binarize(const VectorX& heat, double threshold)
{
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0,1)");
    AffordanceField field;
    field.heat = heat;
    field.threshold = threshold;
    field.relabel();
    return field;
}

VectorX average_contacts(std::span<const VectorX> per_user_heats)
{
    if (per_user_heats.empty())
        throw Error(ErrorCode::InvalidArgument, "no contact fields");
    const Eigen::Index n = per_user_heats.front().size();
    VectorX sum = VectorX::Zero(n);
    for (const VectorX& h : per_user_heats)
    {
        if (h.size() != n)
            throw Error(ErrorCode::LengthMismatch, "contact fields differ in length");
        sum += h;
    }
    return (sum / static_cast<double>(per_user_heats.size())).cwiseMax(0.0).cwiseMin(1.0);
}

std::string_view to_string(SubpartRole role)
{
    switch (role)
    {
    case SubpartRole::GraspSide: return "grasp-side";
    case SubpartRole::FunctionSide: return "function-side";
    case SubpartRole::Neutral: return "neutral";
    }
    return "neutral";
}

SubpartRole subpart_role_from_string(std::string_view name)
{
    if (name == "grasp-side")
        return SubpartRole::GraspSide;
    if (name == "function-side")
        return SubpartRole::FunctionSide;
    if (name == "neutral")
        return SubpartRole::Neutral;
    throw Error(ErrorCode::ManifestError, "unknown subpart role '" + std::string(name) + "'");
}

const Subpart* DatabaseEntry::find_subpart(std::string_view name) const
{
    for (const Subpart& s : subparts)
        if (s.name == name)
            return &s;
    return nullptr;
}

int count_label_regions(const PointCloud& cloud, const std::vector<std::uint8_t>& labels, int knn)
{
    const auto n = static_cast<std::size_t>(cloud.size());
    if (labels.size() != n)
        throw Error(ErrorCode::LengthMismatch, "labels do not match the cloud");
    if (n < 2)
        return std::count(labels.begin(), labels.end(), std::uint8_t{1}) > 0 ? 1 : 0;

    const auto graph = knn_graph(cloud.points, std::min<int>(knn, static_cast<int>(n) - 1));
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (int j : graph[i])
            if (labels[i] && labels[j])
                parent[find(static_cast<int>(i))] = find(j);

    std::set<int> roots;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i])
            roots.insert(find(static_cast<int>(i)));
    return static_cast<int>(roots.size());
}

std::vector<std::string> validate_entry(const DatabaseEntry& entry)
{
    const std::string tag = entry.object_class + "/" + entry.task;
    if (entry.object_class.empty() || entry.task.empty())
        throw Error(ErrorCode::ManifestError, "entry needs an object class and a task");
    if (entry.reference.size() < 4)
        throw Error(ErrorCode::ManifestError, tag + ": reference cloud needs at least 4 points");
    entry.reference.validate();
    if (entry.subparts.empty())
        throw Error(ErrorCode::ManifestError, tag + ": at least one subpart is required");
    if (entry.affordance.size() != entry.reference.size())
        throw Error(ErrorCode::ManifestError, tag + ": affordance length differs from the reference cloud");
    if (!(entry.affordance.threshold > 0.0 && entry.affordance.threshold < 1.0))
        throw Error(ErrorCode::ManifestError, tag + ": threshold must lie in (0,1)");
    if ((entry.affordance.heat.array() < 0.0).any() || (entry.affordance.heat.array() > 1.0).any())
        throw Error(ErrorCode::ManifestError, tag + ": heat must lie in [0,1]");
    if (!entry.affordance.consistent())
        throw Error(ErrorCode::ManifestError, tag + ": labels disagree with the threshold");

    const Vec3 lo = entry.reference.points.rowwise().minCoeff();
    const Vec3 hi = entry.reference.points.rowwise().maxCoeff();
    const Vec3 mid = 0.5 * (lo + hi);
    const Vec3 half = 0.75 * (hi - lo);
    std::set<std::string> names;
    for (const Subpart& s : entry.subparts)
    {
        if (s.name.empty())
            throw Error(ErrorCode::ManifestError, tag + ": subpart without a name");
        if (!names.insert(s.name).second)
            throw Error(ErrorCode::ManifestError, tag + ": duplicate subpart '" + s.name + "'");
        if (!s.center.allFinite() || ((s.center - mid).cwiseAbs().array() > half.array() + 1e-12).any())
            throw Error(ErrorCode::ManifestError, tag + ": subpart '" + s.name + "' lies outside 1.5x the bounding box");
    }

    std::vector<std::string> warnings;
    const NormalizedCloud canon = normalize_cloud(entry.reference);
    if ((canon.cloud.points - entry.reference.points).cwiseAbs().maxCoeff() > 1e-6)
        warnings.push_back(tag + ": reference is not in canonical orientation");
    const int regions = count_label_regions(entry.reference, entry.affordance.labels);
    if (regions > 1)
        warnings.push_back(tag + ": " + std::to_string(regions) + " separate grasp regions");
    return warnings;
}

void Database::add(DatabaseEntry entry)
{
    if (find(entry.object_class, entry.task) != nullptr)
        throw Error(ErrorCode::DuplicateEntry,
                    "entry (" + entry.object_class + ", " + entry.task + ") already exists");
    entries.push_back(std::move(entry));
}

const DatabaseEntry* Database::find(std::string_view object_class, std::string_view task) const
{
    for (const DatabaseEntry& e : entries)
        if (e.object_class == object_class && e.task == task)
            return &e;
    return nullptr;
}

namespace
{

using nlohmann::json;

std::string file_stem(const DatabaseEntry& e)
{
    std::string stem = e.object_class + "-" + e.task;
    for (char& c : stem)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
            c = '_';
    return stem;
}

Colors heat_colors(const VectorX& heat)
{
    Colors colors = Colors::Zero(3, heat.size());
    for (Eigen::Index i = 0; i < heat.size(); ++i)
        colors(0, i) = static_cast<std::uint8_t>(std::lround(std::clamp(heat(i), 0.0, 1.0) * 255.0));
    return colors;
}

template <typename T>
T require(const json& node, const char* key, const std::string& where)
{
    if (!node.contains(key))
        throw Error(ErrorCode::ManifestError, where + ": missing field '" + key + "'");
    try
    {
        return node.at(key).get<T>();
    }
    catch (const json::exception&)
    {
        throw Error(ErrorCode::ManifestError, where + ": field '" + key + "' has the wrong type");
    }
}

} // namespace

void save_database(const Database& db, const std::filesystem::path& manifest)
{
    const std::filesystem::path dir = manifest.parent_path();
    json root;
    root["version"] = db.version;
    root["entries"] = json::array();
    std::set<std::string> stems;
    for (const DatabaseEntry& e : db.entries)
    {
        std::string stem = file_stem(e);
        for (int suffix = 2; !stems.insert(stem).second; ++suffix)
            stem = file_stem(e) + "-" + std::to_string(suffix);

        json node;
        node["object_class"] = e.object_class;
        node["task"] = e.task;
        node["cloud"] = stem + ".ply";
        node["heat"] = stem + ".heat.ply";
        node["threshold"] = e.affordance.threshold;
        if (!e.reference.source_id.empty())
            node["source_id"] = e.reference.source_id;
        node["subparts"] = json::array();
        for (const Subpart& s : e.subparts)
            node["subparts"].push_back(
                {{"name", s.name}, {"center", {s.center.x(), s.center.y(), s.center.z()}}, {"role", to_string(s.role)}});
        root["entries"].push_back(node);

        write_ply(dir / (stem + ".ply"), e.reference);
        const Colors colors = heat_colors(e.affordance.heat);
        PointCloud bare(e.reference.points, e.reference.source_id);
        write_ply(dir / (stem + ".heat.ply"), bare, PlyWriteOptions{.colors = &colors, .heat = &e.affordance.heat});
    }
    atomic_write(manifest, root.dump(2) + "\n");
}

Database load_database(const std::filesystem::path& manifest)
{
    if (!std::filesystem::exists(manifest))
        throw Error(ErrorCode::MissingAsset, "manifest " + manifest.string() + " does not exist");
    json root;
    try
    {
        root = json::parse(read_file(manifest));
    }
    catch (const json::parse_error& e)
    {
        throw Error(ErrorCode::ManifestError, manifest.string() + ": " + e.what());
    }
    if (!root.is_object())
        throw Error(ErrorCode::ManifestError, manifest.string() + ": top level must be an object");
    const int version = require<int>(root, "version", manifest.string());
    if (version != Database::current_version)
        throw Error(ErrorCode::VersionMismatch, "manifest version " + std::to_string(version) + ", expected " +
                                                    std::to_string(Database::current_version));
    if (!root.contains("entries") || !root["entries"].is_array())
        throw Error(ErrorCode::ManifestError, manifest.string() + ": 'entries' must be an array");

    const std::filesystem::path dir = manifest.parent_path();
    Database db;
    db.version = version;
    std::size_t index = 0;
    for (const json& node : root["entries"])
    {
        const std::string where = "entry " + std::to_string(index++);
        DatabaseEntry e;
        e.object_class = require<std::string>(node, "object_class", where);
        e.task = require<std::string>(node, "task", where);
        const auto cloud_file = dir / require<std::string>(node, "cloud", where);
        const auto heat_file = dir / require<std::string>(node, "heat", where);
        for (const auto& f : {cloud_file, heat_file})
            if (!std::filesystem::exists(f))
                throw Error(ErrorCode::MissingAsset, where + ": " + f.string() + " does not exist");

        e.reference = read_cloud(cloud_file);
        e.reference.source_id = node.contains("source_id") ? require<std::string>(node, "source_id", where) : "";
        const PlyData heat = read_ply(heat_file);
        if (heat.cloud.size() != e.reference.size())
            throw Error(ErrorCode::ManifestError, where + ": heat file has a different point count");
        if (heat.heat)
            e.affordance.heat = *heat.heat;
        else if (heat.colors)
            e.affordance.heat = heat.colors->row(0).cast<double>().transpose() / 255.0;
        else
            throw Error(ErrorCode::ManifestError, where + ": heat file carries neither heat nor color");
        e.affordance.threshold = require<double>(node, "threshold", where);
        e.affordance.relabel();

        if (!node.contains("subparts") || !node["subparts"].is_array())
            throw Error(ErrorCode::ManifestError, where + ": 'subparts' must be an array");
        for (const json& sp : node["subparts"])
        {
            Subpart s;
            s.name = require<std::string>(sp, "name", where);
            const auto c = require<std::vector<double>>(sp, "center", where);
            if (c.size() != 3)
                throw Error(ErrorCode::ManifestError, where + ": subpart center needs 3 coordinates");
            s.center = Vec3(c[0], c[1], c[2]);
            s.role = sp.contains("role") ? subpart_role_from_string(require<std::string>(sp, "role", where))
                                         : SubpartRole::Neutral;
            e.subparts.push_back(std::move(s));
        }
        validate_entry(e);
        db.add(std::move(e));
    }
    return db;
}

} // namespace aft
