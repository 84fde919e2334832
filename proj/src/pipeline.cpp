#include "aft/pipeline.hpp"

#include "aft/ply.hpp"

#include <cmath>
#include <set>

namespace aft
{

std::string_view to_string(CorrespondenceMode mode)
{
    return mode == CorrespondenceMode::Nearest ? "nearest" : "functional_map";
}

CorrespondenceMode correspondence_mode_from_string(std::string_view name)
{
    if (name == "nearest")
        return CorrespondenceMode::Nearest;
    if (name == "functional_map")
        return CorrespondenceMode::FunctionalMap;
    throw Error(ErrorCode::InvalidArgument, "unknown correspondence mode '" + std::string(name) + "'");
}

void PipelineConfig::validate() const
{
    if (descriptor == DescriptorKind::External)
        throw Error(ErrorCode::InvalidArgument, "the pipeline computes xyz, hks or wks descriptors only");
    if (hks_times < 1 || wks_energies < 1)
        throw Error(ErrorCode::InvalidArgument, "descriptor grids need at least one sample");
    if (spectral.num_eigenpairs < 1 || spectral.knn < 1)
        throw Error(ErrorCode::InvalidArgument, "spectral settings must be positive");
    if (correspondence == CorrespondenceMode::FunctionalMap && descriptor == DescriptorKind::Xyz)
        throw Error(ErrorCode::InvalidArgument, "functional maps need a spectral descriptor");
    if (!(functional_map_mu >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "functional map mu must be nonnegative");
    sinkhorn.validate();
    if (max_points < 1)
        throw Error(ErrorCode::InvalidArgument, "max_points must be positive");
    if (reasoner != "rule" && reasoner != "llm")
        throw Error(ErrorCode::InvalidArgument, "reasoner must be 'rule' or 'llm'");
    if (num_regions < 1)
        throw Error(ErrorCode::InvalidArgument, "at least one region is needed");
    if (grasp_candidates < 1)
        throw Error(ErrorCode::InvalidArgument, "at least one grasp candidate is needed");
    if (!(max_width > 0.0))
        throw Error(ErrorCode::InvalidArgument, "max_width must be positive");
    if (reference_approach.norm() < 1e-12 || human_direction.norm() < 1e-12)
        throw Error(ErrorCode::InvalidArgument, "direction vectors must be nonzero");
    weights.validate();
}

namespace
{

nlohmann::json vec_json(const Vec3& v)
{
    return nlohmann::json::array({v.x(), v.y(), v.z()});
}

Vec3 json_vec(const nlohmann::json& j, const std::string& key)
{
    if (!j.is_array() || j.size() != 3)
        throw Error(ErrorCode::InvalidArgument, "config field '" + key + "' must be an array of three numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

nlohmann::json config_to_json(const PipelineConfig& c)
{
    nlohmann::json j;
    j["descriptor"] = to_string(c.descriptor);
    j["hks_times"] = c.hks_times;
    j["wks_energies"] = c.wks_energies;
    j["num_eigenpairs"] = c.spectral.num_eigenpairs;
    j["knn"] = c.spectral.knn;
    j["bandwidth"] = c.spectral.bandwidth ? nlohmann::json(*c.spectral.bandwidth) : nlohmann::json(nullptr);
    j["weighting"] = c.spectral.weighting == SpectralConfig::Weighting::Gaussian ? "gaussian" : "binary";
    j["mass"] = c.spectral.mass == SpectralConfig::Mass::Degree ? "degree" : "identity";
    j["correspondence"] = to_string(c.correspondence);
    j["functional_map_mu"] = c.functional_map_mu;
    j["sinkhorn_enabled"] = c.sinkhorn_enabled;
    j["sinkhorn_iterations"] = c.sinkhorn.iterations;
    j["sinkhorn_lambda"] = c.sinkhorn.lambda;
    j["max_points"] = c.max_points;
    j["reasoner"] = c.reasoner;
    j["num_regions"] = c.num_regions;
    j["alignment"] = c.alignment;
    j["snap_angle"] = c.alignment_options.snap_angle;
    j["min_center_separation"] = c.alignment_options.min_center_separation;
    j["seed"] = c.seed;
    j["grasp_candidates"] = c.grasp_candidates;
    j["max_width"] = c.max_width;
    j["reference_approach"] = vec_json(c.reference_approach);
    j["human_direction"] = vec_json(c.human_direction);
    j["w_heat"] = c.weights.w_heat;
    j["w_dist"] = c.weights.w_dist;
    j["w_feas"] = c.weights.w_feas;
    j["invert_distance_term"] = c.invert_distance_term;
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j, const PipelineConfig& base)
{
    if (!j.is_object())
        throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    PipelineConfig c = base;
    const std::set<std::string> known = [] {
        std::set<std::string> keys;
        const nlohmann::json defaults = config_to_json(PipelineConfig{});
        for (const auto& [k, v] : defaults.items())
            keys.insert(k);
        return keys;
    }();
    try
    {
        for (const auto& [key, v] : j.items())
        {
            if (!known.count(key))
                throw Error(ErrorCode::InvalidArgument, "unknown config field '" + key + "'");
            if (key == "descriptor")
                c.descriptor = descriptor_kind_from_string(v.get<std::string>());
            else if (key == "hks_times")
                c.hks_times = v.get<int>();
            else if (key == "wks_energies")
                c.wks_energies = v.get<int>();
            else if (key == "num_eigenpairs")
                c.spectral.num_eigenpairs = v.get<int>();
            else if (key == "knn")
                c.spectral.knn = v.get<int>();
            else if (key == "bandwidth")
                c.spectral.bandwidth = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (key == "weighting")
            {
                const auto s = v.get<std::string>();
                if (s != "gaussian" && s != "binary")
                    throw Error(ErrorCode::InvalidArgument, "weighting must be 'gaussian' or 'binary'");
                c.spectral.weighting =
                    s == "gaussian" ? SpectralConfig::Weighting::Gaussian : SpectralConfig::Weighting::Binary;
            }
            else if (key == "mass")
            {
                const auto s = v.get<std::string>();
                if (s != "degree" && s != "identity")
                    throw Error(ErrorCode::InvalidArgument, "mass must be 'degree' or 'identity'");
                c.spectral.mass = s == "degree" ? SpectralConfig::Mass::Degree : SpectralConfig::Mass::Identity;
            }
            else if (key == "correspondence")
                c.correspondence = correspondence_mode_from_string(v.get<std::string>());
            else if (key == "functional_map_mu")
                c.functional_map_mu = v.get<double>();
            else if (key == "sinkhorn_enabled")
                c.sinkhorn_enabled = v.get<bool>();
            else if (key == "sinkhorn_iterations")
                c.sinkhorn.iterations = v.get<int>();
            else if (key == "sinkhorn_lambda")
                c.sinkhorn.lambda = v.get<double>();
            else if (key == "max_points")
                c.max_points = v.get<int>();
            else if (key == "reasoner")
                c.reasoner = v.get<std::string>();
            else if (key == "num_regions")
                c.num_regions = v.get<int>();
            else if (key == "alignment")
                c.alignment = v.get<bool>();
            else if (key == "snap_angle")
                c.alignment_options.snap_angle = v.get<double>();
            else if (key == "min_center_separation")
                c.alignment_options.min_center_separation = v.get<double>();
            else if (key == "seed")
                c.seed = v.get<std::uint64_t>();
            else if (key == "grasp_candidates")
                c.grasp_candidates = v.get<int>();
            else if (key == "max_width")
                c.max_width = v.get<double>();
            else if (key == "reference_approach")
                c.reference_approach = json_vec(v, key);
            else if (key == "human_direction")
                c.human_direction = json_vec(v, key);
            else if (key == "w_heat")
                c.weights.w_heat = v.get<double>();
            else if (key == "w_dist")
                c.weights.w_dist = v.get<double>();
            else if (key == "w_feas")
                c.weights.w_feas = v.get<double>();
            else if (key == "invert_distance_term")
                c.invert_distance_term = v.get<bool>();
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(ErrorCode::InvalidArgument, std::string("config field has the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(read_file(path));
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const PipelineConfig& config, const std::filesystem::path& path)
{
    atomic_write(path, config_to_json(config).dump(2) + "\n");
}

std::string_view to_string(Stage stage)
{
    switch (stage)
    {
    case Stage::Input: return "input";
    case Stage::Reasoning: return "reasoning";
    case Stage::Alignment: return "alignment";
    case Stage::Spectral: return "spectral";
    case Stage::Grasp: return "grasp";
    }
    return "input";
}

int exit_code(Stage stage)
{
    switch (stage)
    {
    case Stage::Input: return 2;
    case Stage::Reasoning: return 3;
    case Stage::Alignment: return 4;
    case Stage::Spectral: return 5;
    case Stage::Grasp: return 6;
    }
    return 2;
}

std::unique_ptr<ReasoningBackend> make_backend(const PipelineConfig& config)
{
    if (config.reasoner == "rule")
        return std::make_unique<RuleBackend>();
    const auto settings = LlmSettings::from_environment();
    if (!settings)
        throw Error(ErrorCode::BackendUnavailable, "AFT_LLM_URL is not set");
    return std::make_unique<LlmBackend>(LlmClient(*settings, std::make_shared<HttpTransport>()));
}

namespace
{

template <class F>
auto staged(Stage stage, F&& f) -> decltype(f())
{
    try
    {
        return f();
    }
    catch (const Error& e)
    {
        throw StageError(stage, e);
    }
}

MatrixX coordinates(const PointCloud& cloud)
{
    return cloud.points.transpose();
}

/// Spectral descriptor rows for every cloud point: points outside the retained graph
/// component copy the row of their nearest retained vertex.
MatrixX full_rows(const MatrixX& rows, const std::vector<int>& vertex_map, const PointCloud& cloud)
{
    if (static_cast<Eigen::Index>(vertex_map.size()) == cloud.size())
        return rows;
    Points kept(3, static_cast<Eigen::Index>(vertex_map.size()));
    for (std::size_t a = 0; a < vertex_map.size(); ++a)
        kept.col(static_cast<Eigen::Index>(a)) = cloud.points.col(vertex_map[a]);
    const std::vector<int> nearest = nearest_indices(kept, cloud.points);
    MatrixX out(cloud.size(), rows.cols());
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
        out.row(i) = rows.row(nearest[static_cast<std::size_t>(i)]);
    return out;
}

Descriptor spectral_descriptor(const CloudSpectrum& s, const PointCloud& cloud, const PipelineConfig& config,
                               const SpectralBasis& grid_source)
{
    Descriptor d;
    if (config.descriptor == DescriptorKind::Hks)
        d = compute_hks(s.basis, default_hks_times(grid_source, config.hks_times));
    else
    {
        const WksGrid grid = default_wks_grid(grid_source, config.wks_energies);
        d = compute_wks(s.basis, grid.energies, grid.sigma);
    }
    d.values = full_rows(d.values, s.laplacian.vertex_map, cloud);
    return d;
}

/// Query-to-reference point map on clouds small enough for dense matching.
PointMap dense_map(const PointCloud& query, const PointCloud& reference, const PipelineConfig& config,
                   std::vector<std::string>& warnings)
{
    if (config.descriptor == DescriptorKind::Xyz)
    {
        const MatrixX s = similarity_matrix(coordinates(query), coordinates(reference));
        return point_map_from_similarity(s, config.sinkhorn_enabled ? std::optional(config.sinkhorn) : std::nullopt);
    }

    const CloudSpectrum qs = compute_spectrum(query, config.spectral);
    const CloudSpectrum rs = compute_spectrum(reference, config.spectral);
    for (const CloudSpectrum* s : {&qs, &rs})
        for (const std::string& w : s->laplacian.warnings)
            warnings.push_back(w);
    const Descriptor qd = spectral_descriptor(qs, query, config, rs.basis);
    const Descriptor rd = spectral_descriptor(rs, reference, config, rs.basis);
    if (config.correspondence == CorrespondenceMode::Nearest)
        return point_map_from_similarity(similarity_matrix(qd, rd),
                                         config.sinkhorn_enabled ? std::optional(config.sinkhorn) : std::nullopt);

    auto restrict = [](const Descriptor& d, const std::vector<int>& map) {
        Descriptor out = d;
        out.values.resize(static_cast<Eigen::Index>(map.size()), d.values.cols());
        for (std::size_t a = 0; a < map.size(); ++a)
            out.values.row(static_cast<Eigen::Index>(a)) = d.values.row(map[a]);
        return out;
    };
    const FunctionalMap fm = fit_functional_map(qs.basis, rs.basis, restrict(qd, qs.laplacian.vertex_map),
                                                restrict(rd, rs.laplacian.vertex_map), config.functional_map_mu);
    if (fm.rank_deficient)
        warnings.push_back("functional map fitted with a ridge: query coefficients are rank deficient");
    const PointMap retained = point_map_from_functional_map(fm, qs.basis, rs.basis);

    // Back to cloud indices on both sides.
    Points kept(3, static_cast<Eigen::Index>(qs.laplacian.vertex_map.size()));
    for (std::size_t a = 0; a < qs.laplacian.vertex_map.size(); ++a)
        kept.col(static_cast<Eigen::Index>(a)) = query.points.col(qs.laplacian.vertex_map[a]);
    const std::vector<int> nearest = nearest_indices(kept, query.points);
    PointMap out;
    out.target_index.resize(static_cast<std::size_t>(query.size()));
    out.confidence.resize(query.size());
    for (Eigen::Index i = 0; i < query.size(); ++i)
    {
        const auto a = static_cast<std::size_t>(nearest[static_cast<std::size_t>(i)]);
        out.target_index[static_cast<std::size_t>(i)] = rs.laplacian.vertex_map[static_cast<std::size_t>(retained.target_index[a])];
        out.confidence(i) = retained.confidence(static_cast<Eigen::Index>(a));
    }
    return out;
}

PointMap correspond(const PointCloud& query, const PointCloud& reference, const PipelineConfig& config,
                    std::vector<std::string>& warnings)
{
    if (query.size() <= config.max_points && reference.size() <= config.max_points)
        return dense_map(query, reference, config, warnings);

    const Downsampling qd = voxel_downsample(query.points, config.max_points);
    const Downsampling rd = voxel_downsample(reference.points, config.max_points);
    warnings.push_back("matched on voxel representatives: " + std::to_string(qd.representatives.size()) + " query, " +
                       std::to_string(rd.representatives.size()) + " reference");
    PointMap reduced = dense_map(query.subset(qd.representatives), reference.subset(rd.representatives), config,
                                 warnings);
    for (int& t : reduced.target_index)
        t = rd.representatives[static_cast<std::size_t>(t)];
    return qd.lift(reduced);
}

} // namespace

std::pair<Descriptor, Descriptor> describe_pair(const PointCloud& query, const PointCloud& reference,
                                                const PipelineConfig& config)
{
    if (config.descriptor == DescriptorKind::Xyz)
    {
        Descriptor q{coordinates(query), DescriptorKind::Xyz, {}};
        Descriptor r{coordinates(reference), DescriptorKind::Xyz, {}};
        return {q, r};
    }
    const CloudSpectrum qs = compute_spectrum(query, config.spectral);
    const CloudSpectrum rs = compute_spectrum(reference, config.spectral);
    return {spectral_descriptor(qs, query, config, rs.basis), spectral_descriptor(rs, reference, config, rs.basis)};
}

PipelineResult run_transfer(const PointCloud& query, const TaskRequest& request, const Database& db,
                            const ReasoningBackend& backend, const PipelineConfig& config,
                            const TransferOptions& options)
{
    staged(Stage::Input, [&] {
        config.validate();
        request.validate();
        query.validate();
        if (db.empty())
            throw Error(ErrorCode::InvalidArgument, "the database is empty");
        if (options.proxy_index && *options.proxy_index >= db.entries.size())
            throw Error(ErrorCode::InvalidArgument, "proxy index outside the database");
        return 0;
    });

    PipelineResult out;
    const NormalizedCloud canon = staged(Stage::Input, [&] { return normalize_cloud(query); });
    if (canon.near_isotropic)
        out.warnings.push_back("query is nearly isotropic: its principal axis is unreliable");

    staged(Stage::Reasoning, [&] {
        out.labeling = localize_parts(canon.cloud, request, backend, config.num_regions);
        out.plan = plan_task(request, backend);
        if (options.proxy_index)
        {
            out.mapping = pair_with_proxy(request, out.labeling, db, *options.proxy_index);
            for (const PartPair& p : out.mapping.pairs)
                if (auto c = out.labeling.part_center(canon.cloud, p.query_part))
                    out.mapping.query_part_centers[p.query_part] = *c;
        }
        else
            out.mapping = match_parts(request, out.labeling, canon.cloud, db, backend);
        return 0;
    });
    for (const auto* list : {&out.labeling.warnings, &out.plan.warnings, &out.mapping.warnings})
        out.warnings.insert(out.warnings.end(), list->begin(), list->end());
    const DatabaseEntry& proxy = out.mapping.proxy(db);

    PointCloud aligned;
    if (config.alignment)
    {
        out.alignment = staged(Stage::Alignment, [&] {
            return align_query(canon.cloud, out.mapping, proxy, config.alignment_options);
        });
        out.to_proxy = out.alignment->transform.compose(canon.transform);
        aligned = out.alignment->aligned_query;
    }
    else
    {
        // Centering and scaling only: the query keeps its input orientation.
        const Vec3 c = centroid(query.points);
        RigidTransform t;
        t.scale = canon.transform.scale;
        t.translation = -t.scale * c;
        out.to_proxy = t;
        aligned = t.apply(query);
    }

    out.point_map = staged(Stage::Spectral, [&] { return correspond(aligned, proxy.reference, config, out.warnings); });
    out.field = staged(Stage::Spectral, [&] { return transfer_affordance(out.point_map, proxy.affordance); });

    if (!options.select_grasp)
        return out;

    staged(Stage::Grasp, [&] {
        SamplerOptions sampler;
        sampler.max_width = config.max_width;
        sampler.preferred_approach = config.reference_approach;
        out.candidates = sample_grasps(query, config.grasp_candidates, config.seed, sampler);
        const Vec3 reference = config.reference_approach;
        ScoringOptions scoring;
        scoring.invert_distance_term = config.invert_distance_term;
        out.selection = select_grasp(
            out.candidates, out.field, query, config.weights,
            [&](const GraspCandidate& g) { return feasibility_angular(g, reference); }, scoring);
        if (out.field.positives() > 0)
            out.handover = handover_orientation(out.selection->grasp, out.field, query, config.human_direction);
        else
            out.warnings.push_back("transferred field has no human-grasp points; handover orientation left as identity");
        return 0;
    });
    return out;
}

nlohmann::json grasp_to_json(const GraspSelection& selection, const Mat3& handover)
{
    nlohmann::json j;
    const Mat4 m = selection.grasp.pose.matrix();
    nlohmann::json pose = nlohmann::json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            pose.push_back(m(r, c));
    j["pose"] = pose;
    j["width"] = selection.grasp.width;
    j["index"] = selection.index;
    j["score"] = {{"s_heat", selection.score.s_heat},
                  {"d_human", selection.score.d_human},
                  {"s_feas", selection.score.s_feas},
                  {"total", selection.score.total}};
    nlohmann::json h = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            h.push_back(handover(r, c));
    j["handover_rotation"] = h;
    return j;
}

Colors label_colors(const std::vector<std::uint8_t>& labels)
{
    Colors c(3, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
    {
        const auto k = static_cast<Eigen::Index>(i);
        c(0, k) = labels[i] ? 255 : 0;
        c(1, k) = 0;
        c(2, k) = labels[i] ? 0 : 255;
    }
    return c;
}

} // namespace aft
