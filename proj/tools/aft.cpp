// aft: build exemplar databases, transfer affordances onto query clouds, select handover
// grasps and run the evaluation harnesses.

#include "aft/evalkit.hpp"
#include "aft/pipeline.hpp"
#include "aft/ply.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace
{

using namespace aft;
using nlohmann::json;

/// Raised for malformed command input; always exit 2.
struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep))
        out.push_back(item);
    return out;
}

double parse_double(const std::string& text, const std::string& what)
{
    try
    {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size())
            return v;
    }
    catch (const std::exception&)
    {
    }
    throw UsageError("bad number '" + text + "' in " + what);
}

Vec3 parse_vec3(const std::string& text, const std::string& what)
{
    const auto parts = split(text, ',');
    if (parts.size() != 3)
        throw UsageError(what + " needs three comma-separated numbers");
    return {parse_double(parts[0], what), parse_double(parts[1], what), parse_double(parts[2], what)};
}

// Pipeline settings shared by several commands. Unset flags leave the file or default value.
struct ConfigFlags
{
    std::string file;
    std::optional<std::string> descriptor;
    std::optional<std::string> correspondence;
    std::optional<std::string> reasoner;
    std::optional<int> regions;
    std::optional<int> eigenpairs;
    std::optional<std::uint64_t> seed;
    std::optional<int> grasps;
    std::optional<double> w_heat;
    std::optional<double> w_dist;
    std::optional<double> w_feas;
    std::optional<bool> sinkhorn;
    std::optional<bool> alignment;
    std::optional<bool> invert;

    void attach(CLI::App* app)
    {
        app->add_option("--config", file, "JSON pipeline configuration")->check(CLI::ExistingFile);
        app->add_option("--descriptor", descriptor, "xyz, hks or wks");
        app->add_option("--correspondence", correspondence, "nearest or functional_map");
        app->add_option("--reasoner", reasoner, "rule or llm");
        app->add_option("--regions", regions, "coarse regions along the principal axis");
        app->add_option("--eigenpairs", eigenpairs, "Laplacian eigenpairs for spectral descriptors");
        app->add_option("--seed", seed, "seed for sampling and evaluation");
        app->add_option("--grasps", grasps, "grasp candidates to sample");
        app->add_option("--w-heat", w_heat, "weight of the touched human-area fraction");
        app->add_option("--w-dist", w_dist, "weight of the distance to the human area");
        app->add_option("--w-feas", w_feas, "weight of the feasibility cost");
        app->add_option("--sinkhorn", sinkhorn, "sharpen the similarity with Sinkhorn normalization");
        app->add_option("--alignment", alignment, "part-axis alignment stage");
        app->add_option("--invert-distance", invert, "score 1 - d_human instead of d_human");
    }

    PipelineConfig resolve() const
    {
        PipelineConfig c = file.empty() ? PipelineConfig{} : load_config(file);
        json j;
        if (descriptor)
            j["descriptor"] = *descriptor;
        if (correspondence)
            j["correspondence"] = *correspondence;
        if (reasoner)
            j["reasoner"] = *reasoner;
        if (regions)
            j["num_regions"] = *regions;
        if (eigenpairs)
            j["num_eigenpairs"] = *eigenpairs;
        if (seed)
            j["seed"] = *seed;
        if (grasps)
            j["grasp_candidates"] = *grasps;
        if (w_heat)
            j["w_heat"] = *w_heat;
        if (w_dist)
            j["w_dist"] = *w_dist;
        if (w_feas)
            j["w_feas"] = *w_feas;
        if (sinkhorn)
            j["sinkhorn_enabled"] = *sinkhorn;
        if (alignment)
            j["alignment"] = *alignment;
        if (invert)
            j["invert_distance_term"] = *invert;
        return j.empty() ? c : config_from_json(j, c);
    }
};

// build-db

struct BuildDbArgs
{
    std::string entries;
    std::string out;
    bool synthetic = false;
    bool with_screwdriver = false;
    int points = 2000;
};

VectorX read_heat(const std::filesystem::path& path, Eigen::Index expected)
{
    const PlyData data = read_ply(path);
    VectorX heat;
    if (data.heat)
        heat = *data.heat;
    else if (data.colors)
        heat = data.colors->row(0).cast<double>().transpose() / 255.0;
    else
        throw UsageError(path.string() + " has neither a heat property nor vertex colors");
    if (heat.size() != expected)
        throw UsageError(path.string() + " has " + std::to_string(heat.size()) + " values for " +
                         std::to_string(expected) + " points");
    return heat;
}

/// One entry per line: `class=mug task=drink cloud=mug.ply heat=a.ply,b.ply [threshold=0.5]
/// part=handle:x,y,z:grasp-side ...`. Paths are relative to the entries file; part centers
/// are in the cloud's own frame.
DatabaseEntry parse_entry(const std::string& line, const std::filesystem::path& base)
{
    std::istringstream in(line);
    std::string token;
    std::string object_class, task, cloud_path;
    std::vector<std::string> heat_paths;
    double threshold = 0.5;
    std::vector<Subpart> parts;
    while (in >> token)
    {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            throw UsageError("expected key=value, got '" + token + "'");
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "class")
            object_class = value;
        else if (key == "task")
            task = value;
        else if (key == "cloud")
            cloud_path = value;
        else if (key == "heat")
            heat_paths = split(value, ',');
        else if (key == "threshold")
            threshold = parse_double(value, "threshold");
        else if (key == "part")
        {
            const auto fields = split(value, ':');
            if (fields.size() != 3)
                throw UsageError("part must be name:x,y,z:role");
            parts.push_back({fields[0], parse_vec3(fields[1], "part center"), subpart_role_from_string(fields[2])});
        }
        else
            throw UsageError("unknown key '" + key + "'");
    }
    if (object_class.empty() || task.empty() || cloud_path.empty() || heat_paths.empty())
        throw UsageError("class, task, cloud and heat are required");

    const PointCloud cloud = read_cloud(base / cloud_path);
    std::vector<VectorX> heats;
    for (const std::string& h : heat_paths)
        heats.push_back(read_heat(base / h, cloud.size()));

    const NormalizedCloud canon = normalize_cloud(cloud);
    DatabaseEntry e;
    e.object_class = object_class;
    e.task = task;
    e.reference = canon.cloud;
    e.affordance = binarize(average_contacts(heats), threshold);
    for (Subpart& p : parts)
        e.subparts.push_back({p.name, canon.transform.apply(p.center), p.role});
    return e;
}

int cmd_build_db(const BuildDbArgs& args)
{
    Database db;
    if (args.synthetic)
    {
        std::vector<SyntheticShape> shapes{SyntheticShape::MugLike, SyntheticShape::HammerLike, SyntheticShape::PanLike,
                                           SyntheticShape::BottleLike};
        if (args.with_screwdriver)
            shapes.push_back(SyntheticShape::ScrewdriverLike);
        db = make_synthetic_database(shapes, args.points);
    }
    else
    {
        if (args.entries.empty())
            throw UsageError("build-db needs --entries or --synthetic");
        const std::filesystem::path entries_path(args.entries);
        std::istringstream in(read_file(entries_path));
        std::string line;
        int number = 0;
        while (std::getline(in, line))
        {
            ++number;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#')
                continue;
            try
            {
                DatabaseEntry e = parse_entry(line, entries_path.parent_path());
                for (const std::string& w : validate_entry(e))
                    std::cerr << args.entries << ":" << number << ": warning: " << w << "\n";
                db.add(std::move(e));
            }
            catch (const std::exception& e)
            {
                throw UsageError(args.entries + ":" + std::to_string(number) + ": " + e.what());
            }
        }
        if (db.empty())
            throw UsageError(args.entries + ": no entries");
    }
    save_database(db, args.out);
    return 0;
}

// transfer

struct TransferArgs
{
    std::string query;
    std::string object;
    std::string task;
    std::string free_text;
    std::string db;
    std::string out;
    std::string grasp_out;
    std::vector<double> crop;
    ConfigFlags config;
};

PointCloud crop_cloud(const PointCloud& cloud, const std::vector<double>& box)
{
    if (box.empty())
        return cloud;
    if (box.size() != 6)
        throw UsageError("--crop-bbox needs xmin,ymin,zmin,xmax,ymax,zmax");
    const Vec3 lo(box[0], box[1], box[2]);
    const Vec3 hi(box[3], box[4], box[5]);
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
        if ((cloud.points.col(i).array() >= lo.array()).all() && (cloud.points.col(i).array() <= hi.array()).all())
            keep.push_back(static_cast<int>(i));
    if (keep.empty())
        throw Error(ErrorCode::EmptyView, "no query point inside the crop box");
    return cloud.subset(keep);
}

std::unique_ptr<ReasoningBackend> staged_backend(const PipelineConfig& config)
{
    try
    {
        return make_backend(config);
    }
    catch (const Error& e)
    {
        throw StageError(Stage::Reasoning, e);
    }
}

int cmd_transfer(const TransferArgs& args)
{
    if (!std::filesystem::exists(args.db))
        throw UsageError("database manifest not found: " + args.db);
    const PipelineConfig config = args.config.resolve();
    const Database db = load_database(args.db);
    const PointCloud query = crop_cloud(read_cloud(args.query), args.crop);
    TaskRequest request{args.object, args.task, std::nullopt};
    if (!args.free_text.empty())
        request.free_text = args.free_text;

    const auto backend = staged_backend(config);
    const PipelineResult r = run_transfer(query, request, db, *backend, config);

    const Colors colors = label_colors(r.field.labels);
    const std::string ply = encode_ply(query, PlyWriteOptions{.colors = &colors, .heat = &r.field.heat});

    json record = grasp_to_json(*r.selection, r.handover);
    record["proxy"] = {{"object_class", r.mapping.proxy(db).object_class}, {"task", r.mapping.proxy(db).task}};
    record["plan"] = {{"grasp_part", r.plan.grasp_part}, {"free_part", r.plan.free_part}};
    record["alignment"] = r.alignment ? json(std::string(to_string(r.alignment->method))) : json("off");
    record["candidates"] = r.candidates.size();
    record["label_one_points"] = r.field.positives();
    record["warnings"] = r.warnings;
    record["reasoner"] = backend->name();

    atomic_write(args.out, ply);
    atomic_write(args.grasp_out, record.dump(2) + "\n");
    return 0;
}

// score

struct ScoreArgs
{
    std::string cloud;
    std::string out;
    ConfigFlags config;
};

int cmd_score(const ScoreArgs& args)
{
    const PipelineConfig config = args.config.resolve();
    const PlyData data = read_ply(args.cloud);
    AffordanceField field;
    if (data.heat)
        field = binarize(*data.heat);
    else if (data.colors)
        field = binarize(data.colors->row(0).cast<double>().transpose() / 255.0);
    else
        throw UsageError(args.cloud + " carries no heat property or colors");

    SamplerOptions sampler;
    sampler.max_width = config.max_width;
    sampler.preferred_approach = config.reference_approach;
    std::vector<GraspCandidate> candidates;
    try
    {
        candidates = sample_grasps(data.cloud, config.grasp_candidates, config.seed, sampler);
    }
    catch (const Error& e)
    {
        throw StageError(Stage::Grasp, e);
    }
    ScoringOptions scoring;
    scoring.invert_distance_term = config.invert_distance_term;
    const Vec3 reference = config.reference_approach;
    const GraspSelection sel = select_grasp(
        candidates, field, data.cloud, config.weights,
        [&](const GraspCandidate& g) { return feasibility_angular(g, reference); }, scoring);

    json out;
    out["selected"] = grasp_to_json(sel, field.positives() > 0
                                             ? handover_orientation(sel.grasp, field, data.cloud, config.human_direction)
                                             : Mat3::Identity());
    json all = json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i)
    {
        const ScoreBreakdown& s = sel.all_scores[i];
        all.push_back({{"center", {candidates[i].center().x(), candidates[i].center().y(), candidates[i].center().z()}},
                       {"width", candidates[i].width},
                       {"s_heat", s.s_heat},
                       {"d_human", s.d_human},
                       {"s_feas", s.s_feas},
                       {"total", s.total}});
    }
    out["candidates"] = all;
    atomic_write(args.out, out.dump(2) + "\n");
    return 0;
}

// gen-partial

struct GenPartialArgs
{
    std::string input;
    std::string synthetic;
    int points = 2000;
    double variation = 0.0;
    std::uint64_t seed = 0;
    std::string viewpoint;
    double rotate = 0.0;
    std::string out;
};

int cmd_gen_partial(const GenPartialArgs& args)
{
    if (args.input.empty() == args.synthetic.empty())
        throw UsageError("gen-partial needs exactly one of --input and --synthetic");
    PointCloud cloud;
    std::optional<VectorX> heat;
    if (!args.input.empty())
    {
        PlyData data = read_ply(args.input);
        cloud = std::move(data.cloud);
        heat = std::move(data.heat);
    }
    else
    {
        const SyntheticObject object =
            make_synthetic(synthetic_shape_from_string(args.synthetic), args.points, args.seed, args.variation);
        cloud = object.cloud;
        heat = object.field.heat;
    }
    const Vec3 eye = args.viewpoint.empty() ? random_viewpoint(cloud, args.seed) : parse_vec3(args.viewpoint, "--viewpoint");
    const std::vector<int> visible = visible_indices(cloud, eye);
    PointCloud partial = cloud.subset(visible);
    if (args.rotate > 0.0)
        partial = random_rotation(args.seed, args.rotate).apply(partial);

    std::optional<VectorX> partial_heat;
    if (heat)
    {
        partial_heat = VectorX(static_cast<Eigen::Index>(visible.size()));
        for (std::size_t i = 0; i < visible.size(); ++i)
            (*partial_heat)(static_cast<Eigen::Index>(i)) = (*heat)(visible[i]);
    }
    PlyWriteOptions options;
    if (partial_heat)
        options.heat = &*partial_heat;
    atomic_write(args.out, encode_ply(partial, options));
    return 0;
}

// eval

struct EvalArgs
{
    std::string ablation;
    std::string db;
    std::string out;
    std::string summary;
    int trials = 8;
    std::vector<std::string> descriptors;
    std::vector<std::string> targets;
    bool full = false;
    ConfigFlags config;
};

int cmd_eval(const EvalArgs& args)
{
    PipelineConfig config = args.config.resolve();
    AblationSpec spec;
    spec.seed = config.seed;
    spec.trials = args.trials;
    spec.instance.partial = !args.full;
    if (!args.descriptors.empty())
    {
        spec.descriptors.clear();
        for (const std::string& d : args.descriptors)
            spec.descriptors.push_back(descriptor_kind_from_string(d));
    }

    const bool crossclass = args.ablation == "crossclass";
    std::vector<SyntheticShape> targets =
        crossclass ? std::vector<SyntheticShape>{SyntheticShape::HammerLike, SyntheticShape::ScrewdriverLike,
                                                 SyntheticShape::MugLike, SyntheticShape::PanLike}
                   : spec.targets;
    if (!args.targets.empty())
    {
        targets.clear();
        for (const std::string& t : args.targets)
            targets.push_back(synthetic_shape_from_string(t));
    }
    spec.targets = targets;

    Database db;
    if (!args.db.empty())
        db = load_database(args.db);
    else if (crossclass)
        db = make_synthetic_database(targets);
    else
        db = make_synthetic_database({SyntheticShape::HammerLike, SyntheticShape::ScrewdriverLike,
                                      SyntheticShape::MugLike, SyntheticShape::PanLike, SyntheticShape::BottleLike});

    std::vector<AblationCell> cells;
    if (crossclass)
    {
        spec.rotation_ranges = {0.0};
        cells = run_crossclass(spec, db, config);
    }
    else
        cells = run_rotation_ablation(spec, db, config);

    const std::string csv = cells_to_csv(cells);
    const std::string table = cells_summary(cells);
    if (!args.out.empty())
        atomic_write(args.out, csv);
    else
        std::cout << csv;
    if (!args.summary.empty())
        atomic_write(args.summary, table);
    else
        std::cerr << table;
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Affordance transfer and task-oriented handover grasp selection"};
    app.require_subcommand(1);

    BuildDbArgs build;
    auto* build_cmd = app.add_subcommand("build-db", "validate exemplar entries and write a database manifest");
    build_cmd->add_option("--entries", build.entries, "entries file, one entry per line")->check(CLI::ExistingFile);
    build_cmd->add_flag("--synthetic", build.synthetic, "mug-drink, hammer-hammer, pan-cook and bottle-drink stand-ins");
    build_cmd->add_flag("--with-screwdriver", build.with_screwdriver, "add screwdriver-screw to the synthetic set");
    build_cmd->add_option("--points", build.points, "points per synthetic reference");
    build_cmd->add_option("--out", build.out, "manifest path")->required();

    TransferArgs transfer;
    auto* transfer_cmd = app.add_subcommand("transfer", "transfer the affordance onto a query and select a grasp");
    transfer_cmd->add_option("--query", transfer.query, "query cloud (.ply or .obj)")->required()->check(CLI::ExistingFile);
    transfer_cmd->add_option("--object", transfer.object, "object class, e.g. screwdriver")->required();
    transfer_cmd->add_option("--task", transfer.task, "task the receiver performs, e.g. screw")->required();
    transfer_cmd->add_option("--free-text", transfer.free_text, "extra instruction for the reasoner");
    transfer_cmd->add_option("--db", transfer.db, "database manifest")->required();
    transfer_cmd->add_option("--out", transfer.out, "colored query PLY")->required();
    transfer_cmd->add_option("--grasp-out", transfer.grasp_out, "grasp record JSON")->required();
    transfer_cmd->add_option("--crop-bbox", transfer.crop, "xmin ymin zmin xmax ymax zmax")->expected(6)->delimiter(',');
    transfer.config.attach(transfer_cmd);

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "sample and score grasps on a labeled cloud");
    score_cmd->add_option("--cloud", score.cloud, "PLY with a heat property or red/blue labels")
        ->required()
        ->check(CLI::ExistingFile);
    score_cmd->add_option("--out", score.out, "scores JSON")->required();
    score.config.attach(score_cmd);

    GenPartialArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-partial", "simulate a single-view capture");
    gen_cmd->add_option("--input", gen.input, "complete cloud")->check(CLI::ExistingFile);
    gen_cmd->add_option("--synthetic", gen.synthetic, "shape name, e.g. hammer_like");
    gen_cmd->add_option("--points", gen.points, "points on the synthetic shape");
    gen_cmd->add_option("--variation", gen.variation, "relative dimension jitter of synthetic shapes");
    gen_cmd->add_option("--seed", gen.seed, "seed for shape jitter, viewpoint and rotation");
    gen_cmd->add_option("--viewpoint", gen.viewpoint, "x,y,z; seeded side view when omitted");
    gen_cmd->add_option("--rotate", gen.rotate, "random rotation of up to this many radians");
    gen_cmd->add_option("--out", gen.out, "partial view PLY")->required();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "rotation or cross-class evaluation on synthetic instances");
    eval_cmd->add_option("--ablation", eval.ablation)->required()->check(CLI::IsMember({"rotation", "crossclass"}));
    eval_cmd->add_option("--db", eval.db, "database manifest; synthetic stand-ins when omitted");
    eval_cmd->add_option("--out", eval.out, "CSV path; stdout when omitted");
    eval_cmd->add_option("--summary", eval.summary, "plain-text table; stderr when omitted");
    eval_cmd->add_option("--trials", eval.trials, "instances per cell");
    eval_cmd->add_option("--descriptors", eval.descriptors, "rotation ablation descriptors, comma separated")->delimiter(',');
    eval_cmd->add_option("--targets", eval.targets, "synthetic target shapes, comma separated")->delimiter(',');
    eval_cmd->add_flag("--full", eval.full, "complete clouds instead of partial views");
    eval.config.attach(eval_cmd);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*build_cmd)
            return cmd_build_db(build);
        if (*transfer_cmd)
            return cmd_transfer(transfer);
        if (*score_cmd)
            return cmd_score(score);
        if (*gen_cmd)
            return cmd_gen_partial(gen);
        if (*eval_cmd)
            return cmd_eval(eval);
    }
    catch (const StageError& e)
    {
        std::cerr << "aft: " << e.what() << "\n";
        return exit_code(e.stage());
    }
    catch (const UsageError& e)
    {
        std::cerr << "aft: " << e.what() << "\n";
        return 2;
    }
    catch (const Error& e)
    {
        std::cerr << "aft: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e)
    {
        std::cerr << "aft: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
