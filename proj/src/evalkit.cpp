#include "aft/evalkit.hpp"

#include <cstdio>
#include <sstream>

namespace aft
{

EvalReport compute_metrics(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& truth)
{
    if (predicted.size() != truth.size())
        throw Error(ErrorCode::LengthMismatch, "prediction and truth differ in length");
    EvalReport r;
    for (std::size_t i = 0; i < truth.size(); ++i)
    {
        const bool p = predicted[i] != 0;
        const bool t = truth[i] != 0;
        if (p && t)
            ++r.tp;
        else if (p)
            ++r.fp;
        else if (t)
            ++r.fn;
        else
            ++r.tn;
    }
    const auto ratio = [](std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); };
    r.accuracy = r.total() > 0 ? ratio(r.tp + r.tn, r.total()) : 0.0;
    r.precision_defined = r.tp + r.fp > 0;
    r.recall_defined = r.tp + r.fn > 0;
    r.precision = r.precision_defined ? ratio(r.tp, r.tp + r.fp) : 0.0;
    r.recall = r.recall_defined ? ratio(r.tp, r.tp + r.fn) : 0.0;
    return r;
}

AffordanceField propagate_ground_truth(const PointCloud& partial, const PointCloud& reference,
                                       const AffordanceField& reference_field)
{
    if (reference_field.size() != reference.size())
        throw Error(ErrorCode::LengthMismatch, "reference field does not match the reference cloud");
    if (reference.empty())
        throw Error(ErrorCode::InvalidArgument, "empty reference cloud");
    const std::vector<int> nearest = nearest_indices(reference.points, partial.points);
    AffordanceField out;
    out.threshold = reference_field.threshold;
    out.heat.resize(partial.size());
    for (Eigen::Index i = 0; i < partial.size(); ++i)
        out.heat(i) = reference_field.heat(nearest[static_cast<std::size_t>(i)]);
    out.relabel();
    return out;
}

void AblationSpec::validate() const
{
    if (trials < 1)
        throw Error(ErrorCode::InvalidArgument, "at least one trial is needed");
    if (rotation_ranges.empty() || descriptors.empty() || targets.empty() || alignment.empty())
        throw Error(ErrorCode::InvalidArgument, "ablation axes must not be empty");
    for (double r : rotation_ranges)
        if (!(r >= 0.0))
            throw Error(ErrorCode::InvalidArgument, "rotation ranges must be nonnegative");
    if (instance.n_points < 100)
        throw Error(ErrorCode::InvalidArgument, "instances need at least 100 points");
}

namespace
{

std::uint64_t trial_seed(std::uint64_t base, int trial)
{
    return base * 1000003ULL + static_cast<std::uint64_t>(trial);
}

EvalReport aggregate(const std::vector<EvalReport>& trials)
{
    EvalReport m;
    for (const EvalReport& r : trials)
    {
        m.tp += r.tp;
        m.fp += r.fp;
        m.tn += r.tn;
        m.fn += r.fn;
        m.accuracy += r.accuracy;
        m.precision += r.precision;
        m.recall += r.recall;
        m.precision_defined = m.precision_defined && r.precision_defined;
        m.recall_defined = m.recall_defined && r.recall_defined;
    }
    const auto n = static_cast<double>(trials.size());
    m.accuracy /= n;
    m.precision /= n;
    m.recall /= n;
    return m;
}

EvalReport run_trial(const EvalInstance& instance, const Database& db, const PipelineConfig& config,
                     std::optional<std::size_t> proxy, std::string& proxy_class)
{
    const auto [object, task] = synthetic_class(instance.shape);
    RuleBackend backend;
    TransferOptions options;
    options.proxy_index = proxy;
    options.select_grasp = false;
    const PipelineResult r = run_transfer(instance.cloud, TaskRequest{object, task, std::nullopt}, db, backend,
                                          config, options);
    proxy_class = r.mapping.proxy(db).object_class;
    return compute_metrics(r.field.labels, instance.truth);
}

} // namespace

std::vector<AblationCell> run_rotation_ablation(const AblationSpec& spec, const Database& db,
                                                const PipelineConfig& config)
{
    spec.validate();
    std::vector<AblationCell> cells;
    for (DescriptorKind d : spec.descriptors)
        for (double range : spec.rotation_ranges)
            for (bool aligned : spec.alignment)
                for (SyntheticShape target : spec.targets)
                {
                    PipelineConfig c = config;
                    c.descriptor = d;
                    c.alignment = aligned;
                    InstanceOptions io = spec.instance;
                    io.max_rotation = range;

                    AblationCell cell;
                    cell.target = synthetic_class(target).first;
                    cell.descriptor = d;
                    cell.rotation_range = range;
                    cell.alignment = aligned;
                    for (int t = 0; t < spec.trials; ++t)
                    {
                        std::string source;
                        cell.trials.push_back(
                            run_trial(make_eval_instance(target, trial_seed(spec.seed, t), io), db, c, {}, source));
                        if (t == 0)
                            cell.source = source;
                        else if (cell.source != source)
                            cell.source = "mixed";
                    }
                    cell.mean = aggregate(cell.trials);
                    cells.push_back(std::move(cell));
                }
    return cells;
}

std::vector<AblationCell> run_crossclass(const AblationSpec& spec, const Database& db,
                                         const PipelineConfig& config)
{
    spec.validate();
    if (db.entries.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "cross-class runs need at least two database entries");
    std::vector<AblationCell> cells;
    for (DescriptorKind d : spec.descriptors)
        for (std::size_t s = 0; s < db.entries.size(); ++s)
            for (SyntheticShape target : spec.targets)
            {
                PipelineConfig c = config;
                c.descriptor = d;
                c.alignment = true;
                InstanceOptions io = spec.instance;
                io.max_rotation = spec.rotation_ranges.front();

                AblationCell cell;
                cell.source = db.entries[s].object_class;
                cell.target = synthetic_class(target).first;
                cell.descriptor = d;
                cell.rotation_range = io.max_rotation;
                cell.alignment = true;
                for (int t = 0; t < spec.trials; ++t)
                {
                    std::string source;
                    cell.trials.push_back(
                        run_trial(make_eval_instance(target, trial_seed(spec.seed, t), io), db, c, s, source));
                }
                cell.mean = aggregate(cell.trials);
                cells.push_back(std::move(cell));
            }
    return cells;
}

namespace
{

std::string fixed(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string cells_to_csv(const std::vector<AblationCell>& cells)
{
    std::ostringstream out;
    out << "source,target,descriptor,rotation_range,alignment,accuracy,precision,recall,tp,fp,tn,fn\n";
    for (const AblationCell& c : cells)
        out << c.source << ',' << c.target << ',' << to_string(c.descriptor) << ',' << fixed(c.rotation_range) << ','
            << (c.alignment ? "on" : "off") << ',' << fixed(c.mean.accuracy) << ',' << fixed(c.mean.precision) << ','
            << fixed(c.mean.recall) << ',' << c.mean.tp << ',' << c.mean.fp << ',' << c.mean.tn << ',' << c.mean.fn
            << '\n';
    return out.str();
}

std::string cells_summary(const std::vector<AblationCell>& cells)
{
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-12s %-5s %8s %-5s %8s %8s %8s\n", "source", "target", "desc", "rot",
                  "align", "acc", "prec", "rec");
    out << line;
    for (const AblationCell& c : cells)
    {
        std::snprintf(line, sizeof line, "%-12s %-12s %-5s %8.3f %-5s %8.4f %8.4f %8.4f\n", c.source.c_str(),
                      c.target.c_str(), std::string(to_string(c.descriptor)).c_str(), c.rotation_range,
                      c.alignment ? "on" : "off", c.mean.accuracy, c.mean.precision, c.mean.recall);
        out << line;
    }
    return out.str();
}

} // namespace aft
