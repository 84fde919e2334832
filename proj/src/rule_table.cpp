// Static object table behind the deterministic reasoning backend.

#include "aft/reasoner.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <tuple>

namespace aft
{
namespace
{

struct TaskRule
{
    const char* object;
    const char* task;
    const char* grasp_part;
    const char* free_part;
};

const std::vector<ObjectRule>& object_table()
{
    // heavy_end / light_end name the thicker / thinner end slab; grasp_part is what the
    // robot holds so that free_part reaches the receiver's hand.
    static const std::vector<ObjectRule> table{
        {"mug", "vessel", "body", "handle", "body", "body", "handle", {"drink", "pour"}},
        {"cup", "vessel", "body", "rim", "body", "rim", "body", {"drink"}},
        {"bottle", "vessel", "body", "neck", "body", "neck", "body", {"drink", "pour"}},
        {"pan", "vessel", "body", "handle", "body", "body", "handle", {"cook", "fry"}},
        {"hammer", "tool", "head", "handle", "handle", "head", "handle", {"hammer", "pound"}},
        {"screwdriver", "tool", "handle", "shaft", "handle", "shaft", "handle", {"screw", "hammer"}},
        {"knife", "tool", "handle", "blade", "handle", "blade", "handle", {"cut", "slice"}},
        {"scissors", "tool", "handle", "blades", "handle", "blades", "handle", {"cut"}},
        {"spoon", "utensil", "bowl", "handle", "handle", "bowl", "handle", {"stir", "eat", "open jar"}},
        {"flashlight", "tool", "head", "body", "body", "head", "body", {"illuminate", "shine"}},
        {"rod", "tool", "end", "grip", "grip", "end", "grip", {"hold"}},
    };
    return table;
}

// Task-specific overrides of the per-object default plan.
constexpr std::array<TaskRule, 2> task_overrides{{
    {"spoon", "open jar", "handle", "bowl"},
    {"screwdriver", "hammer", "handle", "shaft"},
}};

const ObjectRule& generic_rule()
{
    static const ObjectRule rule{"", "", "functional end", "handle", "handle", "functional end", "handle", {}};
    return rule;
}

const ObjectRule& rule_or_generic(std::string_view object)
{
    const ObjectRule* rule = find_object_rule(object);
    return rule != nullptr ? *rule : generic_rule();
}

std::vector<std::string> vocabulary(const ObjectRule& rule)
{
    std::vector<std::string> out;
    for (const std::string* s : {&rule.heavy_end, &rule.light_end, &rule.middle, &rule.grasp_part, &rule.free_part})
        if (std::find(out.begin(), out.end(), *s) == out.end())
            out.push_back(*s);
    return out;
}

SubpartRole query_role(const TaskPlan& plan, const std::string& part)
{
    if (part == plan.free_part)
        return SubpartRole::GraspSide;
    if (part == plan.grasp_part)
        return SubpartRole::FunctionSide;
    return SubpartRole::Neutral;
}

int role_rank(SubpartRole role)
{
    switch (role)
    {
    case SubpartRole::GraspSide: return 0;
    case SubpartRole::FunctionSide: return 1;
    case SubpartRole::Neutral: return 2;
    }
    return 2;
}

} // namespace

std::string normalize_term(std::string_view text)
{
    std::string out;
    bool space = false;
    for (char c : text)
    {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '_' || c == '-')
        {
            space = !out.empty();
            continue;
        }
        if (space)
            out.push_back(' ');
        space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

const ObjectRule* find_object_rule(std::string_view object)
{
    const std::string key = normalize_term(object);
    for (const ObjectRule& rule : object_table())
        if (rule.object == key || rule.object + "s" == key)
            return &rule;
    return nullptr;
}

std::vector<std::string> RuleBackend::label_regions(const TaskRequest& request,
                                                    const std::vector<RegionSummary>& regions,
                                                    std::vector<std::string>& warnings) const
{
    const ObjectRule* known = find_object_rule(request.object_name);
    if (known == nullptr)
        warnings.push_back("no part table for '" + request.object_name + "'; using handle/functional end");
    const ObjectRule& rule = known != nullptr ? *known : generic_rule();

    const std::size_t r = regions.size();
    std::vector<std::string> labels(r);
    if (r == 1)
    {
        labels[0] = plan(request).grasp_part;
        return labels;
    }
    // The bulkier end is the heavy one; point counts only break exact ties since a partial
    // view thins out whatever faces away from the camera.
    const RegionSummary& first = regions.front();
    const RegionSummary& last = regions.back();
    const bool last_heavy = last.spread != first.spread ? last.spread > first.spread : last.fraction >= first.fraction;
    for (std::size_t i = 0; i < r; ++i)
    {
        if (r % 2 == 1 && i == r / 2)
        {
            labels[i] = rule.middle;
            continue;
        }
        const bool near_last = 2 * i > r - 1;
        labels[i] = near_last == last_heavy ? rule.heavy_end : rule.light_end;
    }
    return labels;
}

TaskPlan RuleBackend::plan(const TaskRequest& request) const
{
    request.validate();
    const std::string object = normalize_term(request.object_name);
    const std::string task = normalize_term(request.task);
    TaskPlan out;
    const ObjectRule* rule = find_object_rule(object);
    if (rule == nullptr)
    {
        out.grasp_part = generic_rule().grasp_part;
        out.free_part = generic_rule().free_part;
        out.rationale = "unknown object: present the handle, hold the functional end";
        out.warnings.push_back("unknown object/task (" + object + ", " + task + "); using the default plan");
        return out;
    }
    for (const TaskRule& t : task_overrides)
        if (rule->object == t.object && task == t.task)
        {
            out.grasp_part = t.grasp_part;
            out.free_part = t.free_part;
            out.rationale = "task-specific entry for " + rule->object + "/" + task;
            return out;
        }
    out.grasp_part = rule->grasp_part;
    out.free_part = rule->free_part;
    out.rationale = "the receiver uses the " + rule->free_part + "; the robot holds the " + rule->grasp_part;
    if (std::find(rule->tasks.begin(), rule->tasks.end(), task) == rule->tasks.end())
        out.warnings.push_back("unknown object/task (" + object + ", " + task + "); using the " + rule->object +
                               " default plan");
    return out;
}

PartMapping pair_with_proxy(const TaskRequest& request, const RegionLabeling& labeling, const Database& db,
                            std::size_t proxy_index)
{
    if (proxy_index >= db.entries.size())
        throw Error(ErrorCode::InvalidArgument, "proxy index " + std::to_string(proxy_index) + " outside the database");
    const DatabaseEntry& proxy = db.entries[proxy_index];
    const TaskPlan plan = RuleBackend{}.plan(request);

    struct Candidate
    {
        PartPair pair;
        SubpartRole role;
    };
    std::vector<Candidate> found;
    std::set<std::string> used;
    for (const std::string& label : labeling.distinct_labels())
    {
        const SubpartRole role = query_role(plan, label);
        const Subpart* match = nullptr;
        if (const Subpart* same = proxy.find_subpart(label); same != nullptr && !used.count(same->name))
            match = same;
        else if (role != SubpartRole::Neutral)
            for (const Subpart& s : proxy.subparts)
                if (s.role == role && !used.count(s.name))
                {
                    match = &s;
                    break;
                }
        if (match == nullptr)
            continue;
        used.insert(match->name);
        const SubpartRole effective = role != SubpartRole::Neutral ? role : match->role;
        found.push_back({{label, match->name}, effective});
    }
    if (found.empty())
        throw Error(ErrorCode::NoViableProxy, "no query part of '" + request.object_name + "' pairs with " +
                                                  proxy.object_class + "/" + proxy.task);
    std::stable_sort(found.begin(), found.end(),
                     [](const Candidate& a, const Candidate& b) { return role_rank(a.role) < role_rank(b.role); });

    PartMapping out;
    out.proxy_index = proxy_index;
    for (const Candidate& c : found)
        out.pairs.push_back(c.pair);
    return out;
}

PartMapping RuleBackend::match(const TaskRequest& request, const RegionLabeling& labeling, const Database& db) const
{
    if (db.empty())
        throw Error(ErrorCode::NoViableProxy, "the database is empty");
    const std::string object = normalize_term(request.object_name);
    const std::string task = normalize_term(request.task);
    const ObjectRule& rule = rule_or_generic(object);
    const TaskPlan plan = this->plan(request);

    std::set<std::string> query_vocab;
    for (const std::string& s : vocabulary(rule))
        query_vocab.insert(s);
    for (const std::string& s : labeling.distinct_labels())
        query_vocab.insert(s);
    query_vocab.insert(plan.grasp_part);
    query_vocab.insert(plan.free_part);

    using Score = std::tuple<int, int, int>;
    std::optional<std::size_t> best;
    Score best_score{-1, -1, -1};
    for (std::size_t i = 0; i < db.entries.size(); ++i)
    {
        const DatabaseEntry& e = db.entries[i];
        const std::string e_object = normalize_term(e.object_class);
        int object_sim = 0;
        if (e_object == object)
            object_sim = 2;
        else if (const ObjectRule* er = find_object_rule(e_object);
                 er != nullptr && !rule.family.empty() && er->family == rule.family)
            object_sim = 1;
        const int task_sim = normalize_term(e.task) == task ? 1 : 0;
        int overlap = 0;
        for (const Subpart& s : e.subparts)
            overlap += query_vocab.count(normalize_term(s.name)) ? 1 : 0;
        if (overlap == 0)
            continue;
        const Score score{object_sim, task_sim, overlap};
        if (!best || score > best_score)
        {
            best = i;
            best_score = score;
        }
    }
    if (!best)
        throw Error(ErrorCode::NoViableProxy,
                    "no database entry shares a part name with '" + request.object_name + "'");
    PartMapping out = pair_with_proxy(request, labeling, db, *best);
    for (const std::string& w : plan.warnings)
        out.warnings.push_back(w);
    return out;
}

} // namespace aft
