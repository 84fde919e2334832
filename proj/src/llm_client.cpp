#include "aft/reasoner.hpp"

#include "aft/prompt_assets.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace aft
{

using nlohmann::json;

std::optional<LlmSettings> LlmSettings::from_environment()
{
    const char* url = std::getenv("AFT_LLM_URL");
    if (url == nullptr || *url == '\0')
        return std::nullopt;
    LlmSettings s;
    s.base_url = url;
    if (const char* token = std::getenv("AFT_LLM_TOKEN"))
        s.token = token;
    if (const char* model = std::getenv("AFT_LLM_MODEL"); model != nullptr && *model != '\0')
        s.model = model;
    return s;
}

std::string HttpTransport::post(const LlmSettings& settings, const std::string& body) const
{
    const std::string& url = settings.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::BackendUnavailable, "LLM URL '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string host = url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();

    httplib::Client client(host);
    client.set_connection_timeout(settings.timeout_seconds, 0);
    client.set_read_timeout(settings.timeout_seconds, 0);
    httplib::Headers headers;
    if (!settings.token.empty())
        headers.emplace("Authorization", "Bearer " + settings.token);

    const auto res = client.Post(prefix + "/chat/completions", headers, body, "application/json");
    if (!res)
        throw Error(ErrorCode::BackendUnavailable, "request to " + host + " failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw Error(ErrorCode::BackendUnavailable, "LLM service rejected the credentials (HTTP " +
                                                       std::to_string(res->status) + ")");
    if (res->status >= 400)
        throw Error(ErrorCode::BackendUnavailable, "LLM service answered HTTP " + std::to_string(res->status));
    return res->body;
}

std::string render_prompt(std::string_view templ, const std::map<std::string, std::string>& values)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < templ.size())
    {
        const auto open = templ.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(templ.substr(pos));
            break;
        }
        const auto close = templ.find("}}", open + 2);
        if (close == std::string_view::npos)
            throw Error(ErrorCode::InvalidArgument, "unterminated placeholder in prompt template");
        out.append(templ.substr(pos, open - pos));
        const std::string key(templ.substr(open + 2, close - open - 2));
        const auto it = values.find(key);
        if (it == values.end())
            throw Error(ErrorCode::InvalidArgument, "prompt placeholder '" + key + "' has no value");
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

namespace
{

/// Empty when `reply` satisfies the schema, otherwise the reason it does not.
std::string check_schema(const json& reply, const ResponseSchema& schema)
{
    if (!reply.is_object())
        return "the reply is not a JSON object";
    for (const SchemaField& f : schema)
    {
        if (!reply.contains(f.name))
            return "field '" + f.name + "' is missing";
        const json& v = reply.at(f.name);
        bool ok = false;
        switch (f.type)
        {
        case FieldType::String: ok = v.is_string(); break;
        case FieldType::Integer: ok = v.is_number_integer(); break;
        case FieldType::StringList:
            ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
            break;
        case FieldType::ObjectList:
            ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_object(); });
            break;
        }
        if (!ok)
            return "field '" + f.name + "' has the wrong type";
    }
    return {};
}

/// The JSON object inside a chat reply, tolerating code fences and surrounding prose.
std::optional<json> extract_object(const std::string& content)
{
    const auto first = content.find('{');
    const auto last = content.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first)
        return std::nullopt;
    try
    {
        return json::parse(content.substr(first, last - first + 1));
    }
    catch (const json::parse_error&)
    {
        return std::nullopt;
    }
}

std::string message_content(const std::string& body)
{
    try
    {
        const json envelope = json::parse(body);
        return envelope.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    catch (const json::exception&)
    {
        throw Error(ErrorCode::BackendUnavailable, "LLM service returned an unexpected envelope");
    }
}

} // namespace

LlmClient::LlmClient(LlmSettings settings, std::shared_ptr<const LlmTransport> transport)
    : settings_(std::move(settings)), transport_(std::move(transport))
{
    if (!transport_)
        throw Error(ErrorCode::InvalidArgument, "LLM client needs a transport");
}

LlmResponse LlmClient::query(const std::string& prompt, const ResponseSchema& schema) const
{
    json messages = json::array();
    messages.push_back({{"role", "system"}, {"content", "You are a careful assistant. Answer with JSON only."}});
    messages.push_back({{"role", "user"}, {"content", prompt}});

    std::string problem;
    for (int attempt = 0; attempt < 2; ++attempt)
    {
        const json body{{"model", settings_.model}, {"messages", messages}, {"temperature", 0}};
        const std::string content = message_content(transport_->post(settings_, body.dump()));
        const auto reply = extract_object(content);
        problem = reply ? check_schema(*reply, schema) : "the reply contains no JSON object";
        if (problem.empty())
            return {*reply, attempt};
        messages.push_back({{"role", "assistant"}, {"content", content}});
        messages.push_back({{"role", "user"},
                            {"content", "Your previous reply was not usable: " + problem +
                                            ". Reply again with only the JSON object in the requested format."}});
    }
    throw Error(ErrorCode::SchemaViolation, "LLM reply rejected after one retry: " + problem);
}

namespace
{

/// Case- and separator-insensitive lookup of `name` in `vocabulary`.
std::optional<std::string> snap(const std::string& name, const std::vector<std::string>& vocabulary)
{
    const std::string key = normalize_term(name);
    for (const std::string& v : vocabulary)
        if (normalize_term(v) == key)
            return v;
    return std::nullopt;
}

std::vector<std::string> object_vocabulary(const TaskRequest& request)
{
    const ObjectRule* rule = find_object_rule(request.object_name);
    if (rule == nullptr)
        return {};
    std::vector<std::string> out{rule->heavy_end, rule->light_end, rule->middle, rule->grasp_part, rule->free_part};
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string snap_or_reject(const std::string& name, const std::vector<std::string>& vocabulary)
{
    if (vocabulary.empty())
    {
        const std::string term = normalize_term(name);
        if (term.empty())
            throw Error(ErrorCode::SchemaViolation, "empty part name");
        return term;
    }
    if (auto hit = snap(name, vocabulary))
        return *hit;
    throw Error(ErrorCode::SchemaViolation, "part name '" + name + "' is not in the vocabulary");
}

std::map<std::string, std::string> base_values(const TaskRequest& request)
{
    return {{"object", request.object_name},
            {"task", request.task},
            {"free_text", request.free_text ? "The person said: \"" + *request.free_text + "\"" : ""}};
}

std::string format_fixed(double v)
{
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << v;
    return s.str();
}

} // namespace

LlmBackend::LlmBackend(LlmClient client) : client_(std::move(client)) {}

std::vector<std::string> LlmBackend::label_regions(const TaskRequest& request,
                                                   const std::vector<RegionSummary>& regions,
                                                   std::vector<std::string>& warnings) const
{
    auto values = base_values(request);
    std::string listing;
    for (const RegionSummary& r : regions)
        listing += "- slab " + std::to_string(r.index) + ": " + format_fixed(100.0 * r.fraction) +
                   "% of points, from " + format_fixed(r.axis_min) + " to " + format_fixed(r.axis_max) +
                   ", thickness " + format_fixed(r.spread) + "\n";
    values["regions"] = listing;
    values["num_regions"] = std::to_string(regions.size());

    LlmResponse reply;
    try
    {
        reply = client_.query(render_prompt(prompt_assets::localize, values), {{"labels", FieldType::StringList}});
    }
    catch (const Error& e)
    {
        if (e.code() != ErrorCode::BackendUnavailable)
            throw;
        warnings.push_back(std::string("LLM unavailable, rule backend used: ") + e.what());
        return fallback_.label_regions(request, regions, warnings);
    }
    const auto raw = reply.fields.at("labels").get<std::vector<std::string>>();
    if (raw.size() != regions.size())
        throw Error(ErrorCode::SchemaViolation, "LLM labeled " + std::to_string(raw.size()) + " of " +
                                                    std::to_string(regions.size()) + " regions");
    const auto vocabulary = object_vocabulary(request);
    std::vector<std::string> labels;
    for (const std::string& l : raw)
        labels.push_back(snap_or_reject(l, vocabulary));
    return labels;
}

TaskPlan LlmBackend::plan(const TaskRequest& request) const
{
    LlmResponse reply;
    try
    {
        reply = client_.query(render_prompt(prompt_assets::plan, base_values(request)),
                              {{"grasp_part", FieldType::String},
                               {"free_part", FieldType::String},
                               {"rationale", FieldType::String}});
    }
    catch (const Error& e)
    {
        if (e.code() != ErrorCode::BackendUnavailable)
            throw;
        TaskPlan plan = fallback_.plan(request);
        plan.warnings.push_back(std::string("LLM unavailable, rule backend used: ") + e.what());
        return plan;
    }
    const auto vocabulary = object_vocabulary(request);
    TaskPlan plan;
    plan.grasp_part = snap_or_reject(reply.fields.at("grasp_part").get<std::string>(), vocabulary);
    plan.free_part = snap_or_reject(reply.fields.at("free_part").get<std::string>(), vocabulary);
    plan.rationale = reply.fields.at("rationale").get<std::string>();
    if (plan.grasp_part == plan.free_part)
        throw Error(ErrorCode::SchemaViolation, "LLM plan grasps and frees the same part");
    return plan;
}

PartMapping LlmBackend::match(const TaskRequest& request, const RegionLabeling& labeling, const Database& db) const
{
    if (db.empty())
        throw Error(ErrorCode::NoViableProxy, "the database is empty");
    auto values = base_values(request);
    const std::vector<std::string> query_parts = labeling.distinct_labels();
    std::string parts;
    for (const std::string& p : query_parts)
        parts += (parts.empty() ? "" : ", ") + p;
    values["query_parts"] = parts;
    std::string entries;
    for (std::size_t i = 0; i < db.entries.size(); ++i)
    {
        const DatabaseEntry& e = db.entries[i];
        entries += "- entry " + std::to_string(i) + ": " + e.object_class + " for " + e.task + "; parts:";
        for (const Subpart& s : e.subparts)
            entries += " " + s.name + " (" + std::string(to_string(s.role)) + ")";
        entries += "\n";
    }
    values["entries"] = entries;

    LlmResponse reply;
    try
    {
        reply = client_.query(render_prompt(prompt_assets::match, values),
                              {{"proxy_index", FieldType::Integer}, {"pairs", FieldType::ObjectList}});
    }
    catch (const Error& e)
    {
        if (e.code() != ErrorCode::BackendUnavailable)
            throw;
        PartMapping mapping = fallback_.match(request, labeling, db);
        mapping.warnings.push_back(std::string("LLM unavailable, rule backend used: ") + e.what());
        return mapping;
    }

    const auto index = reply.fields.at("proxy_index").get<long long>();
    if (index < 0 || static_cast<std::size_t>(index) >= db.entries.size())
        throw Error(ErrorCode::SchemaViolation, "LLM chose entry " + std::to_string(index) + ", which does not exist");
    const DatabaseEntry& proxy = db.entries[static_cast<std::size_t>(index)];
    std::vector<std::string> proxy_parts;
    for (const Subpart& s : proxy.subparts)
        proxy_parts.push_back(s.name);

    PartMapping mapping;
    mapping.proxy_index = static_cast<std::size_t>(index);
    for (const json& p : reply.fields.at("pairs"))
    {
        if (!p.contains("query_part") || !p.contains("proxy_part") || !p["query_part"].is_string() ||
            !p["proxy_part"].is_string())
            throw Error(ErrorCode::SchemaViolation, "pair entries need query_part and proxy_part strings");
        const auto q = snap(p["query_part"].get<std::string>(), query_parts);
        const auto r = snap(p["proxy_part"].get<std::string>(), proxy_parts);
        if (!q || !r)
            throw Error(ErrorCode::SchemaViolation, "pair names a part that does not exist: " + p.dump());
        for (const PartPair& existing : mapping.pairs)
            if (existing.query_part == *q || existing.proxy_part == *r)
                throw Error(ErrorCode::SchemaViolation, "a part is paired twice");
        mapping.pairs.push_back({*q, *r});
    }
    if (mapping.pairs.empty())
        throw Error(ErrorCode::SchemaViolation, "LLM returned no part pairs");
    auto rank = [&](const PartPair& pair) {
        const SubpartRole role = proxy.find_subpart(pair.proxy_part)->role;
        return role == SubpartRole::GraspSide ? 0 : role == SubpartRole::FunctionSide ? 1 : 2;
    };
    std::stable_sort(mapping.pairs.begin(), mapping.pairs.end(),
                     [&](const PartPair& a, const PartPair& b) { return rank(a) < rank(b); });
    return mapping;
}

} // namespace aft
