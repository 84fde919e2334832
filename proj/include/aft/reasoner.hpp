#pragma once

#include "aft/affordance.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aft
{

struct TaskRequest
{
    std::string object_name;
    std::string task;
    std::optional<std::string> free_text;

    void validate() const;
};

/// `grasp_part` is taken by the robot; `free_part` stays free for the receiver's hand.
struct TaskPlan
{
    std::string grasp_part;
    std::string free_part;
    std::string rationale;
    std::vector<std::string> warnings;
};

/// One equal-length slab along the principal axis.
struct Region
{
    int index = 0;
    Vec3 center = Vec3::Zero();
    std::string label;
    std::size_t point_count = 0;
    /// Slab bounds as projections on the axis.
    double axis_min = 0.0;
    double axis_max = 0.0;
};

struct RegionLabeling
{
    std::vector<Region> regions;
    Vec3 axis = Vec3::UnitX();
    Vec3 origin = Vec3::Zero();
    /// Region index of every cloud point.
    std::vector<int> point_region;
    std::vector<std::string> warnings;

    /// Centroid of all points whose region carries `label`.
    std::optional<Vec3> part_center(const PointCloud& cloud, std::string_view label) const;
    /// Labels in first-occurrence order along the axis.
    std::vector<std::string> distinct_labels() const;
};

struct PartPair
{
    std::string query_part;
    std::string proxy_part;
};

struct PartMapping
{
    std::size_t proxy_index = 0;
    /// Ordered: the receiver-side pair first, then the working end, then the rest.
    std::vector<PartPair> pairs;
    std::map<std::string, Vec3> query_part_centers;
    std::vector<std::string> warnings;

    const DatabaseEntry& proxy(const Database& db) const { return db.entries.at(proxy_index); }
};

/// Geometry-only description of a slab, as handed to a backend.
struct RegionSummary
{
    int index = 0;
    double fraction = 0.0;
    double axis_min = 0.0;
    double axis_max = 0.0;
    /// RMS distance of the slab's points from the principal axis, over the axis length.
    double spread = 0.0;
};

class ReasoningBackend
{
  public:
    virtual ~ReasoningBackend() = default;
    virtual std::string name() const = 0;

    /// One label per summary.
    virtual std::vector<std::string> label_regions(const TaskRequest& request,
                                                   const std::vector<RegionSummary>& regions,
                                                   std::vector<std::string>& warnings) const = 0;
    virtual TaskPlan plan(const TaskRequest& request) const = 0;
    virtual PartMapping match(const TaskRequest& request, const RegionLabeling& labeling, const Database& db) const = 0;
};

/// Deterministic backend driven by a static table of object classes.
class RuleBackend final : public ReasoningBackend
{
  public:
    std::string name() const override { return "rule"; }
    std::vector<std::string> label_regions(const TaskRequest& request, const std::vector<RegionSummary>& regions,
                                           std::vector<std::string>& warnings) const override;
    TaskPlan plan(const TaskRequest& request) const override;
    PartMapping match(const TaskRequest& request, const RegionLabeling& labeling, const Database& db) const override;
};

/// Splits the cloud into `num_regions` slabs along its first principal axis and labels them.
RegionLabeling localize_parts(const PointCloud& cloud, const TaskRequest& request, const ReasoningBackend& backend,
                              int num_regions = 3);

TaskPlan plan_task(const TaskRequest& request, const ReasoningBackend& backend);

/// Rule-table pairing of the labeled query regions with the subparts of a fixed proxy:
/// same name first, then same role. Throws NoViableProxy when nothing pairs.
PartMapping pair_with_proxy(const TaskRequest& request, const RegionLabeling& labeling, const Database& db,
                            std::size_t proxy_index);

/// Chooses a proxy entry and pairs query regions with its subparts; part centers come from
/// the labeled regions of `cloud`.
PartMapping match_parts(const TaskRequest& request, const RegionLabeling& labeling, const PointCloud& cloud,
                        const Database& db, const ReasoningBackend& backend);

// Rule table lookups, shared by the backends and the evaluation code.

struct ObjectRule
{
    std::string object;
    std::string family;
    /// Labels of the denser end, the sparser end and the middle slabs.
    std::string heavy_end;
    std::string light_end;
    std::string middle;
    /// Plan used when the task has no specific entry.
    std::string grasp_part;
    std::string free_part;
    std::vector<std::string> tasks;
};

/// nullptr for unknown objects.
const ObjectRule* find_object_rule(std::string_view object);
std::string normalize_term(std::string_view text);

// LLM service client.

struct LlmSettings
{
    std::string base_url;
    std::string token;
    std::string model = "gpt-4o";
    int timeout_seconds = 60;

    /// Reads AFT_LLM_URL, AFT_LLM_TOKEN and AFT_LLM_MODEL; empty without a URL.
    static std::optional<LlmSettings> from_environment();
};

/// Sends one request body and returns the raw response body. Throws BackendUnavailable.
class LlmTransport
{
  public:
    virtual ~LlmTransport() = default;
    virtual std::string post(const LlmSettings& settings, const std::string& body) const = 0;
};

/// HTTP(S) POST to `<base_url>/chat/completions` with a bearer token.
class HttpTransport final : public LlmTransport
{
  public:
    std::string post(const LlmSettings& settings, const std::string& body) const override;
};

enum class FieldType
{
    String,
    Integer,
    StringList,
    ObjectList,
};

struct SchemaField
{
    std::string name;
    FieldType type = FieldType::String;
};

using ResponseSchema = std::vector<SchemaField>;

struct LlmResponse
{
    nlohmann::json fields;
    int retries = 0;
};

class LlmClient
{
  public:
    LlmClient(LlmSettings settings, std::shared_ptr<const LlmTransport> transport);

    /// Sends the prompt, validates the reply against `schema` and retries once with a
    /// repair instruction. Throws BackendUnavailable or SchemaViolation.
    LlmResponse query(const std::string& prompt, const ResponseSchema& schema) const;

  private:
    LlmSettings settings_;
    std::shared_ptr<const LlmTransport> transport_;
};

/// Fills `{{name}}` placeholders of a prompt template.
std::string render_prompt(std::string_view templ, const std::map<std::string, std::string>& values);

/// Backend asking an LLM service; every stage falls back to the rule backend when the
/// service is unreachable. Replies naming unknown parts are rejected.
class LlmBackend final : public ReasoningBackend
{
  public:
    explicit LlmBackend(LlmClient client);

    std::string name() const override { return "llm"; }
    std::vector<std::string> label_regions(const TaskRequest& request, const std::vector<RegionSummary>& regions,
                                           std::vector<std::string>& warnings) const override;
    TaskPlan plan(const TaskRequest& request) const override;
    PartMapping match(const TaskRequest& request, const RegionLabeling& labeling, const Database& db) const override;

  private:
    LlmClient client_;
    RuleBackend fallback_;
};

} // namespace aft
