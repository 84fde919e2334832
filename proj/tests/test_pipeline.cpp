#include "support.hpp"

#include "aft/evalkit.hpp"
#include "aft/pipeline.hpp"

#include <doctest.h>

#include <filesystem>

using namespace aft;

namespace
{

Database tool_database()
{
    return make_synthetic_database(
        {SyntheticShape::MugLike, SyntheticShape::HammerLike, SyntheticShape::PanLike, SyntheticShape::BottleLike},
        2000);
}

TransferOptions no_grasp()
{
    TransferOptions o;
    o.select_grasp = false;
    return o;
}

} // namespace

TEST_CASE("config JSON round trip and validation")
{
    PipelineConfig c;
    CHECK(c.weights.w_heat == 1.0);
    CHECK(c.weights.w_dist == 0.05);
    CHECK(c.weights.w_feas == 1.0);
    c.descriptor = DescriptorKind::Wks;
    c.sinkhorn_enabled = true;
    c.sinkhorn.lambda = 0.35;
    c.seed = 1234567890123ULL;
    c.weights.w_dist = 0.1 / 3.0;
    c.spectral.bandwidth = 0.0125;
    c.reference_approach = Vec3(0.1, -0.2, -1.0);
    c.correspondence = CorrespondenceMode::FunctionalMap;

    const PipelineConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.weights.w_dist == c.weights.w_dist);
    CHECK(back.seed == c.seed);
    CHECK(back.spectral.bandwidth == c.spectral.bandwidth);
    CHECK(back.reference_approach == c.reference_approach);

    const auto path = std::filesystem::temp_directory_path() / "aft_test_config.json";
    save_config(c, path);
    CHECK(config_to_json(load_config(path)) == config_to_json(c));

    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"descriptr", "xyz"}}), Error);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"num_regions", 0}}), Error);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"w_heat", -1.0}}), Error);

    const PipelineConfig partial = config_from_json(nlohmann::json{{"seed", 9}}, c);
    CHECK(partial.seed == 9);
    CHECK(partial.descriptor == DescriptorKind::Wks);
}

TEST_CASE("stage exit codes")
{
    CHECK(exit_code(Stage::Input) == 2);
    CHECK(exit_code(Stage::Reasoning) == 3);
    CHECK(exit_code(Stage::Alignment) == 4);
    CHECK(exit_code(Stage::Spectral) == 5);
    CHECK(exit_code(Stage::Grasp) == 6);
}

TEST_CASE("self-transfer reproduces the reference labels")
{
    const Database db = tool_database();
    const RuleBackend rule;
    for (const DescriptorKind d : {DescriptorKind::Xyz, DescriptorKind::Hks, DescriptorKind::Wks})
    {
        PipelineConfig c;
        c.descriptor = d;
        c.spectral.num_eigenpairs = 60;
        for (const DatabaseEntry& e : db.entries)
        {
            const PipelineResult r =
                run_transfer(e.reference, {e.object_class, e.task, std::nullopt}, db, rule, c, no_grasp());
            CHECK(r.mapping.proxy(db).object_class == e.object_class);
            CHECK(r.field.labels == e.affordance.labels);
        }
    }
}

TEST_CASE("alignment residual does not depend on a pre-rotation")
{
    const Database db = tool_database();
    const RuleBackend rule;
    const SyntheticObject h = make_synthetic(SyntheticShape::HammerLike, 2000, 0);
    const PipelineResult base = run_transfer(h.cloud, {"hammer", "hammer", {}}, db, rule, {}, no_grasp());
    for (std::uint64_t s = 0; s < 4; ++s)
    {
        const PointCloud rotated = random_rotation(s, 2.0 * std::numbers::pi).apply(h.cloud);
        const PipelineResult r = run_transfer(rotated, {"hammer", "hammer", {}}, db, rule, {}, no_grasp());
        REQUIRE(r.alignment);
        CHECK(std::abs(r.alignment->residual - base.alignment->residual) < 1e-9);
        CHECK(r.field.labels == base.field.labels);
    }
}

TEST_CASE("screwdriver against the tool database: handle to the receiver")
{
    const Database db = tool_database();
    const RuleBackend rule;
    const SyntheticObject sd = make_synthetic(SyntheticShape::ScrewdriverLike, 2000, 0);
    // Heat-only weights: any candidate clear of the handle beats every one touching it.
    PipelineConfig heat_only;
    heat_only.weights = {1.0, 0.0, 0.0};
    const PipelineResult r = run_transfer(sd.cloud, {"screwdriver", "screw", {}}, db, rule, heat_only);
    CHECK(r.mapping.proxy(db).object_class == "hammer");
    CHECK(compute_metrics(r.field.labels, sd.field.labels).accuracy >= 0.85);
    REQUIRE(r.selection);
    const Vec3 handle = sd.subparts[0].center;
    const Vec3 shaft = sd.subparts[1].center;
    const Vec3 g = r.selection->grasp.center();
    CHECK((g - shaft).norm() < (g - handle).norm());
    CHECK(r.selection->score.s_heat == 0.0);

    const Colors colors = label_colors(r.field.labels);
    for (std::size_t i = 0; i < r.field.labels.size(); ++i)
        CHECK(colors(0, static_cast<Eigen::Index>(i)) == (r.field.labels[i] ? 255 : 0));
}

TEST_CASE("pipeline failures carry their stage")
{
    const Database db = tool_database();
    const RuleBackend rule;
    const SyntheticObject h = make_synthetic(SyntheticShape::HammerLike, 500, 0);
    try
    {
        run_transfer(h.cloud, {"hammer", "hammer", {}}, Database{}, rule, {});
        FAIL("empty database accepted");
    }
    catch (const StageError& e)
    {
        CHECK(e.stage() == Stage::Input);
    }

    try
    {
        run_transfer(PointCloud(Points::Zero(3, 50)), {"hammer", "hammer", {}}, db, rule, {});
        FAIL("degenerate query accepted");
    }
    catch (const StageError& e)
    {
        CHECK(e.stage() == Stage::Input);
        CHECK(e.code() == ErrorCode::DegenerateCloud);
    }

    PipelineConfig narrow;
    narrow.max_width = 0.001;
    try
    {
        run_transfer(h.cloud, {"hammer", "hammer", {}}, db, rule, narrow);
        FAIL("grasp without width accepted");
    }
    catch (const StageError& e)
    {
        CHECK(e.stage() == Stage::Grasp);
        CHECK(exit_code(e.stage()) == 6);
    }
}

TEST_CASE("forced proxy and grasp record")
{
    const Database db = tool_database();
    const RuleBackend rule;
    const SyntheticObject h = make_synthetic(SyntheticShape::HammerLike, 1500, 0);
    TransferOptions o;
    o.proxy_index = static_cast<std::size_t>(db.find("hammer", "hammer") - db.entries.data());
    const PipelineResult r = run_transfer(h.cloud, {"hammer", "hammer", {}}, db, rule, {}, o);
    REQUIRE(r.selection);
    const nlohmann::json j = grasp_to_json(*r.selection, r.handover);
    CHECK(j.at("pose").size() == 16);
    CHECK(j.at("handover_rotation").size() == 9);
    CHECK(j.at("score").at("total").get<double>() == r.selection->score.total);
    CHECK(j.at("pose").at(15).get<double>() == 1.0);
}
