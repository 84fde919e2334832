#include "support.hpp"

#include "aft/evalkit.hpp"
#include "aft/ply.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aft;
namespace fs = std::filesystem;

namespace
{

const fs::path root = fs::temp_directory_path() / "aft_test_cli";

int run(const std::string& args)
{
    const std::string cmd = std::string(AFT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p)
{
    return "'" + p.string() + "'";
}

/// Every CLI command once, writing into `dir`.
void run_all(const fs::path& dir)
{
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run("build-db --synthetic --with-screwdriver --points 800 --out " + q(dir / "db.json")) == 0);
    REQUIRE(run("gen-partial --synthetic screwdriver_like --points 1500 --seed 3 --rotate 3.0 --out " +
                q(dir / "query.ply")) == 0);
    REQUIRE(run("transfer --query " + q(dir / "query.ply") + " --object screwdriver --task screw --db " +
                q(dir / "db.json") + " --out " + q(dir / "colored.ply") + " --grasp-out " + q(dir / "grasp.json")) ==
            0);
    REQUIRE(run("score --cloud " + q(dir / "colored.ply") + " --out " + q(dir / "score.json")) == 0);
    REQUIRE(run("eval --ablation rotation --seed 7 --trials 1 --targets hammer_like,screwdriver_like --out " +
                q(dir / "rotation.csv") + " --summary " + q(dir / "rotation.txt")) == 0);
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file())
            out[e.path().filename().string()] = read_file(e.path());
    return out;
}

} // namespace

TEST_CASE("every command is byte-identical on a re-run")
{
    run_all(root / "a");
    run_all(root / "b");
    const auto a = snapshot(root / "a");
    const auto b = snapshot(root / "b");
    CHECK(a.size() >= 10);
    REQUIRE(a.size() == b.size());
    for (const auto& [name, bytes] : a)
    {
        INFO(name);
        REQUIRE(b.count(name) == 1);
        CHECK(bytes == b.at(name));
    }

    const nlohmann::json grasp = nlohmann::json::parse(a.at("grasp.json"));
    CHECK(grasp.at("proxy").at("object_class") == "screwdriver");
    CHECK(grasp.at("pose").size() == 16);
}

TEST_CASE("build-db output loads back field-exact")
{
    const fs::path dir = root / "a";
    if (!fs::exists(dir / "db.json"))
        run_all(dir);
    const Database loaded = load_database(dir / "db.json");
    const Database memory = make_synthetic_database({SyntheticShape::MugLike, SyntheticShape::HammerLike,
                                                     SyntheticShape::PanLike, SyntheticShape::BottleLike,
                                                     SyntheticShape::ScrewdriverLike},
                                                    800);
    REQUIRE(loaded.entries.size() == 5);
    for (const DatabaseEntry& e : memory.entries)
    {
        const DatabaseEntry* l = loaded.find(e.object_class, e.task);
        REQUIRE(l != nullptr);
        CHECK(l->reference.points == e.reference.points);
        CHECK(*l->reference.normals == *e.reference.normals);
        CHECK(l->affordance.heat == e.affordance.heat);
        CHECK(l->affordance.labels == e.affordance.labels);
        REQUIRE(l->subparts.size() == e.subparts.size());
        for (std::size_t s = 0; s < e.subparts.size(); ++s)
            CHECK(l->subparts[s].center == e.subparts[s].center);
    }
}

TEST_CASE("transfer of a database reference onto itself")
{
    const fs::path dir = root / "self";
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run("build-db --synthetic --points 1000 --out " + q(dir / "db.json")) == 0);
    const Database db = load_database(dir / "db.json");
    const DatabaseEntry& hammer = *db.find("hammer", "hammer");
    const nlohmann::json manifest = nlohmann::json::parse(read_file(dir / "db.json"));
    std::string cloud;
    for (const auto& e : manifest.at("entries"))
        if (e.at("object_class") == "hammer")
            cloud = e.at("cloud").get<std::string>();

    // References have unit extent, so the jaw must open wider than the 8 cm default.
    // Heat-only weights make a handle-free grasp win whenever one exists.
    atomic_write(dir / "config.json", R"({"max_width": 0.3, "w_dist": 0.0, "w_feas": 0.0})");
    REQUIRE(run("transfer --config " + q(dir / "config.json") + " --query " + q(dir / cloud) +
                " --object hammer --task hammer --db " + q(dir / "db.json") + " --out " + q(dir / "out.ply") +
                " --grasp-out " + q(dir / "grasp.json")) == 0);
    const PlyData out = read_ply(dir / "out.ply");
    REQUIRE(out.colors);
    for (Eigen::Index i = 0; i < out.cloud.size(); ++i)
    {
        const bool red = (*out.colors)(0, i) == 255 && (*out.colors)(2, i) == 0;
        CHECK(red == (hammer.affordance.labels[static_cast<std::size_t>(i)] == 1));
    }
    const nlohmann::json grasp = nlohmann::json::parse(read_file(dir / "grasp.json"));
    CHECK(grasp.at("score").at("s_heat").get<double>() == 0.0);
}

TEST_CASE("cross-class evaluation on four classes")
{
    const fs::path dir = root / "cross";
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run("eval --ablation crossclass --seed 7 --trials 1 --out " + q(dir / "cc.csv") + " --summary " +
                q(dir / "cc.txt")) == 0);
    std::istringstream lines(read_file(dir / "cc.csv"));
    std::string line;
    std::getline(lines, line);
    int rows = 0, diagonal = 0;
    while (std::getline(lines, line))
    {
        ++rows;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        diagonal += line.substr(0, c1) == line.substr(c1 + 1, c2 - c1 - 1);
    }
    CHECK(rows == 16);
    CHECK(diagonal == 4);
}

TEST_CASE("gen-partial on a sphere keeps a strict subset")
{
    const fs::path dir = root / "sphere";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const PointCloud s = aft::test::sphere(3000, 0.05);
    write_ply(dir / "sphere.ply", s);
    REQUIRE(run("gen-partial --input " + q(dir / "sphere.ply") + " --seed 2 --out " + q(dir / "view.ply")) == 0);
    const PointCloud v = read_ply(dir / "view.ply").cloud;
    CHECK(v.size() > 0);
    CHECK(v.size() < s.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        const int j = nearest_index(s.points, v.point(i));
        CHECK(s.points.col(j) == v.points.col(i));
    }
}

TEST_CASE("validation failures exit with 2 and write nothing")
{
    const fs::path dir = root / "errors";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_ply(dir / "q.ply", make_synthetic(SyntheticShape::HammerLike, 500, 0).cloud);

    CHECK(run("transfer --query " + q(dir / "q.ply") + " --object hammer --task hammer --db " +
              q(dir / "nope.json") + " --out " + q(dir / "out.ply") + " --grasp-out " + q(dir / "g.json")) == 2);
    CHECK_FALSE(fs::exists(dir / "out.ply"));
    CHECK_FALSE(fs::exists(dir / "g.json"));

    REQUIRE(run("build-db --synthetic --points 400 --out " + q(dir / "db.json")) == 0);
    const nlohmann::json manifest = nlohmann::json::parse(read_file(dir / "db.json"));
    const auto& e = manifest.at("entries").at(0);
    const std::string line = "class=" + e.at("object_class").get<std::string>() + " task=" +
                             e.at("task").get<std::string>() + " cloud=" + (dir / e.at("cloud").get<std::string>()).string() +
                             " heat=" + (dir / e.at("heat").get<std::string>()).string() + " part=grip:0,0,0:grasp-side";
    atomic_write(dir / "dup.txt", line + "\n" + line + "\n");
    CHECK(run("build-db --entries " + q(dir / "dup.txt") + " --out " + q(dir / "dup.json")) == 2);
    CHECK_FALSE(fs::exists(dir / "dup.json"));
    atomic_write(dir / "one.txt", line + "\n");
    CHECK(run("build-db --entries " + q(dir / "one.txt") + " --out " + q(dir / "one.json")) == 0);
    CHECK(load_database(dir / "one.json").entries.size() == 1);

    CHECK(run("eval --ablation rotation --descriptors sift") == 2);
    CHECK(run("transfer --bogus") == 2);
    CHECK(run("--help") == 0);
}
