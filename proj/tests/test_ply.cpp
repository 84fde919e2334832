#include "support.hpp"

#include "aft/ply.hpp"

#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace aft;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "aft_test_ply";
    fs::create_directories(dir);
    return dir / name;
}

PointCloud cloud_with_normals(int n, std::uint64_t seed)
{
    PointCloud c(aft::test::random_points(n, seed));
    Points normals = aft::test::random_points(n, seed + 1);
    normals.colwise().normalize();
    c.normals = normals;
    return c;
}

} // namespace

TEST_CASE("binary PLY round trip is bit-exact")
{
    const PointCloud c = cloud_with_normals(257, 1);
    Colors colors(3, 257);
    for (int i = 0; i < 257; ++i)
        colors.col(i) << static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(255 - i % 256), 7;
    const VectorX heat = VectorX::LinSpaced(257, 0.0, 1.0);

    PlyWriteOptions o;
    o.colors = &colors;
    o.heat = &heat;
    const fs::path path = scratch("binary.ply");
    write_ply(path, c, o);
    const PlyData d = read_ply(path);

    CHECK(d.cloud.points == c.points);
    REQUIRE(d.cloud.normals);
    CHECK(*d.cloud.normals == *c.normals);
    REQUIRE(d.colors);
    CHECK(*d.colors == colors);
    REQUIRE(d.heat);
    CHECK(*d.heat == heat);
}

TEST_CASE("ASCII PLY round trip is exact")
{
    const PointCloud c = cloud_with_normals(50, 3);
    PlyWriteOptions o;
    o.format = PlyFormat::Ascii;
    const fs::path path = scratch("ascii.ply");
    write_ply(path, c, o);
    const PlyData d = read_ply(path);
    CHECK(d.cloud.points == c.points);
    CHECK(*d.cloud.normals == *c.normals);
    CHECK_FALSE(d.colors);
    CHECK_FALSE(d.heat);
}

TEST_CASE("big-endian float PLY with extra properties")
{
    std::string bytes = "ply\nformat binary_big_endian 1.0\ncomment hand made\nelement vertex 2\n"
                        "property float x\nproperty float y\nproperty float z\nproperty int id\n"
                        "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
    auto put = [&bytes](auto v) {
        char raw[sizeof v];
        std::memcpy(raw, &v, sizeof v);
        if constexpr (std::endian::native == std::endian::little)
            std::reverse(raw, raw + sizeof v);
        bytes.append(raw, sizeof v);
    };
    put(1.5f), put(-2.0f), put(0.25f), put(std::int32_t{7});
    put(3.0f), put(4.0f), put(5.0f), put(std::int32_t{8});
    const fs::path path = scratch("be.ply");
    atomic_write(path, bytes);

    const PlyData d = read_ply(path);
    REQUIRE(d.cloud.size() == 2);
    CHECK(d.cloud.point(0) == Vec3(1.5, -2.0, 0.25));
    CHECK(d.cloud.point(1) == Vec3(3.0, 4.0, 5.0));
}

TEST_CASE("OBJ vertices and normals")
{
    const fs::path path = scratch("tri.obj");
    atomic_write(path, "# triangle\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvn 0 0 1\nvn 0 0 1\nf 1//1 2//2 3//3\n");
    const PointCloud c = read_cloud(path);
    REQUIRE(c.size() == 3);
    CHECK(c.point(1) == Vec3(1, 0, 0));
    REQUIRE(c.normals);
    CHECK(c.normals->col(2) == Vec3(0, 0, 1));
}

TEST_CASE("malformed input raises IoError")
{
    const fs::path path = scratch("bad.ply");
    atomic_write(path, "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                       "property float z\nend_header\n0 0 0\n1 1 1\n");
    try
    {
        read_ply(path);
        FAIL("truncated file accepted");
    }
    catch (const Error& e)
    {
        CHECK(e.code() == ErrorCode::IoError);
    }
    CHECK_THROWS_AS(read_ply(scratch("missing.ply")), Error);
    CHECK_THROWS_AS(read_cloud(scratch("cloud.xyz")), Error);
}

TEST_CASE("atomic_write replaces content and leaves no temporary")
{
    const fs::path path = scratch("atomic.txt");
    atomic_write(path, "first");
    atomic_write(path, "second");
    CHECK(read_file(path) == "second");
    int siblings = 0;
    for (const auto& e : fs::directory_iterator(path.parent_path()))
        siblings += e.path().filename().string().rfind("atomic.txt", 0) == 0;
    CHECK(siblings == 1);
}
