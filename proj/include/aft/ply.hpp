#pragma once

#include "aft/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace aft
{

using Colors = Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>;

/// Vertex data of a PLY file. `heat` is the optional per-vertex `heat` scalar property.
struct PlyData
{
    PointCloud cloud;
    std::optional<Colors> colors;
    std::optional<VectorX> heat;
};

enum class PlyFormat
{
    BinaryLittleEndian,
    Ascii,
};

struct PlyWriteOptions
{
    PlyFormat format = PlyFormat::BinaryLittleEndian;
    const Colors* colors = nullptr;
    const VectorX* heat = nullptr;
};

/// Reads ASCII and binary (either endianness) PLY. Only the vertex element is used.
PlyData read_ply(const std::filesystem::path& path);

/// Coordinates and normals are written as 64-bit floats so values survive exactly.
std::string encode_ply(const PointCloud& cloud, const PlyWriteOptions& options = {});
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, const PlyWriteOptions& options = {});

/// Vertex (`v`) and vertex-normal (`vn`, when one per vertex) records of an OBJ file.
PointCloud read_obj(const std::filesystem::path& path);

/// Dispatches on extension (.ply / .obj).
PointCloud read_cloud(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames, so readers never see partial output.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

} // namespace aft
