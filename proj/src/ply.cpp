#include "aft/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace aft
{
namespace
{

enum class ScalarType
{
    Int8,
    UInt8,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Float32,
    Float64
};

ScalarType parse_type(const std::string& name)
{
    static const std::unordered_map<std::string, ScalarType> table{
        {"char", ScalarType::Int8},     {"int8", ScalarType::Int8},       {"uchar", ScalarType::UInt8},
        {"uint8", ScalarType::UInt8},   {"short", ScalarType::Int16},     {"int16", ScalarType::Int16},
        {"ushort", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},   {"int", ScalarType::Int32},
        {"int32", ScalarType::Int32},   {"uint", ScalarType::UInt32},     {"uint32", ScalarType::UInt32},
        {"float", ScalarType::Float32}, {"float32", ScalarType::Float32}, {"double", ScalarType::Float64},
        {"float64", ScalarType::Float64}};
    const auto it = table.find(name);
    if (it == table.end())
        throw Error(ErrorCode::IoError, "unknown PLY scalar type '" + name + "'");
    return it->second;
}

std::size_t type_size(ScalarType t)
{
    switch (t)
    {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
    }
    return 0;
}

struct Property
{
    std::string name;
    ScalarType type = ScalarType::Float32;
    bool is_list = false;
    ScalarType count_type = ScalarType::UInt8;
};

struct Element
{
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

enum class Encoding
{
    Ascii,
    BinaryLE,
    BinaryBE
};

class BinaryReader
{
  public:
    BinaryReader(const std::string& data, std::size_t pos, bool big_endian)
        : data_(data), pos_(pos), big_endian_(big_endian)
    {
    }

    double read(ScalarType t)
    {
        const std::size_t n = type_size(t);
        if (pos_ + n > data_.size())
            throw Error(ErrorCode::IoError, "PLY body truncated");
        unsigned char buf[8];
        std::memcpy(buf, data_.data() + pos_, n);
        pos_ += n;
        if (big_endian_ != (std::endian::native == std::endian::big))
            std::reverse(buf, buf + n);
        switch (t)
        {
        case ScalarType::Int8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
        case ScalarType::UInt8: return static_cast<double>(buf[0]);
        case ScalarType::Int16: return static_cast<double>(load<std::int16_t>(buf));
        case ScalarType::UInt16: return static_cast<double>(load<std::uint16_t>(buf));
        case ScalarType::Int32: return static_cast<double>(load<std::int32_t>(buf));
        case ScalarType::UInt32: return static_cast<double>(load<std::uint32_t>(buf));
        case ScalarType::Float32: return static_cast<double>(load<float>(buf));
        case ScalarType::Float64: return load<double>(buf);
        }
        return 0.0;
    }

  private:
    template <typename T>
    static T load(const unsigned char* buf)
    {
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }

    const std::string& data_;
    std::size_t pos_;
    bool big_endian_;
};

template <typename T>
void append_le(std::string& out, T v)
{
    static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

PlyData read_ply(const std::filesystem::path& path)
{
    const std::string data = read_file(path);
    std::size_t pos = 0;
    auto next_line = [&]() {
        const std::size_t end = data.find('\n', pos);
        if (end == std::string::npos)
            throw Error(ErrorCode::IoError, path.string() + ": PLY header not terminated");
        std::string line = data.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return line;
    };

    if (next_line() != "ply")
        throw Error(ErrorCode::IoError, path.string() + ": missing 'ply' magic");

    Encoding encoding = Encoding::Ascii;
    std::vector<Element> elements;
    for (;;)
    {
        const std::string line = next_line();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header")
            break;
        if (word == "format")
        {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii")
                encoding = Encoding::Ascii;
            else if (fmt == "binary_little_endian")
                encoding = Encoding::BinaryLE;
            else if (fmt == "binary_big_endian")
                encoding = Encoding::BinaryBE;
            else
                throw Error(ErrorCode::IoError, path.string() + ": unknown format " + fmt);
        }
        else if (word == "element")
        {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        }
        else if (word == "property")
        {
            if (elements.empty())
                throw Error(ErrorCode::IoError, path.string() + ": property before element");
            Property p;
            std::string type;
            ls >> type;
            if (type == "list")
            {
                std::string count_type, item_type;
                ls >> count_type >> item_type >> p.name;
                p.is_list = true;
                p.count_type = parse_type(count_type);
                p.type = parse_type(item_type);
            }
            else
            {
                p.type = parse_type(type);
                ls >> p.name;
            }
            elements.back().properties.push_back(p);
        }
        // comment / obj_info lines are ignored
    }

    PlyData out;
    std::istringstream ascii(encoding == Encoding::Ascii ? data.substr(pos) : std::string{});
    BinaryReader binary(data, pos, encoding == Encoding::BinaryBE);
    auto read_value = [&](ScalarType t) {
        if (encoding != Encoding::Ascii)
            return binary.read(t);
        double v;
        if (!(ascii >> v))
            throw Error(ErrorCode::IoError, path.string() + ": PLY body truncated");
        return v;
    };

    bool found_vertex = false;
    for (const Element& e : elements)
    {
        const bool is_vertex = e.name == "vertex";
        std::unordered_map<std::string, int> column;
        for (std::size_t k = 0; k < e.properties.size(); ++k)
            column[e.properties[k].name] = static_cast<int>(k);
        auto has = [&](const char* name) { return column.count(name) > 0; };

        const auto n = static_cast<Eigen::Index>(e.count);
        if (is_vertex)
        {
            if (!has("x") || !has("y") || !has("z"))
                throw Error(ErrorCode::IoError, path.string() + ": vertex element lacks x/y/z");
            out.cloud.points.resize(3, n);
            if (has("nx") && has("ny") && has("nz"))
                out.cloud.normals = Points(3, n);
            if (has("red") && has("green") && has("blue"))
                out.colors = Colors(3, n);
            if (has("heat"))
                out.heat = VectorX(n);
        }

        std::vector<double> row(e.properties.size());
        for (Eigen::Index i = 0; i < n; ++i)
        {
            for (std::size_t k = 0; k < e.properties.size(); ++k)
            {
                const Property& p = e.properties[k];
                if (p.is_list)
                {
                    const auto count = static_cast<std::size_t>(read_value(p.count_type));
                    for (std::size_t m = 0; m < count; ++m)
                        read_value(p.type);
                    row[k] = 0.0;
                }
                else
                {
                    row[k] = read_value(p.type);
                }
            }
            if (!is_vertex)
                continue;
            for (int c = 0; c < 3; ++c)
                out.cloud.points(c, i) = row[column[std::string(1, "xyz"[c])]];
            if (out.cloud.normals)
            {
                (*out.cloud.normals)(0, i) = row[column["nx"]];
                (*out.cloud.normals)(1, i) = row[column["ny"]];
                (*out.cloud.normals)(2, i) = row[column["nz"]];
            }
            if (out.colors)
            {
                (*out.colors)(0, i) = static_cast<std::uint8_t>(row[column["red"]]);
                (*out.colors)(1, i) = static_cast<std::uint8_t>(row[column["green"]]);
                (*out.colors)(2, i) = static_cast<std::uint8_t>(row[column["blue"]]);
            }
            if (out.heat)
                (*out.heat)(i) = row[column["heat"]];
        }
        if (is_vertex)
        {
            found_vertex = true;
            break;
        }
    }
    if (!found_vertex)
        throw Error(ErrorCode::IoError, path.string() + ": no vertex element");
    out.cloud.source_id = path.stem().string();
    return out;
}

std::string encode_ply(const PointCloud& cloud, const PlyWriteOptions& options)
{
    const Eigen::Index n = cloud.size();
    if (options.colors && options.colors->cols() != n)
        throw Error(ErrorCode::LengthMismatch, "color count differs from point count");
    if (options.heat && options.heat->size() != n)
        throw Error(ErrorCode::LengthMismatch, "heat count differs from point count");

    const bool ascii = options.format == PlyFormat::Ascii;
    std::string out = "ply\nformat ";
    out += ascii ? "ascii 1.0\n" : "binary_little_endian 1.0\n";
    if (!cloud.source_id.empty())
        out += "comment source " + cloud.source_id + "\n";
    out += "element vertex " + std::to_string(n) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    if (cloud.normals)
        out += "property double nx\nproperty double ny\nproperty double nz\n";
    if (options.colors)
        out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (options.heat)
        out += "property double heat\n";
    out += "end_header\n";

    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (ascii)
        {
            std::string line = format_double(cloud.points(0, i)) + " " + format_double(cloud.points(1, i)) + " " +
                               format_double(cloud.points(2, i));
            if (cloud.normals)
                for (int c = 0; c < 3; ++c)
                    line += " " + format_double((*cloud.normals)(c, i));
            if (options.colors)
                for (int c = 0; c < 3; ++c)
                    line += " " + std::to_string(static_cast<int>((*options.colors)(c, i)));
            if (options.heat)
                line += " " + format_double((*options.heat)(i));
            out += line + "\n";
            continue;
        }
        for (int c = 0; c < 3; ++c)
            append_le(out, cloud.points(c, i));
        if (cloud.normals)
            for (int c = 0; c < 3; ++c)
                append_le(out, (*cloud.normals)(c, i));
        if (options.colors)
            for (int c = 0; c < 3; ++c)
                append_le(out, (*options.colors)(c, i));
        if (options.heat)
            append_le(out, (*options.heat)(i));
    }
    return out;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, const PlyWriteOptions& options)
{
    atomic_write(path, encode_ply(cloud, options));
}

PointCloud read_obj(const std::filesystem::path& path)
{
    std::istringstream in(read_file(path));
    std::vector<Vec3> vertices, normals;
    std::string line;
    while (std::getline(in, line))
    {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        Vec3 v;
        if (tag == "v" || tag == "vn")
        {
            if (!(ls >> v(0) >> v(1) >> v(2)))
                throw Error(ErrorCode::IoError, path.string() + ": malformed '" + tag + "' record");
            (tag == "v" ? vertices : normals).push_back(v);
        }
    }
    PointCloud cloud;
    cloud.source_id = path.stem().string();
    cloud.points.resize(3, static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i)
        cloud.points.col(i) = vertices[i];
    if (!normals.empty() && normals.size() == vertices.size())
    {
        cloud.normals = Points(3, static_cast<Eigen::Index>(normals.size()));
        for (std::size_t i = 0; i < normals.size(); ++i)
            cloud.normals->col(i) = normals[i].normalized();
    }
    return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path)
{
    const std::string ext = path.extension().string();
    if (ext == ".obj" || ext == ".OBJ")
        return read_obj(path);
    return read_ply(path).cloud;
}

} // namespace aft
