// Parametric stand-ins for the evaluation classes: unions of cylinders, disks, frusta
// and torus sections, sampled uniformly by area with analytic normals.

#include "aft/evalkit.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace aft
{
namespace
{

constexpr double pi = std::numbers::pi;

/// Uniform double in [0,1) from the top 53 bits, identical on every platform.
double unit(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Orthonormal pair perpendicular to unit `u`.
std::pair<Vec3, Vec3> frame(const Vec3& u)
{
    const Vec3 helper = std::abs(u.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = u.cross(helper).normalized();
    return {e1, u.cross(e1)};
}

struct Sample
{
    Vec3 point;
    Vec3 normal;
};

struct Primitive
{
    enum class Kind
    {
        Frustum, ///< lateral surface; a cylinder when both radii agree
        Annulus, ///< flat ring or disk
        Torus,   ///< tube around an arc
    };

    Kind kind = Kind::Frustum;
    int part = 0;
    Vec3 origin = Vec3::Zero();
    Vec3 axis = Vec3::UnitX(); ///< frustum/annulus: axis or normal; torus: first in-plane axis
    Vec3 axis2 = Vec3::UnitY(); ///< torus: second in-plane axis
    double length = 0.0;
    double r0 = 0.0; ///< frustum start radius; annulus inner; torus major radius
    double r1 = 0.0; ///< frustum end radius; annulus outer; torus tube radius
    double phi0 = 0.0;
    double phi1 = 0.0;
    /// Inner surfaces of hollow parts face the axis.
    bool inward = false;

    double area() const
    {
        switch (kind)
        {
        case Kind::Frustum: return pi * (r0 + r1) * std::hypot(length, r1 - r0);
        case Kind::Annulus: return pi * (r1 * r1 - r0 * r0);
        case Kind::Torus: return (phi1 - phi0) * 2.0 * pi * r0 * r1;
        }
        return 0.0;
    }

    Vec3 centroid() const
    {
        switch (kind)
        {
        case Kind::Frustum:
        {
            const double s = (r0 / 2.0 + (r1 - r0) / 3.0) / ((r0 + r1) / 2.0);
            return origin + s * length * axis;
        }
        case Kind::Annulus: return origin;
        case Kind::Torus:
        {
            const double k = (r0 * r0 + r1 * r1 / 2.0) / (r0 * (phi1 - phi0));
            return origin + k * ((std::sin(phi1) - std::sin(phi0)) * axis + (std::cos(phi0) - std::cos(phi1)) * axis2);
        }
        }
        return origin;
    }

    Sample sample(std::mt19937_64& rng) const
    {
        Sample s = sample_outward(rng);
        if (inward)
            s.normal = -s.normal;
        return s;
    }

    Sample sample_outward(std::mt19937_64& rng) const
    {
        switch (kind)
        {
        case Kind::Frustum:
        {
            // Inverse CDF of the radius-proportional density along the axis.
            const double u = unit(rng);
            const double dr = r1 - r0;
            const double s = std::abs(dr) < 1e-15 ? u : (-r0 + std::sqrt(r0 * r0 + dr * u * (r0 + r1))) / dr;
            const double theta = 2.0 * pi * unit(rng);
            const auto [e1, e2] = frame(axis);
            const Vec3 radial = std::cos(theta) * e1 + std::sin(theta) * e2;
            const double r = r0 + dr * s;
            return {origin + s * length * axis + r * radial, (length * radial - dr * axis).normalized()};
        }
        case Kind::Annulus:
        {
            const double rho = std::sqrt(r0 * r0 + unit(rng) * (r1 * r1 - r0 * r0));
            const double theta = 2.0 * pi * unit(rng);
            const auto [e1, e2] = frame(axis);
            return {origin + rho * (std::cos(theta) * e1 + std::sin(theta) * e2), axis};
        }
        case Kind::Torus:
        {
            const Vec3 w = axis.cross(axis2);
            double v = 0.0;
            // Rejection on the (R + r cos v) area density.
            do
                v = 2.0 * pi * unit(rng);
            while (unit(rng) * (r0 + r1) > r0 + r1 * std::cos(v));
            const double phi = phi0 + (phi1 - phi0) * unit(rng);
            const Vec3 radial = std::cos(phi) * axis + std::sin(phi) * axis2;
            const Vec3 normal = std::cos(v) * radial + std::sin(v) * w;
            return {origin + r0 * radial + r1 * normal, normal};
        }
        }
        return {origin, axis};
    }
};

Primitive cylinder(int part, const Vec3& origin, const Vec3& axis, double radius, double length)
{
    Primitive p;
    p.kind = Primitive::Kind::Frustum;
    p.part = part;
    p.origin = origin;
    p.axis = axis;
    p.r0 = p.r1 = radius;
    p.length = length;
    return p;
}

Primitive frustum(int part, const Vec3& origin, const Vec3& axis, double r0, double r1, double length)
{
    Primitive p = cylinder(part, origin, axis, r0, length);
    p.r1 = r1;
    return p;
}

Primitive inner(Primitive p)
{
    p.inward = true;
    return p;
}

Primitive disk(int part, const Vec3& center, const Vec3& normal, double inner, double outer)
{
    Primitive p;
    p.kind = Primitive::Kind::Annulus;
    p.part = part;
    p.origin = center;
    p.axis = normal;
    p.r0 = inner;
    p.r1 = outer;
    return p;
}

Primitive torus(int part, const Vec3& center, const Vec3& a1, const Vec3& a2, double major, double minor,
                double phi0, double phi1)
{
    Primitive p;
    p.kind = Primitive::Kind::Torus;
    p.part = part;
    p.origin = center;
    p.axis = a1;
    p.axis2 = a2;
    p.r0 = major;
    p.r1 = minor;
    p.phi0 = phi0;
    p.phi1 = phi1;
    return p;
}

struct PartSpec
{
    std::string name;
    SubpartRole role;
    double heat;
};

struct ShapeModel
{
    std::vector<PartSpec> parts;
    std::vector<Primitive> primitives;
};

/// Dimension jitter: every call returns nominal * (1 + variation * U[-1, 1]).
class Jitter
{
  public:
    Jitter(std::uint64_t seed, double variation) : rng_(seed ^ 0x9e3779b97f4a7c15ULL), variation_(variation) {}
    double operator()(double nominal) { return nominal * (1.0 + variation_ * (2.0 * unit(rng_) - 1.0)); }

  private:
    std::mt19937_64 rng_;
    double variation_;
};

ShapeModel build_model(SyntheticShape shape, Jitter& j)
{
    const Vec3 x = Vec3::UnitX();
    const Vec3 y = Vec3::UnitY();
    const Vec3 z = Vec3::UnitZ();
    ShapeModel m;
    switch (shape)
    {
    case SyntheticShape::HammerLike:
    {
        const double rh = j(0.014), lh = j(0.24), rk = j(0.018), lk = j(0.10), off = j(0.01);
        m.parts = {{"handle", SubpartRole::GraspSide, 1.0}, {"head", SubpartRole::FunctionSide, 0.0}};
        const double y0 = -lk / 2.0 + off;
        const Vec3 head_origin(lh + rk, y0, 0.0);
        m.primitives = {cylinder(0, Vec3::Zero(), x, rh, lh), disk(0, Vec3::Zero(), -x, 0.0, rh),
                        cylinder(1, head_origin, y, rk, lk), disk(1, head_origin, -y, 0.0, rk),
                        disk(1, head_origin + lk * y, y, 0.0, rk)};
        break;
    }
    case SyntheticShape::ScrewdriverLike:
    {
        const double rh = j(0.016), lh = j(0.11), rs = j(0.004), ls = j(0.09);
        m.parts = {{"handle", SubpartRole::GraspSide, 1.0}, {"shaft", SubpartRole::FunctionSide, 0.0}};
        m.primitives = {cylinder(0, Vec3::Zero(), x, rh, lh), disk(0, Vec3::Zero(), -x, 0.0, rh),
                        disk(0, lh * x, x, rs, rh), cylinder(1, lh * x, x, rs, ls),
                        disk(1, (lh + ls) * x, x, 0.0, rs)};
        break;
    }
    case SyntheticShape::MugLike:
    {
        const double rb = j(0.04), hb = j(0.09), rt = j(0.006), reach = j(0.03), wall = 0.004;
        m.parts = {{"body", SubpartRole::FunctionSide, 0.0}, {"handle", SubpartRole::GraspSide, 1.0}};
        m.primitives = {cylinder(0, Vec3::Zero(), z, rb, hb),
                        disk(0, Vec3::Zero(), -z, 0.0, rb),
                        inner(cylinder(0, wall * z, z, rb - wall, hb - wall)),
                        disk(0, wall * z, z, 0.0, rb - wall),
                        disk(0, hb * z, z, rb - wall, rb),
                        torus(1, Vec3(rb, 0.0, hb / 2.0), x, z, reach - rt, rt, -pi / 2.0, pi / 2.0)};
        break;
    }
    case SyntheticShape::Rod:
    {
        const double r = j(0.01), l = j(0.2);
        m.parts = {{"grip", SubpartRole::GraspSide, 1.0}, {"end", SubpartRole::FunctionSide, 0.0}};
        m.primitives = {cylinder(0, Vec3::Zero(), x, r, l / 2.0), disk(0, Vec3::Zero(), -x, 0.0, r),
                        cylinder(1, (l / 2.0) * x, x, r, l / 2.0), disk(1, l * x, x, 0.0, r)};
        break;
    }
    case SyntheticShape::PanLike:
    {
        const double rb = j(0.10), hb = j(0.04), rh = j(0.01), lh = j(0.18), wall = 0.004;
        m.parts = {{"body", SubpartRole::FunctionSide, 0.0}, {"handle", SubpartRole::GraspSide, 1.0}};
        const Vec3 handle_origin(rb, 0.0, 0.75 * hb);
        m.primitives = {cylinder(0, Vec3::Zero(), z, rb, hb),
                        disk(0, Vec3::Zero(), -z, 0.0, rb),
                        inner(cylinder(0, wall * z, z, rb - wall, hb - wall)),
                        disk(0, wall * z, z, 0.0, rb - wall),
                        disk(0, hb * z, z, rb - wall, rb),
                        cylinder(1, handle_origin, x, rh, lh),
                        disk(1, handle_origin + lh * x, x, 0.0, rh)};
        break;
    }
    case SyntheticShape::BottleLike:
    {
        const double rb = j(0.035), hb = j(0.16), hs = j(0.04), rn = j(0.012), hn = j(0.04);
        m.parts = {{"body", SubpartRole::GraspSide, 1.0}, {"neck", SubpartRole::FunctionSide, 0.0}};
        m.primitives = {cylinder(0, Vec3::Zero(), z, rb, hb), disk(0, Vec3::Zero(), -z, 0.0, rb),
                        frustum(1, hb * z, z, rb, rn, hs), cylinder(1, (hb + hs) * z, z, rn, hn),
                        disk(1, (hb + hs + hn) * z, z, 0.0, rn)};
        break;
    }
    }
    return m;
}

} // namespace

std::string_view to_string(SyntheticShape shape)
{
    switch (shape)
    {
    case SyntheticShape::HammerLike: return "hammer_like";
    case SyntheticShape::ScrewdriverLike: return "screwdriver_like";
    case SyntheticShape::MugLike: return "mug_like";
    case SyntheticShape::Rod: return "rod";
    case SyntheticShape::PanLike: return "pan_like";
    case SyntheticShape::BottleLike: return "bottle_like";
    }
    return "unknown";
}

SyntheticShape synthetic_shape_from_string(std::string_view name)
{
    for (SyntheticShape s : {SyntheticShape::HammerLike, SyntheticShape::ScrewdriverLike, SyntheticShape::MugLike,
                             SyntheticShape::Rod, SyntheticShape::PanLike, SyntheticShape::BottleLike})
        if (to_string(s) == name || synthetic_class(s).first == name)
            return s;
    throw Error(ErrorCode::InvalidArgument, "unknown synthetic shape '" + std::string(name) + "'");
}

std::pair<std::string, std::string> synthetic_class(SyntheticShape shape)
{
    switch (shape)
    {
    case SyntheticShape::HammerLike: return {"hammer", "hammer"};
    case SyntheticShape::ScrewdriverLike: return {"screwdriver", "screw"};
    case SyntheticShape::MugLike: return {"mug", "drink"};
    case SyntheticShape::Rod: return {"rod", "hold"};
    case SyntheticShape::PanLike: return {"pan", "cook"};
    case SyntheticShape::BottleLike: return {"bottle", "drink"};
    }
    return {"", ""};
}

SyntheticObject make_synthetic(SyntheticShape shape, int n_points, std::uint64_t seed, double variation)
{
    if (n_points < 100)
        throw Error(ErrorCode::InvalidArgument, "synthetic shapes need at least 100 points");
    if (!(variation >= 0.0 && variation < 0.5))
        throw Error(ErrorCode::InvalidArgument, "variation must lie in [0, 0.5)");
    Jitter jitter(seed, variation);
    const ShapeModel model = build_model(shape, jitter);

    std::vector<double> cumulative;
    double total = 0.0;
    for (const Primitive& p : model.primitives)
        cumulative.push_back(total += p.area());

    SyntheticObject out;
    std::tie(out.object_class, out.task) = synthetic_class(shape);
    Points pts(3, n_points);
    Points normals(3, n_points);
    VectorX heat(n_points);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_points; ++i)
    {
        const double u = unit(rng) * total;
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && u >= cumulative[k])
            ++k;
        const Sample s = model.primitives[k].sample(rng);
        pts.col(i) = s.point;
        normals.col(i) = s.normal;
        heat(i) = model.parts[static_cast<std::size_t>(model.primitives[k].part)].heat;
    }
    out.cloud = PointCloud(std::move(pts), std::string(to_string(shape)));
    out.cloud.normals = std::move(normals);
    out.field = binarize(heat, 0.5);

    for (std::size_t p = 0; p < model.parts.size(); ++p)
    {
        Vec3 weighted = Vec3::Zero();
        double area = 0.0;
        for (const Primitive& prim : model.primitives)
            if (prim.part == static_cast<int>(p))
            {
                weighted += prim.area() * prim.centroid();
                area += prim.area();
            }
        out.subparts.push_back({model.parts[p].name, weighted / area, model.parts[p].role});
    }
    return out;
}

DatabaseEntry make_reference_entry(const SyntheticObject& object)
{
    const NormalizedCloud canon = normalize_cloud(object.cloud);
    DatabaseEntry e;
    e.object_class = object.object_class;
    e.task = object.task;
    e.reference = canon.cloud;
    e.affordance = object.field;
    for (const Subpart& s : object.subparts)
        e.subparts.push_back({s.name, canon.transform.apply(s.center), s.role});
    return e;
}

Database make_synthetic_database(const std::vector<SyntheticShape>& shapes, int n_points)
{
    Database db;
    for (SyntheticShape s : shapes)
        db.add(make_reference_entry(make_synthetic(s, n_points, 0)));
    return db;
}

Vec3 random_viewpoint(const PointCloud& cloud, std::uint64_t seed, double distance_factor)
{
    const auto [center, radius] = bounding_sphere(cloud.points);
    const Vec3 axis = pca_axes(cloud).axes.col(0);
    const auto [e1, e2] = frame(axis);
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    const double azimuth = 2.0 * pi * unit(rng);
    // Side views: at most 30 degrees of elevation out of the plane normal to the tool axis.
    const double elevation = (2.0 * unit(rng) - 1.0) * pi / 6.0;
    const Vec3 dir = std::cos(elevation) * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2) +
                     std::sin(elevation) * axis;
    return center + distance_factor * radius * dir;
}

EvalInstance make_eval_instance(SyntheticShape shape, std::uint64_t seed, const InstanceOptions& options)
{
    const SyntheticObject object = make_synthetic(shape, options.n_points, options.shape_seed.value_or(seed), options.variation);
    EvalInstance out;
    out.shape = shape;
    if (options.partial)
    {
        const std::vector<int> visible = visible_indices(object.cloud, random_viewpoint(object.cloud, seed));
        out.cloud = object.cloud.subset(visible);
        for (int i : visible)
            out.truth.push_back(object.field.labels[static_cast<std::size_t>(i)]);
    }
    else
    {
        out.cloud = object.cloud;
        out.truth = object.field.labels;
    }
    if (options.max_rotation > 0.0)
        out.cloud = random_rotation(seed ^ 0xa0761d6478bd642fULL, options.max_rotation).apply(out.cloud);
    return out;
}

} // namespace aft
