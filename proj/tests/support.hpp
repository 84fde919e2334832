#pragma once

#include "aft/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace aft::test
{

inline Points random_points(int n, std::uint64_t seed, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    Points p(3, n);
    for (int i = 0; i < n; ++i)
        p.col(i) = Vec3(u(rng), u(rng), u(rng));
    return p;
}

/// Fibonacci lattice on the unit sphere; normals equal the positions.
inline PointCloud sphere(int n, double radius = 1.0)
{
    Points p(3, n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i)
    {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - z * z);
        p.col(i) = Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z);
    }
    PointCloud c(radius * p);
    c.normals = p;
    return c;
}

/// Regular grid on the plane z = `z` with the given normal sign.
inline PointCloud plane(int side, double spacing, double z = 0.0, double normal_z = 1.0)
{
    Points p(3, side * side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            p.col(i * side + j) = Vec3(i * spacing, j * spacing, z);
    PointCloud c(p);
    c.normals = Points(3, side * side);
    c.normals->colwise() = Vec3(0.0, 0.0, normal_z);
    return c;
}

inline double rotation_angle(const Mat3& r)
{
    return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}

} // namespace aft::test
