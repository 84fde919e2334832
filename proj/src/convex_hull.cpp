#include "convex_hull.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>

namespace aft::detail
{
namespace
{

struct Face
{
    int v[3];
    Vec3 normal;
    double offset;
    bool alive = true;
};

std::uint64_t edge_key(int a, int b)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

class IncrementalHull
{
  public:
    IncrementalHull(const Points& pts, double eps) : pts_(pts), eps_(eps) {}

    void build()
    {
        const int n = static_cast<int>(pts_.cols());
        const auto seed = initial_simplex();
        interior_ = (pts_.col(seed[0]) + pts_.col(seed[1]) + pts_.col(seed[2]) + pts_.col(seed[3])) / 4.0;

        add_face(seed[0], seed[1], seed[2], true);
        add_face(seed[0], seed[1], seed[3], true);
        add_face(seed[0], seed[2], seed[3], true);
        add_face(seed[1], seed[2], seed[3], true);

        std::vector<bool> used(n, false);
        for (int s : seed)
            used[s] = true;

        for (int i = 0; i < n; ++i)
        {
            if (used[i])
                continue;
            insert(i);
            if (dead_ > 64 && dead_ > static_cast<int>(faces_.size()) / 2)
                compact();
        }
    }

    std::vector<int> vertices() const
    {
        std::vector<int> out;
        for (const auto& f : faces_)
            if (f.alive)
                out.insert(out.end(), f.v, f.v + 3);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

  private:
    double distance(const Face& f, int p) const { return f.normal.dot(pts_.col(p)) - f.offset; }

    std::array<int, 4> initial_simplex() const
    {
        const int n = static_cast<int>(pts_.cols());
        if (n < 4)
            throw Error(ErrorCode::DegenerateCloud, "convex hull needs at least 4 points");

        int i0 = 0;
        for (int i = 1; i < n; ++i)
            if (pts_(0, i) < pts_(0, i0))
                i0 = i;

        int i1 = i0;
        double best = -1.0;
        for (int i = 0; i < n; ++i)
        {
            const double d = (pts_.col(i) - pts_.col(i0)).squaredNorm();
            if (d > best)
            {
                best = d;
                i1 = i;
            }
        }
        const Vec3 dir = (pts_.col(i1) - pts_.col(i0)).normalized();

        int i2 = i0;
        best = -1.0;
        for (int i = 0; i < n; ++i)
        {
            const Vec3 r = pts_.col(i) - pts_.col(i0);
            const double d = (r - r.dot(dir) * dir).squaredNorm();
            if (d > best)
            {
                best = d;
                i2 = i;
            }
        }
        if (std::sqrt(best) <= eps_)
            throw Error(ErrorCode::DegenerateCloud, "points are collinear");

        const Vec3 nrm = (pts_.col(i1) - pts_.col(i0)).cross(pts_.col(i2) - pts_.col(i0)).normalized();
        int i3 = i0;
        best = -1.0;
        for (int i = 0; i < n; ++i)
        {
            const double d = std::abs(nrm.dot(pts_.col(i) - pts_.col(i0)));
            if (d > best)
            {
                best = d;
                i3 = i;
            }
        }
        if (best <= eps_)
            throw Error(ErrorCode::DegenerateCloud, "points are coplanar");
        return {i0, i1, i2, i3};
    }

    /// Faces are stored counter-clockwise seen from outside. Only the initial
    /// simplex needs the interior test; horizon faces inherit orientation.
    int add_face(int a, int b, int c, bool orient = false)
    {
        Face f;
        Vec3 nrm = (pts_.col(b) - pts_.col(a)).cross(pts_.col(c) - pts_.col(a));
        if (orient && nrm.dot(interior_ - pts_.col(a)) > 0.0)
        {
            std::swap(b, c);
            nrm = -nrm;
        }
        f.v[0] = a;
        f.v[1] = b;
        f.v[2] = c;
        f.normal = nrm.normalized();
        f.offset = f.normal.dot(pts_.col(a));
        const int id = static_cast<int>(faces_.size());
        faces_.push_back(f);
        edges_[edge_key(a, b)] = id;
        edges_[edge_key(b, c)] = id;
        edges_[edge_key(c, a)] = id;
        return id;
    }

    void kill_face(int id)
    {
        Face& f = faces_[id];
        f.alive = false;
        ++dead_;
        for (int e = 0; e < 3; ++e)
        {
            const auto it = edges_.find(edge_key(f.v[e], f.v[(e + 1) % 3]));
            if (it != edges_.end() && it->second == id)
                edges_.erase(it);
        }
    }

    void insert(int p)
    {
        int start = -1;
        double best = eps_;
        for (int i = 0; i < static_cast<int>(faces_.size()); ++i)
        {
            if (!faces_[i].alive)
                continue;
            const double d = distance(faces_[i], p);
            if (d > best)
            {
                best = d;
                start = i;
            }
        }
        if (start < 0)
            return;

        // Flood the connected visible region; its boundary is the horizon.
        std::vector<int> visible{start};
        std::vector<char> mark(faces_.size(), 0); // 1 visible, 2 hidden
        mark[start] = 1;
        std::vector<std::pair<int, int>> horizon;
        for (std::size_t q = 0; q < visible.size(); ++q)
        {
            const Face f = faces_[visible[q]];
            for (int e = 0; e < 3; ++e)
            {
                const int a = f.v[e];
                const int b = f.v[(e + 1) % 3];
                const auto it = edges_.find(edge_key(b, a));
                if (it == edges_.end())
                    continue;
                const int nb = it->second;
                if (mark[nb] == 0)
                {
                    mark[nb] = distance(faces_[nb], p) > eps_ ? 1 : 2;
                    if (mark[nb] == 1)
                        visible.push_back(nb);
                }
                if (mark[nb] == 2)
                    horizon.emplace_back(a, b);
            }
        }

        for (int id : visible)
            kill_face(id);
        for (const auto& [a, b] : horizon)
            add_face(a, b, p);
    }

    void compact()
    {
        std::vector<Face> kept;
        kept.reserve(faces_.size() - dead_);
        for (const auto& f : faces_)
            if (f.alive)
                kept.push_back(f);
        faces_ = std::move(kept);
        edges_.clear();
        for (int id = 0; id < static_cast<int>(faces_.size()); ++id)
        {
            const Face& f = faces_[id];
            edges_[edge_key(f.v[0], f.v[1])] = id;
            edges_[edge_key(f.v[1], f.v[2])] = id;
            edges_[edge_key(f.v[2], f.v[0])] = id;
        }
        dead_ = 0;
    }

    const Points& pts_;
    double eps_;
    Vec3 interior_ = Vec3::Zero();
    std::vector<Face> faces_;
    std::unordered_map<std::uint64_t, int> edges_;
    int dead_ = 0;
};

} // namespace

std::vector<int> convex_hull_vertices(const Points& pts)
{
    if (pts.cols() < 4)
        throw Error(ErrorCode::DegenerateCloud, "convex hull needs at least 4 points");
    const Vec3 lo = pts.rowwise().minCoeff();
    const Vec3 hi = pts.rowwise().maxCoeff();
    const double scale = std::max((hi - lo).maxCoeff(), 1e-300);
    IncrementalHull hull(pts, 1e-11 * scale);
    hull.build();
    return hull.vertices();
}

} // namespace aft::detail
