#include "support.hpp"

#include "aft/correspondence.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace aft;

namespace
{

MatrixX random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    MatrixX m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = g(rng);
    return m;
}

SpectralBasis random_basis(Eigen::Index n, Eigen::Index k, std::uint64_t seed)
{
    SpectralBasis b;
    b.eigenfunctions = random_matrix(n, k, seed);
    b.mass = random_matrix(n, 1, seed + 1).col(0).cwiseAbs().array() + 0.5;
    b.eigenvalues = VectorX::LinSpaced(k, 0.0, 2.0 + static_cast<double>(seed % 3));
    return b;
}

Descriptor external(MatrixX values)
{
    Descriptor d;
    d.values = std::move(values);
    return d;
}

} // namespace

TEST_CASE("similarity_matrix: identity rows and hand arithmetic")
{
    const MatrixX eye = MatrixX::Identity(4, 4);
    const MatrixX s = similarity_matrix(eye, eye);
    for (int i = 0; i < 4; ++i)
        CHECK(s(i, i) == s.row(i).maxCoeff());

    MatrixX q(2, 1), r(2, 1);
    q << 0, 1;
    r << 0, 1;
    MatrixX expect(2, 2);
    expect << 0, -1, -1, 0;
    CHECK(similarity_matrix(q, r) == expect);
}

TEST_CASE("similarity_matrix equals a brute-force double loop exactly")
{
    const MatrixX q = random_matrix(5, 3, 1), r = random_matrix(7, 3, 2);
    const MatrixX s = similarity_matrix(q, r);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 7; ++j)
        {
            double d = 0.0;
            for (int c = 0; c < 3; ++c)
                d += (q(i, c) - r(j, c)) * (q(i, c) - r(j, c));
            CHECK(s(i, j) == -d);
        }
    CHECK_THROWS_AS(similarity_matrix(q, random_matrix(2, 4, 3)), Error);
}

TEST_CASE("sinkhorn_normalize: small cases")
{
    CHECK(sinkhorn_normalize(MatrixX::Constant(1, 1, -4.2))(0, 0) == 1.0);

    const MatrixX u = sinkhorn_normalize(MatrixX::Constant(6, 6, 0.3));
    CHECK((u.array() - 1.0 / 6.0).abs().maxCoeff() < 1e-15);

    // Symmetric 2x2: one pass already makes it doubly stochastic.
    MatrixX s(2, 2);
    s << 0, -1, -1, 0;
    const MatrixX p = sinkhorn_normalize(s, {10, 0.2});
    const double diag = 1.0 / (1.0 + std::exp(-1.0 / 0.2));
    CHECK(p(0, 0) == doctest::Approx(diag).epsilon(1e-15));
    CHECK(p(0, 1) == doctest::Approx(1.0 - diag).epsilon(1e-15));
    CHECK(p(1, 1) == doctest::Approx(diag).epsilon(1e-15));
}

TEST_CASE("sinkhorn_normalize follows the scripted alternating iteration")
{
    const MatrixX s = random_matrix(7, 5, 9);
    const SinkhornConfig cfg{4, 0.3};
    MatrixX k(7, 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j)
            k(i, j) = std::exp((s(i, j) - s.row(i).maxCoeff()) / cfg.lambda);
    for (int it = 0; it < cfg.iterations; ++it)
    {
        for (int i = 0; i < 7; ++i)
            k.row(i) /= k.row(i).sum();
        for (int j = 0; j < 5; ++j)
            k.col(j) /= k.col(j).sum();
    }
    for (int i = 0; i < 7; ++i)
        k.row(i) /= k.row(i).sum();
    CHECK((sinkhorn_normalize(s, cfg) - k).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(sinkhorn_normalize(s, {0, 0.2}), Error);
    CHECK_THROWS_AS(sinkhorn_normalize(s, {10, 0.0}), Error);
}

TEST_CASE("fit_functional_map: self map and scalar case")
{
    const SpectralBasis b = random_basis(40, 6, 4);
    const Descriptor d = external(random_matrix(40, 10, 5));
    const FunctionalMap self = fit_functional_map(b, b, d, d, 0.0);
    CHECK_FALSE(self.rank_deficient);
    CHECK((self.C - MatrixX::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);

    SpectralBasis one;
    one.eigenvalues = VectorX::Zero(1);
    one.eigenfunctions = MatrixX::Ones(1, 1);
    one.mass = VectorX::Ones(1);
    const FunctionalMap scalar =
        fit_functional_map(one, one, external(MatrixX::Constant(1, 1, 2.0)), external(MatrixX::Constant(1, 1, 3.0)));
    CHECK(scalar.C(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("fit_functional_map matches the vectorized normal equations")
{
    const SpectralBasis bq = random_basis(30, 3, 6), br = random_basis(25, 3, 7);
    const Descriptor dq = external(random_matrix(30, 8, 8)), dr = external(random_matrix(25, 8, 9));
    const double mu = 0.37;
    const FunctionalMap f = fit_functional_map(bq, br, dq, dr, mu);

    const MatrixX a = bq.eigenfunctions.transpose() * bq.mass.asDiagonal() * dq.values;
    const MatrixX b = br.eigenfunctions.transpose() * br.mass.asDiagonal() * dr.values;
    // vec(C A) = (A^T kron I) vec(C).
    const Eigen::Index k = 3, d = 8;
    MatrixX design = MatrixX::Zero(k * d, k * k);
    for (Eigen::Index col = 0; col < d; ++col)
        for (Eigen::Index j = 0; j < k; ++j)
            for (Eigen::Index i = 0; i < k; ++i)
                design(col * k + i, j * k + i) = a(j, col);
    VectorX penalty(k * k);
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < k; ++i)
            penalty(j * k + i) = mu * std::pow(br.eigenvalues(i) - bq.eigenvalues(j), 2);
    const MatrixX normal = design.transpose() * design + MatrixX(penalty.asDiagonal());
    const VectorX vec_b = Eigen::Map<const VectorX>(b.data(), b.size());
    const VectorX vec_c = normal.completeOrthogonalDecomposition().solve(design.transpose() * vec_b);
    const MatrixX oracle = Eigen::Map<const MatrixX>(vec_c.data(), k, k);
    CHECK((f.C - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("point maps from similarity")
{
    const MatrixX d = random_matrix(12, 3, 10);
    const PointMap self = point_map_from_similarity(similarity_matrix(d, d), std::nullopt);
    for (int i = 0; i < 12; ++i)
    {
        CHECK(self.target_index[static_cast<std::size_t>(i)] == i);
        CHECK(self.confidence(i) > 0.0);
        CHECK(self.confidence(i) <= 1.0);
    }

    MatrixX s(2, 3);
    s << 0.1, 0.9, 0.9,
         -1.0, -2.0, 0.5;
    const PointMap m = point_map_from_similarity(s, std::nullopt);
    CHECK(m.target_index == std::vector<int>{1, 2});

    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
    MatrixX q(12, 3);
    for (int i = 0; i < 12; ++i)
        q.row(i) = d.row(perm[static_cast<std::size_t>(i)]);
    CHECK(point_map_from_similarity(similarity_matrix(q, d), std::nullopt).target_index == perm);
    CHECK(point_map_from_similarity(similarity_matrix(q, d), SinkhornConfig{}).target_index == perm);
}

TEST_CASE("functional map point map recovers the identity on a shared basis")
{
    const SpectralBasis b = random_basis(20, 5, 12);
    FunctionalMap f;
    f.C = MatrixX::Identity(5, 5);
    const PointMap m = point_map_from_functional_map(f, b, b);
    for (int i = 0; i < 20; ++i)
        CHECK(m.target_index[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("transfer_affordance")
{
    AffordanceField ref = binarize((VectorX(4) << 0.0, 0.2, 0.8, 1.0).finished());
    PointMap id;
    id.target_index = {0, 1, 2, 3};
    id.confidence = VectorX::Ones(4);
    const AffordanceField copy = transfer_affordance(id, ref);
    CHECK(copy.heat == ref.heat);
    CHECK(copy.labels == ref.labels);

    const AffordanceField constant = transfer_affordance(id, binarize(VectorX::Constant(4, 0.7)));
    CHECK((constant.heat.array() == 0.7).all());

    PointMap bad = id;
    bad.target_index[2] = 4;
    CHECK_THROWS_AS(transfer_affordance(bad, ref), Error);
}

TEST_CASE("two-cluster transfer inherits cluster labels")
{
    Points r(3, 40), q(3, 30);
    r.leftCols(20) = aft::test::random_points(20, 1, 0.1);
    r.rightCols(20) = aft::test::random_points(20, 2, 0.1);
    r.rightCols(20).row(0).array() += 1.0;
    q.leftCols(15) = aft::test::random_points(15, 3, 0.1);
    q.rightCols(15) = aft::test::random_points(15, 4, 0.1);
    q.rightCols(15).row(0).array() += 1.0;
    VectorX heat(40);
    heat << VectorX::Ones(20), VectorX::Zero(20);
    const AffordanceField ref = binarize(heat);
    const PointMap m = point_map_from_similarity(
        similarity_matrix(MatrixX(q.transpose()), MatrixX(r.transpose())), std::nullopt);
    const AffordanceField out = transfer_affordance(m, ref);
    for (int i = 0; i < 30; ++i)
        CHECK(out.labels[static_cast<std::size_t>(i)] == (i < 15 ? 1 : 0));
}

TEST_CASE("voxel_downsample caps the size and lifts maps")
{
    const Points p = aft::test::random_points(3000, 13);
    const Downsampling d = voxel_downsample(p, 500);
    CHECK(d.representatives.size() <= 500);
    CHECK(d.representatives.size() > 100);
    CHECK(std::is_sorted(d.representatives.begin(), d.representatives.end()));
    REQUIRE(d.assignment.size() == 3000);
    for (std::size_t i = 0; i < d.representatives.size(); ++i)
        CHECK(d.assignment[static_cast<std::size_t>(d.representatives[i])] == static_cast<int>(i));

    PointMap reduced;
    for (std::size_t i = 0; i < d.representatives.size(); ++i)
        reduced.target_index.push_back(static_cast<int>(i) * 2);
    reduced.confidence = VectorX::LinSpaced(static_cast<Eigen::Index>(d.representatives.size()), 0.0, 1.0);
    const PointMap lifted = d.lift(reduced);
    REQUIRE(lifted.size() == 3000);
    for (std::size_t i = 0; i < 3000; i += 97)
        CHECK(lifted.target_index[i] == 2 * d.assignment[i]);

    const Downsampling none = voxel_downsample(p, 5000);
    CHECK(none.representatives.size() == 3000);
}
