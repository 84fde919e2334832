// Generalized symmetric eigensolver for L phi = lambda M phi with diagonal M.
//
// The problem is reduced to the standard form A y = lambda y with
// A = M^-1/2 L M^-1/2 and phi = M^-1/2 y. Small problems go through a dense
// solver. Large ones run Lanczos on the shift-inverted operator
// (A + s I)^-1, whose largest eigenvalues theta = 1 / (lambda + s) correspond to
// the smallest lambda. The Krylov basis is fully reorthogonalized and restarted
// by keeping the leading Ritz vectors (thick restart).

#include "aft/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace aft
{
namespace
{

SpectralBasis finish(const VectorX& lambdas, const MatrixX& ys, const VectorX& inv_sqrt_mass, const VectorX& mass)
{
    std::vector<Eigen::Index> order(lambdas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lambdas(a) < lambdas(b); });

    SpectralBasis out;
    out.mass = mass;
    out.eigenvalues.resize(lambdas.size());
    out.eigenfunctions.resize(ys.rows(), lambdas.size());
    for (Eigen::Index c = 0; c < lambdas.size(); ++c)
    {
        out.eigenvalues(c) = lambdas(order[c]);
        VectorX phi = inv_sqrt_mass.cwiseProduct(ys.col(order[c]));
        // Deterministic sign: the largest-magnitude entry is positive.
        Eigen::Index arg = 0;
        phi.cwiseAbs().maxCoeff(&arg);
        if (phi(arg) < 0.0)
            phi = -phi;
        out.eigenfunctions.col(c) = phi;
    }
    return out;
}

SpectralBasis solve_dense(const SparseMatrix& a, int k, const VectorX& inv_sqrt_mass, const VectorX& mass)
{
    const MatrixX dense = MatrixX(a);
    Eigen::SelfAdjointEigenSolver<MatrixX> solver(0.5 * (dense + dense.transpose()));
    if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::ConvergenceFailure, "dense eigensolver failed");
    return finish(solver.eigenvalues().head(k), solver.eigenvectors().leftCols(k), inv_sqrt_mass, mass);
}

class ShiftInvertLanczos
{
  public:
    ShiftInvertLanczos(const SparseMatrix& a, double shift, const EigenSolverOptions& options)
        : n_(a.rows()), shift_(shift), options_(options)
    {
        SparseMatrix shifted = a;
        for (Eigen::Index i = 0; i < n_; ++i)
            shifted.coeffRef(i, i) += shift;
        factor_.compute(shifted);
        if (factor_.info() != Eigen::Success)
            throw Error(ErrorCode::ConvergenceFailure, "factorization of the shifted operator failed");
    }

    /// Returns (lambda, y) for the k smallest eigenvalues of A.
    std::pair<VectorX, MatrixX> solve(int k)
    {
        const Eigen::Index m = std::min<Eigen::Index>(n_, std::max(2 * k + 32, k + 64));
        const Eigen::Index keep = std::min<Eigen::Index>(m - 1, k + (m - k) / 2);

        MatrixX basis(n_, m + 1);
        MatrixX h = MatrixX::Zero(m + 1, m + 1);
        std::mt19937_64 rng(options_.seed);
        basis.col(0) = random_unit(rng, basis, 0);

        Eigen::Index start = 0;
        VectorX theta;
        MatrixX ritz;
        double beta = 0.0;
        for (int restart = 0;; ++restart)
        {
            for (Eigen::Index j = start; j < m; ++j)
            {
                VectorX w = factor_.solve(VectorX(basis.col(j)));
                VectorX coeff = basis.leftCols(j + 1).transpose() * w;
                w.noalias() -= basis.leftCols(j + 1) * coeff;
                const VectorX again = basis.leftCols(j + 1).transpose() * w;
                w.noalias() -= basis.leftCols(j + 1) * again;
                coeff += again;
                h.col(j).head(j + 1) = coeff;
                beta = w.norm();
                h(j + 1, j) = beta;
                if (beta <= 1e-14 * std::max(1.0, std::abs(coeff(j))))
                {
                    // Invariant subspace found: continue from a fresh orthogonal direction.
                    h(j + 1, j) = 0.0;
                    beta = 0.0;
                    basis.col(j + 1) = random_unit(rng, basis, j + 1);
                }
                else
                {
                    basis.col(j + 1) = w / beta;
                }
            }

            const MatrixX t = 0.5 * (h.topLeftCorner(m, m) + h.topLeftCorner(m, m).transpose());
            Eigen::SelfAdjointEigenSolver<MatrixX> small(t);
            // Descending theta.
            theta = small.eigenvalues().reverse();
            ritz = small.eigenvectors().rowwise().reverse();

            Eigen::Index converged = 0;
            for (Eigen::Index i = 0; i < k; ++i)
                if (std::abs(beta * ritz(m - 1, i)) <= options_.tolerance * std::abs(theta(i)))
                    ++converged;
            if (converged == k)
                break;
            if (restart >= options_.max_restarts || m == n_)
            {
                if (m == n_)
                    break;
                std::ostringstream msg;
                msg << "Lanczos did not converge after " << restart << " restarts (" << converged << "/" << k
                    << " pairs converged, Krylov dimension " << m << ")";
                throw Error(ErrorCode::ConvergenceFailure, msg.str());
            }

            const MatrixX kept = basis.leftCols(m) * ritz.leftCols(keep);
            const VectorX residual = basis.col(m);
            basis.leftCols(keep) = kept;
            basis.col(keep) = residual;
            h.setZero();
            for (Eigen::Index i = 0; i < keep; ++i)
            {
                h(i, i) = theta(i);
                h(keep, i) = h(i, keep) = beta * ritz(m - 1, i);
            }
            start = keep;
        }

        VectorX lambdas(k);
        for (Eigen::Index i = 0; i < k; ++i)
            lambdas(i) = 1.0 / theta(i) - shift_;
        return {lambdas, basis.leftCols(m) * ritz.leftCols(k)};
    }

  private:
    VectorX random_unit(std::mt19937_64& rng, const MatrixX& basis, Eigen::Index used)
    {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int attempt = 0; attempt < 8; ++attempt)
        {
            VectorX v(n_);
            for (Eigen::Index i = 0; i < n_; ++i)
                v(i) = gauss(rng);
            for (int pass = 0; pass < 2 && used > 0; ++pass)
                v -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
            const double norm = v.norm();
            if (norm > 1e-8)
                return v / norm;
        }
        throw Error(ErrorCode::ConvergenceFailure, "could not extend the Krylov basis");
    }

    Eigen::Index n_;
    double shift_;
    EigenSolverOptions options_;
    Eigen::SimplicialLDLT<SparseMatrix> factor_;
};

} // namespace

SpectralBasis eigendecompose(const SparseMatrix& stiffness, const VectorX& mass, int k,
                             const EigenSolverOptions& options)
{
    const Eigen::Index n = stiffness.rows();
    if (stiffness.cols() != n || mass.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "stiffness and mass sizes disagree");
    if (n == 0)
        throw Error(ErrorCode::InvalidArgument, "empty operator");
    if ((mass.array() <= 0.0).any())
        throw Error(ErrorCode::InvalidArgument, "mass must be positive");
    if (k < 1)
        throw Error(ErrorCode::InvalidArgument, "k must be positive");
    k = static_cast<int>(std::min<Eigen::Index>(k, n));

    const VectorX inv_sqrt_mass = mass.cwiseSqrt().cwiseInverse();
    const SparseMatrix a = inv_sqrt_mass.asDiagonal() * stiffness * inv_sqrt_mass.asDiagonal();

    SpectralBasis out;
    if (n <= options.dense_threshold || 3 * static_cast<Eigen::Index>(k) > n)
    {
        out = solve_dense(a, k, inv_sqrt_mass, mass);
    }
    else
    {
        const double mean_diag = a.diagonal().mean();
        const double shift = 1e-3 * std::max(mean_diag, 1e-12);
        ShiftInvertLanczos lanczos(a, shift, options);
        const auto [lambdas, ys] = lanczos.solve(k);
        out = finish(lambdas, ys, inv_sqrt_mass, mass);
    }

    const VectorX residuals = eigen_residuals(stiffness, out);
    for (Eigen::Index i = 0; i < out.size(); ++i)
    {
        const double bound = options.residual_bound * std::max(1.0, std::abs(out.eigenvalues(i)));
        if (!(residuals(i) <= bound))
        {
            std::ostringstream msg;
            msg << "eigenpair " << i << " residual " << residuals(i) << " exceeds " << bound;
            throw Error(ErrorCode::ConvergenceFailure, msg.str());
        }
    }
    return out;
}

} // namespace aft
