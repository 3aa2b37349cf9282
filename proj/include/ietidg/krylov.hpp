#pragma once

#include "ietidg/linalg.hpp"

#include <functional>
#include <vector>

namespace ietidg {

/// y = op(x); y is preallocated by the caller with the right size.
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

struct ConditionEstimate {
    bool available = false;
    double eig_min = 0.0;  ///< smallest |Ritz value|, harmonic for MINRES
    double eig_max = 0.0;  ///< largest |Ritz value|
    double kappa = 0.0;
};

/// Extreme eigenvalues of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal. An empty diagonal yields an unavailable
/// estimate; a 1x1 matrix yields kappa = 1.
ConditionEstimate lanczos_condition_estimate(const std::vector<double>& diag,
                                             const std::vector<double>& offdiag);

/// Estimate for symmetric indefinite operators: the largest |Ritz value| and
/// the smallest |harmonic Ritz value|. offdiag holds k entries, the last one
/// being the next Lanczos coefficient beta_{k+1}. Harmonic Ritz values never
/// fall below the smallest |eigenvalue|, so kappa is not overestimated by
/// Ritz values inside the spectral gap around zero.
ConditionEstimate harmonic_condition_estimate(const std::vector<double>& diag,
                                              const std::vector<double>& offdiag);

struct SolveReport {
    int iterations = 0;
    bool converged = false;
    /// Relative residual, starting with the initial one (1 for x0 = 0).
    std::vector<double> residual_history;
    ConditionEstimate estimate;
    double wall_time = 0.0;
    /// Process peak resident size in bytes, best effort (0 if unknown).
    long long memory_peak = 0;
};

struct KrylovResult {
    Vector x;
    SolveReport report;
};

enum class ResidualNorm {
    l2,              ///< |r| / |b|
    preconditioned,  ///< sqrt(r.Pr) / sqrt(b.Pb)
};

/// Preconditioned conjugate gradients from x0 = 0. Throws SolverError on
/// non-positive curvature, a non-SPD preconditioner, or when maxit is
/// reached without convergence.
KrylovResult pcg(const LinearOperator& op, const LinearOperator& prec, const Vector& b,
                 double tol, int maxit, ResidualNorm norm = ResidualNorm::l2);

/// Ritz estimate of the extreme eigenvalues of prec * op (both SPD) from at
/// most `steps` PCG iterations on b. Stops early on convergence and never
/// throws on the iteration limit.
ConditionEstimate spectrum_estimate(const LinearOperator& op, const LinearOperator& prec,
                                    const Vector& b, int steps);

/// Preconditioned MINRES from x0 = 0 for symmetric (possibly indefinite)
/// operators with an SPD preconditioner. Stops when the preconditioned
/// residual norm relative to the preconditioned right-hand side norm drops
/// to tol. Throws SolverError on breakdown or when maxit is reached.
KrylovResult minres(const LinearOperator& op, const LinearOperator& prec, const Vector& b,
                    double tol, int maxit);

/// Peak resident set size of the process in bytes, or 0.
long long peak_memory_bytes();

}  // namespace ietidg
