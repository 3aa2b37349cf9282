#include "ietidg/krylov.hpp"

#include "ietidg/errors.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace ietidg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

long long peak_memory_bytes() {
    rusage ru{};
    if (getrusage(RUSAGE_SELF, &ru) != 0) return 0;
    return static_cast<long long>(ru.ru_maxrss) * 1024;
}

ConditionEstimate lanczos_condition_estimate(const std::vector<double>& diag,
                                             const std::vector<double>& offdiag) {
    ConditionEstimate e;
    const auto n = static_cast<Eigen::Index>(diag.size());
    if (n == 0) return e;
    if (static_cast<Eigen::Index>(offdiag.size()) < n - 1)
        throw ParameterError("lanczos estimate: off-diagonal too short");
    Vector d = Eigen::Map<const Vector>(diag.data(), n);
    Vector s(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i + 1 < n; ++i) s[i] = offdiag[static_cast<std::size_t>(i)];
    Vector eig;
    if (n == 1) {
        eig = d;
    } else {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es;
        es.computeFromTridiagonal(d, s, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) return e;
        eig = es.eigenvalues();
    }
    const Vector a = eig.cwiseAbs();
    e.eig_min = a.minCoeff();
    e.eig_max = a.maxCoeff();
    if (!(e.eig_min > 0.0)) return e;
    e.available = true;
    e.kappa = e.eig_max / e.eig_min;
    return e;
}

ConditionEstimate harmonic_condition_estimate(const std::vector<double>& diag,
                                              const std::vector<double>& offdiag) {
    ConditionEstimate e;
    const auto n = static_cast<Eigen::Index>(diag.size());
    if (n == 0) return e;
    if (static_cast<Eigen::Index>(offdiag.size()) < n)
        throw ParameterError("harmonic estimate: off-diagonal too short");
    const ConditionEstimate ritz = lanczos_condition_estimate(diag, offdiag);
    if (!ritz.available) return e;
    DenseMatrix t = DenseMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        t(i, i) = diag[static_cast<std::size_t>(i)];
        if (i + 1 < n) t(i, i + 1) = t(i + 1, i) = offdiag[static_cast<std::size_t>(i)];
    }
    // T y = mu (T^2 + beta^2 e_k e_k^T) y, harmonic Ritz values are 1 / mu
    DenseMatrix b = t * t;
    const double beta = offdiag[static_cast<std::size_t>(n - 1)];
    b(n - 1, n - 1) += beta * beta;
    Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> es(t, b, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return e;
    const double mu = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(mu > 0.0)) return e;
    e.available = true;
    e.eig_max = ritz.eig_max;
    e.eig_min = std::min(1.0 / mu, ritz.eig_max);
    e.kappa = e.eig_max / e.eig_min;
    return e;
}

namespace {

KrylovResult pcg_run(const LinearOperator& op, const LinearOperator& prec, const Vector& b,
                     double tol, int maxit, ResidualNorm norm, bool require_convergence) {
    if (!(tol > 0.0)) throw ParameterError("pcg: tolerance must be positive");
    if (maxit < 1) throw ParameterError("pcg: maxit must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index n = b.size();
    KrylovResult res{Vector::Zero(n), {}};
    SolveReport& rep = res.report;

    Vector r = b, z(n), p(n), q(n);
    prec(r, z);
    double rz = dot(r, z);
    if (rz < 0.0) throw SolverError("pcg: preconditioner is not positive definite", 0, {});
    const double ref = norm == ResidualNorm::l2 ? r.norm() : std::sqrt(rz);
    rep.residual_history.push_back(1.0);
    if (ref == 0.0) {
        rep.converged = true;
        rep.wall_time = seconds_since(t0);
        return res;
    }
    p = z;
    std::vector<double> diag, off;
    double alpha_prev = 0.0, beta_prev = 0.0;
    for (int it = 1; it <= maxit; ++it) {
        op(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) {
            rep.iterations = it;
            throw SolverError("pcg: non-positive curvature, operator is not SPD", it,
                              rep.residual_history);
        }
        const double alpha = rz / pq;
        res.x += alpha * p;
        r -= alpha * q;
        prec(r, z);
        const double rz_new = dot(r, z);
        if (rz_new < 0.0)
            throw SolverError("pcg: preconditioner is not positive definite", it,
                              rep.residual_history);
        const double beta = rz_new / rz;

        diag.push_back(1.0 / alpha + (it > 1 ? beta_prev / alpha_prev : 0.0));
        off.push_back(std::sqrt(beta) / alpha);
        alpha_prev = alpha;
        beta_prev = beta;

        const double rel = (norm == ResidualNorm::l2 ? r.norm() : std::sqrt(rz_new)) / ref;
        rep.residual_history.push_back(rel);
        rep.iterations = it;
        if (rel <= tol) {
            rep.converged = true;
            break;
        }
        rz = rz_new;
        p = z + beta * p;
    }
    rep.wall_time = seconds_since(t0);
    rep.memory_peak = peak_memory_bytes();
    if (!rep.converged && require_convergence)
        throw SolverError("pcg: no convergence within " + std::to_string(maxit) + " iterations",
                          rep.iterations, rep.residual_history);
    rep.estimate = lanczos_condition_estimate(diag, off);
    return res;
}

}  // namespace

KrylovResult pcg(const LinearOperator& op, const LinearOperator& prec, const Vector& b,
                 double tol, int maxit, ResidualNorm norm) {
    return pcg_run(op, prec, b, tol, maxit, norm, true);
}

ConditionEstimate spectrum_estimate(const LinearOperator& op, const LinearOperator& prec,
                                    const Vector& b, int steps) {
    return pcg_run(op, prec, b, 1e-14, steps, ResidualNorm::preconditioned, false).report.estimate;
}

KrylovResult minres(const LinearOperator& op, const LinearOperator& prec, const Vector& b,
                    double tol, int maxit) {
    if (!(tol > 0.0)) throw ParameterError("minres: tolerance must be positive");
    if (maxit < 1) throw ParameterError("minres: maxit must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index n = b.size();
    KrylovResult res{Vector::Zero(n), {}};
    SolveReport& rep = res.report;
    rep.residual_history.push_back(1.0);

    Vector r1 = b, r2 = b, y(n), v(n), w = Vector::Zero(n), w1(n), w2 = Vector::Zero(n);
    prec(r1, y);
    double beta1 = dot(r1, y);
    if (beta1 < 0.0) throw SolverError("minres: preconditioner is not positive definite", 0, {});
    beta1 = std::sqrt(beta1);
    if (beta1 == 0.0) {
        rep.converged = true;
        rep.wall_time = seconds_since(t0);
        return res;
    }

    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;
    std::vector<double> diag, off;
    const double tiny = std::numeric_limits<double>::epsilon();

    for (int it = 1; it <= maxit; ++it) {
        v = y / beta;
        op(v, y);
        if (it >= 2) y -= (beta / oldb) * r1;
        const double alfa = dot(v, y);
        y -= (alfa / beta) * r2;
        r1.swap(r2);
        r2 = y;
        prec(r2, y);
        oldb = beta;
        beta = dot(r2, y);
        if (beta < 0.0)
            throw SolverError("minres: preconditioner is not positive definite", it,
                              rep.residual_history);
        beta = std::sqrt(beta);

        diag.push_back(alfa);
        off.push_back(beta);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        const double gamma = std::max(std::hypot(gbar, beta), tiny);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1.swap(w2);
        w2.swap(w);
        w = (v - oldeps * w1 - delta * w2) / gamma;
        res.x += phi * w;

        const double rel = std::abs(phibar) / beta1;
        rep.residual_history.push_back(rel);
        rep.iterations = it;
        if (rel <= tol) {
            rep.converged = true;
            break;
        }
        if (beta == 0.0) {
            // invariant subspace found but residual not small: inconsistent system
            throw SolverError("minres: Lanczos breakdown before convergence", it,
                              rep.residual_history);
        }
    }
    rep.wall_time = seconds_since(t0);
    rep.memory_peak = peak_memory_bytes();
    if (!rep.converged)
        throw SolverError("minres: no convergence within " + std::to_string(maxit) + " iterations",
                          rep.iterations, rep.residual_history);
    rep.estimate = harmonic_condition_estimate(diag, off);
    return res;
}

}  // namespace ietidg
