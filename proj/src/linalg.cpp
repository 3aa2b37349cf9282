#include "ietidg/linalg.hpp"

#include "ietidg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ietidg {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_symmetric(const DenseMatrix& a, const char* who) {
    if (a.rows() != a.cols())
        throw ParameterError(std::string(who) + ": matrix is not square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (asymmetry(a) > 1e-12 * scale)
        throw ParameterError(std::string(who) + ": matrix is not symmetric");
}

}  // namespace

SymEig sym_eig(const DenseMatrix& a) {
    check_symmetric(a, "sym_eig");
    if (a.rows() == 0) return {};
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(a);
    if (es.info() != Eigen::Success) throw FactorizationError("sym_eig: no convergence");
    return {es.eigenvalues(), es.eigenvectors()};
}

SymEig generalized_sym_eig(const DenseMatrix& k, const DenseMatrix& m) {
    check_symmetric(k, "generalized_sym_eig");
    check_symmetric(m, "generalized_sym_eig");
    if (k.rows() != m.rows()) throw ParameterError("generalized_sym_eig: size mismatch");
    if (k.rows() == 0) return {};
    Eigen::LLT<DenseMatrix> llt(m);
    if (llt.info() != Eigen::Success)
        throw FactorizationError("generalized_sym_eig: mass matrix is not SPD");
    // L^{-1} K L^{-T} y = lambda y,  z = L^{-T} y
    const DenseMatrix l = llt.matrixL();
    DenseMatrix c = l.triangularView<Eigen::Lower>().solve(k);
    c = l.triangularView<Eigen::Lower>().solve(c.transpose()).eval();
    c = 0.5 * (c + c.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(c);
    if (es.info() != Eigen::Success)
        throw FactorizationError("generalized_sym_eig: no convergence");
    DenseMatrix z = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
    return {es.eigenvalues(), z};
}

DenseCholesky::DenseCholesky(const DenseMatrix& a) : llt_(a) {
    if (a.rows() != a.cols()) throw ParameterError("cholesky: matrix is not square");
    if (llt_.info() != Eigen::Success)
        throw FactorizationError("cholesky: matrix is not positive definite");
}

Vector DenseCholesky::solve(const Vector& b) const { return llt_.solve(b); }
DenseMatrix DenseCholesky::solve(const DenseMatrix& b) const { return llt_.solve(b); }

DenseLU::DenseLU(const DenseMatrix& a) {
    if (a.rows() != a.cols()) throw ParameterError("lu: matrix is not square");
    if (a.rows() == 0) return;
    lu_.compute(a);
    // PartialPivLU does not report singularity; inspect the pivots.
    const auto& u = lu_.matrixLU();
    const double scale = std::max(1e-300, a.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < u.rows(); ++i)
        if (!(std::abs(u(i, i)) > 1e-14 * scale))
            throw FactorizationError("lu: matrix is singular");
}

Vector DenseLU::solve(const Vector& b) const {
    if (lu_.rows() == 0) return Vector(0);
    return lu_.solve(b);
}
DenseMatrix DenseLU::solve(const DenseMatrix& b) const {
    if (lu_.rows() == 0) return DenseMatrix(0, b.cols());
    return lu_.solve(b);
}

SparseCholesky::SparseCholesky(const SparseMatrix& a) : n_(a.rows()) {
    if (a.rows() != a.cols()) throw ParameterError("sparse cholesky: matrix is not square");
    if (n_ == 0) return;
    ColMajor ac = a;
    ldlt_.compute(ac);
    if (ldlt_.info() != Eigen::Success)
        throw FactorizationError("sparse cholesky: factorization failed");
    const Vector d = ldlt_.vectorD();
    const double scale = std::max(1e-300, d.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if (!(d[i] > 1e-14 * scale))
            throw FactorizationError("sparse cholesky: matrix is not positive definite");
}

Vector SparseCholesky::solve(const Vector& b) const {
    if (n_ == 0) return Vector(0);
    return ldlt_.solve(b);
}

DenseMatrix SparseCholesky::solve(const DenseMatrix& b) const {
    if (n_ == 0) return DenseMatrix(0, b.cols());
    DenseMatrix x(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = ldlt_.solve(Vector(b.col(j)));
    return x;
}

void kron_matvec(const DenseMatrix& a1, const DenseMatrix& a2, std::span<const double> x,
                 std::span<double> y) {
    const auto n1 = a1.cols();
    const auto n2 = a2.cols();
    if (static_cast<Eigen::Index>(x.size()) != n1 * n2 ||
        static_cast<Eigen::Index>(y.size()) != a1.rows() * a2.rows())
        throw ParameterError("kron_matvec: size mismatch");
    RowMajorMap xm(x.data(), n1, n2);
    RowMajorMutMap ym(y.data(), a1.rows(), a2.rows());
    ym.noalias() = a1 * xm * a2.transpose();
}

Vector kron_matvec(const DenseMatrix& a1, const DenseMatrix& a2, const Vector& x) {
    Vector y(a1.rows() * a2.rows());
    kron_matvec(a1, a2, std::span<const double>(x.data(), x.size()),
                std::span<double>(y.data(), y.size()));
    return y;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

SparseMatrix sparse_block(const SparseMatrix& a, std::span<const int> rows,
                          std::span<const int> cols) {
    std::vector<int> col_map(static_cast<std::size_t>(a.cols()), -1);
    for (std::size_t j = 0; j < cols.size(); ++j) col_map[static_cast<std::size_t>(cols[j])] =
        static_cast<int>(j);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (SparseMatrix::InnerIterator it(a, rows[i]); it; ++it) {
            const int c = col_map[static_cast<std::size_t>(it.col())];
            if (c >= 0) t.emplace_back(static_cast<int>(i), c, it.value());
        }
    }
    return from_triplets(static_cast<int>(rows.size()), static_cast<int>(cols.size()), t);
}

SparseMatrix sparse_block(const SparseMatrix& a, int r0, int nr, int c0, int nc) {
    SparseMatrix b = a.block(r0, c0, nr, nc);
    b.makeCompressed();
    return b;
}

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& triplets) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double asymmetry(const SparseMatrix& a) {
    const SparseMatrix d = a - SparseMatrix(a.transpose());
    double m = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

double asymmetry(const DenseMatrix& a) {
    if (a.size() == 0) return 0.0;
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace ietidg
