#pragma once

// Dense and sparse kernels used throughout the solver. Thin wrappers around
// Eigen that turn failed factorizations into exceptions, plus the
// Kronecker-structured matrix-vector product used by fast diagonalization.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <span>
#include <vector>

namespace ietidg {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

struct SymEig {
    Vector values;        ///< ascending
    DenseMatrix vectors;  ///< orthonormal columns
};

/// Eigen-decomposition of a symmetric matrix. Throws ParameterError if the
/// input deviates from symmetry by more than 1e-12 relative to its max entry.
SymEig sym_eig(const DenseMatrix& a);

/// Solves K z = lambda M z for symmetric K and SPD M. The returned vectors are
/// M-orthonormal (Z^T M Z = I). Reduction to a standard problem via the
/// Cholesky factor of M.
SymEig generalized_sym_eig(const DenseMatrix& k, const DenseMatrix& m);

class DenseCholesky {
public:
    DenseCholesky() = default;
    explicit DenseCholesky(const DenseMatrix& a);

    Vector solve(const Vector& b) const;
    DenseMatrix solve(const DenseMatrix& b) const;
    DenseMatrix matrix_l() const { return llt_.matrixL(); }
    Eigen::Index size() const { return llt_.rows(); }

private:
    Eigen::LLT<DenseMatrix> llt_;
};

class DenseLU {
public:
    DenseLU() = default;
    explicit DenseLU(const DenseMatrix& a);

    Vector solve(const Vector& b) const;
    DenseMatrix solve(const DenseMatrix& b) const;
    Eigen::Index size() const { return lu_.rows(); }

private:
    Eigen::PartialPivLU<DenseMatrix> lu_;
};

/// Sparse LDL^T with approximate-minimum-degree ordering. Rejects matrices
/// whose pivots are not all positive.
class SparseCholesky {
public:
    SparseCholesky() = default;
    explicit SparseCholesky(const SparseMatrix& a);

    Vector solve(const Vector& b) const;
    DenseMatrix solve(const DenseMatrix& b) const;
    Eigen::Index size() const { return n_; }

private:
    using ColMajor = Eigen::SparseMatrix<double, Eigen::ColMajor>;
    Eigen::SimplicialLDLT<ColMajor, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    Eigen::Index n_ = 0;
};

/// y = (A1 kron A2) x without forming the product. x and y are indexed
/// i * n2 + j with i over the rows of A1.
void kron_matvec(const DenseMatrix& a1, const DenseMatrix& a2, std::span<const double> x,
                 std::span<double> y);
Vector kron_matvec(const DenseMatrix& a1, const DenseMatrix& a2, const Vector& x);

/// Explicit Kronecker product; only for tests and dense oracles.
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

/// Sub-matrix A(rows, cols) of a sparse matrix.
SparseMatrix sparse_block(const SparseMatrix& a, std::span<const int> rows,
                          std::span<const int> cols);

/// Contiguous sub-block [r0, r0+nr) x [c0, c0+nc).
SparseMatrix sparse_block(const SparseMatrix& a, int r0, int nr, int c0, int nc);

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& triplets);

/// Deterministic (sequential, fixed order) inner product.
double dot(const Vector& a, const Vector& b);

/// Max-norm of A - A^T.
double asymmetry(const SparseMatrix& a);
double asymmetry(const DenseMatrix& a);

}  // namespace ietidg
