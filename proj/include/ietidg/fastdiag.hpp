#pragma once

#include "ietidg/assembly.hpp"
#include "ietidg/krylov.hpp"
#include "ietidg/linalg.hpp"

#include <memory>
#include <vector>

namespace ietidg {

/// Inverse of K1 x M2 + M1 x K2 + alpha M1 x M2 by fast diagonalization.
class FDSolver {
public:
    FDSolver() = default;
    /// Throws FactorizationError if a mass factor is not SPD.
    FDSolver(const DenseMatrix& m1, const DenseMatrix& k1, const DenseMatrix& m2,
             const DenseMatrix& k2, double alpha);

    int size() const { return static_cast<int>(z1_.rows() * z2_.rows()); }
    int size(int dir) const { return static_cast<int>(dir == 0 ? z1_.rows() : z2_.rows()); }
    const SymEig& factor(int dir) const { return dir == 0 ? e1_ : e2_; }
    double alpha() const noexcept { return alpha_; }
    /// True if some eigenvalue sum lambda1_i + lambda2_j + alpha vanishes.
    bool singular() const noexcept { return singular_; }

    /// Throws FactorizationError on a singular operator.
    Vector apply_inverse(const Vector& b) const;
    /// The operator itself, via the Kronecker factors.
    Vector apply(const Vector& x) const;

private:
    DenseMatrix m1_, k1_, m2_, k2_;
    double alpha_ = 0.0;
    SymEig e1_, e2_;
    DenseMatrix z1_, z2_;
    DenseMatrix inv_diag_;  // n1 x n2, 1 / (lambda1_i + lambda2_j + alpha)
    bool singular_ = false;
};

/// Inverse of the Delta block of the FD operator, where C is a small set of
/// removed indices, via the Sherman-Morrison-Woodbury identity.
class SMWSolver {
public:
    SMWSolver() = default;
    SMWSolver(FDSolver fd, std::vector<int> corner);

    const std::vector<int>& corner() const noexcept { return corner_; }
    const std::vector<int>& delta() const noexcept { return delta_; }
    /// Side length of the capacitance matrix (2 |C|).
    int capacitance_size() const { return 2 * static_cast<int>(corner_.size()); }

    /// x_Delta = (D_{Delta Delta})^{-1} b_Delta; b indexed like delta().
    Vector apply(const Vector& b_delta) const;

private:
    FDSolver fd_;
    std::vector<int> corner_, delta_;
    DenseMatrix x_;    // D(:, C) with C rows zeroed
    DenseMatrix w_;    // D^{-1} U
    DenseLU cap_;
};

/// Additive two-space preconditioner for A_{Delta Delta} of one patch.
class LocalPreconditioner {
public:
    LocalPreconditioner() = default;
    LocalPreconditioner(const ExtendedSpace& space, const ParameterMatrices& pm);

    int size() const noexcept { return n_delta_; }
    /// w = P r for r over the Delta dofs in solver ordering.
    Vector apply(const Vector& r) const;
    const SMWSolver& patch_solver() const noexcept { return smw_; }

private:
    struct TracePart {
        EdgeProjection proj;
        std::vector<int> pos;       // solver position of each block entry, -1 for C
        std::vector<int> free;      // block entries that belong to Delta
        DenseLU mass;               // weighted edge mass on the free entries
    };
    int n_delta_ = 0;
    int n_patch_ = 0;
    SMWSolver smw_;
    std::vector<int> patch_pos_;    // solver position of each patch dof, -1 for C
    std::vector<int> smw_index_;    // index into SMW delta numbering, -1 for C
    std::vector<TracePart> traces_;
};

/// nu preconditioned Richardson steps on A x = r from x = 0; nu = 1 gives P.
LinearOperator richardson(LinearOperator prec, LinearOperator op, int nu);

/// Schur complement of a patch onto its Gamma dofs (B then C).
class LocalSchur {
public:
    virtual ~LocalSchur() = default;
    virtual int size() const = 0;
    virtual Vector apply(const Vector& g) const = 0;
};

/// Parameter-domain Schur complement with the interior solve done by FD.
class InexactSchur final : public LocalSchur {
public:
    InexactSchur(const ExtendedSpace& space, const ParameterMatrices& pm);
    int size() const override { return n_gamma_; }
    Vector apply(const Vector& g) const override;

private:
    int n_i_ = 0, n_gamma_ = 0;
    SparseMatrix gg_, gi_, ig_;
    std::unique_ptr<FDSolver> interior_;
};

/// Schur complement of the local stiffness with a sparse Cholesky of A_II.
class ExactSchur final : public LocalSchur {
public:
    ExactSchur(const ExtendedSpace& space, const SparseMatrix& a);
    int size() const override { return n_gamma_; }
    Vector apply(const Vector& g) const override;

private:
    int n_i_ = 0, n_gamma_ = 0;
    SparseMatrix gg_, gi_, ig_;
    std::unique_ptr<SparseCholesky> interior_;
};

/// B_Gamma D^{-1} S D^{-1} B_Gamma^T with multiplicity scaling D.
class ScaledDirichlet {
public:
    /// jump_gamma[k]: multiplier rows times patch k's Gamma dofs.
    ScaledDirichlet(std::vector<std::unique_ptr<LocalSchur>> schur,
                    std::vector<SparseMatrix> jump_gamma);

    int size() const noexcept { return n_lambda_; }
    Vector apply(const Vector& q) const;
    /// Diagonal of D for patch k over its Gamma dofs.
    const Vector& scaling(int k) const { return scaling_[static_cast<std::size_t>(k)]; }

private:
    int n_lambda_ = 0;
    std::vector<std::unique_ptr<LocalSchur>> schur_;
    std::vector<SparseMatrix> jump_;
    std::vector<SparseMatrix> jump_t_;
    std::vector<Vector> scaling_;
};

}  // namespace ietidg
