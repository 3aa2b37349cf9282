#pragma once

#include "ietidg/assembly.hpp"
#include "ietidg/fastdiag.hpp"
#include "ietidg/krylov.hpp"
#include "ietidg/linalg.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ietidg {

enum class Variant {
    mfd,   ///< MINRES, FD-based local preconditioner and scaled Dirichlet
    mfd2,  ///< as mfd with two Richardson steps in the local block
    mlu,   ///< MINRES with sparse direct local solves
    cglu,  ///< PCG on the dual Schur system with sparse direct solves
};

/// Accepts mfd, mfd2, mfd-2, mlu, cglu in any case.
Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

/// Constraint rows tying each non-corner trace dof to the neighbor's
/// boundary dof: +1 on the patch side, -1 on the trace copy.
struct JumpMatrix {
    int rows = 0;
    /// Per patch: rows x local dofs in solver ordering.
    std::vector<SparseMatrix> blocks;
};

JumpMatrix build_jump_matrix(const Discretization& disc, const std::vector<ExtendedSpace>& spaces);

/// Global numbering of the corner (primal) dofs. A primal dof is the value of
/// one patch at one of its corners, shared with the copies of that value on
/// the neighbors' trace blocks.
struct PrimalNumbering {
    int size = 0;
    /// Per patch: global index of each local primal column.
    std::vector<std::vector<int>> global;
    /// Per patch: C dofs x local primal columns, 0/1 entries.
    std::vector<DenseMatrix> restriction;
};

PrimalNumbering number_primal_dofs(const std::vector<ExtendedSpace>& spaces);

struct IetiOptions {
    Variant variant = Variant::mfd;
    double eps = 1e-8;
    /// Primal basis tolerance for the iterative variants; eps / 100 if unset.
    std::optional<double> eps_c;
    int maxit = 5000;
};

/// Accumulated wall times in seconds.
struct PhaseTimes {
    double psi = 0.0;
    double setup_local = 0.0;
    double setup_dirichlet = 0.0;
    double apply_local = 0.0;
    double apply_dirichlet = 0.0;
    double solve = 0.0;
};

struct IetiSolution {
    /// Coefficients of each patch's own (Dirichlet-reduced) basis.
    std::vector<Vector> patch_coeffs;
    SolveReport report;
    PhaseTimes times;
    /// Multipliers of the converged iterate.
    Vector lambda;
};

/// Dual-primal tearing and interconnecting solver for the multipatch SIPG
/// system. Setup (local assembly, primal basis, preconditioners) happens in
/// the constructor.
class IetiSolver {
public:
    IetiSolver(const Discretization& disc, const SourceFunction& f, IetiOptions opts = {});
    ~IetiSolver();
    IetiSolver(const IetiSolver&) = delete;
    IetiSolver& operator=(const IetiSolver&) = delete;

    int num_patches() const;
    int num_lambda() const;
    int num_primal() const;
    /// Sum of the local Delta sizes.
    int num_delta() const;
    /// Size of the saddle point system (Delta + primal + multipliers).
    int saddle_size() const;

    const ExtendedSpace& space(int k) const;
    const LocalSystem& local_system(int k) const;
    const JumpMatrix& jump() const;
    const PrimalNumbering& primal() const;
    /// Delta part of the local primal basis of patch k.
    const DenseMatrix& primal_basis(int k) const;
    const DenseMatrix& coarse_matrix() const;
    const PhaseTimes& setup_times() const;

    /// y = A x for the saddle point operator; x = (u_Delta, u_Pi, lambda).
    void apply_saddle(const Vector& x, Vector& y) const;
    /// Block diagonal preconditioner of the chosen variant.
    void apply_preconditioner(const Vector& x, Vector& y) const;
    /// Right-hand side (f_Delta, f_Pi, 0).
    Vector saddle_rhs() const;

    /// Dual Schur operator F and its right-hand side (exact local solves).
    void apply_dual(const Vector& lambda, Vector& y) const;
    Vector dual_rhs() const;

    /// Patch coefficients u = (u_Delta; 0) + Psi u_Pi.
    std::vector<Vector> recover(const Vector& u_delta, const Vector& u_pi) const;

    /// Throws SolverError on non-convergence.
    IetiSolution solve();

    /// Condition estimate of the preconditioned operator of the variant from a
    /// Krylov run on a fixed pseudo-random right-hand side. The estimate of a
    /// solve only sees the modes its right-hand side excites.
    ConditionEstimate estimate_condition(double tol = 1e-10) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ietidg
