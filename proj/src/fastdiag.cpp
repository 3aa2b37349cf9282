#include "ietidg/fastdiag.hpp"

#include "ietidg/errors.hpp"
#include "ietidg/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace ietidg {

// ---------------------------------------------------------------------------
// FD

FDSolver::FDSolver(const DenseMatrix& m1, const DenseMatrix& k1, const DenseMatrix& m2,
                   const DenseMatrix& k2, double alpha)
    : m1_(m1), k1_(k1), m2_(m2), k2_(k2), alpha_(alpha) {
    e1_ = generalized_sym_eig(k1, m1);
    e2_ = generalized_sym_eig(k2, m2);
    z1_ = e1_.vectors;
    z2_ = e2_.vectors;
    const auto n1 = z1_.rows(), n2 = z2_.rows();
    inv_diag_.resize(n1, n2);
    double top = 0.0;
    for (Eigen::Index i = 0; i < n1; ++i)
        for (Eigen::Index j = 0; j < n2; ++j)
            top = std::max(top, std::abs(e1_.values[i] + e2_.values[j] + alpha));
    for (Eigen::Index i = 0; i < n1; ++i)
        for (Eigen::Index j = 0; j < n2; ++j) {
            const double s = e1_.values[i] + e2_.values[j] + alpha;
            if (!(std::abs(s) > 1e-10 * std::max(1.0, top))) {
                singular_ = true;
                inv_diag_(i, j) = 0.0;
            } else {
                inv_diag_(i, j) = 1.0 / s;
            }
        }
}

Vector FDSolver::apply_inverse(const Vector& b) const {
    if (b.size() != size()) throw ParameterError("fd: size mismatch");
    if (singular_) throw FactorizationError("fd: operator is singular");
    Vector y = kron_matvec(z1_.transpose(), z2_.transpose(), b);
    // y is row-major n1 x n2
    const auto n2 = z2_.rows();
    for (Eigen::Index i = 0; i < z1_.rows(); ++i)
        for (Eigen::Index j = 0; j < n2; ++j) y[i * n2 + j] *= inv_diag_(i, j);
    return kron_matvec(z1_, z2_, y);
}

Vector FDSolver::apply(const Vector& x) const {
    if (x.size() != size()) throw ParameterError("fd: size mismatch");
    Vector y = kron_matvec(k1_, m2_, x) + kron_matvec(m1_, k2_, x);
    if (alpha_ != 0.0) y += alpha_ * kron_matvec(m1_, m2_, x);
    return y;
}

// ---------------------------------------------------------------------------
// SMW

SMWSolver::SMWSolver(FDSolver fd, std::vector<int> corner)
    : fd_(std::move(fd)), corner_(std::move(corner)) {
    std::sort(corner_.begin(), corner_.end());
    const int n = fd_.size();
    const auto c = static_cast<Eigen::Index>(corner_.size());
    std::vector<char> is_c(static_cast<std::size_t>(n), 0);
    for (int i : corner_) {
        if (i < 0 || i >= n) throw ParameterError("smw: corner index out of range");
        is_c[static_cast<std::size_t>(i)] = 1;
    }
    for (int i = 0; i < n; ++i)
        if (!is_c[static_cast<std::size_t>(i)]) delta_.push_back(i);
    if (c == 0) return;

    x_.resize(n, c);
    w_.resize(n, 2 * c);
    for (Eigen::Index j = 0; j < c; ++j) {
        Vector e = Vector::Zero(n);
        e[corner_[static_cast<std::size_t>(j)]] = 1.0;
        Vector col = fd_.apply(e);
        for (int i : corner_) col[i] = 0.0;
        x_.col(j) = col;
        w_.col(j) = fd_.apply_inverse(col);
        w_.col(c + j) = fd_.apply_inverse(e);
    }
    DenseMatrix vtw(2 * c, 2 * c);
    for (Eigen::Index j = 0; j < c; ++j) vtw.row(j) = w_.row(corner_[static_cast<std::size_t>(j)]);
    vtw.bottomRows(c) = x_.transpose() * w_;
    cap_ = DenseLU(DenseMatrix::Identity(2 * c, 2 * c) - vtw);
}

Vector SMWSolver::apply(const Vector& b_delta) const {
    if (b_delta.size() != static_cast<Eigen::Index>(delta_.size()))
        throw ParameterError("smw: size mismatch");
    Vector b = Vector::Zero(fd_.size());
    for (std::size_t i = 0; i < delta_.size(); ++i) b[delta_[i]] = b_delta[static_cast<Eigen::Index>(i)];
    Vector x = fd_.apply_inverse(b);
    const auto c = static_cast<Eigen::Index>(corner_.size());
    if (c > 0) {
        Vector t(2 * c);
        for (Eigen::Index j = 0; j < c; ++j) t[j] = x[corner_[static_cast<std::size_t>(j)]];
        t.tail(c) = x_.transpose() * x;
        x += w_ * cap_.solve(t);
    }
    Vector out(static_cast<Eigen::Index>(delta_.size()));
    for (std::size_t i = 0; i < delta_.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[delta_[i]];
    return out;
}

// ---------------------------------------------------------------------------
// local preconditioner

LocalPreconditioner::LocalPreconditioner(const ExtendedSpace& space, const ParameterMatrices& pm)
    : n_delta_(space.num_delta()), n_patch_(space.num_patch_dofs()) {
    smw_ = SMWSolver(FDSolver(pm.m1, pm.k1, pm.m2, pm.k2, pm.alpha), space.patch_corner_raw());
    patch_pos_.assign(static_cast<std::size_t>(n_patch_), -1);
    smw_index_.assign(static_cast<std::size_t>(n_patch_), -1);
    for (int d = 0; d < n_patch_; ++d) {
        const int p = space.position(d);
        if (p < n_delta_) patch_pos_[static_cast<std::size_t>(d)] = p;
    }
    const auto& delta = smw_.delta();
    for (std::size_t i = 0; i < delta.size(); ++i) smw_index_[static_cast<std::size_t>(delta[i])] = static_cast<int>(i);

    for (std::size_t b = 0; b < space.traces().size(); ++b) {
        const auto& blk = space.traces()[b];
        TracePart tp;
        tp.proj = pm.projections[b];
        for (int j = 0; j < blk.size(); ++j) {
            const int p = space.position(blk.offset + j);
            tp.pos.push_back(p < n_delta_ ? p : -1);
            if (p < n_delta_) tp.free.push_back(j);
        }
        const auto nf = static_cast<Eigen::Index>(tp.free.size());
        DenseMatrix m(nf, nf);
        for (Eigen::Index i = 0; i < nf; ++i)
            for (Eigen::Index j = 0; j < nf; ++j)
                m(i, j) = pm.trace_mass[b](tp.free[static_cast<std::size_t>(i)], tp.free[static_cast<std::size_t>(j)]);
        tp.mass = DenseLU(m);
        traces_.push_back(std::move(tp));
    }
}

Vector LocalPreconditioner::apply(const Vector& r) const {
    if (r.size() != n_delta_) throw ParameterError("local preconditioner: size mismatch");
    Vector g = Vector::Zero(static_cast<Eigen::Index>(smw_.delta().size()));
    for (int d = 0; d < n_patch_; ++d) {
        const int s = smw_index_[static_cast<std::size_t>(d)];
        if (s >= 0) g[s] = r[patch_pos_[static_cast<std::size_t>(d)]];
    }
    // E1^T: trace residuals pulled back through the projection
    for (const auto& tp : traces_) {
        Vector rt = Vector::Zero(static_cast<Eigen::Index>(tp.pos.size()));
        for (int j : tp.free) rt[j] = r[tp.pos[static_cast<std::size_t>(j)]];
        const Vector side = tp.proj.apply_transpose(rt);
        const auto& sd = tp.proj.side_dofs();
        for (std::size_t i = 0; i < sd.size(); ++i) {
            const int s = smw_index_[static_cast<std::size_t>(sd[i])];
            if (s >= 0) g[s] += side[static_cast<Eigen::Index>(i)];
        }
    }
    const Vector y = smw_.apply(g);

    Vector out = Vector::Zero(n_delta_);
    for (int d = 0; d < n_patch_; ++d) {
        const int s = smw_index_[static_cast<std::size_t>(d)];
        if (s >= 0) out[patch_pos_[static_cast<std::size_t>(d)]] = y[s];
    }
    for (const auto& tp : traces_) {
        const auto& sd = tp.proj.side_dofs();
        Vector side(static_cast<Eigen::Index>(sd.size()));
        for (std::size_t i = 0; i < sd.size(); ++i) {
            const int s = smw_index_[static_cast<std::size_t>(sd[i])];
            side[static_cast<Eigen::Index>(i)] = s >= 0 ? y[s] : 0.0;
        }
        const Vector t = tp.proj.apply(side);
        Vector rf(static_cast<Eigen::Index>(tp.free.size()));
        for (std::size_t i = 0; i < tp.free.size(); ++i) {
            const int p = tp.pos[static_cast<std::size_t>(tp.free[i])];
            out[p] += t[tp.free[i]];
            rf[static_cast<Eigen::Index>(i)] = r[p];
        }
        // E2 part: trace mass solve
        const Vector z = tp.mass.solve(rf);
        for (std::size_t i = 0; i < tp.free.size(); ++i)
            out[tp.pos[static_cast<std::size_t>(tp.free[i])]] += z[static_cast<Eigen::Index>(i)];
    }
    return out;
}

LinearOperator richardson(LinearOperator prec, LinearOperator op, int nu) {
    if (nu < 1) throw ParameterError("richardson: nu must be >= 1");
    if (nu == 1) return prec;
    return [prec = std::move(prec), op = std::move(op), nu](const Vector& r, Vector& x) {
        x.setZero(r.size());
        Vector res(r.size()), ax(r.size()), dx(r.size());
        prec(r, x);
        for (int i = 1; i < nu; ++i) {
            op(x, ax);
            res = r - ax;
            prec(res, dx);
            x += dx;
        }
    };
}

// ---------------------------------------------------------------------------
// Schur complements

namespace {

SparseMatrix permute_raw(const ExtendedSpace& sp, const SparseMatrix& raw) {
    std::vector<Triplet> t;
    for (int r = 0; r < raw.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(raw, r); it; ++it)
            t.emplace_back(sp.position(static_cast<int>(it.row())), sp.position(static_cast<int>(it.col())),
                           it.value());
    return from_triplets(sp.num_dofs(), sp.num_dofs(), t);
}

}  // namespace

InexactSchur::InexactSchur(const ExtendedSpace& space, const ParameterMatrices& pm)
    : n_i_(space.num_interior()), n_gamma_(space.num_gamma()) {
    const SparseMatrix d = permute_raw(space, pm.d_hat);
    gg_ = sparse_block(d, n_i_, n_gamma_, n_i_, n_gamma_);
    gi_ = sparse_block(d, n_i_, n_gamma_, 0, n_i_);
    ig_ = sparse_block(d, 0, n_i_, n_i_, n_gamma_);
    if (n_i_ > 0) {
        const TensorBasis& b = space.basis();
        DenseMatrix m[2], k[2];
        for (int dir = 0; dir < 2; ++dir) {
            const auto um = univariate_matrices(b.knots(dir));
            m[dir] = strip_ends(um.mass, true, true);
            k[dir] = strip_ends(um.stiffness, true, true);
        }
        interior_ = std::make_unique<FDSolver>(m[0], k[0], m[1], k[1], 0.0);
        if (interior_->size() != n_i_) throw AssemblyError("inexact schur: interior size mismatch");
    }
}

Vector InexactSchur::apply(const Vector& g) const {
    if (g.size() != n_gamma_) throw ParameterError("schur: size mismatch");
    Vector y = gg_ * g;
    if (n_i_ > 0) y -= gi_ * interior_->apply_inverse(ig_ * g);
    return y;
}

ExactSchur::ExactSchur(const ExtendedSpace& space, const SparseMatrix& a)
    : n_i_(space.num_interior()), n_gamma_(space.num_gamma()) {
    gg_ = sparse_block(a, n_i_, n_gamma_, n_i_, n_gamma_);
    gi_ = sparse_block(a, n_i_, n_gamma_, 0, n_i_);
    ig_ = sparse_block(a, 0, n_i_, n_i_, n_gamma_);
    if (n_i_ > 0) interior_ = std::make_unique<SparseCholesky>(sparse_block(a, 0, n_i_, 0, n_i_));
}

Vector ExactSchur::apply(const Vector& g) const {
    if (g.size() != n_gamma_) throw ParameterError("schur: size mismatch");
    Vector y = gg_ * g;
    if (n_i_ > 0) y -= gi_ * interior_->solve(Vector(ig_ * g));
    return y;
}

// ---------------------------------------------------------------------------
// scaled Dirichlet

ScaledDirichlet::ScaledDirichlet(std::vector<std::unique_ptr<LocalSchur>> schur,
                                 std::vector<SparseMatrix> jump_gamma)
    : schur_(std::move(schur)), jump_(std::move(jump_gamma)) {
    if (schur_.size() != jump_.size()) throw ParameterError("scaled dirichlet: patch count mismatch");
    n_lambda_ = jump_.empty() ? 0 : static_cast<int>(jump_.front().rows());
    for (std::size_t k = 0; k < jump_.size(); ++k) {
        if (jump_[k].rows() != n_lambda_ || jump_[k].cols() != schur_[k]->size())
            throw ParameterError("scaled dirichlet: jump block size mismatch");
        jump_t_.emplace_back(jump_[k].transpose());
        Vector s = Vector::Ones(jump_[k].cols());
        for (int r = 0; r < jump_[k].outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(jump_[k], r); it; ++it)
                if (it.value() != 0.0) s[it.col()] += 1.0;
        scaling_.push_back(std::move(s));
    }
}

Vector ScaledDirichlet::apply(const Vector& q) const {
    if (q.size() != n_lambda_) throw ParameterError("scaled dirichlet: size mismatch");
    std::vector<Vector> part(schur_.size());
    parallel_for(static_cast<int>(schur_.size()), [&](int k) {
        const auto uk = static_cast<std::size_t>(k);
        const Vector g = (jump_t_[uk] * q).cwiseQuotient(scaling_[uk]);
        part[uk] = jump_[uk] * schur_[uk]->apply(g).cwiseQuotient(scaling_[uk]);
    });
    Vector out = Vector::Zero(n_lambda_);
    for (const auto& p : part) out += p;
    return out;
}

}  // namespace ietidg
