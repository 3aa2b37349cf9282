#include "ietidg/ieti.hpp"

#include "ietidg/errors.hpp"
#include "ietidg/parallel.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

namespace ietidg {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool exact_variant(Variant v) { return v == Variant::mlu || v == Variant::cglu; }

}  // namespace

Variant parse_variant(const std::string& name) {
    std::string s;
    for (char c : name)
        if (c != '-' && c != '_') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "mfd") return Variant::mfd;
    if (s == "mfd2") return Variant::mfd2;
    if (s == "mlu") return Variant::mlu;
    if (s == "cglu") return Variant::cglu;
    throw ParameterError("unknown solver variant '" + name + "'");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::mfd: return "MFD";
        case Variant::mfd2: return "MFD-2";
        case Variant::mlu: return "MLU";
        case Variant::cglu: return "CGLU";
    }
    return "?";
}

JumpMatrix build_jump_matrix(const Discretization& disc, const std::vector<ExtendedSpace>& spaces) {
    if (static_cast<int>(spaces.size()) != disc.num_patches())
        throw ParameterError("jump matrix: one space per patch expected");
    std::vector<std::vector<Triplet>> trip(spaces.size());
    int row = 0;
    for (const auto& sp : spaces) {
        const int k = sp.patch();
        for (const auto& blk : sp.traces()) {
            const int l = blk.neighbor;
            const auto& other = spaces[static_cast<std::size_t>(l)];
            for (const auto& [t, dof] : disc.bases[static_cast<std::size_t>(l)].side_dofs(blk.neighbor_side)) {
                const int raw = sp.trace_raw(blk, t);
                if (raw < 0) throw AssemblyError("jump matrix: trace block misses an active dof");
                const int pk = sp.position(raw);
                const int pl = other.position(dof);
                const bool ck = pk >= sp.num_delta(), cl = pl >= other.num_delta();
                if (ck != cl) throw AssemblyError("jump matrix: corner classification differs across an interface");
                if (ck) continue;
                trip[static_cast<std::size_t>(l)].emplace_back(row, pl, 1.0);
                trip[static_cast<std::size_t>(k)].emplace_back(row, pk, -1.0);
                ++row;
            }
        }
    }
    JumpMatrix out;
    out.rows = row;
    for (std::size_t k = 0; k < spaces.size(); ++k)
        out.blocks.push_back(from_triplets(row, spaces[k].num_dofs(), trip[k]));
    return out;
}

PrimalNumbering number_primal_dofs(const std::vector<ExtendedSpace>& spaces) {
    // one primal dof per (owning patch, corner point): a patch's corner value
    // and every copy of it on the neighbors' trace blocks
    using Key = std::pair<int, int>;
    std::map<Key, int> ids;
    for (const auto& sp : spaces)
        for (int c = 0; c < sp.num_corner(); ++c) ids.emplace(Key{sp.corner_owner(c), sp.corner_point(c)}, 0);
    int next = 0;
    for (auto& [key, id] : ids) id = next++;
    PrimalNumbering out;
    out.size = next;
    for (const auto& sp : spaces) {
        std::vector<int> local;
        for (int c = 0; c < sp.num_corner(); ++c) local.push_back(ids.at(Key{sp.corner_owner(c), sp.corner_point(c)}));
        std::vector<int> uniq = local;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        DenseMatrix r = DenseMatrix::Zero(sp.num_corner(), static_cast<Eigen::Index>(uniq.size()));
        for (int c = 0; c < sp.num_corner(); ++c)
            r(c, std::lower_bound(uniq.begin(), uniq.end(), local[static_cast<std::size_t>(c)]) - uniq.begin()) = 1.0;
        out.global.push_back(std::move(uniq));
        out.restriction.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------

struct IetiSolver::Impl {
    struct Patch {
        ExtendedSpace space;
        LocalSystem ls;
        int n_delta = 0;
        int offset = 0;  // start of the Delta block in the saddle vector
        SparseMatrix a_dd, a_dc;
        SparseMatrix b_delta, b_delta_t;
        DenseMatrix psi;  // n_delta x local primal count
        Vector f_delta;
        std::unique_ptr<LocalPreconditioner> prec;
        std::unique_ptr<SparseCholesky> chol;
        LinearOperator local_prec;
    };

    Discretization disc;
    IetiOptions opts;
    std::vector<Patch> patches;
    JumpMatrix jump;
    PrimalNumbering primal;
    DenseMatrix a_psi;
    DenseCholesky a_psi_chol;
    Vector f_pi;
    std::unique_ptr<ScaledDirichlet> dirichlet;
    PhaseTimes setup;
    int n_delta = 0;
    mutable double t_apply_local = 0.0, t_apply_dirichlet = 0.0;

    Impl(const Discretization& d, const SourceFunction& f, IetiOptions o) : disc(d), opts(o) {
        if (!(opts.eps > 0.0)) throw ParameterError("ieti: eps must be positive");
        if (opts.eps_c && !(*opts.eps_c > 0.0)) throw ParameterError("ieti: eps_c must be positive");
        if (opts.maxit < 1) throw ParameterError("ieti: maxit must be >= 1");
        const int np = disc.num_patches();
        patches.resize(static_cast<std::size_t>(np));
        std::vector<ExtendedSpace> spaces(static_cast<std::size_t>(np));
        parallel_for(np, [&](int k) {
            auto& p = patches[static_cast<std::size_t>(k)];
            p.space = ExtendedSpace(disc, k);
            p.ls = assemble_local(disc, p.space, f);
            spaces[static_cast<std::size_t>(k)] = p.space;
        });
        jump = build_jump_matrix(disc, spaces);
        primal = number_primal_dofs(spaces);

        for (int k = 0; k < np; ++k) {
            auto& p = patches[static_cast<std::size_t>(k)];
            const int n = p.space.num_dofs();
            p.n_delta = p.space.num_delta();
            p.offset = n_delta;
            n_delta += p.n_delta;
            p.a_dd = sparse_block(p.ls.a, 0, p.n_delta, 0, p.n_delta);
            p.a_dc = sparse_block(p.ls.a, 0, p.n_delta, p.n_delta, n - p.n_delta);
            p.b_delta = sparse_block(jump.blocks[static_cast<std::size_t>(k)], 0, jump.rows, 0, p.n_delta);
            p.b_delta_t = p.b_delta.transpose();
            p.f_delta = p.ls.f.head(p.n_delta);
        }

        // local solvers and the parameter-domain data for the Dirichlet block
        std::vector<ParameterMatrices> pms(static_cast<std::size_t>(np));
        auto t0 = Clock::now();
        parallel_for(np, [&](int k) { setup_local(k, pms[static_cast<std::size_t>(k)]); });
        setup.setup_local = since(t0);

        t0 = Clock::now();
        build_primal_basis();
        setup.psi = since(t0);

        t0 = Clock::now();
        std::vector<std::unique_ptr<LocalSchur>> schur(static_cast<std::size_t>(np));
        std::vector<SparseMatrix> jg(static_cast<std::size_t>(np));
        parallel_for(np, [&](int k) {
            const auto uk = static_cast<std::size_t>(k);
            const auto& p = patches[uk];
            if (exact_variant(opts.variant))
                schur[uk] = std::make_unique<ExactSchur>(p.space, p.ls.a);
            else
                schur[uk] = std::make_unique<InexactSchur>(p.space, pms[uk]);
            const int ni = p.space.num_interior();
            jg[uk] = sparse_block(jump.blocks[uk], 0, jump.rows, ni, p.space.num_gamma());
        });
        dirichlet = std::make_unique<ScaledDirichlet>(std::move(schur), std::move(jg));
        setup.setup_dirichlet = since(t0);
    }

    void setup_local(int k, ParameterMatrices& pm) {
        auto& p = patches[static_cast<std::size_t>(k)];
        if (exact_variant(opts.variant)) {
            p.chol = std::make_unique<SparseCholesky>(p.a_dd);
            const SparseCholesky* c = p.chol.get();
            p.local_prec = [c](const Vector& x, Vector& y) { y = c->solve(x); };
            return;
        }
        pm = assemble_parameter_matrices(disc, p.space);
        p.prec = std::make_unique<LocalPreconditioner>(p.space, pm);
        const LocalPreconditioner* pc = p.prec.get();
        LinearOperator prec = [pc](const Vector& x, Vector& y) { y = pc->apply(x); };
        if (opts.variant == Variant::mfd2 && p.n_delta > 0) {
            const SparseMatrix* a = &p.a_dd;
            LinearOperator op = [a](const Vector& x, Vector& y) { y = *a * x; };
            // two Richardson steps with the damping that is optimal for the
            // estimated spectrum of P A; the 1.1 guards against the Ritz value
            // underestimating lambda_max, where 1 - (1 - omega mu)^2 turns negative
            const ConditionEstimate est = local_spectrum(prec, op, p.n_delta);
            const double omega = est.available ? 2.0 / (est.eig_min + 1.1 * est.eig_max) : 1.0;
            prec = [pc, omega](const Vector& x, Vector& y) { y = omega * pc->apply(x); };
            p.local_prec = richardson(prec, op, 2);
        } else {
            p.local_prec = prec;
        }
    }

    static ConditionEstimate local_spectrum(const LinearOperator& prec, const LinearOperator& op, int n) {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vector b(n);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
        return spectrum_estimate(op, prec, b, 20);
    }

    void build_primal_basis() {
        const int np = static_cast<int>(patches.size());
        const double eps_c = opts.eps_c.value_or(opts.eps / 100.0);
        parallel_for(np, [&](int k) {
            auto& p = patches[static_cast<std::size_t>(k)];
            const DenseMatrix& r = primal.restriction[static_cast<std::size_t>(k)];
            const DenseMatrix rhs = -(p.a_dc * r);
            p.psi.resize(p.n_delta, r.cols());
            if (p.chol) {
                p.psi = p.chol->solve(rhs);
                return;
            }
            const SparseMatrix* a = &p.a_dd;
            LinearOperator op = [a](const Vector& x, Vector& y) { y = *a * x; };
            const LocalPreconditioner* pc = p.prec.get();
            LinearOperator prec = [pc](const Vector& x, Vector& y) { y = pc->apply(x); };
            const int maxit = std::max(10, static_cast<int>(std::ceil(10.0 * std::sqrt(p.n_delta))));
            for (Eigen::Index j = 0; j < r.cols(); ++j)
                p.psi.col(j) = pcg(op, prec, rhs.col(j), eps_c, maxit).x;
        });

        a_psi = DenseMatrix::Zero(primal.size, primal.size);
        f_pi = Vector::Zero(primal.size);
        for (int k = 0; k < np; ++k) {
            const auto& p = patches[static_cast<std::size_t>(k)];
            const auto& glob = primal.global[static_cast<std::size_t>(k)];
            const int n = p.space.num_dofs();
            DenseMatrix full(n, p.psi.cols());
            full.topRows(p.n_delta) = p.psi;
            full.bottomRows(n - p.n_delta) = primal.restriction[static_cast<std::size_t>(k)];
            DenseMatrix local = full.transpose() * (p.ls.a * full);
            local = 0.5 * (local + local.transpose()).eval();
            const Vector fl = full.transpose() * p.ls.f;
            for (std::size_t i = 0; i < glob.size(); ++i) {
                f_pi[glob[i]] += fl[static_cast<Eigen::Index>(i)];
                for (std::size_t j = 0; j < glob.size(); ++j)
                    a_psi(glob[i], glob[j]) += local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
        a_psi_chol = DenseCholesky(a_psi);
    }

    Vector gather_primal(int k, const Vector& u_pi) const {
        const auto& glob = primal.global[static_cast<std::size_t>(k)];
        Vector out(static_cast<Eigen::Index>(glob.size()));
        for (std::size_t i = 0; i < glob.size(); ++i) out[static_cast<Eigen::Index>(i)] = u_pi[glob[i]];
        return out;
    }

    void scatter_primal(int k, const Vector& local, Vector& u_pi) const {
        const auto& glob = primal.global[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < glob.size(); ++i) u_pi[glob[i]] += local[static_cast<Eigen::Index>(i)];
    }

    int saddle_size() const { return n_delta + primal.size + jump.rows; }

    void apply_saddle(const Vector& x, Vector& y) const {
        if (x.size() != saddle_size()) throw ParameterError("saddle operator: size mismatch");
        y.setZero(x.size());
        const Vector u_pi = x.segment(n_delta, primal.size);
        const Vector lambda = x.tail(jump.rows);
        const int np = static_cast<int>(patches.size());
        std::vector<Vector> jl(static_cast<std::size_t>(np)), pl(static_cast<std::size_t>(np));
        parallel_for(np, [&](int k) {
            const auto& p = patches[static_cast<std::size_t>(k)];
            const Vector ud = x.segment(p.offset, p.n_delta);
            const Vector bt = p.b_delta_t * lambda;
            y.segment(p.offset, p.n_delta) = p.a_dd * ud + bt;
            const Vector w = ud + p.psi * gather_primal(k, u_pi);
            jl[static_cast<std::size_t>(k)] = p.b_delta * w;
            pl[static_cast<std::size_t>(k)] = p.psi.transpose() * bt;
        });
        Vector yp = a_psi * u_pi;
        Vector yl = Vector::Zero(jump.rows);
        for (int k = 0; k < np; ++k) {
            scatter_primal(k, pl[static_cast<std::size_t>(k)], yp);
            yl += jl[static_cast<std::size_t>(k)];
        }
        y.segment(n_delta, primal.size) = yp;
        y.tail(jump.rows) = yl;
    }

    void apply_preconditioner(const Vector& x, Vector& y) const {
        if (x.size() != saddle_size()) throw ParameterError("saddle preconditioner: size mismatch");
        y.setZero(x.size());
        auto t0 = Clock::now();
        parallel_for(static_cast<int>(patches.size()), [&](int k) {
            const auto& p = patches[static_cast<std::size_t>(k)];
            Vector out(p.n_delta);
            p.local_prec(x.segment(p.offset, p.n_delta), out);
            y.segment(p.offset, p.n_delta) = out;
        });
        t_apply_local += since(t0);
        if (primal.size > 0) y.segment(n_delta, primal.size) = a_psi_chol.solve(Vector(x.segment(n_delta, primal.size)));
        t0 = Clock::now();
        if (jump.rows > 0) y.tail(jump.rows) = dirichlet->apply(x.tail(jump.rows));
        t_apply_dirichlet += since(t0);
    }

    Vector saddle_rhs() const {
        Vector b = Vector::Zero(saddle_size());
        for (const auto& p : patches) b.segment(p.offset, p.n_delta) = p.f_delta;
        b.segment(n_delta, primal.size) = f_pi;
        return b;
    }

    void require_exact() const {
        if (!exact_variant(opts.variant))
            throw ParameterError("dual operator needs exact local solves (MLU or CGLU)");
    }

    /// y = B_Delta A^{-1} (g_Delta) + B Psi A_Psi^{-1} (g_Pi) with g given per patch.
    Vector dual_apply_parts(const std::vector<Vector>& g_delta, const Vector& g_pi) const {
        const int np = static_cast<int>(patches.size());
        std::vector<Vector> part(static_cast<std::size_t>(np));
        auto t0 = Clock::now();
        parallel_for(np, [&](int k) {
            const auto& p = patches[static_cast<std::size_t>(k)];
            part[static_cast<std::size_t>(k)] = p.b_delta * p.chol->solve(g_delta[static_cast<std::size_t>(k)]);
        });
        t_apply_local += since(t0);
        const Vector z = primal.size > 0 ? a_psi_chol.solve(g_pi) : Vector(0);
        Vector y = Vector::Zero(jump.rows);
        for (int k = 0; k < np; ++k) {
            const auto& p = patches[static_cast<std::size_t>(k)];
            y += part[static_cast<std::size_t>(k)];
            if (p.psi.cols() > 0) y += p.b_delta * (p.psi * gather_primal(k, z));
        }
        return y;
    }

    void apply_dual(const Vector& lambda, Vector& y) const {
        require_exact();
        if (lambda.size() != jump.rows) throw ParameterError("dual operator: size mismatch");
        std::vector<Vector> g(patches.size());
        Vector g_pi = Vector::Zero(primal.size);
        for (std::size_t k = 0; k < patches.size(); ++k) {
            g[k] = patches[k].b_delta_t * lambda;
            scatter_primal(static_cast<int>(k), patches[k].psi.transpose() * g[k], g_pi);
        }
        y = dual_apply_parts(g, g_pi);
    }

    Vector dual_rhs() const {
        require_exact();
        std::vector<Vector> g;
        for (const auto& p : patches) g.push_back(p.f_delta);
        return dual_apply_parts(g, f_pi);
    }

    std::vector<Vector> recover(const Vector& u_delta, const Vector& u_pi) const {
        if (u_delta.size() != n_delta || u_pi.size() != primal.size)
            throw ParameterError("recover: size mismatch");
        std::vector<Vector> out;
        for (std::size_t k = 0; k < patches.size(); ++k) {
            const auto& p = patches[k];
            const Vector up = gather_primal(static_cast<int>(k), u_pi);
            Vector loc(p.space.num_dofs());
            loc.head(p.n_delta) = u_delta.segment(p.offset, p.n_delta) + p.psi * up;
            loc.tail(p.space.num_corner()) = primal.restriction[k] * up;
            out.push_back(p.space.to_raw(loc).head(p.space.num_patch_dofs()));
        }
        return out;
    }

    ConditionEstimate estimate_condition(double tol) const {
        const bool dual = opts.variant == Variant::cglu;
        const int n = dual ? jump.rows : saddle_size();
        std::mt19937 rng(20240611);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vector b(n);
        for (int i = 0; i < n; ++i) b[i] = u(rng);
        const double keep_local = t_apply_local, keep_dirichlet = t_apply_dirichlet;
        ConditionEstimate e;
        if (dual) {
            LinearOperator f = [this](const Vector& x, Vector& y) { apply_dual(x, y); };
            LinearOperator m = [this](const Vector& x, Vector& y) { y = dirichlet->apply(x); };
            e = pcg(f, m, b, tol, opts.maxit, ResidualNorm::preconditioned).report.estimate;
        } else {
            LinearOperator a = [this](const Vector& x, Vector& y) { apply_saddle(x, y); };
            LinearOperator m = [this](const Vector& x, Vector& y) { apply_preconditioner(x, y); };
            e = minres(a, m, b, tol, opts.maxit).report.estimate;
        }
        t_apply_local = keep_local;
        t_apply_dirichlet = keep_dirichlet;
        return e;
    }

    IetiSolution solve() {
        t_apply_local = t_apply_dirichlet = 0.0;
        IetiSolution sol;
        const auto t0 = Clock::now();
        if (opts.variant == Variant::cglu) {
            LinearOperator f = [this](const Vector& x, Vector& y) { apply_dual(x, y); };
            LinearOperator m = [this](const Vector& x, Vector& y) {
                const auto t = Clock::now();
                y = dirichlet->apply(x);
                t_apply_dirichlet += since(t);
            };
            auto res = pcg(f, m, dual_rhs(), opts.eps, opts.maxit, ResidualNorm::preconditioned);
            const Vector& lambda = res.x;
            // back substitution
            Vector g_pi = f_pi;
            Vector u_delta(n_delta);
            for (std::size_t k = 0; k < patches.size(); ++k) {
                const auto& p = patches[k];
                const Vector bt = p.b_delta_t * lambda;
                scatter_primal(static_cast<int>(k), -(p.psi.transpose() * bt), g_pi);
                u_delta.segment(p.offset, p.n_delta) = p.chol->solve(Vector(p.f_delta - bt));
            }
            const Vector u_pi = primal.size > 0 ? a_psi_chol.solve(g_pi) : Vector(0);
            sol.patch_coeffs = recover(u_delta, u_pi);
            sol.lambda = lambda;
            sol.report = std::move(res.report);
        } else {
            LinearOperator a = [this](const Vector& x, Vector& y) { apply_saddle(x, y); };
            LinearOperator m = [this](const Vector& x, Vector& y) { apply_preconditioner(x, y); };
            auto res = minres(a, m, saddle_rhs(), opts.eps, opts.maxit);
            sol.patch_coeffs = recover(res.x.head(n_delta), res.x.segment(n_delta, primal.size));
            sol.lambda = res.x.tail(jump.rows);
            sol.report = std::move(res.report);
        }
        sol.times = setup;
        sol.times.solve = since(t0);
        sol.times.apply_local = t_apply_local;
        sol.times.apply_dirichlet = t_apply_dirichlet;
        return sol;
    }
};

IetiSolver::IetiSolver(const Discretization& disc, const SourceFunction& f, IetiOptions opts)
    : impl_(std::make_unique<Impl>(disc, f, opts)) {}
IetiSolver::~IetiSolver() = default;

int IetiSolver::num_patches() const { return static_cast<int>(impl_->patches.size()); }
int IetiSolver::num_lambda() const { return impl_->jump.rows; }
int IetiSolver::num_primal() const { return impl_->primal.size; }
int IetiSolver::num_delta() const { return impl_->n_delta; }
int IetiSolver::saddle_size() const { return impl_->saddle_size(); }
const ExtendedSpace& IetiSolver::space(int k) const { return impl_->patches.at(static_cast<std::size_t>(k)).space; }
const LocalSystem& IetiSolver::local_system(int k) const { return impl_->patches.at(static_cast<std::size_t>(k)).ls; }
const JumpMatrix& IetiSolver::jump() const { return impl_->jump; }
const PrimalNumbering& IetiSolver::primal() const { return impl_->primal; }
const DenseMatrix& IetiSolver::primal_basis(int k) const { return impl_->patches.at(static_cast<std::size_t>(k)).psi; }
const DenseMatrix& IetiSolver::coarse_matrix() const { return impl_->a_psi; }
const PhaseTimes& IetiSolver::setup_times() const { return impl_->setup; }
void IetiSolver::apply_saddle(const Vector& x, Vector& y) const { impl_->apply_saddle(x, y); }
void IetiSolver::apply_preconditioner(const Vector& x, Vector& y) const { impl_->apply_preconditioner(x, y); }
Vector IetiSolver::saddle_rhs() const { return impl_->saddle_rhs(); }
void IetiSolver::apply_dual(const Vector& lambda, Vector& y) const { impl_->apply_dual(lambda, y); }
Vector IetiSolver::dual_rhs() const { return impl_->dual_rhs(); }
std::vector<Vector> IetiSolver::recover(const Vector& u_delta, const Vector& u_pi) const {
    return impl_->recover(u_delta, u_pi);
}
IetiSolution IetiSolver::solve() { return impl_->solve(); }
ConditionEstimate IetiSolver::estimate_condition(double tol) const { return impl_->estimate_condition(tol); }

}  // namespace ietidg
