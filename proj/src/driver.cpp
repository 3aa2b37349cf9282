#include "ietidg/driver.hpp"

#include "ietidg/errors.hpp"
#include "ietidg/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

namespace ietidg {

namespace {

int parse_count(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || v < 1) throw ParameterError("bad " + what + ": '" + s + "'");
    return v;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

Layout parse_layout(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ParameterError("layout must look like square:2x2, annulus:8x4 or file:PATH");
    const std::string kind = lower(text.substr(0, colon));
    const std::string rest = text.substr(colon + 1);
    Layout l;
    if (kind == "file") {
        if (rest.empty()) throw ParameterError("layout file: empty path");
        l.kind = Layout::Kind::file;
        l.path = rest;
        l.nx = l.ny = 0;
        return l;
    }
    if (kind == "square")
        l.kind = Layout::Kind::square;
    else if (kind == "annulus")
        l.kind = Layout::Kind::annulus;
    else
        throw ParameterError("unknown layout kind '" + kind + "'");
    const auto x = lower(rest).find('x');
    if (x == std::string::npos) throw ParameterError("layout counts must look like 2x2");
    l.nx = parse_count(rest.substr(0, x), "layout count");
    l.ny = parse_count(rest.substr(x + 1), "layout count");
    return l;
}

std::string layout_name(const Layout& layout) {
    switch (layout.kind) {
        case Layout::Kind::square:
            return "square:" + std::to_string(layout.nx) + "x" + std::to_string(layout.ny);
        case Layout::Kind::annulus:
            return "annulus:" + std::to_string(layout.nx) + "x" + std::to_string(layout.ny);
        case Layout::Kind::file:
            return "file:" + layout.path;
    }
    return {};
}

MultiPatch build_layout(const Layout& layout) {
    switch (layout.kind) {
        case Layout::Kind::square:
            return unit_square_multipatch(layout.nx, layout.ny);
        case Layout::Kind::annulus:
            return quarter_annulus_multipatch(layout.nx, layout.ny, 1.0, 2.0);
        case Layout::Kind::file: {
            std::ifstream in(layout.path);
            if (!in) throw ParameterError("cannot open geometry file " + layout.path);
            nlohmann::json doc;
            try {
                in >> doc;
            } catch (const nlohmann::json::exception& e) {
                throw ParameterError("geometry file " + layout.path + ": " + e.what());
            }
            return multipatch_from_json(doc);
        }
    }
    throw ParameterError("unknown layout");
}

PatchColor patch_color(const MultiPatch& mp, int k) {
    if (k < 0 || k >= static_cast<int>(mp.patches.size())) throw ParameterError("patch index out of range");
    if (mp.grid_position.size() != mp.patches.size()) return PatchColor::green;
    const auto& g = mp.grid_position[static_cast<std::size_t>(k)];
    switch ((g[0] + g[1]) % 3) {
        case 1:
            return PatchColor::red;
        case 2:
            return PatchColor::grey;
        default:
            return PatchColor::green;
    }
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.p < 1) throw ParameterError("p must be >= 1");
    if (cfg.r < 0) throw ParameterError("r must be >= 0");
    if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ParameterError("eps must lie in (0, 1)");
    if (cfg.eps_c && !(*cfg.eps_c > 0.0 && *cfg.eps_c < 1.0)) throw ParameterError("eps_c must lie in (0, 1)");
    if (cfg.delta && !(*cfg.delta > 0.0)) throw ParameterError("delta must be positive");
    if (cfg.maxit < 1) throw ParameterError("maxit must be >= 1");
    if (cfg.layout.kind != Layout::Kind::file && (cfg.layout.nx < 1 || cfg.layout.ny < 1))
        throw ParameterError("layout counts must be >= 1");
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParameterError("config must be a JSON object");
    ExperimentConfig cfg;
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "p")
                cfg.p = v.get<int>();
            else if (key == "r")
                cfg.r = v.get<int>();
            else if (key == "layout")
                cfg.layout = parse_layout(v.get<std::string>());
            else if (key == "variant")
                cfg.variant = parse_variant(v.get<std::string>());
            else if (key == "eps")
                cfg.eps = v.get<double>();
            else if (key == "eps_c") {
                if (v.is_null() || (v.is_string() && lower(v.get<std::string>()) == "auto"))
                    cfg.eps_c.reset();
                else
                    cfg.eps_c = v.get<double>();
            } else if (key == "delta") {
                if (v.is_null())
                    cfg.delta.reset();
                else
                    cfg.delta = v.get<double>();
            } else if (key == "mixed_degree")
                cfg.mixed_degree = v.get<bool>();
            else if (key == "mixed_refine")
                cfg.mixed_refine = v.get<bool>();
            else if (key == "maxit")
                cfg.maxit = v.get<int>();
            else
                throw ParameterError("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json doc;
    doc["p"] = cfg.p;
    doc["r"] = cfg.r;
    doc["layout"] = layout_name(cfg.layout);
    doc["variant"] = lower(variant_name(cfg.variant));
    doc["eps"] = cfg.eps;
    doc["eps_c"] = cfg.eps_c ? nlohmann::json(*cfg.eps_c) : nlohmann::json("auto");
    doc["delta"] = cfg.delta ? nlohmann::json(*cfg.delta) : nlohmann::json(nullptr);
    doc["mixed_degree"] = cfg.mixed_degree;
    doc["mixed_refine"] = cfg.mixed_refine;
    doc["maxit"] = cfg.maxit;
    return doc;
}

Discretization build_discretization(const ExperimentConfig& cfg) {
    validate(cfg);
    MultiPatch mp = build_layout(cfg.layout);
    std::vector<std::array<KnotVector, 2>> knots;
    int max_p = cfg.p;
    for (int k = 0; k < static_cast<int>(mp.patches.size()); ++k) {
        const PatchColor col = patch_color(mp, k);
        const int p = cfg.p + (cfg.mixed_degree && col == PatchColor::red ? 1 : 0);
        const int r = cfg.r + (cfg.mixed_refine && col == PatchColor::grey ? 1 : 0);
        max_p = std::max(max_p, p);
        const KnotVector kv = refine_dyadic(make_open_knot_vector(p, 1, p - 1), r);
        knots.push_back({kv, kv});
    }
    DGConfig dg;
    dg.delta = choose_penalty(max_p, cfg.delta);
    return make_discretization(std::move(mp), knots, dg);
}

double manufactured_solution(double x, double y) {
    return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
}

Point manufactured_gradient(double x, double y) {
    const double pi = std::numbers::pi;
    return {pi * std::cos(pi * x) * std::sin(pi * y), pi * std::sin(pi * x) * std::cos(pi * y)};
}

double manufactured_source(double x, double y) {
    const double pi = std::numbers::pi;
    return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
}

ErrorNorms solution_errors(const Discretization& disc, const std::vector<Vector>& patch_coeffs,
                           const SourceFunction& exact, const GradientFunction& exact_grad) {
    const int n = disc.num_patches();
    if (static_cast<int>(patch_coeffs.size()) != n) throw ParameterError("solution_errors: one vector per patch");
    const SourceFunction zero = [](double, double) { return 0.0; };
    std::vector<double> l2(static_cast<std::size_t>(n)), dg(static_cast<std::size_t>(n));
    parallel_for(n, [&](int k) {
        const ExtendedSpace sp(disc, k);
        const PatchError e = patch_error(disc, k, patch_coeffs[static_cast<std::size_t>(k)], exact, exact_grad);
        // the exact solution has no jumps, so the penalty sees only u_h
        const Vector u = sp.to_solver(extend_from_patches(disc, sp, patch_coeffs));
        const SparseMatrix r = assemble_local(disc, sp, zero).r;
        l2[static_cast<std::size_t>(k)] = e.l2_sq;
        dg[static_cast<std::size_t>(k)] = e.h1_semi_sq + u.dot(r * u);
    });
    ErrorNorms out;
    out.l2 = std::sqrt(std::accumulate(l2.begin(), l2.end(), 0.0));
    out.dg = std::sqrt(std::max(0.0, std::accumulate(dg.begin(), dg.end(), 0.0)));
    return out;
}

ExperimentRecord run_experiment(const ExperimentConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const Discretization disc = build_discretization(cfg);
    ExperimentRecord rec;
    rec.variant = variant_name(cfg.variant);
    rec.p = cfg.p;
    rec.r = cfg.r;
    for (const auto& b : disc.bases) rec.n_total += b.num_dofs();

    IetiOptions opts;
    opts.variant = cfg.variant;
    opts.eps = cfg.eps;
    opts.eps_c = cfg.eps_c;
    opts.maxit = cfg.maxit;
    const auto start = clock::now();
    std::unique_ptr<IetiSolver> solver;
    IetiSolution sol;
    try {
        solver = std::make_unique<IetiSolver>(disc, manufactured_source, opts);
        sol = solver->solve();
    } catch (const SolverError& e) {
        rec.t_total = std::chrono::duration<double>(clock::now() - start).count();
        if (solver) rec.times = solver->setup_times();
        rec.iterations = e.iterations();
        rec.residual_history = e.residual_history();
        rec.failure = e.what();
        return rec;
    }
    rec.t_total = std::chrono::duration<double>(clock::now() - start).count();
    rec.times = sol.times;
    rec.iterations = sol.report.iterations;
    rec.converged = true;
    rec.residual_history = sol.report.residual_history;
    try {
        const ConditionEstimate est = solver->estimate_condition();
        rec.kappa_est = est.available ? est.kappa : 1.0;
    } catch (const SolverError&) {
        rec.kappa_est = sol.report.estimate.available ? sol.report.estimate.kappa : 0.0;
    }
    if (cfg.layout.kind == Layout::Kind::square) {
        const ErrorNorms e = solution_errors(disc, sol.patch_coeffs, manufactured_solution, manufactured_gradient);
        rec.l2_err = e.l2;
        rec.dg_err = e.dg;
    }
    return rec;
}

bool ExperimentRecord::operator==(const ExperimentRecord& o) const {
    const auto same_times = [](const PhaseTimes& a, const PhaseTimes& b) {
        return a.psi == b.psi && a.setup_local == b.setup_local && a.setup_dirichlet == b.setup_dirichlet &&
               a.apply_local == b.apply_local && a.apply_dirichlet == b.apply_dirichlet && a.solve == b.solve;
    };
    return variant == o.variant && p == o.p && r == o.r && n_total == o.n_total && iterations == o.iterations &&
           kappa_est == o.kappa_est && same_times(times, o.times) && t_total == o.t_total && l2_err == o.l2_err &&
           dg_err == o.dg_err && converged == o.converged && failure == o.failure &&
           residual_history == o.residual_history;
}

ReportFormat parse_format(const std::string& name) {
    const std::string n = lower(name);
    if (n == "csv") return ReportFormat::csv;
    if (n == "json") return ReportFormat::json;
    if (n == "md" || n == "markdown") return ReportFormat::md;
    throw ParameterError("unknown report format '" + name + "'");
}

nlohmann::json record_to_json(const ExperimentRecord& rec) {
    const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"variant", rec.variant},
            {"p", rec.p},
            {"r", rec.r},
            {"N_total", rec.n_total},
            {"it", rec.iterations},
            {"kappa_est", rec.kappa_est},
            {"t_psi", rec.times.psi},
            {"t_setup_local", rec.times.setup_local},
            {"t_setup_dirichlet", rec.times.setup_dirichlet},
            {"t_apply_local", rec.times.apply_local},
            {"t_apply_dirichlet", rec.times.apply_dirichlet},
            {"t_solve", rec.times.solve},
            {"t_total", rec.t_total},
            {"l2_err", opt(rec.l2_err)},
            {"dg_err", opt(rec.dg_err)},
            {"converged", rec.converged},
            {"failure", rec.failure},
            {"residual_history", rec.residual_history}};
}

ExperimentRecord record_from_json(const nlohmann::json& doc) {
    const auto opt = [&](const char* key) -> std::optional<double> {
        const auto& v = doc.at(key);
        if (v.is_null()) return std::nullopt;
        return v.get<double>();
    };
    ExperimentRecord rec;
    try {
        rec.variant = doc.at("variant").get<std::string>();
        rec.p = doc.at("p").get<int>();
        rec.r = doc.at("r").get<int>();
        rec.n_total = doc.at("N_total").get<long long>();
        rec.iterations = doc.at("it").get<int>();
        rec.kappa_est = doc.at("kappa_est").get<double>();
        rec.times.psi = doc.at("t_psi").get<double>();
        rec.times.setup_local = doc.at("t_setup_local").get<double>();
        rec.times.setup_dirichlet = doc.at("t_setup_dirichlet").get<double>();
        rec.times.apply_local = doc.at("t_apply_local").get<double>();
        rec.times.apply_dirichlet = doc.at("t_apply_dirichlet").get<double>();
        rec.times.solve = doc.at("t_solve").get<double>();
        rec.t_total = doc.at("t_total").get<double>();
        rec.l2_err = opt("l2_err");
        rec.dg_err = opt("dg_err");
        rec.converged = doc.at("converged").get<bool>();
        rec.failure = doc.value("failure", std::string());
        rec.residual_history = doc.value("residual_history", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("record: ") + e.what());
    }
    return rec;
}

std::vector<ExperimentRecord> records_from_json(const nlohmann::json& doc) {
    const nlohmann::json& list = doc.is_object() && doc.contains("records") ? doc.at("records") : doc;
    if (!list.is_array()) throw ParameterError("records: expected an array");
    std::vector<ExperimentRecord> out;
    for (const auto& r : list) out.push_back(record_from_json(r));
    return out;
}

std::string emit_report(const std::vector<ExperimentRecord>& records, ReportFormat format) {
    if (records.empty()) throw ParameterError("report needs at least one record");
    std::ostringstream out;
    switch (format) {
        case ReportFormat::csv:
            out << "variant,p,r,N_total,it,kappa_est,t_psi,t_setup_local,t_setup_dirichlet,t_apply_local,"
                   "t_apply_dirichlet,t_solve,t_total,l2_err,dg_err\n";
            for (const auto& r : records)
                out << r.variant << ',' << r.p << ',' << r.r << ',' << r.n_total << ',' << r.iterations << ','
                    << num(r.kappa_est) << ',' << num(r.times.psi) << ',' << num(r.times.setup_local) << ','
                    << num(r.times.setup_dirichlet) << ',' << num(r.times.apply_local) << ','
                    << num(r.times.apply_dirichlet) << ',' << num(r.times.solve) << ',' << num(r.t_total) << ','
                    << opt_num(r.l2_err) << ',' << opt_num(r.dg_err) << '\n';
            break;
        case ReportFormat::json: {
            nlohmann::json list = nlohmann::json::array();
            for (const auto& r : records) list.push_back(record_to_json(r));
            out << list.dump(2) << '\n';
            break;
        }
        case ReportFormat::md:
            out << "| variant | p | r | N | Psi [s] | local setup [s] | Dirichlet setup [s] | solving [s] | "
                   "total [s] | it. | kappa | L2 error | dG error |\n";
            out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
            for (const auto& r : records) {
                const auto cell = [](const std::optional<double>& v) { return v ? num(*v) : std::string("-"); };
                out << "| " << r.variant << " | " << r.p << " | " << r.r << " | " << r.n_total << " | "
                    << num(r.times.psi) << " | " << num(r.times.setup_local) << " | "
                    << num(r.times.setup_dirichlet) << " | " << num(r.times.solve) << " | " << num(r.t_total)
                    << " | " << (r.converged ? std::to_string(r.iterations) : "failed") << " | "
                    << num(r.kappa_est) << " | " << cell(r.l2_err) << " | " << cell(r.dg_err) << " |\n";
            }
            break;
    }
    return out.str();
}

double LogSquaredFit::operator()(double log_ratio) const {
    if (flat) return c;
    const double s = 1.0 + log_c0 + log_ratio;
    return c * s * s;
}

LogSquaredFit fit_log_squared(const std::vector<double>& log_ratio, const std::vector<double>& kappa) {
    if (log_ratio.size() != kappa.size()) throw ParameterError("fit: size mismatch");
    const std::size_t n = kappa.size();
    if (n < 2) throw ParameterError("fit: need at least two points");
    for (double k : kappa)
        if (!(k > 0.0)) throw ParameterError("fit: kappa must be positive");
    double ml = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ml += log_ratio[i];
        ms += std::sqrt(kappa[i]);
    }
    ml /= static_cast<double>(n);
    ms /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (log_ratio[i] - ml) * (log_ratio[i] - ml);
        sxy += (log_ratio[i] - ml) * (std::sqrt(kappa[i]) - ms);
    }
    LogSquaredFit fit;
    fit.fitted = true;
    const double b = sxx > 0.0 ? sxy / sxx : 0.0;
    if (b > 0.0) {
        const double a = ms - b * ml;
        fit.c = b * b;
        fit.log_c0 = a / b - 1.0;
    } else {
        fit.flat = true;
        fit.c = std::accumulate(kappa.begin(), kappa.end(), 0.0) / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i)
        fit.max_deviation = std::max(fit.max_deviation, std::abs(fit(log_ratio[i]) - kappa[i]) / kappa[i]);
    return fit;
}

ScalingRecord scaling_study(const ExperimentConfig& base, const std::vector<int>& r_levels) {
    if (r_levels.size() < 3) throw ParameterError("scaling study needs at least three levels");
    ScalingRecord out;
    std::vector<double> xs, ks;
    for (int r : r_levels) {
        ExperimentConfig cfg = base;
        cfg.r = r;
        const Discretization disc = build_discretization(cfg);
        double lr = 0.0;
        for (const auto& s : disc.sizes) lr = std::max(lr, -std::log(s.h_hat));
        ExperimentRecord rec = run_experiment(cfg);
        if (rec.converged && rec.kappa_est > 0.0) {
            xs.push_back(lr);
            ks.push_back(rec.kappa_est);
        } else {
            out.failed_levels.push_back(r);
        }
        out.log_ratio.push_back(lr);
        out.records.push_back(std::move(rec));
    }
    if (xs.size() >= 2) out.fit = fit_log_squared(xs, ks);
    return out;
}

std::vector<int> parse_levels(const std::string& text) {
    const auto bad = [&]() { return ParameterError("bad level list '" + text + "'"); };
    const auto to_int = [&](const std::string& s) {
        std::size_t used = 0;
        int v = -1;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            throw bad();
        }
        if (used != s.size() || v < 0) throw bad();
        return v;
    };
    std::vector<int> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const int a = to_int(text.substr(0, dots)), b = to_int(text.substr(dots + 2));
        if (b < a) throw bad();
        for (int r = a; r <= b; ++r) out.push_back(r);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int(item));
    if (out.empty()) throw bad();
    return out;
}

}  // namespace ietidg
