#pragma once

#include "ietidg/assembly.hpp"
#include "ietidg/ieti.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ietidg {

/// Patch layout: "square:NXxNY", "annulus:NAxNR" or "file:PATH" (JSON
/// multipatch geometry).
struct Layout {
    enum class Kind { square, annulus, file };
    Kind kind = Kind::square;
    int nx = 2;
    int ny = 2;
    std::string path;

    bool operator==(const Layout&) const = default;
};

Layout parse_layout(const std::string& text);
std::string layout_name(const Layout& layout);
MultiPatch build_layout(const Layout& layout);

/// Coloring of grid layouts by (column + row) mod 3: 0 green, 1 red, 2 grey.
/// Red patches get degree p+1 with mixed degrees enabled, grey patches one
/// extra refinement with mixed refinement enabled. Layouts without grid
/// positions are all green.
enum class PatchColor { green, red, grey };
PatchColor patch_color(const MultiPatch& mp, int k);

struct ExperimentConfig {
    int p = 2;
    int r = 1;
    Layout layout;
    Variant variant = Variant::mfd;
    double eps = 1e-8;
    std::optional<double> eps_c;  ///< unset means eps / 100
    std::optional<double> delta;  ///< penalty override
    bool mixed_degree = false;
    bool mixed_refine = false;
    int maxit = 5000;  ///< outer Krylov iteration limit

    bool operator==(const ExperimentConfig&) const = default;
};

/// Keys: p, r, layout, variant, eps, eps_c ("auto" or number), delta,
/// mixed_degree, mixed_refine, maxit. Missing keys keep their defaults; unknown keys
/// are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

Discretization build_discretization(const ExperimentConfig& cfg);

/// sin(pi x) sin(pi y), its gradient and the matching source 2 pi^2 sin sin.
double manufactured_solution(double x, double y);
Point manufactured_gradient(double x, double y);
double manufactured_source(double x, double y);

struct ErrorNorms {
    double l2 = 0.0;
    double dg = 0.0;  ///< broken H1 seminorm plus interface penalty
};

/// Errors of the patch coefficients against an exact solution that is
/// continuous and vanishes on the Dirichlet boundary.
ErrorNorms solution_errors(const Discretization& disc, const std::vector<Vector>& patch_coeffs,
                           const SourceFunction& exact, const GradientFunction& exact_grad);

struct ExperimentRecord {
    std::string variant;
    int p = 0;
    int r = 0;
    long long n_total = 0;
    int iterations = 0;
    double kappa_est = 0.0;
    PhaseTimes times;
    double t_total = 0.0;
    /// Unit-square layouts only.
    std::optional<double> l2_err;
    std::optional<double> dg_err;
    bool converged = false;
    std::string failure;
    std::vector<double> residual_history;

    bool operator==(const ExperimentRecord&) const;
};

/// Builds, assembles and solves one instance. A solver failure is reported in
/// the record (converged = false), other errors propagate.
ExperimentRecord run_experiment(const ExperimentConfig& cfg);

enum class ReportFormat { csv, json, md };
ReportFormat parse_format(const std::string& name);

std::string emit_report(const std::vector<ExperimentRecord>& records, ReportFormat format);
std::vector<ExperimentRecord> records_from_json(const nlohmann::json& doc);
nlohmann::json record_to_json(const ExperimentRecord& rec);
ExperimentRecord record_from_json(const nlohmann::json& doc);

/// kappa ~ c (1 + log(c0 H/h))^2, fitted as sqrt(kappa) = a + b log(H/h).
struct LogSquaredFit {
    bool fitted = false;
    double c = 0.0;
    /// log(c0); c0 itself overflows for nearly flat data
    double log_c0 = 0.0;
    /// max |fit - kappa| / kappa over the data
    double max_deviation = 0.0;
    /// b <= 0: the data does not grow and c is the mean of kappa
    bool flat = false;

    double operator()(double log_ratio) const;
};

LogSquaredFit fit_log_squared(const std::vector<double>& log_ratio, const std::vector<double>& kappa);

struct ScalingRecord {
    std::vector<ExperimentRecord> records;
    /// max_k log(H_k / h_k) per record
    std::vector<double> log_ratio;
    std::vector<int> failed_levels;
    LogSquaredFit fit;
};

/// Runs base with r over r_levels (at least three) and fits kappa_est against
/// max_k log(H_k/h_k). The fit uses the converged levels only and needs two of
/// them.
ScalingRecord scaling_study(const ExperimentConfig& base, const std::vector<int>& r_levels);

/// "3", "1..5" or "1,2,4".
std::vector<int> parse_levels(const std::string& text);

}  // namespace ietidg
