// Command line front end: run one experiment, run a scaling study over
// refinement levels, or export a layout as JSON geometry.
#include "ietidg/driver.hpp"
#include "ietidg/errors.hpp"
#include "ietidg/parallel.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace ietidg;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_solver = 2;

struct Flags {
    std::optional<int> p;
    std::optional<std::string> r;
    std::optional<std::string> layout, variant, eps_c, out, format, config;
    std::optional<double> eps, delta;
    std::optional<int> jobs, maxit;
    bool mixed_degree = false, mixed_refine = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags given on the command line win");
    cmd->add_option("--p", f.p, "base spline degree");
    cmd->add_option("--layout", f.layout, "square:NXxNY, annulus:NAxNR or file:PATH");
    cmd->add_option("--variant", f.variant, "mfd, mfd2, mlu or cglu");
    cmd->add_option("--eps", f.eps, "relative residual tolerance");
    cmd->add_option("--eps-c", f.eps_c, "primal basis tolerance, 'auto' for eps/100");
    cmd->add_option("--delta", f.delta, "interior penalty parameter");
    cmd->add_flag("--mixed-degree", f.mixed_degree, "degree p+1 on red patches");
    cmd->add_flag("--mixed-refine", f.mixed_refine, "one extra refinement on grey patches");
    cmd->add_option("--maxit", f.maxit, "outer iteration limit");
    cmd->add_option("--out", f.out, "report file (stdout if omitted)");
    cmd->add_option("--format", f.format, "csv, json or md (default from --out extension, else csv)");
    cmd->add_option("--jobs", f.jobs, "worker threads for patch-parallel work")->check(CLI::PositiveNumber);
}

std::string normalize_key(std::string k) {
    for (char& c : k)
        if (c == '-') c = '_';
    return k;
}

/// Config file merged with the flags, still holding r, out, format and jobs.
nlohmann::json merged_config(const Flags& f) {
    nlohmann::json doc = nlohmann::json::object();
    if (f.config) {
        std::ifstream in(*f.config);
        if (!in) throw ParameterError("cannot open config file " + *f.config);
        nlohmann::json file;
        try {
            in >> file;
        } catch (const nlohmann::json::exception& e) {
            throw ParameterError("config file " + *f.config + ": " + e.what());
        }
        if (!file.is_object()) throw ParameterError("config file must hold a JSON object");
        for (const auto& [k, v] : file.items()) doc[normalize_key(k)] = v;
    }
    if (f.p) doc["p"] = *f.p;
    if (f.r) doc["r"] = *f.r;
    if (f.layout) doc["layout"] = *f.layout;
    if (f.variant) doc["variant"] = *f.variant;
    if (f.eps) doc["eps"] = *f.eps;
    if (f.eps_c) {
        if (*f.eps_c == "auto")
            doc["eps_c"] = "auto";
        else
            try {
                doc["eps_c"] = std::stod(*f.eps_c);
            } catch (const std::exception&) {
                throw ParameterError("--eps-c expects 'auto' or a number");
            }
    }
    if (f.delta) doc["delta"] = *f.delta;
    if (f.mixed_degree) doc["mixed_degree"] = true;
    if (f.mixed_refine) doc["mixed_refine"] = true;
    if (f.maxit) doc["maxit"] = *f.maxit;
    if (f.out) doc["out"] = *f.out;
    if (f.format) doc["format"] = *f.format;
    if (f.jobs) doc["jobs"] = *f.jobs;
    return doc;
}

struct Output {
    std::optional<std::string> path;
    ReportFormat format = ReportFormat::csv;
};

/// Removes the keys that are not part of the experiment config.
Output take_output(nlohmann::json& doc) {
    Output o;
    if (doc.contains("out")) o.path = doc["out"].get<std::string>();
    if (doc.contains("format")) {
        o.format = parse_format(doc["format"].get<std::string>());
    } else if (o.path) {
        const auto dot = o.path->rfind('.');
        if (dot != std::string::npos) {
            try {
                o.format = parse_format(o.path->substr(dot + 1));
            } catch (const ParameterError&) {
            }
        }
    }
    if (doc.contains("jobs")) {
        const int jobs = doc["jobs"].get<int>();
        if (jobs < 1) throw ParameterError("jobs must be >= 1");
        set_num_jobs(jobs);
    }
    doc.erase("out");
    doc.erase("format");
    doc.erase("jobs");
    return o;
}

void write(const Output& o, const std::string& text) {
    if (!o.path) {
        std::cout << text;
        return;
    }
    std::ofstream out(*o.path);
    if (!out) throw ParameterError("cannot write " + *o.path);
    out << text;
}

std::string r_text(const nlohmann::json& v) {
    if (v.is_number_integer()) return std::to_string(v.get<int>());
    if (v.is_array()) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ",") + std::to_string(x.get<int>());
        return s;
    }
    return v.get<std::string>();
}

int run_cmd(const Flags& f) {
    nlohmann::json doc = merged_config(f);
    const Output o = take_output(doc);
    if (doc.contains("r")) {
        const auto levels = parse_levels(r_text(doc["r"]));
        if (levels.size() != 1) throw ParameterError("run takes a single level; use scaling for ranges");
        doc["r"] = levels.front();
    }
    const ExperimentConfig cfg = config_from_json(doc);
    const ExperimentRecord rec = run_experiment(cfg);
    write(o, emit_report({rec}, o.format));
    if (!rec.converged) {
        std::cerr << "solver failure: " << rec.failure << '\n';
        return exit_solver;
    }
    return exit_ok;
}

int scaling_cmd(const Flags& f) {
    nlohmann::json doc = merged_config(f);
    const Output o = take_output(doc);
    const std::vector<int> levels = parse_levels(doc.contains("r") ? r_text(doc["r"]) : std::string("1..5"));
    doc.erase("r");
    const ExperimentConfig base = config_from_json(doc);
    const ScalingRecord s = scaling_study(base, levels);
    std::string text = emit_report(s.records, o.format);
    nlohmann::json fit = {{"fitted", s.fit.fitted},
                          {"c", s.fit.c},
                          {"log_c0", s.fit.log_c0},
                          {"flat", s.fit.flat},
                          {"max_deviation", s.fit.max_deviation},
                          {"failed_levels", s.failed_levels}};
    if (o.format == ReportFormat::json) {
        nlohmann::json full = {{"records", nlohmann::json::parse(text)}, {"fit", fit}};
        text = full.dump(2) + "\n";
    } else if (o.format == ReportFormat::md) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "\nfit kappa = %.6g (1 + %.6g + log(H/h))^2, max relative deviation %.3g\n",
                      s.fit.c, s.fit.log_c0, s.fit.max_deviation);
        text += buf;
    }
    write(o, text);
    std::cerr << "fit: " << fit.dump() << '\n';
    return s.failed_levels.empty() ? exit_ok : exit_solver;
}

int export_cmd(const std::string& layout, const std::optional<std::string>& out) {
    const nlohmann::json doc = multipatch_to_json(build_layout(parse_layout(layout)));
    Output o;
    o.path = out;
    write(o, doc.dump(2) + "\n");
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-primal tearing and interconnecting solver for multipatch dG IgA"};
    app.require_subcommand(1);

    Flags run_flags;
    auto* run = app.add_subcommand("run", "solve one instance and write a report");
    add_common(run, run_flags);
    run->add_option("--r", run_flags.r, "refinement level");

    Flags scale_flags;
    auto* scaling = app.add_subcommand("scaling", "solve over several levels and fit the condition numbers");
    add_common(scaling, scale_flags);
    scaling->add_option("--r", scale_flags.r, "levels, e.g. 1..5 or 1,2,4 (default 1..5)");

    std::string export_layout = "square:2x2";
    std::optional<std::string> export_out;
    auto* exp = app.add_subcommand("export-geometry", "write a layout as JSON multipatch geometry");
    exp->add_option("--layout", export_layout, "square:NXxNY or annulus:NAxNR");
    exp->add_option("--out", export_out, "output file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*run) return run_cmd(run_flags);
        if (*scaling) return scaling_cmd(scale_flags);
        return export_cmd(export_layout, export_out);
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const GeometryError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return exit_solver;
    }
}
