// Batch command-line surface over the library: run the simulation study,
// estimate CATE curves from CSV data, and inspect kernels/bandwidth plans.

#include "CLI11.hpp"
#include "json.hpp"

#include "cate/bandwidth.hpp"
#include "cate/estimators.hpp"
#include "cate/io.hpp"
#include "cate/propensity.hpp"
#include "cate/simulate.hpp"
#include "cate/smoothing.hpp"

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bandwidth override: either an absolute value or the scale form
// "c*sd*n^e" (e may be a fraction like -1/9), resolved against a sample SD.
struct BandwidthSpec {
    double constant = 0.0;
    double exponent = 0.0;
    bool scale_form = false;

    double resolve(double sd, int n) const {
        if (!scale_form) return constant;
        return constant * sd * std::pow(static_cast<double>(n), exponent);
    }
};

BandwidthSpec parse_bandwidth_spec(const std::string& text) {
    BandwidthSpec spec;
    const auto star = text.find("*sd*n^");
    if (star == std::string::npos) {
        try {
            size_t used = 0;
            spec.constant = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
            throw DataError("bad bandwidth '" + text + "': expected a number or c*sd*n^e");
        }
        if (spec.constant <= 0.0) throw DataError("bandwidth must be positive: " + text);
        return spec;
    }
    spec.scale_form = true;
    try {
        spec.constant = std::stod(text.substr(0, star));
        std::string exp = text.substr(star + 6);
        if (!exp.empty() && exp.front() == '(' && exp.back() == ')')
            exp = exp.substr(1, exp.size() - 2);
        const auto slash = exp.find('/');
        if (slash == std::string::npos) {
            spec.exponent = std::stod(exp);
        } else {
            spec.exponent = std::stod(exp.substr(0, slash)) / std::stod(exp.substr(slash + 1));
        }
    } catch (const std::exception&) {
        throw DataError("bad bandwidth '" + text + "': expected c*sd*n^e");
    }
    if (spec.constant <= 0.0) throw DataError("bandwidth constant must be positive: " + text);
    return spec;
}

double column_sd(const cate::Vector& v) {
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() /
                     static_cast<double>(v.size() - 1));
}

double root_mean_variance(const cate::RowMatrix& m) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        acc += (m.col(c).array() - mean).square().sum() / static_cast<double>(m.rows() - 1);
    }
    return std::sqrt(acc / static_cast<double>(m.cols()));
}

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

json plan_to_json(const cate::BandwidthPlan& plan) {
    json j{{"h", plan.h}, {"s", plan.s}, {"a", plan.a}, {"a1", plan.a1}, {"a2", plan.a2},
           {"delta_r", plan.delta_r}, {"delta1", plan.delta1}, {"delta2", plan.delta2}};
    if (plan.h1) j["h1"] = *plan.h1;
    if (plan.h2) j["h2"] = *plan.h2;
    if (plan.s1) j["s1"] = *plan.s1;
    if (plan.s2) j["s2"] = *plan.s2;
    return j;
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

struct SimulateArgs {
    std::string model = "M1";
    std::string scenario = "I";
    std::string group = "G1";
    int n = 500;
    int reps = 500;
    std::uint64_t seed = 0;
    std::string estimators = "OPNS";
    std::string output;
    std::string releff_output;
    int threads = 0;
    bool oracle_standardization = false;
    bool true_tau_centering = false;
};

cate::Model parse_model(const std::string& name) {
    if (name == "M1") return cate::Model::M1;
    if (name == "M2") return cate::Model::M2;
    if (name == "M3") return cate::Model::M3;
    if (name == "M4") return cate::Model::M4;
    if (name == "M5") return cate::Model::M5;
    if (name == "M6") return cate::Model::M6;
    throw DataError("unknown model: " + name);
}

int run_simulate(const SimulateArgs& args) {
    cate::DgpSpec spec;
    spec.model = parse_model(args.model);
    spec.scenario = args.scenario == "I" ? cate::Scenario::I : cate::Scenario::II;
    spec.group = args.group == "G1" ? cate::Group::G1 : cate::Group::G2;
    spec.n = args.n;
    spec.seed = args.seed;

    std::vector<cate::EstimatorKind> estimators;
    auto add = [&estimators](cate::EstimatorKind kind) {
        for (auto e : estimators)
            if (e == kind) return;
        estimators.push_back(kind);
    };
    for (char c : args.estimators) {
        switch (c) {
            case 'O': add(cate::EstimatorKind::O); break;
            case 'P': add(cate::EstimatorKind::P); break;
            case 'N': add(cate::EstimatorKind::N); break;
            case 'S': add(cate::EstimatorKind::S); break;
            default: throw DataError(std::string("unknown estimator letter: ") + c);
        }
    }

    cate::MonteCarloOptions opts;
    opts.threads = args.threads;
    if (args.oracle_standardization)
        opts.standardization = cate::Standardization::oracle_variance;
    if (args.true_tau_centering) opts.centering = cate::Centering::true_tau;

    auto report = cate::run_monte_carlo(spec, estimators, args.reps, opts);
    cate::io::write_text_file(args.output, cate::io::format_report_csv(report));
    if (!args.releff_output.empty())
        cate::io::write_text_file(args.releff_output,
                                  cate::io::format_relative_efficiency_csv(report));

    json meta{{"version", cate::kVersion},
              {"command", "simulate"},
              {"model", args.model},
              {"scenario", args.scenario},
              {"group", args.group},
              {"n", args.n},
              {"replications", args.reps},
              {"seed", args.seed},
              {"failures", report.failures},
              {"flagged", report.flagged},
              {"notes", report.notes},
              {"plan", plan_to_json(cate::plan_for_model(spec.model, spec.group, spec.n))}};
    cate::io::write_text_file(args.output + ".meta.json", meta.dump(2) + "\n");

    if (report.flagged)
        std::cerr << "warning: " << report.failures << " replications failed\n";
    return 0;
}

// ---------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------

struct EstimateArgs {
    std::string input;
    std::string output;
    std::string treatment = "d";
    std::string outcome = "y";
    std::string z_column;
    std::string covariates; // comma separated; empty: every other column
    std::string estimator = "S";
    int r = 0;
    std::string propensity_column;
    double alpha = 0.1;
    int grid_points = 50;
    std::optional<double> grid_min, grid_max;
    std::string h_spec, h1_spec, h2_spec;
    double trim_lo = 0.005, trim_hi = 0.995;
    std::string x_tilde; // active covariates for IPW-N (default: all)
};

int run_estimate(const EstimateArgs& args) {
    const auto table = cate::io::read_csv_table(args.input);
    const long n = table.values.rows();
    if (n < 3) throw DataError(args.input + ": need at least 3 data rows");

    auto require_column = [&](const std::string& name) {
        const int c = table.column(name);
        if (c < 0) throw DataError(args.input + ": no column named '" + name + "'");
        return c;
    };

    const int z_col = require_column(args.z_column);
    const int d_col = require_column(args.treatment);
    const int y_col = require_column(args.outcome);
    if (z_col == d_col || z_col == y_col || d_col == y_col)
        throw DataError("treatment, outcome and z columns must be distinct");

    std::vector<std::string> covariate_names;
    if (!args.covariates.empty()) {
        covariate_names = split_names(args.covariates);
    } else {
        for (const auto& name : table.header)
            if (name != args.treatment && name != args.outcome && name != args.z_column &&
                name != args.propensity_column)
                covariate_names.push_back(name);
    }
    // X = (Z, U): the conditioning covariate leads.
    std::vector<int> x_cols{z_col};
    for (const auto& name : covariate_names) {
        const int c = require_column(name);
        if (c != z_col) x_cols.push_back(c);
    }
    const int k = static_cast<int>(x_cols.size());

    cate::Dataset data;
    data.x.resize(n, k);
    for (int j = 0; j < k; ++j) data.x.col(j) = table.values.col(x_cols[static_cast<size_t>(j)]);
    data.d = table.values.col(d_col);
    data.y = table.values.col(y_col);
    data.z_dim = 1;
    for (long i = 0; i < n; ++i)
        if (data.d[i] != 0.0 && data.d[i] != 1.0)
            throw DataError(args.input + ": treatment column '" + args.treatment +
                            "' is not binary at row " + std::to_string(i + 2));

    const cate::TrimBounds trim{args.trim_lo, args.trim_hi};

    std::vector<int> xt_cols;
    if (args.estimator == "N") {
        const auto names = args.x_tilde.empty() ? std::vector<std::string>{}
                                                : split_names(args.x_tilde);
        if (names.empty()) {
            for (int j = 0; j < k; ++j) xt_cols.push_back(j);
        } else {
            for (const auto& name : names) {
                const int c = require_column(name);
                for (int j = 0; j < k; ++j)
                    if (x_cols[static_cast<size_t>(j)] == c) xt_cols.push_back(j);
            }
            if (xt_cols.empty()) throw DataError("x-tilde selects no covariate columns");
        }
    }
    if (args.estimator == "S" && args.r <= 0)
        throw DataError("--estimator S requires --r");

    // Default plan: Table-1 rates when the active dimension is covered,
    // otherwise the general formula.
    const int k_active = args.estimator == "N" ? static_cast<int>(xt_cols.size()) : k;
    const std::optional<int> kt_opt =
        args.estimator == "N" ? std::optional<int>(k_active) : std::nullopt;
    const bool table_mode_ok =
        !kt_opt || *kt_opt == 1 || *kt_opt == 2 || *kt_opt == 4;
    cate::BandwidthPlan plan = cate::plan_bandwidths(
        static_cast<int>(n), 1,
        args.r > 0 ? std::optional<int>(args.r) : std::optional<int>(1), kt_opt,
        cate::kGroup1,
        table_mode_ok ? cate::BandwidthMode::table : cate::BandwidthMode::formula);

    const double z_sd = column_sd(data.x.col(0));
    double h = plan.h;
    if (!args.h_spec.empty())
        h = parse_bandwidth_spec(args.h_spec).resolve(z_sd, static_cast<int>(n));

    // Evaluation grid: observed Z range with 5% of the range trimmed at
    // each end.
    const double z_lo = data.x.col(0).minCoeff();
    const double z_hi = data.x.col(0).maxCoeff();
    const double margin = 0.05 * (z_hi - z_lo);
    const double g_lo = args.grid_min.value_or(z_lo + margin);
    const double g_hi = args.grid_max.value_or(z_hi - margin);
    if (args.grid_points < 2) throw DataError("--grid-points must be >= 2");
    cate::RowMatrix grid(args.grid_points, 1);
    for (int g = 0; g < args.grid_points; ++g)
        grid(g, 0) = g_lo + (g_hi - g_lo) * g / (args.grid_points - 1.0);

    cate::PropensityFit fit;
    cate::OutcomeRegressions outcome_reg;
    bool have_reg = false;
    cate::VarianceForm form = cate::VarianceForm::psi_form;
    int affiliation_t = -1;
    json mave_meta;

    if (args.estimator == "O") {
        if (args.propensity_column.empty())
            throw DataError("--estimator O requires --propensity-col");
        cate::Vector p = table.values.col(require_column(args.propensity_column));
        for (long i = 0; i < n; ++i)
            if (p[i] <= 0.0 || p[i] >= 1.0)
                throw DataError("propensity column must lie strictly inside (0, 1)");
        fit = cate::oracle_fit(p, trim);
    } else if (args.estimator == "P") {
        fit = cate::fit_parametric(data.d, data.x, 100, 1e-8, trim);
    } else if (args.estimator == "N") {
        if (!plan.s1 || *plan.s1 > 6)
            throw DataError("IPW-N is infeasible here: required kernel order exceeds 6");
        cate::RowMatrix xt(n, k_active);
        for (int j = 0; j < k_active; ++j)
            xt.col(j) = data.x.col(xt_cols[static_cast<size_t>(j)]);
        double h1 = *plan.h1;
        if (!args.h1_spec.empty())
            h1 = parse_bandwidth_spec(args.h1_spec).resolve(root_mean_variance(xt),
                                                            static_cast<int>(n));
        cate::KernelSpec l_kernel{cate::KernelFamily::gaussian_derived, *plan.s1, k_active};
        fit = cate::fit_nonparametric(data.d, xt, l_kernel, h1, trim);
        // Affiliation on the indicator basis of the selected columns.
        cate::Matrix basis = cate::Matrix::Zero(k, k_active);
        for (int j = 0; j < k_active; ++j) basis(xt_cols[static_cast<size_t>(j)], j) = 1.0;
        auto aff = cate::affiliation_count(cate::ProjectionMatrix(basis), 1);
        affiliation_t = aff.t;
        form = cate::select_ci_form(cate::EstimatorKind::N, aff, 1);
        if (form == cate::VarianceForm::psi_star_form) {
            outcome_reg = cate::fit_outcome_regressions(data.y, data.d, xt, l_kernel, h1,
                                                        cate::OutcomeIndex::x_tilde);
            have_reg = true;
        }
        plan.h1 = h1;
    } else if (args.estimator == "S") {
        cate::KernelSpec h_kernel{cate::KernelFamily::gaussian_derived,
                                  plan.s2.value_or(2), args.r};
        double h2 = *plan.h2;
        auto mave = cate::mave_fit(data.d, data.x, args.r, h_kernel, h2);
        if (!args.h2_spec.empty()) {
            // Scale-form h2 references the spread of the estimated index, so
            // resolve it off a first pass and refit with the result.
            cate::RowMatrix index = data.x * mave.projection.matrix();
            h2 = parse_bandwidth_spec(args.h2_spec).resolve(root_mean_variance(index),
                                                            static_cast<int>(n));
            mave = cate::mave_fit(data.d, data.x, args.r, h_kernel, h2);
        }
        fit = cate::fit_semiparametric(data.d, data.x, mave.projection, h_kernel, h2, trim);
        auto aff = cate::affiliation_count(mave.projection, 1);
        affiliation_t = aff.t;
        form = cate::select_ci_form(cate::EstimatorKind::S, aff, 1);
        if (form == cate::VarianceForm::psi_star_form) {
            cate::RowMatrix index = data.x * mave.projection.matrix();
            outcome_reg = cate::fit_outcome_regressions(data.y, data.d, index, h_kernel, h2,
                                                        cate::OutcomeIndex::reduced_index);
            have_reg = true;
        }
        plan.h2 = h2;
        mave_meta = json{{"converged", mave.converged}, {"sweeps", mave.sweeps}};
    } else {
        throw DataError("unknown estimator: " + args.estimator);
    }

    cate::KernelSpec k_kernel{cate::KernelFamily::gaussian_derived, plan.s, 1};
    auto curve = cate::estimate_cate(data, fit, k_kernel, h, grid);
    cate::variance_hat(data, fit, have_reg ? &outcome_reg : nullptr, curve, form);
    cate::confidence_interval(curve, args.alpha);

    cate::io::write_text_file(args.output, cate::io::format_curve_csv(curve, affiliation_t));

    std::vector<int> unstable;
    for (size_t i = 0; i < curve.unstable.size(); ++i)
        if (curve.unstable[i]) unstable.push_back(static_cast<int>(i));
    json meta{{"version", cate::kVersion},
              {"command", "estimate"},
              {"input", args.input},
              {"n", n},
              {"k", k},
              {"estimator", args.estimator},
              {"alpha", args.alpha},
              {"trim", {{"lo", trim.lo}, {"hi", trim.hi}}},
              {"h", h},
              {"plan", plan_to_json(plan)},
              {"variance_form", form == cate::VarianceForm::psi_star_form ? "psi_star" : "psi"},
              {"affiliation_t", affiliation_t},
              {"unstable_grid_indices", unstable},
              {"separation", fit.separation},
              {"parametric_spec", "logistic with linear index and intercept"}};
    if (args.r > 0) meta["r"] = args.r;
    if (!mave_meta.is_null()) meta["mave"] = mave_meta;
    cate::io::write_text_file(args.output + ".meta.json", meta.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------

struct InspectArgs {
    int n = 500;
    int l = 1;
    int r = 0;
    int k_tilde = 0;
    std::string group = "G1";
    std::string mode = "table";
    int kernel_order = 0;
    int kernel_dim = 1;
    std::string output;
};

int run_inspect(const InspectArgs& args) {
    json out{{"version", cate::kVersion}};
    if (args.r > 0 || args.k_tilde > 0) {
        auto plan = cate::plan_bandwidths(
            args.n, args.l, args.r > 0 ? std::optional<int>(args.r) : std::nullopt,
            args.k_tilde > 0 ? std::optional<int>(args.k_tilde) : std::nullopt,
            args.group == "G1" ? cate::kGroup1 : cate::kGroup2,
            args.mode == "table" ? cate::BandwidthMode::table
                                 : cate::BandwidthMode::formula);
        out["plan"] = plan_to_json(plan);
    }
    if (args.kernel_order > 0) {
        cate::KernelSpec spec{cate::KernelFamily::gaussian_derived, args.kernel_order,
                              args.kernel_dim};
        json kernel{{"order", args.kernel_order},
                    {"dim", args.kernel_dim},
                    {"l2_norm_sq", cate::kernel_l2_norm_sq(spec)}};
        if (args.kernel_dim == 1) {
            json moments = json::array();
            cate::KernelSpec uni{cate::KernelFamily::gaussian_derived, args.kernel_order, 1};
            for (int p = 0; p <= args.kernel_order; ++p)
                moments.push_back(cate::kernel_moment(uni, p));
            kernel["moments"] = moments;
        }
        out["kernel"] = kernel;
    }
    const std::string text = out.dump(2) + "\n";
    if (args.output.empty())
        std::cout << text;
    else
        cate::io::write_text_file(args.output, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"IPW-based conditional average treatment effect estimation"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print help"); // frees -h for the --h bandwidth flag

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo study");
    simulate->set_help_flag("--help", "print help");
    simulate->add_option("--model", sim.model, "M1..M6")
        ->check(CLI::IsMember({"M1", "M2", "M3", "M4", "M5", "M6"}));
    simulate->add_option("--scenario", sim.scenario)->check(CLI::IsMember({"I", "II"}));
    simulate->add_option("--group", sim.group)->check(CLI::IsMember({"G1", "G2"}));
    simulate->add_option("--n", sim.n, "sample size")->check(CLI::PositiveNumber);
    simulate->add_option("--reps", sim.reps, "replications")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--estimators", sim.estimators, "subset of OPNS");
    simulate->add_option("--out", sim.output, "report CSV path")->required();
    simulate->add_option("--releff-out", sim.releff_output, "relative-efficiency CSV path");
    simulate->add_option("--threads", sim.threads, "0: CATE_THREADS env or hardware");
    simulate->add_flag("--oracle-standardization", sim.oracle_standardization,
                       "standardize tail statistics with IPW-O's variance");
    simulate->add_flag("--true-tau-centering", sim.true_tau_centering,
                       "center tail statistics at tau(z) instead of the replication mean");

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "estimate a CATE curve from CSV data");
    estimate->set_help_flag("--help", "print help");
    estimate->add_option("--input", est.input)->required();
    estimate->add_option("--out", est.output)->required();
    estimate->add_option("--treatment", est.treatment, "binary treatment column");
    estimate->add_option("--outcome", est.outcome, "outcome column");
    estimate->add_option("--z", est.z_column, "conditioning covariate column")->required();
    estimate->add_option("--covariates", est.covariates,
                         "comma-separated covariate columns (default: all others)");
    estimate->add_option("--estimator", est.estimator)->check(CLI::IsMember({"O", "P", "N", "S"}));
    estimate->add_option("--r", est.r, "reduced dimension for IPW-S");
    estimate->add_option("--propensity-col", est.propensity_column, "true scores for IPW-O");
    estimate->add_option("--alpha", est.alpha)->check(CLI::Range(1e-9, 0.999999));
    estimate->add_option("--grid-points", est.grid_points);
    estimate->add_option("--grid-min", est.grid_min);
    estimate->add_option("--grid-max", est.grid_max);
    estimate->add_option("--h", est.h_spec, "number or c*sd*n^e");
    estimate->add_option("--h1", est.h1_spec, "number or c*sd*n^e");
    estimate->add_option("--h2", est.h2_spec, "number or c*sd*n^e");
    estimate->add_option("--trim-lo", est.trim_lo);
    estimate->add_option("--trim-hi", est.trim_hi);
    estimate->add_option("--x-tilde", est.x_tilde,
                         "active propensity covariates for IPW-N (default: all)");

    InspectArgs ins;
    auto* inspect = app.add_subcommand("inspect", "print kernel and bandwidth-plan facts");
    inspect->set_help_flag("--help", "print help");
    inspect->add_option("--n", ins.n)->check(CLI::PositiveNumber);
    inspect->add_option("--l", ins.l)->check(CLI::PositiveNumber);
    inspect->add_option("--r", ins.r);
    inspect->add_option("--k-tilde", ins.k_tilde);
    inspect->add_option("--group", ins.group)->check(CLI::IsMember({"G1", "G2"}));
    inspect->add_option("--mode", ins.mode)->check(CLI::IsMember({"table", "formula"}));
    inspect->add_option("--kernel-order", ins.kernel_order);
    inspect->add_option("--kernel-dim", ins.kernel_dim);
    inspect->add_option("--out", ins.output);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (estimate->parsed()) return run_estimate(est);
        return run_inspect(ins);
    } catch (const cate::NonConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        const std::string what = e.what();
        // io-level problems are data errors; everything else is numerical.
        if (what.find("cannot open") != std::string::npos ||
            what.find("cannot write") != std::string::npos ||
            what.find("missing or non-numeric") != std::string::npos ||
            what.find("empty") != std::string::npos) {
            std::cerr << "error: " << what << '\n';
            return kExitData;
        }
        std::cerr << "error: " << what << '\n';
        return kExitNumeric;
    }
}
