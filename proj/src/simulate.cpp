#include "cate/simulate.hpp"

#include "cate/propensity.hpp"
#include "cate/rng.hpp"
#include "cate/smoothing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace cate {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

const double kCritical = 1.645; // the tail critical values reported as P_{+-1.645}

Vector high_dim_v3() {
    Vector v = Vector::Zero(20);
    for (int i = 0; i < 5; ++i) v[i] = -1.0;
    for (int i = 10; i < 20; ++i) v[i] = 1.0;
    return v / std::sqrt(20.0);
}

Vector high_dim_alpha() {
    Vector v = Vector::Zero(20);
    for (int i = 1; i < 5; ++i) v[i] = -1.0;
    for (int i = 10; i < 20; ++i) v[i] = 1.0;
    return v / std::sqrt(19.0);
}

} // namespace

int model_k(Model model) {
    switch (model) {
        case Model::M1:
        case Model::M2: return 2;
        case Model::M3:
        case Model::M4: return 4;
        case Model::M5:
        case Model::M6: return 20;
    }
    return 0;
}

int model_r(Model model) {
    switch (model) {
        case Model::M1:
        case Model::M2:
        case Model::M3:
        case Model::M5: return 1;
        case Model::M4:
        case Model::M6: return 2;
    }
    return 0;
}

bool model_supports_ipwn(Model model) { return model_k(model) <= 4; }

ProjectionMatrix model_true_projection(Model model) {
    switch (model) {
        case Model::M1: {
            Matrix v(2, 1);
            v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
            return ProjectionMatrix(std::move(v));
        }
        case Model::M2: {
            Matrix v(2, 1);
            v << 0.0, 1.0;
            return ProjectionMatrix(std::move(v));
        }
        case Model::M3: {
            Matrix v = Matrix::Constant(4, 1, 0.5);
            return ProjectionMatrix(std::move(v));
        }
        case Model::M4: {
            Matrix v = Matrix::Zero(4, 2);
            v(0, 0) = 1.0;
            v(1, 1) = v(2, 1) = v(3, 1) = 1.0 / std::sqrt(3.0);
            return ProjectionMatrix(std::move(v));
        }
        case Model::M5: {
            Vector v3 = high_dim_v3();
            Matrix v = v3 / v3.norm();
            return ProjectionMatrix(std::move(v));
        }
        case Model::M6: {
            Matrix v = Matrix::Zero(20, 2);
            v(0, 0) = 1.0;
            Vector alpha = high_dim_alpha();
            v.col(1) = alpha / alpha.norm();
            return ProjectionMatrix(std::move(v));
        }
    }
    throw std::invalid_argument("model_true_projection: unknown model");
}

BandwidthConstants group_constants(Group group) {
    return group == Group::G1 ? kGroup1 : kGroup2;
}

const char* model_name(Model model) {
    switch (model) {
        case Model::M1: return "M1";
        case Model::M2: return "M2";
        case Model::M3: return "M3";
        case Model::M4: return "M4";
        case Model::M5: return "M5";
        case Model::M6: return "M6";
    }
    return "?";
}

const char* scenario_name(Scenario scenario) {
    return scenario == Scenario::I ? "I" : "II";
}

const char* group_name(Group group) { return group == Group::G1 ? "G1" : "G2"; }

Dataset generate(const DgpSpec& spec) {
    const int k = model_k(spec.model);
    if (spec.k != 0 && spec.k != k)
        throw std::invalid_argument("generate: k is inconsistent with the model");
    if (spec.n < 1) throw std::invalid_argument("generate: n must be >= 1");

    Rng rng(derive_seed(spec.seed, 0x6473ULL));
    const int n = spec.n;

    Dataset data;
    data.x.resize(n, k);
    data.d.resize(n);
    data.y.resize(n);
    data.z_dim = 1;
    data.true_propensity.resize(n);
    data.y1.resize(n);
    data.y0 = Vector::Zero(n);

    const Vector v3 = high_dim_v3();
    const Vector alpha = high_dim_alpha();

    // Per observation the draw order is fixed: covariate noises in index
    // order, then the outcome noise nu, then the treatment uniform.
    for (int i = 0; i < n; ++i) {
        double p = 0.0;
        double mean1 = 0.0;
        switch (spec.model) {
            case Model::M1:
            case Model::M2: {
                const double z = rng.uniform(-0.5, 0.5);
                const double eps2 = rng.uniform(-0.5, 0.5);
                const double u1 = (1.0 + 2.0 * z) * (1.0 + 2.0 * z) * (z - 1.0) * (z - 1.0) + eps2;
                data.x(i, 0) = z;
                data.x(i, 1) = u1;
                p = spec.model == Model::M1 ? logistic((z + u1) / std::sqrt(2.0))
                                            : logistic(u1);
                mean1 = spec.scenario == Scenario::I ? z * u1 : 0.5 * z - 0.2 * u1;
                break;
            }
            case Model::M3:
            case Model::M4: {
                const double eps1 = rng.uniform(-0.5, 0.5);
                const double eps2 = rng.uniform(-0.5, 0.5);
                const double eps3 = rng.uniform(-0.5, 0.5);
                const double z = eps1;
                const double u1 = 1.0 + 2.0 * z + eps1; // shares eps1 with Z, as displayed
                const double u2 = 1.0 + 2.0 * z + eps2;
                const double u3 = (z - 1.0) * (z - 1.0) + eps3;
                data.x(i, 0) = z;
                data.x(i, 1) = u1;
                data.x(i, 2) = u2;
                data.x(i, 3) = u3;
                if (spec.model == Model::M3) {
                    p = logistic(0.5 * (z + u1 + u2 + u3));
                } else {
                    p = logistic(std::sqrt(3.0) * (1.0 + z) /
                                 (std::sqrt(3.0) + u1 + u2 + u3));
                }
                mean1 = spec.scenario == Scenario::I
                            ? 0.1 * z + u1 / std::sqrt(2.0) - u2 / std::sqrt(2.0) - 0.1 * u3
                            : z * u1 * u2 * u3;
                break;
            }
            case Model::M5:
            case Model::M6: {
                const double z = rng.uniform(-0.5, 0.5);
                data.x(i, 0) = z;
                for (int j = 1; j <= 3; ++j) {
                    const double e = rng.uniform(-0.5, 0.5);
                    data.x(i, j) = j <= 2 ? 1.0 + 2.0 * z + e
                                          : (z - 1.0) * (z - 1.0) + e;
                }
                for (int j = 4; j <= 19; ++j) {
                    const double eps = rng.uniform(-0.5, 0.5);
                    const double cz = j <= 9 ? 11.0 - j : 21.0 - j;
                    data.x(i, j) = std::abs(1.0 + z / cz) - std::abs(1.0 + eps / j);
                }
                if (spec.model == Model::M5) {
                    p = logistic(1.0 + v3.dot(data.x.row(i)));
                } else {
                    p = logistic((1.0 + alpha.dot(data.x.row(i))) / (1.0 + z));
                }
                // Nonlinear outcome only in the high-dimensional study.
                mean1 = z * data.x(i, 1) * data.x(i, 2) * data.x(i, 3);
                break;
            }
        }
        const double nu = 0.25 * rng.normal();
        data.y1[i] = mean1 + nu;
        data.true_propensity[i] = p;
        data.d[i] = rng.uniform() < p ? 1.0 : 0.0;
        data.y[i] = data.d[i] * data.y1[i];
    }
    return data;
}

double true_cate(Model model, Scenario scenario, double z) {
    if (z < -0.5 || z > 0.5)
        throw std::invalid_argument("true_cate: z outside the support [-0.5, 0.5]");
    const double q = (1.0 + 2.0 * z) * (1.0 + 2.0 * z) * (z - 1.0) * (z - 1.0);
    switch (model) {
        case Model::M1:
        case Model::M2:
            return scenario == Scenario::I ? z * q : 0.5 * z - 0.2 * q;
        case Model::M3:
        case Model::M4: {
            if (scenario == Scenario::I)
                return 0.1 * z + z / std::sqrt(2.0) - 0.1 * (z - 1.0) * (z - 1.0);
            return z * (1.0 + 3.0 * z) * (1.0 + 2.0 * z) * (z - 1.0) * (z - 1.0);
        }
        case Model::M5:
        case Model::M6:
            return z * (1.0 + 2.0 * z) * (1.0 + 2.0 * z) * (z - 1.0) * (z - 1.0);
    }
    throw std::invalid_argument("true_cate: unknown model");
}

BandwidthPlan plan_for_model(Model model, Group group, int n) {
    const int k = model_k(model);
    const int r = model_r(model);
    const std::optional<int> k_tilde =
        model_supports_ipwn(model) ? std::optional<int>(k) : std::nullopt;
    return plan_bandwidths(n, 1, r, k_tilde, group_constants(group));
}

namespace {

struct RepOutcome {
    bool ok = false;
    Matrix tau;       // estimator x grid
    Matrix sigma_big; // estimator x grid
};

int resolve_threads(int requested, int replications) {
    int threads = requested;
    if (threads <= 0) {
        if (const char* env = std::getenv("CATE_THREADS")) threads = std::atoi(env);
    }
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
    return std::min(threads, std::max(1, replications));
}

} // namespace

SimulationReport run_monte_carlo(const DgpSpec& spec,
                                 std::vector<EstimatorKind> estimators,
                                 int replications, MonteCarloOptions opts) {
    if (replications < 2)
        throw std::invalid_argument("run_monte_carlo: need at least 2 replications");
    if (estimators.empty())
        throw std::invalid_argument("run_monte_carlo: no estimators requested");

    SimulationReport report;
    report.spec = spec;
    report.grid = {-0.4, -0.2, 0.0, 0.2, 0.4};
    report.replications = replications;

    if (!model_supports_ipwn(spec.model)) {
        auto it = std::find(estimators.begin(), estimators.end(), EstimatorKind::N);
        if (it != estimators.end()) {
            estimators.erase(it);
            report.notes.push_back("IPW-N skipped: infeasible at k = 20");
        }
    }
    if (estimators.empty())
        throw std::invalid_argument("run_monte_carlo: no feasible estimators for this model");
    report.estimators = estimators;
    report.notes.push_back("IPW-P specification: logistic with linear index and intercept");

    const bool oracle_standardization = opts.standardization == Standardization::oracle_variance;
    const bool have_oracle =
        std::find(estimators.begin(), estimators.end(), EstimatorKind::O) != estimators.end();
    if (oracle_standardization && !have_oracle)
        throw std::invalid_argument("run_monte_carlo: oracle standardization requires IPW-O");

    const int n_est = static_cast<int>(estimators.size());
    const int n_grid = static_cast<int>(report.grid.size());
    const int k = model_k(spec.model);
    const int r = model_r(spec.model);

    const BandwidthPlan plan = plan_for_model(spec.model, spec.group, spec.n);
    const KernelSpec k_kernel{KernelFamily::gaussian_derived, plan.s, 1};
    const KernelSpec l_kernel{KernelFamily::gaussian_derived, plan.s1.value_or(2), k};
    const KernelSpec h_kernel{KernelFamily::gaussian_derived, plan.s2.value_or(2), r};

    RowMatrix grid(n_grid, 1);
    for (int g = 0; g < n_grid; ++g) grid(g, 0) = report.grid[static_cast<size_t>(g)];

    Vector tau_true(n_grid);
    for (int g = 0; g < n_grid; ++g)
        tau_true[g] = true_cate(spec.model, spec.scenario, report.grid[static_cast<size_t>(g)]);

    std::vector<RepOutcome> outcomes(static_cast<size_t>(replications));

    auto run_rep = [&](int rep) {
        RepOutcome& out = outcomes[static_cast<size_t>(rep)];
        out.tau.resize(n_est, n_grid);
        out.sigma_big.resize(n_est, n_grid);
        DgpSpec rep_spec = spec;
        rep_spec.seed = derive_seed(spec.seed,
                                    opts.identical_replication_seeds ? 0 : rep);
        const Dataset data = generate(rep_spec);

        for (int e = 0; e < n_est; ++e) {
            PropensityFit fit;
            OutcomeRegressions outcome_reg;
            bool have_reg = false;
            VarianceForm form = VarianceForm::psi_form;

            switch (estimators[static_cast<size_t>(e)]) {
                case EstimatorKind::O:
                    fit = oracle_fit(data.true_propensity);
                    break;
                case EstimatorKind::P:
                    fit = fit_parametric(data.d, data.x);
                    break;
                case EstimatorKind::N: {
                    fit = fit_nonparametric(data.d, data.x, l_kernel, *plan.h1);
                    // X_tilde = X contains Z, so t = l and the star form applies.
                    auto basis = ProjectionMatrix(Matrix::Identity(k, k));
                    form = select_ci_form(EstimatorKind::N,
                                          affiliation_count(basis, data.z_dim), data.z_dim);
                    if (form == VarianceForm::psi_star_form) {
                        outcome_reg = fit_outcome_regressions(data.y, data.d, data.x,
                                                              l_kernel, *plan.h1,
                                                              OutcomeIndex::x_tilde);
                        have_reg = true;
                    }
                    break;
                }
                case EstimatorKind::S: {
                    // The directions carry O(n^{-1/2}) sampling error, so a
                    // 1e-4 subspace tolerance is already far below it.
                    MaveOptions mave_opts;
                    mave_opts.tol = 1e-4;
                    mave_opts.track_objective = false;
                    auto mave = mave_fit(data.d, data.x, r, h_kernel, *plan.h2, mave_opts);
                    fit = fit_semiparametric(data.d, data.x, mave.projection, h_kernel,
                                             *plan.h2);
                    form = select_ci_form(EstimatorKind::S,
                                          affiliation_count(mave.projection, data.z_dim),
                                          data.z_dim);
                    if (form == VarianceForm::psi_star_form) {
                        RowMatrix reduced = data.x * mave.projection.matrix();
                        outcome_reg = fit_outcome_regressions(data.y, data.d, reduced,
                                                              h_kernel, *plan.h2,
                                                              OutcomeIndex::reduced_index);
                        have_reg = true;
                    }
                    break;
                }
            }

            CateCurve curve = estimate_cate(data, fit, k_kernel, plan.h, grid);
            variance_hat(data, fit, have_reg ? &outcome_reg : nullptr, curve, form);
            for (int g = 0; g < n_grid; ++g) {
                out.tau(e, g) = curve.tau_hat[g];
                out.sigma_big(e, g) = curve.sigma_big(g);
            }
        }
        out.ok = true;
    };

    const int threads = resolve_threads(opts.threads, replications);
    if (threads == 1) {
        for (int rep = 0; rep < replications; ++rep) {
            try {
                run_rep(rep);
            } catch (const std::exception&) {
                outcomes[static_cast<size_t>(rep)].ok = false;
            }
        }
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                const int rep = next.fetch_add(1);
                if (rep >= replications) return;
                try {
                    run_rep(rep);
                } catch (const std::exception&) {
                    outcomes[static_cast<size_t>(rep)].ok = false;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Aggregation walks the replications in index order, so the report is
    // identical no matter how they were scheduled.
    int oracle_index = -1;
    for (int e = 0; e < n_est; ++e)
        if (estimators[static_cast<size_t>(e)] == EstimatorKind::O) oracle_index = e;

    const double cover_crit = normal_quantile(0.95);
    const double sqrt_nh = std::sqrt(static_cast<double>(spec.n) * plan.h); // l = 1

    report.cells.assign(static_cast<size_t>(n_est),
                        std::vector<CellStats>(static_cast<size_t>(n_grid)));
    int successes = 0;
    for (const auto& out : outcomes)
        if (out.ok) ++successes;
    report.failures = replications - successes;
    report.flagged = report.failures > replications / 100;
    if (successes < 2)
        throw std::runtime_error("run_monte_carlo: fewer than 2 replications succeeded");

    for (int e = 0; e < n_est; ++e) {
        for (int g = 0; g < n_grid; ++g) {
            double mean = 0.0;
            for (const auto& out : outcomes)
                if (out.ok) mean += out.tau(e, g);
            mean /= successes;

            const double center =
                opts.centering == Centering::replication_mean ? mean : tau_true[g];
            double ss = 0.0, mse = 0.0, lo = 0.0, hi = 0.0, cover = 0.0;
            for (const auto& out : outcomes) {
                if (!out.ok) continue;
                const double tau = out.tau(e, g);
                ss += (tau - mean) * (tau - mean);
                mse += (tau - tau_true[g]) * (tau - tau_true[g]);
                const double sigma =
                    oracle_standardization ? out.sigma_big(oracle_index, g)
                                           : out.sigma_big(e, g);
                const double stat =
                    sqrt_nh * (tau - center) / std::sqrt(std::max(sigma, 1e-300));
                if (stat < -kCritical) lo += 1.0;
                if (stat > kCritical) hi += 1.0;
                if (std::abs(stat) <= cover_crit) cover += 1.0;
            }
            CellStats& cell = report.cells[static_cast<size_t>(e)][static_cast<size_t>(g)];
            cell.bias = mean - tau_true[g];
            cell.est_sd = std::sqrt(ss / (successes - 1));
            cell.mse = mse / successes;
            cell.p_lo = lo / successes;
            cell.p_hi = hi / successes;
            cell.cover_90 = cover / successes;
        }
    }

    if (oracle_index >= 0) {
        report.relative_efficiency.assign(static_cast<size_t>(n_est),
                                          std::vector<double>(static_cast<size_t>(n_grid)));
        for (int e = 0; e < n_est; ++e)
            for (int g = 0; g < n_grid; ++g)
                report.relative_efficiency[static_cast<size_t>(e)][static_cast<size_t>(g)] =
                    report.cells[static_cast<size_t>(e)][static_cast<size_t>(g)].est_sd /
                    report.cells[static_cast<size_t>(oracle_index)][static_cast<size_t>(g)].est_sd;
    }
    return report;
}

} // namespace cate
