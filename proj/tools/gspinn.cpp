#include "gspinn/config.hpp"
#include "gspinn/experiment.hpp"
#include "gspinn/problems.hpp"
#include "gspinn/quadrature.hpp"
#include "gspinn/symmetry.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

using namespace gspinn;

namespace {

enum Exit { ok = 0, failure = 1, symmetry_fail = 2, unknown_ref = 3, unsupported = 4, config_error = 5 };

struct Common {
    std::string config;
    long long seed = -1;
    std::string out;
    bool deterministic = false;
};

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? parse_config_text("{}") : parse_config(c.config);
    if (c.seed >= 0) {
        cfg.seed = std::uint64_t(c.seed);
        cfg.train.seed = cfg.seed;
    }
    if (!c.out.empty()) cfg.out = c.out;
    if (c.deterministic) cfg.deterministic = true;
    if (cfg.deterministic) Eigen::setNbThreads(1);
    return cfg;
}

int cmd_train(const Common& c) {
    const ExperimentConfig cfg = load(c);
    std::cout << "config " << config_hash(cfg) << ": " << cfg.problem << ", " << to_string(cfg.mode) << ", points ["
              << cfg.points[0] << "," << cfg.points[1] << "," << cfg.n_symmetry() << "], " << cfg.repeats << " seed(s)\n";
    const auto rows = run_experiment(cfg, std::cout);
    std::cout << kSummaryHeader << '\n';
    for (const auto& r : rows) std::cout << to_csv(r) << '\n';
    return rows.size() == std::size_t(cfg.repeats) ? ok : failure;
}

int cmd_eval(const Common& c, const std::string& params_path) {
    const ExperimentConfig cfg = load(c);
    const PdeProblem problem = build_problem(cfg);
    const MlpParams params = load_params(params_path, cfg.arch);
    std::cout << "mse " << fmt(evaluate_mse(params, problem)) << '\n';
    if (!c.out.empty()) {
        std::filesystem::create_directories(cfg.out);
        write_plot_slice(cfg.out + "/plot_slice.csv", params, problem, cfg.plot_t, plot_y(cfg, problem), cfg.plot_points);
        std::cout << "wrote " << cfg.out << "/plot_slice.csv\n";
    }
    return ok;
}

// "v2=1,v3=-1,v1=0:-1" -> v2 - v3 - y v1; "label=a:b" means multiplier a + b y.
Generator parse_combination(const PdeProblem& problem, const std::string& spec) {
    std::vector<CombinationTerm> terms;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        const std::string label = item.substr(0, eq);
        const Generator* g = problem.find_generator(label);
        if (g == nullptr) throw std::out_of_range("unknown generator '" + label + "' for problem " + problem.name);
        Multiplier m{1.0, 0.0};
        if (eq != std::string::npos) {
            const std::string value = item.substr(eq + 1);
            const auto colon = value.find(':');
            m.constant = std::stod(value.substr(0, colon));
            if (colon != std::string::npos) m.per_y = std::stod(value.substr(colon + 1));
        }
        terms.push_back({m, *g});
    }
    return linear_combination(terms, spec);
}

int cmd_verify(const std::string& problem_name, const std::string& label, const std::string& coefficients) {
    const PdeProblem problem = make_problem(problem_name);
    Generator gen;
    if (!coefficients.empty()) {
        try {
            gen = parse_combination(problem, coefficients);
        } catch (const std::out_of_range& e) {
            std::cerr << e.what() << '\n';
            return unknown_ref;
        }
    } else {
        const Generator* g = problem.find_generator(label);
        if (g == nullptr) {
            std::cerr << "unknown generator '" << label << "' for problem " << problem.name << '\n';
            return unknown_ref;
        }
        gen = *g;
    }
    const InvarianceReport r = check_green_invariance(gen, problem);
    std::printf("problem %s, generator %s\n", problem.name.c_str(), gen.label.c_str());
    std::printf("cond_tau        %.3e\n", r.cond_tau);
    std::printf("cond_phi_xi     %.3e\n", r.cond_phi_xi);
    std::printf("cond_xi_support %.3e\n", r.cond_xi_support);
    std::printf("%s (tolerance %.0e)\n", r.pass ? "PASS" : "FAIL", r.tolerance);
    return r.pass ? ok : symmetry_fail;
}

int cmd_solve(const std::string& problem_name) {
    const PdeProblem problem = make_problem(problem_name);
    const CoefficientQuery q = coefficient_query(problem);
    const CombinationSolution sol = solve_generator_combination(problem);
    std::printf("problem %s: %s", problem.name.c_str(), q.basis[0].label.c_str());
    for (std::size_t k = 0; k < q.free_indices.size(); ++k) {
        const Multiplier& m = sol.fitted[k];
        std::printf(" + (%.6g %+.6g*y) %s", m.constant, m.per_y, q.basis[q.free_indices[k]].label.c_str());
    }
    std::printf("\nresidual %.3e, affine fit residual %.3e\n", sol.residual, sol.fit_residual);
    std::printf("%s\n", sol.found ? "found" : "no invariant combination");
    return sol.found ? ok : symmetry_fail;
}

int cmd_compose(const std::string& problem_name, double t1, double t2, int nodes) {
    const PdeProblem problem = make_problem(problem_name);
    if (problem.kind != ProblemKind::heat) {
        std::cerr << "compose-check is unsupported for " << problem.name
                  << ": the integration window for the semigroup identity is unbounded\n";
        return unsupported;
    }
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw DomainError("compose-check requires t1 > 0 and t2 > 0");
    const GaussLegendre rule(nodes, -8.0, 8.0);
    const KernelFn k = [&](double t, double x, double y) { return problem.exact(t, x, y); };
    double worst = 0.0;
    for (double x : linspace(problem.box.x_lo, problem.box.x_hi, 9))
        for (double y : linspace(problem.box.x_lo, problem.box.x_hi, 9))
            worst = std::max(worst, std::abs(compose_kernel(k, t1, t2, x, y, rule) - problem.exact(t1 + t2, x, y)));
    std::printf("max |composed - exact| = %.3e over 9x9 grid (%d nodes)\n", worst, nodes);
    return worst <= 1e-5 ? ok : failure;
}

int cmd_cauchy(const std::string& problem_name, double s, double t, double x, int nodes) {
    const PdeProblem problem = make_problem(problem_name);
    if (problem.kind != ProblemKind::heat) {
        std::cerr << "cauchy-solve with a Gaussian datum is only available for heat\n";
        return unsupported;
    }
    if (!(s > 0.0)) throw DomainError("datum standard deviation must be > 0");
    auto normal = [](double z, double var) { return std::exp(-z * z / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var); };
    const GaussLegendre rule(nodes, -8.0, 8.0);
    const KernelFn k = [&](double tt, double xx, double yy) { return problem.exact(tt, xx, yy); };
    const double u = cauchy_solve(k, [&](double y) { return normal(y, s * s); }, t, x, rule);
    const double exact = normal(x, s * s + 2.0 * problem.diffusivity * t);
    std::printf("u(%g, %g) = %.12g, closed form %.12g, error %.3e\n", t, x, u, exact, std::abs(u - exact));
    return std::abs(u - exact) <= 1e-6 ? ok : failure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Green kernels of linear parabolic PDEs with symmetry-augmented PINNs"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "experiment config (JSON)");
        sub->add_option("--seed", common.seed, "override the base seed");
        sub->add_option("--out", common.out, "output directory");
        sub->add_flag("--deterministic", common.deterministic, "single-threaded, fixed reduction order");
    };

    auto* train = app.add_subcommand("train", "train PINN or GsPINN models and write summary.csv");
    add_common(train);

    auto* eval = app.add_subcommand("eval", "test MSE of a saved parameter file");
    add_common(eval);
    std::string params_path;
    eval->add_option("--params", params_path, "parameter file")->required();

    std::string problem = "heat";
    auto* verify = app.add_subcommand("verify-symmetry", "check the kernel invariance conditions for a generator");
    add_common(verify);
    std::string label = "invariant", coefficients;
    verify->add_option("--problem", problem, "heat or diffusion");
    verify->add_option("--generator", label, "catalog label, or 'invariant'");
    verify->add_option("--coefficients", coefficients, "combination, e.g. v2=1,v3=-1,v1=0:-1 (a:b = a + b*y)");

    auto* solve = app.add_subcommand("solve-coefficients", "solve for the invariant generator combination");
    add_common(solve);
    solve->add_option("--problem", problem, "heat or diffusion");

    auto* compose = app.add_subcommand("compose-check", "semigroup identity of the exact kernel by quadrature");
    add_common(compose);
    double t1 = 0.5, t2 = 0.5;
    int nodes = 400;
    compose->add_option("--problem", problem, "heat or diffusion");
    compose->add_option("--t1", t1);
    compose->add_option("--t2", t2);
    compose->add_option("--nodes", nodes, "Gauss-Legendre nodes");

    auto* cauchy = app.add_subcommand("cauchy-solve", "propagate a Gaussian datum N(0, s^2) with the exact kernel");
    add_common(cauchy);
    double s = 0.5, t = 0.5, x = 0.3;
    cauchy->add_option("--problem", problem, "heat");
    cauchy->add_option("--s", s, "datum standard deviation");
    cauchy->add_option("--t", t);
    cauchy->add_option("--x", x);
    cauchy->add_option("--nodes", nodes, "Gauss-Legendre nodes");

    CLI11_PARSE(app, argc, argv);
    try {
        if (problem != "heat" && problem != "diffusion") {
            std::cerr << "unknown problem '" << problem << "'\n";
            return unknown_ref;
        }
        if (*train) return cmd_train(common);
        if (*eval) return cmd_eval(common, params_path);
        if (*verify) return cmd_verify(problem, label, coefficients);
        if (*solve) return cmd_solve(problem);
        if (*compose) return cmd_compose(problem, t1, t2, nodes);
        if (*cauchy) return cmd_cauchy(problem, s, t, x, nodes);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}
