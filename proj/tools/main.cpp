#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "peretd/experiments.hpp"
#include "peretd/io.hpp"

namespace {

using namespace peretd;

constexpr const char* kVersion = "peretd 1.0.0";

/// One layer of configuration: every field optional so file values and flag
/// values can be merged with flag precedence.
struct OptionSet {
    std::optional<std::string> mdp_preset;
    std::optional<double> target_solid;
    std::optional<double> behavior_solid;
    std::optional<std::string> mdp_file;
    std::optional<std::string> target_file;
    std::optional<std::string> behavior_file;
    std::optional<std::string> features_preset;
    std::optional<std::string> features_file;
    std::optional<std::string> algo_name;
    std::optional<int> b;
    std::optional<double> lambda;
    std::optional<std::string> schedule;
    std::optional<double> eta;
    std::optional<double> mu;
    std::optional<double> t0;
    std::optional<std::string> projection;
    std::optional<double> radius;
    std::optional<long> iterations;
    std::optional<long> transition_budget;
    std::optional<int> seeds;
    std::optional<std::uint64_t> base_seed;
    std::optional<long> stride;
    std::optional<std::string> metric;
    std::optional<std::string> reference;
    std::optional<int> jobs;
};

/// Mutable experiment draft: schedule and projection pieces stay symbolic
/// until both configuration layers have been merged.
struct Draft {
    ExperimentConfig cfg;
    std::string schedule = "constant";
    double eta = 0.001953125;
    std::optional<double> mu;
    std::optional<double> t0;
    std::string projection = "none";
    std::optional<double> radius;
    bool b_explicit = false;
    bool lambda_explicit = false;
};

/// Registers the [mdp]/[features]/[algo]/[experiment] config-file sections as
/// silent holder subcommands so INI keys bind while staying off the command
/// line.
void add_config_sections(CLI::App* cmd, OptionSet& vals) {
    CLI::App* mdp = cmd->add_subcommand("mdp")->disabled()->silent()->group("");
    mdp->add_option("--preset", vals.mdp_preset);
    mdp->add_option("--target_solid", vals.target_solid);
    mdp->add_option("--behavior_solid", vals.behavior_solid);
    mdp->add_option("--file", vals.mdp_file);
    mdp->add_option("--target_file", vals.target_file);
    mdp->add_option("--behavior_file", vals.behavior_file);

    CLI::App* features = cmd->add_subcommand("features")->disabled()->silent()->group("");
    features->add_option("--preset", vals.features_preset);
    features->add_option("--file", vals.features_file);

    CLI::App* algo = cmd->add_subcommand("algo")->disabled()->silent()->group("");
    algo->add_option("--name", vals.algo_name);
    algo->add_option("--b", vals.b);
    algo->add_option("--lambda", vals.lambda);
    algo->add_option("--schedule", vals.schedule);
    algo->add_option("--eta", vals.eta);
    algo->add_option("--mu", vals.mu);
    algo->add_option("--t0", vals.t0);
    algo->add_option("--projection", vals.projection);
    algo->add_option("--radius", vals.radius);

    CLI::App* experiment = cmd->add_subcommand("experiment")->disabled()->silent()->group("");
    experiment->add_option("--T", vals.iterations);
    experiment->add_option("--transition_budget", vals.transition_budget);
    experiment->add_option("--seeds", vals.seeds);
    experiment->add_option("--base_seed", vals.base_seed);
    experiment->add_option("--stride", vals.stride);
    experiment->add_option("--metric", vals.metric);
    experiment->add_option("--reference", vals.reference);
    experiment->add_option("--jobs", vals.jobs);
}

/// Registers the command-line spellings of the same knobs. Marked
/// non-configurable so config files must use the documented sections.
void add_flags(CLI::App* cmd, OptionSet& vals) {
    cmd->add_option("--preset", vals.mdp_preset, "MDP preset: baird or file")
        ->configurable(false);
    cmd->add_option("--target-solid", vals.target_solid, "Target policy solid probability")
        ->configurable(false);
    cmd->add_option("--behavior-solid", vals.behavior_solid,
                    "Behavior policy solid probability")
        ->configurable(false);
    cmd->add_option("--mdp-file", vals.mdp_file, "MDP file for preset = file")
        ->configurable(false);
    cmd->add_option("--target-file", vals.target_file, "Target policy file")
        ->configurable(false);
    cmd->add_option("--behavior-file", vals.behavior_file, "Behavior policy file")
        ->configurable(false);
    cmd->add_option("--features", vals.features_preset,
                    "Feature preset: phi1, phi2, phi3, tabular, file")
        ->configurable(false);
    cmd->add_option("--features-file", vals.features_file, "Feature CSV for preset = file")
        ->configurable(false);
    cmd->add_option("--algo", vals.algo_name,
                    "Algorithm: td0, etd0, etd-lambda, per-etd0, per-etd-lambda")
        ->configurable(false);
    cmd->add_option("--b", vals.b, "Trace updates per restart period")->configurable(false);
    cmd->add_option("--lambda", vals.lambda, "Bootstrapping parameter in [0, 1]")
        ->configurable(false);
    cmd->add_option("--schedule", vals.schedule, "Stepsize schedule: constant or diminishing")
        ->configurable(false);
    cmd->add_option("--eta", vals.eta, "Constant stepsize")->configurable(false);
    cmd->add_option("--mu", vals.mu, "Diminishing-schedule monotonicity constant")
        ->configurable(false);
    cmd->add_option("--t0", vals.t0, "Diminishing-schedule offset")->configurable(false);
    cmd->add_option("--projection", vals.projection, "Projection: none, theory, radius")
        ->configurable(false);
    cmd->add_option("--radius", vals.radius, "Projection-ball radius")->configurable(false);
    cmd->add_option("--T", vals.iterations, "Outer iterations")->configurable(false);
    cmd->add_option("--transition-budget", vals.transition_budget,
                    "Total transitions; overrides --T via T = budget / (b + 1)")
        ->configurable(false);
    cmd->add_option("--seeds", vals.seeds, "Number of trials")->configurable(false);
    cmd->add_option("--base-seed", vals.base_seed, "Seed of trial k is base-seed + k")
        ->configurable(false);
    cmd->add_option("--stride", vals.stride, "Snapshot every stride iterations")
        ->configurable(false);
    cmd->add_option("--metric", vals.metric, "Error metric: value-l2, value-rms, param-l2")
        ->configurable(false);
    cmd->add_option("--reference", vals.reference,
                    "Reference: ground-truth, fixed-point, fixed-point-lambda, finite-b")
        ->configurable(false);
    cmd->add_option("--jobs", vals.jobs, "Concurrent trial workers")->configurable(false);
}

void apply_option_set(const OptionSet& vals, Draft& draft) {
    ExperimentConfig& cfg = draft.cfg;
    if (vals.mdp_preset) cfg.mdp_preset = *vals.mdp_preset;
    if (vals.target_solid) cfg.target_solid = *vals.target_solid;
    if (vals.behavior_solid) cfg.behavior_solid = *vals.behavior_solid;
    if (vals.mdp_file) cfg.mdp_file = *vals.mdp_file;
    if (vals.target_file) cfg.target_file = *vals.target_file;
    if (vals.behavior_file) cfg.behavior_file = *vals.behavior_file;
    if (vals.features_preset) cfg.feature_preset = *vals.features_preset;
    if (vals.features_file) cfg.feature_file = *vals.features_file;
    if (vals.algo_name) cfg.algo.algo = algorithm_from_string(*vals.algo_name);
    if (vals.b) {
        cfg.algo.b = *vals.b;
        draft.b_explicit = true;
    }
    if (vals.lambda) {
        cfg.algo.lambda = *vals.lambda;
        draft.lambda_explicit = true;
    }
    if (vals.schedule) draft.schedule = *vals.schedule;
    if (vals.eta) draft.eta = *vals.eta;
    if (vals.mu) draft.mu = *vals.mu;
    if (vals.t0) draft.t0 = *vals.t0;
    if (vals.projection) draft.projection = *vals.projection;
    if (vals.radius) draft.radius = *vals.radius;
    if (vals.iterations) cfg.T = *vals.iterations;
    if (vals.transition_budget) cfg.transition_budget = *vals.transition_budget;
    if (vals.seeds) cfg.n_seeds = *vals.seeds;
    if (vals.base_seed) cfg.base_seed = *vals.base_seed;
    if (vals.stride) cfg.stride = *vals.stride;
    if (vals.metric) cfg.metric = metric_from_string(*vals.metric);
    if (vals.reference) cfg.reference = reference_from_string(*vals.reference);
    if (vals.jobs) cfg.jobs = *vals.jobs;
}

/// Resolves the symbolic schedule/projection pieces into the config.
void finalize_draft(Draft& draft) {
    if (draft.schedule == "constant") {
        draft.cfg.schedule = StepsizeSchedule::constant(draft.eta);
    } else if (draft.schedule == "diminishing") {
        if (!draft.mu || !draft.t0) {
            throw std::invalid_argument(
                "algo.schedule = diminishing requires algo.mu and algo.t0");
        }
        draft.cfg.schedule = StepsizeSchedule::diminishing(*draft.mu, *draft.t0);
    } else {
        throw std::invalid_argument("algo.schedule must be \"constant\" or \"diminishing\", "
                                    "got \"" + draft.schedule + "\"");
    }
    if (draft.projection == "none") {
        draft.cfg.projection = ProjectionMode::None;
    } else if (draft.projection == "theory") {
        draft.cfg.projection = ProjectionMode::Theory;
    } else if (draft.projection == "radius") {
        draft.cfg.projection = ProjectionMode::Radius;
        if (!draft.radius) {
            throw std::invalid_argument("algo.projection = radius requires algo.radius");
        }
        draft.cfg.projection_radius = *draft.radius;
    } else {
        throw std::invalid_argument("algo.projection must be \"none\", \"theory\", or "
                                    "\"radius\", got \"" + draft.projection + "\"");
    }
}

/// Multi-group plan a figure preset expands to.
struct Plan {
    std::vector<AlgoConfig> run_groups;
    std::vector<int> b_values{4, 6, 8, 12, 16, 20};
    std::vector<double> lambda_values{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> rho_values;
    std::string vary = "target";
    bool auto_stride = false;
};

void apply_figure(const std::string& figure, const std::string& subcommand, Draft& draft,
                  Plan& plan) {
    ExperimentConfig& cfg = draft.cfg;
    cfg.mdp_preset = "baird";
    cfg.target_solid = 0.9;
    cfg.behavior_solid = 1.0 / 7.0;
    cfg.n_seeds = 20;
    draft.schedule = "constant";
    draft.eta = 0.001953125;
    draft.projection = "none";
    cfg.metric = Metric::ValueL2;
    cfg.reference = ReferenceKind::GroundTruth;

    const auto expect = [&](const char* wanted) {
        if (subcommand != wanted) {
            throw std::invalid_argument("--figure " + figure + " belongs to the " +
                                        std::string(wanted) + " subcommand");
        }
    };

    if (figure == "1a") {
        expect("run");
        cfg.feature_preset = "phi1";
        cfg.transition_budget = 200000;
        plan.run_groups = {AlgoConfig{Algorithm::Td0, 1, 0.0},
                           AlgoConfig{Algorithm::Etd0, 1, 0.0},
                           AlgoConfig{Algorithm::PerEtd0, 2, 0.0},
                           AlgoConfig{Algorithm::PerEtd0, 4, 0.0},
                           AlgoConfig{Algorithm::PerEtd0, 8, 0.0}};
        plan.auto_stride = true;
    } else if (figure == "1b") {
        expect("sweep-b");
        cfg.feature_preset = "phi1";
        cfg.algo = AlgoConfig{Algorithm::PerEtd0, 8, 0.0};
        cfg.T = 50000;
        plan.b_values = {4, 6, 8, 12, 16, 20};
    } else if (figure == "2" || figure == "3") {
        expect("sweep-lambda");
        cfg.feature_preset = "phi3";
        cfg.algo = AlgoConfig{Algorithm::PerEtdLambda, 4, 0.0};
        cfg.T = 50000;
        plan.lambda_values.clear();
        const int steps = figure == "2" ? 5 : 10;
        for (int i = 0; i <= steps; ++i) {
            plan.lambda_values.push_back(static_cast<double>(i) / steps);
        }
    } else if (figure == "5" || figure == "6" || figure == "7") {
        expect("sweep-rho");
        cfg.feature_preset = "phi1";
        cfg.algo = AlgoConfig{Algorithm::PerEtd0, 8, 0.0};
        cfg.T = 50000;
        cfg.stride = 500;
        if (figure == "5") {
            plan.vary = "target";
            plan.rho_values = {0.167, 0.8};
        } else if (figure == "6") {
            plan.vary = "target";
            plan.rho_values = {0.167, 0.2, 0.4, 0.6, 0.8};
        } else {
            plan.vary = "behavior";
            plan.rho_values = {0.2, 0.4, 0.6, 0.7, 0.8};
        }
    } else {
        throw std::invalid_argument("unknown figure \"" + figure +
                                    "\"; known: 1a, 1b, 2, 3, 5, 6, 7");
    }
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::invalid_argument("cannot open output file: " + path);
    }
    return out;
}

std::string join_theta(const Eigen::VectorXd& theta) {
    std::string text;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (i > 0) {
            text += ' ';
        }
        text += fmt_double(theta(i));
    }
    return text;
}

int cmd_fixed_point(const Draft& draft, const std::string& out_path) {
    const ExperimentConfig& cfg = draft.cfg;
    validate_config(cfg);
    const Problem problem = build_problem(cfg);
    const double lambda = cfg.algo.lambda;

    FixedPointResult fp;
    if (draft.b_explicit) {
        fp = finite_b_fixed_point(problem.features, problem.d_mu, problem.target_chain.p_pi,
                                  problem.target_chain.r_pi, problem.mdp.gamma, lambda,
                                  cfg.algo.b);
    } else {
        const Eigen::VectorXd f =
            emphatic_f(problem.d_mu, problem.target_chain.p_pi, problem.mdp.gamma);
        fp = etd_lambda_fixed_point(problem.features, f, problem.d_mu,
                                    problem.target_chain.p_pi, problem.target_chain.r_pi,
                                    problem.mdp.gamma, lambda);
    }
    const TheoryConstants tc =
        theory_constants(fp.model, problem.features, fp.theta, problem.v_pi);

    std::cout << "theta_star = " << join_theta(fp.theta) << '\n'
              << "condition = " << fmt_double(fp.condition) << '\n'
              << "mu = " << fmt_double(tc.mu) << '\n'
              << "L = " << fmt_double(tc.lip) << '\n'
              << "t0 = " << fmt_double(tc.t0) << '\n'
              << "eps_approx = " << fmt_double(tc.eps_approx) << '\n';

    if (!out_path.empty()) {
        std::ofstream out = open_output(out_path);
        out << "lambda,b,condition,mu,lip,t0,eps_approx";
        for (Eigen::Index i = 0; i < fp.theta.size(); ++i) {
            out << ",theta_" << i;
        }
        out << '\n'
            << fmt_double(lambda) << ','
            << (draft.b_explicit ? std::to_string(cfg.algo.b) : std::string("limit")) << ','
            << fmt_double(fp.condition) << ',' << fmt_double(tc.mu) << ','
            << fmt_double(tc.lip) << ',' << fmt_double(tc.t0) << ','
            << fmt_double(tc.eps_approx);
        for (Eigen::Index i = 0; i < fp.theta.size(); ++i) {
            out << ',' << fmt_double(fp.theta(i));
        }
        out << '\n';
    }
    return 0;
}

int cmd_run(const Draft& draft, const Plan& plan, const std::string& out_path) {
    std::vector<AlgoConfig> groups = plan.run_groups;
    if (groups.empty()) {
        groups.push_back(draft.cfg.algo);
    }

    std::vector<CurveRow> rows;
    long total_trials = 0;
    long total_diverged = 0;
    for (const AlgoConfig& group : groups) {
        ExperimentConfig cfg = draft.cfg;
        cfg.algo = group;
        if (plan.auto_stride) {
            cfg.stride = std::max<long>(1, effective_outer_iterations(cfg) / 200);
        }
        validate_config(cfg);
        const Problem problem = build_problem(cfg);
        const ReferenceValues ref = resolve_reference(cfg, problem);
        const std::vector<RunRecord> records = run_trials(cfg, problem, ref);
        const bool periodic =
            group.algo == Algorithm::PerEtd0 || group.algo == Algorithm::PerEtdLambda;
        const std::vector<CurveRow> group_rows =
            curve_rows(std::string(algorithm_name(group.algo)), periodic ? group.b : 0,
                       group.lambda, records);
        rows.insert(rows.end(), group_rows.begin(), group_rows.end());
        for (const RunRecord& record : records) {
            total_trials += 1;
            total_diverged += record.diverged ? 1 : 0;
        }
    }

    std::ofstream out = open_output(out_path);
    write_curves_csv(out, rows);
    return (total_trials > 0 && total_diverged == total_trials) ? 3 : 0;
}

int cmd_sweep_b(const Draft& draft, const Plan& plan, const std::string& out_path) {
    const ExperimentConfig& cfg = draft.cfg;
    validate_config(cfg);
    const Problem problem = build_problem(cfg);
    const ReferenceValues ref = resolve_reference(cfg, problem);
    const std::vector<BiasVarianceSummary> rows =
        bias_variance_by_b(cfg, problem, plan.b_values, ref.v_ref);

    std::ofstream out = open_output(out_path);
    write_bias_variance_csv(out, rows);
    bool all_dead = !rows.empty();
    for (const BiasVarianceSummary& row : rows) {
        all_dead = all_dead && row.all_diverged;
    }
    return all_dead ? 3 : 0;
}

int cmd_sweep_lambda(const Draft& draft, const Plan& plan, const std::string& out_path) {
    const ExperimentConfig& cfg = draft.cfg;
    validate_config(cfg);
    const Problem problem = build_problem(cfg);
    const std::vector<LambdaSweepRow> rows =
        sweep_lambda(cfg, problem, plan.lambda_values);

    std::ofstream out = open_output(out_path);
    write_lambda_sweep_csv(out, rows);
    bool all_dead = !rows.empty();
    for (const LambdaSweepRow& row : rows) {
        all_dead = all_dead && row.n_diverged == cfg.n_seeds;
    }
    return all_dead ? 3 : 0;
}

int cmd_sweep_rho(const Draft& draft, const Plan& plan, const std::string& out_path) {
    const ExperimentConfig& cfg = draft.cfg;
    validate_config(cfg);
    if (plan.rho_values.empty()) {
        throw std::invalid_argument("sweep-rho needs --values or a --figure preset");
    }
    const RhoVary vary = [&] {
        if (plan.vary == "target") {
            return RhoVary::Target;
        }
        if (plan.vary == "behavior") {
            return RhoVary::Behavior;
        }
        throw std::invalid_argument("--vary must be \"target\" or \"behavior\", got \"" +
                                    plan.vary + "\"");
    }();
    const std::vector<RhoSweepGroup> groups = sweep_rho(cfg, plan.rho_values, vary);

    std::ofstream out = open_output(out_path);
    write_rho_sweep_csv(out, groups);
    bool all_dead = !groups.empty();
    for (const RhoSweepGroup& group : groups) {
        all_dead = all_dead && !group.curve.empty() &&
                   group.curve.back().n_diverged == cfg.n_seeds;
    }
    return all_dead ? 3 : 0;
}

int cmd_probe(const Draft& draft, const std::vector<double>& theta_values, long n_samples) {
    const ExperimentConfig& cfg = draft.cfg;
    validate_config(cfg);
    const Problem problem = build_problem(cfg);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(problem.features.dim());
    if (!theta_values.empty()) {
        if (static_cast<Eigen::Index>(theta_values.size()) != problem.features.dim()) {
            throw std::invalid_argument("--theta needs exactly " +
                                        std::to_string(problem.features.dim()) +
                                        " components for these features");
        }
        for (std::size_t i = 0; i < theta_values.size(); ++i) {
            theta(static_cast<Eigen::Index>(i)) = theta_values[i];
        }
    }
    const std::optional<double> lambda =
        draft.lambda_explicit ? std::optional<double>(cfg.algo.lambda) : std::nullopt;
    const ProbeResult probe =
        operator_probe(problem.mdp, problem.target, problem.behavior, problem.features, theta,
                       cfg.algo.b, lambda, n_samples, cfg.base_seed);

    std::cout << "b = " << cfg.algo.b << '\n'
              << "lambda = " << (lambda ? fmt_double(*lambda) : std::string("none")) << '\n'
              << "n_samples = " << probe.n_samples << '\n'
              << "mean = " << join_theta(probe.mean) << '\n'
              << "se_mean = " << fmt_double(probe.se_mean) << '\n'
              << "cov_trace = " << fmt_double(probe.cov_trace) << '\n'
              << "second_moment = " << fmt_double(probe.second_moment) << '\n'
              << "se_second_moment = " << fmt_double(probe.se_second_moment) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Emphatic TD off-policy evaluation with periodic trace restarts"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "",
                   "INI config with [mdp], [features], [algo], [experiment] sections");
    OptionSet file_vals;
    add_config_sections(&app, file_vals);

    struct SubState {
        CLI::App* cmd = nullptr;
        OptionSet flag_vals;
        std::string figure;
        std::string out_path;
    };

    const auto make_sub = [&](const char* name, const char* desc,
                              const char* default_out) -> SubState {
        SubState state;
        state.cmd = app.add_subcommand(name, desc);
        state.cmd->fallthrough();
        add_flags(state.cmd, state.flag_vals);
        state.out_path = default_out;
        if (default_out[0] != '\0') {
            state.cmd->add_option("--out", state.out_path, "Output CSV path")
                ->configurable(false);
        } else {
            state.cmd->add_option("--out", state.out_path, "Optional CSV path")
                ->configurable(false);
        }
        return state;
    };

    SubState fixed_point = make_sub(
        "fixed-point", "Print the analytic fixed point and its theory constants", "");
    SubState run = make_sub("run", "Run learning trials and write error curves", "curves.csv");
    run.cmd->add_option("--figure", run.figure, "Preset: 1a")->configurable(false);
    SubState sweep_b =
        make_sub("sweep-b", "Final-iterate bias/variance across period lengths",
                 "bias_variance.csv");
    sweep_b.cmd->add_option("--figure", sweep_b.figure, "Preset: 1b")->configurable(false);
    std::vector<int> b_values;
    sweep_b.cmd->add_option("--b-values", b_values, "Period lengths to sweep")
        ->configurable(false);
    SubState sweep_lambda_cmd =
        make_sub("sweep-lambda", "Sweep the bootstrapping parameter", "lambda_sweep.csv");
    sweep_lambda_cmd.cmd->add_option("--figure", sweep_lambda_cmd.figure, "Preset: 2 or 3")
        ->configurable(false);
    std::vector<double> lambda_values;
    sweep_lambda_cmd.cmd->add_option("--lambda-values", lambda_values, "Lambda grid")
        ->configurable(false);
    SubState sweep_rho =
        make_sub("sweep-rho", "Sweep the policy-mismatch level", "rho_sweep.csv");
    sweep_rho.cmd->add_option("--figure", sweep_rho.figure, "Preset: 5, 6, or 7")
        ->configurable(false);
    std::vector<double> rho_values;
    sweep_rho.cmd->add_option("--values", rho_values, "Solid probabilities to sweep")
        ->configurable(false);
    std::string vary = "target";
    sweep_rho.cmd->add_option("--vary", vary, "Which policy varies: target or behavior")
        ->configurable(false);
    SubState probe =
        make_sub("probe", "Monte-Carlo moments of the empirical operator at a fixed theta",
                 "");
    std::vector<double> theta_values;
    probe.cmd->add_option("--theta", theta_values, "Probe point (default: zero vector)")
        ->configurable(false);
    long n_samples = 100000;
    probe.cmd->add_option("--samples", n_samples, "Number of operator samples")
        ->configurable(false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const SubState* active = nullptr;
        std::string name;
        for (const SubState* state :
             {&fixed_point, &run, &sweep_b, &sweep_lambda_cmd, &sweep_rho, &probe}) {
            if (state->cmd->parsed()) {
                active = state;
                name = state->cmd->get_name();
            }
        }

        Draft draft;
        Plan plan;
        plan.vary = vary;
        const std::string& figure =
            name == "run" ? run.figure
            : name == "sweep-b" ? sweep_b.figure
            : name == "sweep-lambda" ? sweep_lambda_cmd.figure
            : name == "sweep-rho" ? sweep_rho.figure
                                  : std::string();
        if (!figure.empty()) {
            apply_figure(figure, name, draft, plan);
        }
        apply_option_set(file_vals, draft);
        apply_option_set(active->flag_vals, draft);
        finalize_draft(draft);
        if (!b_values.empty()) {
            plan.b_values = b_values;
        }
        if (!lambda_values.empty()) {
            plan.lambda_values = lambda_values;
        }
        if (!rho_values.empty()) {
            plan.rho_values = rho_values;
        }

        if (name == "fixed-point") {
            return cmd_fixed_point(draft, fixed_point.out_path);
        }
        if (name == "run") {
            return cmd_run(draft, plan, run.out_path);
        }
        if (name == "sweep-b") {
            return cmd_sweep_b(draft, plan, sweep_b.out_path);
        }
        if (name == "sweep-lambda") {
            return cmd_sweep_lambda(draft, plan, sweep_lambda_cmd.out_path);
        }
        if (name == "sweep-rho") {
            return cmd_sweep_rho(draft, plan, sweep_rho.out_path);
        }
        return cmd_probe(draft, theta_values, n_samples);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const PositiveDefinitenessError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
