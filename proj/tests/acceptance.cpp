#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peretd/algorithms.hpp"
#include "peretd/experiments.hpp"
#include "peretd/features.hpp"
#include "peretd/fixed_points.hpp"
#include "peretd/mdp.hpp"

namespace {

using namespace peretd;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct BairdSetup {
    FiniteMdp mdp;
    Policy target;
    Policy behavior;
    InducedChain chain;
    Eigen::VectorXd d_mu;
    Eigen::VectorXd v_pi;
};

BairdSetup baird_setup(double target_solid = 0.9, double behavior_solid = 1.0 / 7.0) {
    BairdSetup s;
    std::tie(s.mdp, s.target, s.behavior) = baird_mdp(target_solid, behavior_solid);
    s.chain = induced_chain(s.mdp, s.target);
    s.d_mu = stationary_distribution(induced_chain(s.mdp, s.behavior).p_pi);
    s.v_pi = value_function(s.chain, s.mdp.gamma);
    return s;
}

std::string fmt(double value) {
    std::ostringstream out;
    out.precision(6);
    out << value;
    return out.str();
}

/// Ordinary least-squares slope of y against x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome criterion_1() {
    const BairdSetup s = baird_setup();
    const Eigen::VectorXd f = emphatic_f(s.d_mu, s.chain.p_pi, s.mdp.gamma);
    const std::vector<FeatureMap> presets = {phi1(), phi2(), phi3()};
    const std::vector<double> lambdas = {0.0, 0.25, 0.5, 0.75, 1.0};

    double worst = 0.0;
    for (const FeatureMap& features : presets) {
        for (double lambda : lambdas) {
            const FixedPointResult fp = etd_lambda_fixed_point(
                features, f, s.d_mu, s.chain.p_pi, s.chain.r_pi, s.mdp.gamma, lambda);
            const double residual =
                (fp.model.a_matrix * fp.theta - fp.model.c_vector).norm();
            const double tol = 1e-10 * (1.0 + fp.model.c_vector.norm());
            worst = std::max(worst, residual / tol);
        }
    }
    return {worst <= 1.0, "max residual over Baird x {phi1,phi2,phi3} x 5 lambdas = " +
                              fmt(worst) + "x the 1e-10*(1+||c||) budget"};
}

Outcome criterion_2() {
    const BairdSetup s = baird_setup();
    const Eigen::VectorXd f = emphatic_f(s.d_mu, s.chain.p_pi, s.mdp.gamma);
    const std::vector<FeatureMap> presets = {phi1(), phi2(), phi3()};

    double worst = 0.0;
    for (const FeatureMap& features : presets) {
        const FixedPointResult fp = etd_lambda_fixed_point(
            features, f, s.d_mu, s.chain.p_pi, s.chain.r_pi, s.mdp.gamma, 1.0);
        const Eigen::VectorXd projected = weighted_projection(s.v_pi, features, s.d_mu);
        worst = std::max(worst, (fp.theta - projected).norm());
    }
    return {worst <= 1e-9, "max ||theta*(lambda=1) - weighted projection||_2 = " + fmt(worst) +
                               " vs 1e-9"};
}

Outcome criterion_3() {
    const BairdSetup s = baird_setup();
    const Eigen::VectorXd f = emphatic_f(s.d_mu, s.chain.p_pi, s.mdp.gamma);
    const FeatureMap features = tabular_features(s.mdp.n_states);

    double worst = 0.0;
    const auto record = [&](const Eigen::VectorXd& theta) {
        worst = std::max(worst, (theta - s.v_pi).lpNorm<Eigen::Infinity>());
    };

    record(etd0_fixed_point(features, f, s.chain.p_pi, s.chain.r_pi, s.mdp.gamma).theta);
    for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        record(etd_lambda_fixed_point(features, f, s.d_mu, s.chain.p_pi, s.chain.r_pi,
                                      s.mdp.gamma, lambda)
                   .theta);
    }
    for (int b : {0, 1, 4, 16}) {
        record(finite_b_fixed_point(features, s.d_mu, s.chain.p_pi, s.chain.r_pi, s.mdp.gamma,
                                    0.0, b)
                   .theta);
    }
    return {worst <= 1e-8,
            "max ||theta - V_pi||_inf over tabular solvers = " + fmt(worst) + " vs 1e-8"};
}

Outcome criterion_4() {
    const BairdSetup s = baird_setup();
    const Eigen::VectorXd f = emphatic_f(s.d_mu, s.chain.p_pi, s.mdp.gamma);
    const FeatureMap features = phi1();
    const Eigen::VectorXd theta_star =
        etd_lambda_fixed_point(features, f, s.d_mu, s.chain.p_pi, s.chain.r_pi, s.mdp.gamma,
                               0.0)
            .theta;

    std::vector<double> bs;
    std::vector<double> log_dist;
    bool monotone = true;
    double prev = 0.0;
    for (int b = 4; b <= 64; ++b) {
        const Eigen::VectorXd theta_b = finite_b_fixed_point(features, s.d_mu, s.chain.p_pi,
                                                             s.chain.r_pi, s.mdp.gamma, 0.0, b)
                                            .theta;
        const double dist = (theta_b - theta_star).norm();
        if (b > 4 && dist >= prev) {
            monotone = false;
        }
        prev = dist;
        bs.push_back(static_cast<double>(b));
        log_dist.push_back(std::log(dist));
    }
    const double ratio = std::exp(ols_slope(bs, log_dist));
    const double bound = std::max(s.mdp.gamma, 0.99) + 0.05;
    const bool pass = monotone && ratio <= bound;
    return {pass, std::string("bias distance ") + (monotone ? "monotone" : "NOT monotone") +
                      " for b = 4..64, fitted geometric ratio = " + fmt(ratio) + " vs " +
                      fmt(bound)};
}

Outcome criterion_5() {
    const BairdSetup s = baird_setup();
    const FeatureMap features = phi1();
    const Eigen::VectorXd f = emphatic_f(s.d_mu, s.chain.p_pi, s.mdp.gamma);
    const FixedPointResult fp =
        etd0_fixed_point(features, f, s.chain.p_pi, s.chain.r_pi, s.mdp.gamma);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(features.dim());
    const Eigen::VectorXd analytic = fp.model.value_at(theta);

    const ProbeResult probe = operator_probe(s.mdp, s.target, s.behavior, features, theta, 12,
                                             std::nullopt, 100000, 0);
    const double gap = (probe.mean - analytic).norm();
    const double limit = 3.0 * probe.se_mean;
    return {gap <= limit, "||probe mean - T(0)||_2 = " + fmt(gap) + " vs 3 SE = " + fmt(limit) +
                              " at b = 12, N = 1e5"};
}

Outcome criterion_6() {
    const BairdSetup s = baird_setup();
    const FeatureMap features = phi1();
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(features.dim());

    std::vector<double> bs;
    std::vector<double> log_moment;
    for (int b : {2, 4, 6, 8, 10}) {
        const ProbeResult probe = operator_probe(s.mdp, s.target, s.behavior, features, theta,
                                                 b, std::nullopt, 100000, 0);
        bs.push_back(static_cast<double>(b));
        log_moment.push_back(std::log(probe.second_moment));
    }
    const double slope = ols_slope(bs, log_moment);
    const double target = std::log(s.mdp.gamma * s.mdp.gamma * rho_max(s.target, s.behavior));
    const bool pass = slope >= 0.7 * target && slope <= 1.3 * target;
    return {pass, "slope of ln E||T_b(0)||^2 over b in {2,4,6,8,10} = " + fmt(slope) +
                      " vs band [" + fmt(0.7 * target) + ", " + fmt(1.3 * target) +
                      "] around ln(gamma^2 rho_max) = " + fmt(target)};
}

Outcome criterion_7() {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto random_problem = [&](FiniteMdp& mdp, Policy& target, Policy& behavior,
                                    FeatureMap& features) {
        const int n = 2 + static_cast<int>(rng() % 9);
        const int d = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::min(4, n)));
        std::vector<Eigen::MatrixXd> transition(2, Eigen::MatrixXd(n, n));
        for (Eigen::MatrixXd& p : transition) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    p(i, j) = 0.05 + unit(rng);
                }
                p.row(i) /= p.row(i).sum();
            }
        }
        Eigen::MatrixXd reward(n, 2);
        for (int i = 0; i < n; ++i) {
            reward(i, 0) = 2.0 * unit(rng) - 1.0;
            reward(i, 1) = 2.0 * unit(rng) - 1.0;
        }
        mdp = FiniteMdp(std::move(transition), std::move(reward), 0.9);

        Eigen::MatrixXd pt(n, 2);
        Eigen::MatrixXd pb(n, 2);
        for (int i = 0; i < n; ++i) {
            pt(i, 0) = 0.1 + 0.8 * unit(rng);
            pt(i, 1) = 1.0 - pt(i, 0);
            pb(i, 0) = 0.1 + 0.8 * unit(rng);
            pb(i, 1) = 1.0 - pb(i, 0);
        }
        target = Policy(pt);
        behavior = Policy(pb);

        Eigen::MatrixXd phi(n, d);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                phi(i, j) = 2.0 * unit(rng) - 1.0;
            }
        }
        features = FeatureMap(phi);
    };

    double worst = 0.0;
    long windows = 0;
    for (int trial = 0; trial < 100; ++trial) {
        FiniteMdp mdp;
        Policy target;
        Policy behavior;
        FeatureMap features;
        random_problem(mdp, target, behavior, features);
        TrajectorySampler sampler(mdp, target, behavior, rng());
        Eigen::VectorXd theta(features.dim());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            theta(i) = 4.0 * unit(rng) - 2.0;
        }
        for (int w = 0; w < 100; ++w) {
            const int b = 1 + static_cast<int>(rng() % 6);
            SampleWindow window;
            for (int k = 0; k < b + 1; ++k) {
                window.steps.push_back(sampler.sample_transition());
            }
            const Eigen::VectorXd plain =
                empirical_operator0(window, theta, mdp.gamma, features);
            const Eigen::VectorXd lambda0 =
                empirical_operator_lambda(window, theta, mdp.gamma, 0.0, features);
            worst = std::max(worst, (plain - lambda0).lpNorm<Eigen::Infinity>());
            windows += 1;
        }
    }
    if (worst > 1e-12) {
        return {false, "operator mismatch " + fmt(worst) + " over " + std::to_string(windows) +
                           " random windows vs 1e-12"};
    }

    const BairdSetup s = baird_setup();
    const FeatureMap features = phi1();
    const StepsizeSchedule schedule = StepsizeSchedule::constant(0.001953125);
    const ProjectionBall ball = ProjectionBall::disabled();
    TrajectorySampler sampler0(s.mdp, s.target, s.behavior, 7);
    TrajectorySampler sampler1(s.mdp, s.target, s.behavior, 7);
    LearnerState plain(AlgoConfig{Algorithm::PerEtd0, 4, 0.0},
                       static_cast<int>(features.dim()));
    LearnerState lambda0(AlgoConfig{Algorithm::PerEtdLambda, 4, 0.0},
                         static_cast<int>(features.dim()));
    for (int t = 0; t < 1000; ++t) {
        per_etd0_iterate(plain, sampler0, schedule, s.mdp.gamma, features, ball);
        per_etd_lambda_iterate(lambda0, sampler1, schedule, s.mdp.gamma, features, ball);
        if (plain.theta != lambda0.theta) {
            return {false, "trajectories disagree at iteration " + std::to_string(t)};
        }
    }
    return {true, "lambda = 0 operators agree to 1e-12 on " + std::to_string(windows) +
                      " random windows (max gap " + fmt(worst) +
                      ") and trajectories are bit-identical for T = 1e3"};
}

/// First/last errors of the trials of one figure-1a group.
struct GroupStats {
    double mean_first = 0.0;
    double mean_last = 0.0;
    int worse_or_diverged = 0;
    int n = 0;
};

GroupStats figure_1a_group(Algorithm algo, int b) {
    ExperimentConfig cfg;
    cfg.feature_preset = "phi1";
    cfg.algo = AlgoConfig{algo, b, 0.0};
    cfg.schedule = StepsizeSchedule::constant(0.001953125);
    cfg.transition_budget = 200000;
    cfg.n_seeds = 20;
    cfg.base_seed = 0;
    cfg.stride = effective_outer_iterations(cfg);
    validate_config(cfg);
    const Problem problem = build_problem(cfg);
    const ReferenceValues ref = resolve_reference(cfg, problem);
    const std::vector<RunRecord> records = run_trials(cfg, problem, ref);

    GroupStats stats;
    for (const RunRecord& record : records) {
        const double first = record.points.front().error;
        const double last = record.points.back().error;
        stats.mean_first += first;
        stats.mean_last += last;
        stats.worse_or_diverged += (record.diverged || last > first) ? 1 : 0;
        stats.n += 1;
    }
    stats.mean_first /= stats.n;
    stats.mean_last /= stats.n;
    return stats;
}

Outcome criterion_8() {
    const GroupStats per = figure_1a_group(Algorithm::PerEtd0, 8);
    const GroupStats etd = figure_1a_group(Algorithm::Etd0, 1);
    const GroupStats td = figure_1a_group(Algorithm::Td0, 1);

    const double per_ratio = per.mean_last / per.mean_first;
    const bool per_ok = per_ratio < 0.5;
    const bool etd_ok = etd.worse_or_diverged >= 15;
    const bool td_ok = td.mean_last >= td.mean_first;

    const std::string detail = "PER-ETD(0) b=8 final/initial = " + fmt(per_ratio) +
                               " (need < 0.5); ETD(0) diverged-or-worse on " +
                               std::to_string(etd.worse_or_diverged) +
                               "/20 seeds (need >= 15); TD(0) final/initial = " +
                               fmt(td.mean_last / td.mean_first) + " (need >= 1)";
    return {per_ok && etd_ok && td_ok, detail};
}

ExperimentConfig figure_1b_config() {
    ExperimentConfig cfg;
    cfg.feature_preset = "phi1";
    cfg.algo = AlgoConfig{Algorithm::PerEtd0, 8, 0.0};
    cfg.schedule = StepsizeSchedule::constant(0.001953125);
    cfg.T = 50000;
    cfg.n_seeds = 20;
    cfg.base_seed = 0;
    cfg.stride = 50000;
    return cfg;
}

Outcome criterion_9() {
    const ExperimentConfig cfg = figure_1b_config();
    validate_config(cfg);
    const Problem problem = build_problem(cfg);
    const ReferenceValues ref = resolve_reference(cfg, problem);
    const std::vector<BiasVarianceSummary> rows =
        bias_variance_by_b(cfg, problem, {4, 6, 8, 12, 16, 20}, ref.v_ref);

    const auto find = [&](int b) -> const BiasVarianceSummary& {
        for (const BiasVarianceSummary& row : rows) {
            if (row.b == b) {
                return row;
            }
        }
        throw std::logic_error("missing b row");
    };
    const bool bias_ok = find(8).bias < find(4).bias;
    const bool var_ok = find(20).variance > find(4).variance;
    return {bias_ok && var_ok,
            "bias(8) = " + fmt(find(8).bias) + " vs bias(4) = " + fmt(find(4).bias) +
                " (need <); variance(20) = " + fmt(find(20).variance) + " vs variance(4) = " +
                fmt(find(4).variance) + " (need >)"};
}

Outcome criterion_10() {
    ExperimentConfig cfg;
    cfg.feature_preset = "phi1";
    cfg.algo = AlgoConfig{Algorithm::PerEtd0, 8, 0.0};
    cfg.T = 1;
    cfg.n_seeds = 1;
    cfg.stride = 1;
    validate_config(cfg);

    const std::vector<double> target_values = {0.167, 0.2, 0.4, 0.6, 0.8};
    const std::vector<double> target_expected = {1.17, 1.40, 2.80, 4.20, 5.60};
    const std::vector<double> behavior_values = {0.8, 0.7, 0.6, 0.4, 0.2};
    const std::vector<double> behavior_expected = {1.12, 1.29, 1.5, 2.25, 4.5};

    double worst = 0.0;
    const std::vector<RhoSweepGroup> by_target = sweep_rho(cfg, target_values, RhoVary::Target);
    for (std::size_t i = 0; i < by_target.size(); ++i) {
        worst = std::max(worst, std::abs(by_target[i].rho_max - target_expected[i]));
    }
    const std::vector<RhoSweepGroup> by_behavior =
        sweep_rho(cfg, behavior_values, RhoVary::Behavior);
    for (std::size_t i = 0; i < by_behavior.size(); ++i) {
        worst = std::max(worst, std::abs(by_behavior[i].rho_max - behavior_expected[i]));
    }
    return {worst <= 0.01,
            "max |rho_max - table value| over both sweeps = " + fmt(worst) + " vs 0.01"};
}

Outcome criterion_11() {
    const ExperimentConfig cfg = figure_1b_config();
    validate_config(cfg);
    const Problem problem = build_problem(cfg);
    const ReferenceValues ref = resolve_reference(cfg, problem);
    const std::vector<BiasVarianceSummary> rows =
        bias_variance_by_b(cfg, problem, {4, 6, 8, 12, 16, 20}, ref.v_ref);

    double worst = 0.0;
    for (const BiasVarianceSummary& row : rows) {
        worst = std::max(worst,
                         std::abs(row.mse - (row.bias * row.bias + row.variance)));
    }
    return {worst <= 1e-9,
            "max |mse - (bias^2 + variance)| over the b sweep = " + fmt(worst) + " vs 1e-9"};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Outcome criterion_12() {
    const std::string base = "/tmp/peretd_acceptance_12_";
    const std::vector<std::string> outs = {base + "a.csv", base + "b.csv", base + "c.csv"};
    const std::vector<std::string> extra = {"", "", " --jobs 8"};
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const std::string command = std::string(PERETD_CLI_PATH) + " run --figure 1a --out " +
                                    outs[i] + extra[i] + " > /dev/null 2>&1";
        if (std::system(command.c_str()) != 0) {
            return {false, "CLI invocation failed: " + command};
        }
    }
    const std::string first = slurp(outs[0]);
    const bool identical =
        !first.empty() && first == slurp(outs[1]) && first == slurp(outs[2]);
    for (const std::string& path : outs) {
        std::remove(path.c_str());
    }
    return {identical, identical ? "three `run --figure 1a` invocations (one with --jobs 8) "
                                   "produced byte-identical CSVs"
                                 : "CSV outputs differ between invocations"};
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: peretd_acceptance <criterion 1-12>\n";
        return 2;
    }
    const int n = std::atoi(argv[1]);
    Outcome outcome;
    try {
        switch (n) {
        case 1: outcome = criterion_1(); break;
        case 2: outcome = criterion_2(); break;
        case 3: outcome = criterion_3(); break;
        case 4: outcome = criterion_4(); break;
        case 5: outcome = criterion_5(); break;
        case 6: outcome = criterion_6(); break;
        case 7: outcome = criterion_7(); break;
        case 8: outcome = criterion_8(); break;
        case 9: outcome = criterion_9(); break;
        case 10: outcome = criterion_10(); break;
        case 11: outcome = criterion_11(); break;
        case 12: outcome = criterion_12(); break;
        default:
            std::cerr << "usage: peretd_acceptance <criterion 1-12>\n";
            return 2;
        }
    } catch (const std::exception& e) {
        std::cout << "FAIL criterion " << n << ": unexpected exception: " << e.what() << '\n';
        return 1;
    }
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << n << ": "
              << outcome.detail << '\n';
    return outcome.pass ? 0 : 1;
}
