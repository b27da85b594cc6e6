#include "peretd/experiments.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace peretd {

Metric metric_from_string(const std::string& name) {
    if (name == "value-l2") {
        return Metric::ValueL2;
    }
    if (name == "value-rms") {
        return Metric::ValueRms;
    }
    if (name == "param-l2") {
        return Metric::ParamL2;
    }
    throw std::invalid_argument("unknown metric: " + name);
}

std::string metric_name(Metric metric) {
    switch (metric) {
    case Metric::ValueL2: return "value-l2";
    case Metric::ValueRms: return "value-rms";
    case Metric::ParamL2: return "param-l2";
    }
    throw std::invalid_argument("unknown metric tag");
}

ReferenceKind reference_from_string(const std::string& name) {
    if (name == "ground-truth") {
        return ReferenceKind::GroundTruth;
    }
    if (name == "fixed-point") {
        return ReferenceKind::FixedPoint0;
    }
    if (name == "fixed-point-lambda") {
        return ReferenceKind::FixedPointLambda;
    }
    if (name == "finite-b") {
        return ReferenceKind::FiniteB;
    }
    throw std::invalid_argument("unknown reference: " + name);
}

std::string reference_name(ReferenceKind kind) {
    switch (kind) {
    case ReferenceKind::GroundTruth: return "ground-truth";
    case ReferenceKind::FixedPoint0: return "fixed-point";
    case ReferenceKind::FixedPointLambda: return "fixed-point-lambda";
    case ReferenceKind::FiniteB: return "finite-b";
    }
    throw std::invalid_argument("unknown reference tag");
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.mdp_preset != "baird" && cfg.mdp_preset != "file") {
        throw std::invalid_argument("mdp.preset must be \"baird\" or \"file\", got \"" +
                                    cfg.mdp_preset + "\"");
    }
    if (cfg.mdp_preset == "file") {
        if (cfg.mdp_file.empty()) {
            throw std::invalid_argument("mdp.file is required when mdp.preset = \"file\"");
        }
        if (cfg.target_file.empty() || cfg.behavior_file.empty()) {
            throw std::invalid_argument("mdp.target_file and mdp.behavior_file are required "
                                        "when mdp.preset = \"file\"");
        }
    } else {
        if (!(cfg.target_solid > 0.0) || !(cfg.target_solid < 1.0)) {
            throw std::invalid_argument("mdp.target_solid must lie strictly inside (0, 1)");
        }
        if (!(cfg.behavior_solid > 0.0) || !(cfg.behavior_solid < 1.0)) {
            throw std::invalid_argument("mdp.behavior_solid must lie strictly inside (0, 1)");
        }
    }
    const bool known_features =
        cfg.feature_preset == "phi1" || cfg.feature_preset == "phi2" ||
        cfg.feature_preset == "phi3" || cfg.feature_preset == "tabular" ||
        cfg.feature_preset == "file";
    if (!known_features) {
        throw std::invalid_argument("features.preset must be one of phi1, phi2, phi3, "
                                    "tabular, file; got \"" + cfg.feature_preset + "\"");
    }
    if (cfg.feature_preset == "file" && cfg.feature_file.empty()) {
        throw std::invalid_argument("features.file is required when features.preset = \"file\"");
    }
    const bool periodic =
        cfg.algo.algo == Algorithm::PerEtd0 || cfg.algo.algo == Algorithm::PerEtdLambda;
    if (periodic && cfg.algo.b < 1) {
        throw std::invalid_argument("algo.b must be at least 1 for periodic variants");
    }
    if (cfg.algo.lambda < 0.0 || cfg.algo.lambda > 1.0) {
        throw std::invalid_argument("algo.lambda must lie in [0, 1]");
    }
    if (cfg.T < 0) {
        throw std::invalid_argument("experiment.T must be non-negative");
    }
    if (cfg.transition_budget.has_value() && *cfg.transition_budget < 1) {
        throw std::invalid_argument("experiment.transition_budget must be positive");
    }
    if (cfg.n_seeds < 1) {
        throw std::invalid_argument("experiment.n_seeds must be at least 1");
    }
    if (cfg.stride < 1) {
        throw std::invalid_argument("experiment.stride must be at least 1");
    }
    if (cfg.jobs < 1) {
        throw std::invalid_argument("experiment.jobs must be at least 1");
    }
    if (cfg.projection == ProjectionMode::Radius && !(cfg.projection_radius > 0.0)) {
        throw std::invalid_argument("algo.projection_radius must be positive");
    }
    if (cfg.metric == Metric::ParamL2 && cfg.reference == ReferenceKind::GroundTruth) {
        throw std::invalid_argument("experiment.metric = param-l2 needs a parameter-space "
                                    "reference (fixed-point, fixed-point-lambda, or finite-b)");
    }
}

Problem build_problem(const ExperimentConfig& cfg) {
    validate_config(cfg);
    Problem problem;
    if (cfg.mdp_preset == "baird") {
        auto [mdp, target, behavior] = baird_mdp(cfg.target_solid, cfg.behavior_solid);
        problem.mdp = std::move(mdp);
        problem.target = std::move(target);
        problem.behavior = std::move(behavior);
    } else {
        problem.mdp = load_mdp_file(cfg.mdp_file);
        problem.target = load_policy_file(cfg.target_file);
        problem.behavior = load_policy_file(cfg.behavior_file);
    }
    if (cfg.feature_preset == "file") {
        problem.features = load_features_csv(cfg.feature_file);
    } else if (cfg.feature_preset == "tabular") {
        problem.features = tabular_features(problem.mdp.n_states);
    } else {
        problem.features = feature_preset(cfg.feature_preset);
    }
    if (problem.features.n_states() != problem.mdp.n_states) {
        throw std::invalid_argument("features.preset does not match the mdp state count");
    }
    problem.target_chain = induced_chain(problem.mdp, problem.target);
    problem.d_mu = stationary_distribution(induced_chain(problem.mdp, problem.behavior).p_pi);
    problem.v_pi = value_function(problem.target_chain, problem.mdp.gamma);
    return problem;
}

ReferenceValues resolve_reference(const ExperimentConfig& cfg, const Problem& problem) {
    ReferenceValues ref;
    switch (cfg.reference) {
    case ReferenceKind::GroundTruth:
        ref.v_ref = problem.v_pi;
        return ref;
    case ReferenceKind::FixedPoint0: {
        const Eigen::VectorXd f =
            emphatic_f(problem.d_mu, problem.target_chain.p_pi, problem.mdp.gamma);
        ref.theta_ref = etd0_fixed_point(problem.features, f, problem.target_chain.p_pi,
                                         problem.target_chain.r_pi, problem.mdp.gamma)
                            .theta;
        break;
    }
    case ReferenceKind::FixedPointLambda: {
        const Eigen::VectorXd f =
            emphatic_f(problem.d_mu, problem.target_chain.p_pi, problem.mdp.gamma);
        ref.theta_ref =
            etd_lambda_fixed_point(problem.features, f, problem.d_mu, problem.target_chain.p_pi,
                                   problem.target_chain.r_pi, problem.mdp.gamma,
                                   cfg.algo.lambda)
                .theta;
        break;
    }
    case ReferenceKind::FiniteB:
        ref.theta_ref =
            finite_b_fixed_point(problem.features, problem.d_mu, problem.target_chain.p_pi,
                                 problem.target_chain.r_pi, problem.mdp.gamma, cfg.algo.lambda,
                                 cfg.algo.b)
                .theta;
        break;
    }
    ref.v_ref = value_estimate(problem.features, *ref.theta_ref);
    return ref;
}

long effective_outer_iterations(const ExperimentConfig& cfg) {
    if (!cfg.transition_budget.has_value()) {
        return cfg.T;
    }
    const bool periodic =
        cfg.algo.algo == Algorithm::PerEtd0 || cfg.algo.algo == Algorithm::PerEtdLambda;
    const long per_iter = periodic ? static_cast<long>(cfg.algo.b) + 1 : 1;
    return *cfg.transition_budget / per_iter;
}

ProjectionBall resolve_ball(const ExperimentConfig& cfg, const Problem& problem) {
    switch (cfg.projection) {
    case ProjectionMode::None:
        return ProjectionBall::disabled();
    case ProjectionMode::Radius:
        return ProjectionBall::with_radius(cfg.projection_radius);
    case ProjectionMode::Theory: {
        const Eigen::VectorXd f =
            emphatic_f(problem.d_mu, problem.target_chain.p_pi, problem.mdp.gamma);
        const bool lambda_variant = cfg.algo.algo == Algorithm::EtdLambda ||
                                    cfg.algo.algo == Algorithm::PerEtdLambda;
        const FixedPointResult fp =
            lambda_variant
                ? etd_lambda_fixed_point(problem.features, f, problem.d_mu,
                                         problem.target_chain.p_pi, problem.target_chain.r_pi,
                                         problem.mdp.gamma, cfg.algo.lambda)
                : etd0_fixed_point(problem.features, f, problem.target_chain.p_pi,
                                   problem.target_chain.r_pi, problem.mdp.gamma);
        const double mu = monotonicity_constant(fp.model.a_matrix);
        return ProjectionBall::with_radius(
            default_radius(problem.features, problem.mdp.r_max, problem.mdp.gamma, mu));
    }
    }
    throw std::invalid_argument("unknown projection mode");
}

namespace {

double metric_error(const ExperimentConfig& cfg, const Problem& problem,
                    const ReferenceValues& ref, const Eigen::VectorXd& theta) {
    switch (cfg.metric) {
    case Metric::ValueL2:
        return (problem.features.phi * theta - ref.v_ref).norm();
    case Metric::ValueRms:
        return (problem.features.phi * theta - ref.v_ref).norm() /
               std::sqrt(static_cast<double>(problem.features.n_states()));
    case Metric::ParamL2:
        return (theta - *ref.theta_ref).norm();
    }
    throw std::invalid_argument("unknown metric tag");
}

/// Runs `body(k)` for k in [0, n) across `jobs` workers; the first exception
/// wins and is rethrown on the calling thread.
template <typename Body>
void parallel_for(int n, int jobs, Body body) {
    const int workers = std::max(1, std::min(jobs, n));
    if (workers == 1) {
        for (int k = 0; k < n; ++k) {
            body(k);
        }
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_lock;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int k = next.fetch_add(1); k < n; k = next.fetch_add(1)) {
                try {
                    body(k);
                } catch (...) {
                    std::scoped_lock lock(error_lock);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                }
            }
        });
    }
    for (std::thread& worker : pool) {
        worker.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace

RunRecord run_trial(const ExperimentConfig& cfg, const Problem& problem,
                    const ReferenceValues& ref, std::uint64_t seed) {
    const long T = effective_outer_iterations(cfg);
    const ProjectionBall ball = resolve_ball(cfg, problem);
    const TrainingResult training =
        run_training(cfg.algo, problem.mdp, problem.target, problem.behavior, problem.features,
                     cfg.schedule, ball, T, seed, cfg.stride);
    RunRecord record;
    record.seed = seed;
    record.diverged = training.diverged;
    record.points.reserve(training.snapshots.size());
    for (const Snapshot& snap : training.snapshots) {
        record.points.push_back(
            {snap.iter, snap.transitions, metric_error(cfg, problem, ref, snap.theta)});
    }
    return record;
}

std::vector<RunRecord> run_trials(const ExperimentConfig& cfg, const Problem& problem,
                                  const ReferenceValues& ref) {
    std::vector<RunRecord> records(static_cast<std::size_t>(cfg.n_seeds));
    parallel_for(cfg.n_seeds, cfg.jobs, [&](int k) {
        records[static_cast<std::size_t>(k)] =
            run_trial(cfg, problem, ref, cfg.base_seed + static_cast<std::uint64_t>(k));
    });
    return records;
}

std::vector<AggregatePoint> aggregate_trials(const std::vector<RunRecord>& records) {
    if (records.empty()) {
        throw std::invalid_argument("aggregate_trials needs at least one record");
    }
    std::size_t grid_len = 0;
    std::size_t grid_at = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].points.size() > grid_len) {
            grid_len = records[i].points.size();
            grid_at = i;
        }
    }
    const std::vector<RunRecord::Point>& grid = records[grid_at].points;
    for (const RunRecord& record : records) {
        for (std::size_t i = 0; i < record.points.size(); ++i) {
            if (record.points[i].iter != grid[i].iter ||
                record.points[i].transitions != grid[i].transitions) {
                throw std::invalid_argument("records do not share a snapshot grid");
            }
        }
        if (!record.diverged && record.points.size() != grid_len) {
            throw std::invalid_argument("records do not share a snapshot grid");
        }
    }

    std::vector<AggregatePoint> curve(grid_len);
    for (std::size_t i = 0; i < grid_len; ++i) {
        AggregatePoint& point = curve[i];
        point.iter = grid[i].iter;
        point.transitions = grid[i].transitions;
        double sum = 0.0;
        int n = 0;
        for (const RunRecord& record : records) {
            const std::size_t usable =
                record.points.size() - (record.diverged ? 1 : 0);
            if (i < usable) {
                sum += record.points[i].error;
                n += 1;
            }
        }
        point.n_diverged = static_cast<int>(records.size()) - n;
        if (n == 0) {
            point.mean = std::numeric_limits<double>::quiet_NaN();
            point.stddev = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        point.mean = sum / n;
        if (n < 2) {
            point.stddev = 0.0;
            continue;
        }
        double ss = 0.0;
        for (const RunRecord& record : records) {
            const std::size_t usable =
                record.points.size() - (record.diverged ? 1 : 0);
            if (i < usable) {
                const double diff = record.points[i].error - point.mean;
                ss += diff * diff;
            }
        }
        point.stddev = std::sqrt(ss / (n - 1));
    }
    return curve;
}

namespace {

struct FinalTheta {
    Eigen::VectorXd theta;
    bool diverged = false;
};

std::vector<FinalTheta> run_final_thetas(const ExperimentConfig& cfg, const Problem& problem) {
    const long T = effective_outer_iterations(cfg);
    const ProjectionBall ball = resolve_ball(cfg, problem);
    std::vector<FinalTheta> finals(static_cast<std::size_t>(cfg.n_seeds));
    parallel_for(cfg.n_seeds, cfg.jobs, [&](int k) {
        const TrainingResult training = run_training(
            cfg.algo, problem.mdp, problem.target, problem.behavior, problem.features,
            cfg.schedule, ball, T, cfg.base_seed + static_cast<std::uint64_t>(k),
            std::max<long>(T, 1));
        finals[static_cast<std::size_t>(k)] = {training.snapshots.back().theta,
                                               training.diverged};
    });
    return finals;
}

} // namespace

std::vector<BiasVarianceSummary> bias_variance_by_b(const ExperimentConfig& cfg,
                                                    const Problem& problem,
                                                    const std::vector<int>& b_values,
                                                    const Eigen::VectorXd& v_ref) {
    validate_config(cfg);
    if (cfg.algo.algo != Algorithm::PerEtd0 && cfg.algo.algo != Algorithm::PerEtdLambda) {
        throw std::invalid_argument("bias_variance_by_b needs a periodic algorithm");
    }
    if (b_values.empty()) {
        throw std::invalid_argument("b_values must be non-empty");
    }
    if (v_ref.size() != problem.features.n_states()) {
        throw std::invalid_argument("reference vector must have one entry per state");
    }
    std::vector<BiasVarianceSummary> summaries;
    summaries.reserve(b_values.size());
    for (const int b : b_values) {
        if (b < 1) {
            throw std::invalid_argument("each b must be at least 1");
        }
        ExperimentConfig cfg_b = cfg;
        cfg_b.algo.b = b;
        const std::vector<FinalTheta> finals = run_final_thetas(cfg_b, problem);

        BiasVarianceSummary summary;
        summary.b = b;
        summary.n_seeds = cfg.n_seeds;
        std::vector<Eigen::VectorXd> values;
        values.reserve(finals.size());
        for (const FinalTheta& final : finals) {
            if (final.diverged) {
                summary.n_diverged += 1;
            } else {
                values.push_back(problem.features.phi * final.theta);
            }
        }
        if (values.empty()) {
            summary.all_diverged = true;
            summary.bias = std::numeric_limits<double>::quiet_NaN();
            summary.variance = std::numeric_limits<double>::quiet_NaN();
            summary.mse = std::numeric_limits<double>::quiet_NaN();
            summaries.push_back(std::move(summary));
            continue;
        }
        Eigen::VectorXd mean_value = Eigen::VectorXd::Zero(problem.features.n_states());
        for (const Eigen::VectorXd& value : values) {
            mean_value += value;
        }
        mean_value /= static_cast<double>(values.size());
        summary.bias = (mean_value - v_ref).norm();
        double variance = 0.0;
        double mse = 0.0;
        for (const Eigen::VectorXd& value : values) {
            variance += (value - mean_value).squaredNorm();
            mse += (value - v_ref).squaredNorm();
        }
        summary.variance = variance / static_cast<double>(values.size());
        summary.mse = mse / static_cast<double>(values.size());
        summaries.push_back(std::move(summary));
    }
    return summaries;
}

std::vector<LambdaSweepRow> sweep_lambda(const ExperimentConfig& cfg, const Problem& problem,
                                         const std::vector<double>& lambda_values) {
    validate_config(cfg);
    if (lambda_values.empty()) {
        throw std::invalid_argument("lambda_values must be non-empty");
    }
    if (cfg.algo.b < 1) {
        throw std::invalid_argument("algo.b must be at least 1 for a lambda sweep");
    }
    const Eigen::VectorXd theta_proj =
        weighted_projection(problem.v_pi, problem.features, problem.d_mu);

    std::vector<LambdaSweepRow> rows;
    rows.reserve(lambda_values.size());
    for (const double lambda : lambda_values) {
        if (lambda < 0.0 || lambda > 1.0) {
            throw std::invalid_argument("lambda values must lie in [0, 1]");
        }
        ExperimentConfig cfg_l = cfg;
        cfg_l.algo.algo = Algorithm::PerEtdLambda;
        cfg_l.algo.lambda = lambda;
        const ReferenceValues ref = resolve_reference(cfg_l, problem);
        const std::vector<RunRecord> records = run_trials(cfg_l, problem, ref);

        LambdaSweepRow row;
        row.lambda = lambda;
        double sum = 0.0;
        int n = 0;
        for (const RunRecord& record : records) {
            if (record.diverged) {
                row.n_diverged += 1;
            } else {
                sum += record.points.back().error;
                n += 1;
            }
        }
        if (n == 0) {
            row.final_error_mean = std::numeric_limits<double>::quiet_NaN();
            row.final_error_std = std::numeric_limits<double>::quiet_NaN();
        } else {
            row.final_error_mean = sum / n;
            double ss = 0.0;
            for (const RunRecord& record : records) {
                if (!record.diverged) {
                    const double diff = record.points.back().error - row.final_error_mean;
                    ss += diff * diff;
                }
            }
            row.final_error_std = n < 2 ? 0.0 : std::sqrt(ss / (n - 1));
        }
        row.finite_b_theta =
            finite_b_fixed_point(problem.features, problem.d_mu, problem.target_chain.p_pi,
                                 problem.target_chain.r_pi, problem.mdp.gamma, lambda,
                                 cfg.algo.b)
                .theta;
        row.projection_theta = theta_proj;
        row.fixedpoint_dist_to_projection = (row.finite_b_theta - theta_proj).norm();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RhoSweepGroup> sweep_rho(const ExperimentConfig& cfg,
                                     const std::vector<double>& parameter_values,
                                     RhoVary vary) {
    validate_config(cfg);
    if (cfg.mdp_preset != "baird") {
        throw std::invalid_argument("sweep_rho rebuilds the baird preset; set mdp.preset = "
                                    "\"baird\"");
    }
    if (parameter_values.empty()) {
        throw std::invalid_argument("parameter_values must be non-empty");
    }
    std::vector<RhoSweepGroup> groups;
    groups.reserve(parameter_values.size());
    for (const double value : parameter_values) {
        if (!(value > 0.0) || !(value < 1.0)) {
            throw std::invalid_argument("swept policy parameters must lie strictly inside "
                                        "(0, 1)");
        }
        ExperimentConfig cfg_v = cfg;
        if (vary == RhoVary::Target) {
            cfg_v.target_solid = value;
        } else {
            cfg_v.behavior_solid = value;
        }
        const Problem problem = build_problem(cfg_v);
        RhoSweepGroup group;
        group.parameter = value;
        group.rho_max = rho_max(problem.target, problem.behavior);
        const ReferenceValues ref = resolve_reference(cfg_v, problem);
        group.curve = aggregate_trials(run_trials(cfg_v, problem, ref));
        groups.push_back(std::move(group));
    }
    return groups;
}

ProbeResult operator_probe(const FiniteMdp& mdp, const Policy& target, const Policy& behavior,
                           const FeatureMap& features, const Eigen::VectorXd& theta, int b,
                           std::optional<double> lambda, long n_samples, std::uint64_t seed) {
    if (n_samples < 2) {
        throw std::invalid_argument("operator probe needs at least two samples");
    }
    if (b < 1) {
        throw std::invalid_argument("operator probe needs b >= 1");
    }
    if (theta.size() != features.dim()) {
        throw std::invalid_argument("theta dimension does not match the feature map");
    }
    if (features.n_states() != mdp.n_states) {
        throw std::invalid_argument("feature map does not match the mdp state count");
    }
    if (lambda.has_value() && (*lambda < 0.0 || *lambda > 1.0)) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    TrajectorySampler sampler(mdp, target, behavior, seed);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(features.dim());
    double m2 = 0.0;
    double sum_sq = 0.0;
    double sum_quad = 0.0;
    SampleWindow window;
    window.steps.resize(static_cast<std::size_t>(b) + 1);
    for (long i = 1; i <= n_samples; ++i) {
        for (std::size_t j = 0; j < window.steps.size(); ++j) {
            window.steps[j] = sampler.sample_transition();
        }
        const Eigen::VectorXd value =
            lambda.has_value()
                ? empirical_operator_lambda(window, theta, mdp.gamma, *lambda, features)
                : empirical_operator0(window, theta, mdp.gamma, features);
        const Eigen::VectorXd delta = value - mean;
        mean += delta / static_cast<double>(i);
        m2 += delta.dot(value - mean);
        const double sq = value.squaredNorm();
        sum_sq += sq;
        sum_quad += sq * sq;
    }
    ProbeResult result;
    result.n_samples = n_samples;
    result.mean = mean;
    result.cov_trace = m2 / static_cast<double>(n_samples - 1);
    result.second_moment = sum_sq / static_cast<double>(n_samples);
    result.se_mean = std::sqrt(result.cov_trace / static_cast<double>(n_samples));
    const double var_sq = std::max(
        0.0, (sum_quad - static_cast<double>(n_samples) * result.second_moment *
                             result.second_moment) /
                 static_cast<double>(n_samples - 1));
    result.se_second_moment = std::sqrt(var_sq / static_cast<double>(n_samples));
    return result;
}

} // namespace peretd
