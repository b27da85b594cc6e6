#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peretd/algorithms.hpp"
#include "peretd/features.hpp"
#include "peretd/fixed_points.hpp"
#include "peretd/mdp.hpp"

namespace peretd {

enum class Metric { ValueL2, ValueRms, ParamL2 };
Metric metric_from_string(const std::string& name);
std::string metric_name(Metric metric);

enum class ReferenceKind { GroundTruth, FixedPoint0, FixedPointLambda, FiniteB };
ReferenceKind reference_from_string(const std::string& name);
std::string reference_name(ReferenceKind kind);

enum class ProjectionMode { None, Theory, Radius };

/// Everything needed to reproduce one experiment deterministically.
struct ExperimentConfig {
    // mdp
    std::string mdp_preset = "baird"; ///< "baird" or "file"
    double target_solid = 0.9;
    double behavior_solid = 1.0 / 7.0;
    std::string mdp_file;
    std::string target_file;
    std::string behavior_file;
    // features
    std::string feature_preset = "phi1"; ///< "phi1", "phi2", "phi3", "tabular", or "file"
    std::string feature_file;
    // algorithm
    AlgoConfig algo{Algorithm::PerEtd0, 8, 0.0};
    StepsizeSchedule schedule = StepsizeSchedule::constant(0.001953125);
    ProjectionMode projection = ProjectionMode::None;
    double projection_radius = 0.0;
    // experiment
    long T = 50000;
    std::optional<long> transition_budget; ///< when set, T = budget / transitions-per-iteration
    int n_seeds = 20;
    std::uint64_t base_seed = 0;
    long stride = 1;
    Metric metric = Metric::ValueL2;
    ReferenceKind reference = ReferenceKind::GroundTruth;
    int jobs = 1;
};

/// Raises std::invalid_argument naming the offending field.
void validate_config(const ExperimentConfig& cfg);

/// Immutable inputs shared by all trials of one experiment.
struct Problem {
    FiniteMdp mdp;
    Policy target;
    Policy behavior;
    FeatureMap features;
    InducedChain target_chain;
    Eigen::VectorXd d_mu;
    Eigen::VectorXd v_pi;
};

Problem build_problem(const ExperimentConfig& cfg);

/// Comparison target of the error metric, in value space and (when the
/// reference is a parameter vector) in parameter space.
struct ReferenceValues {
    Eigen::VectorXd v_ref;
    std::optional<Eigen::VectorXd> theta_ref;
};

ReferenceValues resolve_reference(const ExperimentConfig& cfg, const Problem& problem);

/// Outer iterations implied by the config: T, or transition_budget divided by
/// the transitions one iteration consumes.
long effective_outer_iterations(const ExperimentConfig& cfg);

/// Projection ball implied by the config; theory mode derives the radius from
/// the algorithm's key-matrix monotonicity constant.
ProjectionBall resolve_ball(const ExperimentConfig& cfg, const Problem& problem);

/// Error curve of one seeded trial. Iterations are strictly increasing;
/// errors are finite except possibly at the truncation point of a diverged
/// trial.
struct RunRecord {
    struct Point {
        long iter = 0;
        long transitions = 0;
        double error = 0.0;
    };

    std::uint64_t seed = 0;
    std::vector<Point> points;
    bool diverged = false;
};

RunRecord run_trial(const ExperimentConfig& cfg, const Problem& problem,
                    const ReferenceValues& ref, std::uint64_t seed);

/// Runs n_seeds trials with seeds base_seed + k, parallel over cfg.jobs
/// workers, merged by trial index.
std::vector<RunRecord> run_trials(const ExperimentConfig& cfg, const Problem& problem,
                                  const ReferenceValues& ref);

/// Pointwise statistics over trials; diverged trials are excluded from the
/// mean (NaN when every trial has diverged) and counted per point.
struct AggregatePoint {
    long iter = 0;
    long transitions = 0;
    double mean = 0.0;
    double stddev = 0.0;
    int n_diverged = 0;
};

std::vector<AggregatePoint> aggregate_trials(const std::vector<RunRecord>& records);

/// Final-iterate bias/variance of the learned value function at one period
/// length, over non-diverged seeds.
struct BiasVarianceSummary {
    int b = 0;
    double bias = 0.0;
    double variance = 0.0;
    double mse = 0.0; ///< mean squared distance to the reference
    int n_seeds = 0;
    int n_diverged = 0;
    bool all_diverged = false;
};

std::vector<BiasVarianceSummary> bias_variance_by_b(const ExperimentConfig& cfg,
                                                    const Problem& problem,
                                                    const std::vector<int>& b_values,
                                                    const Eigen::VectorXd& v_ref);

/// One lambda value of a sweep: trial errors plus the analytic loci (the
/// finite-b fixed point and its parameter-space distance to the weighted
/// projection of V_pi).
struct LambdaSweepRow {
    double lambda = 0.0;
    double final_error_mean = 0.0;
    double final_error_std = 0.0;
    double fixedpoint_dist_to_projection = 0.0;
    Eigen::VectorXd finite_b_theta;
    Eigen::VectorXd projection_theta;
    int n_diverged = 0;
};

std::vector<LambdaSweepRow> sweep_lambda(const ExperimentConfig& cfg, const Problem& problem,
                                         const std::vector<double>& lambda_values);

enum class RhoVary { Target, Behavior };

/// Aggregate curve of one policy-parameter value, keyed by the mismatch it
/// induces.
struct RhoSweepGroup {
    double parameter = 0.0;
    double rho_max = 0.0;
    std::vector<AggregatePoint> curve;
};

std::vector<RhoSweepGroup> sweep_rho(const ExperimentConfig& cfg,
                                     const std::vector<double>& parameter_values,
                                     RhoVary vary);

/// Monte-Carlo estimate of the empirical operator's first two moments at a
/// fixed theta: sample mean, sample covariance trace, and mean squared norm,
/// each with a standard error.
struct ProbeResult {
    Eigen::VectorXd mean;
    double cov_trace = 0.0;
    double second_moment = 0.0;
    double se_mean = 0.0;
    double se_second_moment = 0.0;
    long n_samples = 0;
};

ProbeResult operator_probe(const FiniteMdp& mdp, const Policy& target, const Policy& behavior,
                           const FeatureMap& features, const Eigen::VectorXd& theta, int b,
                           std::optional<double> lambda, long n_samples, std::uint64_t seed);

} // namespace peretd
