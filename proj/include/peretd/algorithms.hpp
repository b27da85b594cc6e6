#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peretd/features.hpp"
#include "peretd/mdp.hpp"

namespace peretd {

/// Magnitude at which a follow-on trace or parameter vector is declared
/// diverged. Divergence is recorded on the learner state, never thrown.
inline constexpr double kDivergenceThreshold = 1e12;

enum class Algorithm { Td0, Etd0, EtdLambda, PerEtd0, PerEtdLambda };

/// Parses "td0", "etd0", "etd-lambda", "per-etd0", or "per-etd-lambda".
Algorithm algorithm_from_string(std::string_view name);
std::string_view algorithm_name(Algorithm algo);

/// Follow-on, emphasis, and eligibility traces carried across steps.
struct TraceState {
    double f = 1.0;
    double m = 1.0;
    Eigen::VectorXd e;
    double rho_prev = 1.0;
    bool started = false;
};

/// Constant or diminishing stepsize. The diminishing form is
/// eta_t = 2 / (mu * (t + t0)).
struct StepsizeSchedule {
    enum class Kind { Constant, Diminishing };

    Kind kind = Kind::Constant;
    double eta = 0.0;
    double mu = 0.0;
    double t0 = 0.0;

    static StepsizeSchedule constant(double eta);
    static StepsizeSchedule diminishing(double mu, double t0);
};

double stepsize_at(const StepsizeSchedule& schedule, long t);

/// Algorithm tag plus the parameters that change its update rule.
struct AlgoConfig {
    Algorithm algo = Algorithm::Td0;
    int b = 1;          ///< trace updates per restart period (periodic variants)
    double lambda = 0.0;
};

/// Mutable learner: parameter vector, iteration counter, and persistent traces.
struct LearnerState {
    Eigen::VectorXd theta;
    long t = 0;
    AlgoConfig config;
    TraceState trace;
    bool diverged = false;

    LearnerState(AlgoConfig config_in, int dim);
    LearnerState(AlgoConfig config_in, Eigen::VectorXd theta0);
};

/// A window of b+1 consecutive transitions feeding one periodic update.
struct SampleWindow {
    std::vector<Transition> steps;

    int b() const { return static_cast<int>(steps.size()) - 1; }
};

/// Raises std::invalid_argument unless the window holds at least two
/// transitions that chain (each s equals the previous s_next).
void validate_window(const SampleWindow& window);

/// One temporal-difference step without importance weighting:
/// theta + eta * delta * phi(s).
Eigen::VectorXd td0_step(const Eigen::VectorXd& theta, const Transition& tr, double eta,
                         const FeatureMap& features, double gamma);

/// Follow-on trace advance: gamma * rho_prev * f + 1.
double followon_step(double f, double rho_prev, double gamma);

/// One emphatic TD(0) step: theta <- Pi(theta + eta rho f delta phi(s)),
/// then the follow-on trace advances with the current rho.
void etd0_step(LearnerState& state, const Transition& tr, double eta,
               const FeatureMap& features, double gamma, const ProjectionBall& ball);

/// One emphatic TD(lambda) step: the follow-on, emphasis, and eligibility
/// traces advance first (e0 = phi(s0) on the first call), then
/// theta <- Pi(theta + eta rho delta e).
void etd_lambda_step(LearnerState& state, const Transition& tr, double eta,
                     const FeatureMap& features, double gamma, const ProjectionBall& ball);

/// Empirical periodic operator with a freshly restarted follow-on trace:
/// F^b rho^b phi^b (phi^b - gamma phi^{b+1})^T theta - F^b rho^b r^b phi^b,
/// evaluated on a window of b+1 transitions (b >= 1).
Eigen::VectorXd empirical_operator0(const SampleWindow& window, const Eigen::VectorXd& theta,
                                    double gamma, const FeatureMap& features);

/// Lambda variant of the empirical periodic operator. The eligibility trace is
/// rebuilt inside the window from e^0 = phi^0; at lambda = 0 the result is
/// bit-identical to empirical_operator0.
Eigen::VectorXd empirical_operator_lambda(const SampleWindow& window,
                                          const Eigen::VectorXd& theta, double gamma,
                                          double lambda, const FeatureMap& features);

/// Draws b+1 transitions, applies theta <- Pi(theta - eta_t * operator value),
/// and advances the iteration counter. The trajectory continues across calls;
/// only the traces restart.
void per_etd0_iterate(LearnerState& state, TrajectorySampler& sampler,
                      const StepsizeSchedule& schedule, double gamma,
                      const FeatureMap& features, const ProjectionBall& ball);

void per_etd_lambda_iterate(LearnerState& state, TrajectorySampler& sampler,
                            const StepsizeSchedule& schedule, double gamma,
                            const FeatureMap& features, const ProjectionBall& ball);

/// Parameter snapshot after a given number of outer iterations.
struct Snapshot {
    long iter = 0;
    long transitions = 0; ///< environment transitions consumed so far
    Eigen::VectorXd theta;
};

struct TrainingResult {
    std::vector<Snapshot> snapshots;
    bool diverged = false;
};

/// Runs one algorithm for T outer iterations from theta0 (zero by default),
/// snapshotting every `stride` iterations plus the initial and final points.
/// Periodic variants consume (b+1) transitions per iteration, the others one.
/// Training stops early when the divergence flag trips; the truncation point
/// is still snapshotted.
TrainingResult run_training(const AlgoConfig& config, const FiniteMdp& mdp,
                            const Policy& target, const Policy& behavior,
                            const FeatureMap& features, const StepsizeSchedule& schedule,
                            const ProjectionBall& ball, long T, std::uint64_t seed,
                            long stride = 1,
                            std::optional<Eigen::VectorXd> theta0 = std::nullopt,
                            std::optional<int> start_state = std::nullopt);

} // namespace peretd
