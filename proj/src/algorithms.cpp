#include "peretd/algorithms.hpp"

#include <cmath>

namespace peretd {

Algorithm algorithm_from_string(std::string_view name) {
    if (name == "td0") {
        return Algorithm::Td0;
    }
    if (name == "etd0") {
        return Algorithm::Etd0;
    }
    if (name == "etd-lambda") {
        return Algorithm::EtdLambda;
    }
    if (name == "per-etd0") {
        return Algorithm::PerEtd0;
    }
    if (name == "per-etd-lambda") {
        return Algorithm::PerEtdLambda;
    }
    throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

std::string_view algorithm_name(Algorithm algo) {
    switch (algo) {
    case Algorithm::Td0: return "td0";
    case Algorithm::Etd0: return "etd0";
    case Algorithm::EtdLambda: return "etd-lambda";
    case Algorithm::PerEtd0: return "per-etd0";
    case Algorithm::PerEtdLambda: return "per-etd-lambda";
    }
    throw std::invalid_argument("unknown algorithm tag");
}

StepsizeSchedule StepsizeSchedule::constant(double eta) {
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw std::invalid_argument("constant stepsize must be non-negative and finite");
    }
    StepsizeSchedule s;
    s.kind = Kind::Constant;
    s.eta = eta;
    return s;
}

StepsizeSchedule StepsizeSchedule::diminishing(double mu, double t0) {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument("mu must be positive and finite");
    }
    if (!(t0 > 0.0) || !std::isfinite(t0)) {
        throw std::invalid_argument("t0 must be positive and finite");
    }
    StepsizeSchedule s;
    s.kind = Kind::Diminishing;
    s.mu = mu;
    s.t0 = t0;
    return s;
}

double stepsize_at(const StepsizeSchedule& schedule, long t) {
    if (t < 0) {
        throw std::invalid_argument("stepsize index must be non-negative");
    }
    if (schedule.kind == StepsizeSchedule::Kind::Constant) {
        return schedule.eta;
    }
    return 2.0 / (schedule.mu * (static_cast<double>(t) + schedule.t0));
}

LearnerState::LearnerState(AlgoConfig config_in, int dim) : config(config_in) {
    if (dim < 1) {
        throw std::invalid_argument("parameter dimension must be positive");
    }
    theta = Eigen::VectorXd::Zero(dim);
}

LearnerState::LearnerState(AlgoConfig config_in, Eigen::VectorXd theta0)
    : theta(std::move(theta0)), config(config_in) {
    if (theta.size() == 0 || !theta.allFinite()) {
        throw std::invalid_argument("theta0 must be non-empty and finite");
    }
}

void validate_window(const SampleWindow& window) {
    if (window.steps.size() < 2) {
        throw std::invalid_argument("sample window must hold at least two transitions (b >= 1)");
    }
    for (std::size_t i = 0; i < window.steps.size(); ++i) {
        const Transition& tr = window.steps[i];
        if (!(tr.rho >= 0.0) || !std::isfinite(tr.rho)) {
            throw std::invalid_argument("sample window has an invalid importance ratio");
        }
        if (i > 0 && tr.s != window.steps[i - 1].s_next) {
            throw std::invalid_argument("sample window transitions do not chain");
        }
    }
}

namespace {

double td_error(const Eigen::VectorXd& theta, const Transition& tr, double gamma,
                const FeatureMap& features) {
    return tr.r + gamma * features.row(tr.s_next).dot(theta) - features.row(tr.s).dot(theta);
}

void check_divergence(LearnerState& state) {
    if (!state.theta.allFinite() || state.theta.norm() > kDivergenceThreshold ||
        std::abs(state.trace.f) > kDivergenceThreshold) {
        state.diverged = true;
    }
}

/// Final scaling shared by both empirical operators so the lambda = 0 path is
/// bit-identical to the lambda-free one.
Eigen::VectorXd scale_direction(double coeff, const Eigen::VectorXd& direction) {
    return coeff * direction;
}

double operator_coefficient(const SampleWindow& window, const Eigen::VectorXd& theta,
                            double gamma, const FeatureMap& features) {
    const Transition& last = window.steps.back();
    const auto phib = features.row(last.s);
    const auto phib1 = features.row(last.s_next);
    const double applied = (phib - gamma * phib1).dot(theta) - last.r;
    return last.rho * applied;
}

} // namespace

Eigen::VectorXd td0_step(const Eigen::VectorXd& theta, const Transition& tr, double eta,
                         const FeatureMap& features, double gamma) {
    if (theta.size() != features.dim()) {
        throw std::invalid_argument("theta dimension does not match the feature map");
    }
    const double delta = td_error(theta, tr, gamma, features);
    return theta + (eta * delta) * features.row(tr.s).transpose();
}

double followon_step(double f, double rho_prev, double gamma) {
    return gamma * rho_prev * f + 1.0;
}

void etd0_step(LearnerState& state, const Transition& tr, double eta,
               const FeatureMap& features, double gamma, const ProjectionBall& ball) {
    if (state.diverged) {
        return;
    }
    const double delta = td_error(state.theta, tr, gamma, features);
    state.theta = project_ball(
        state.theta + (eta * tr.rho * state.trace.f * delta) * features.row(tr.s).transpose(),
        ball);
    state.trace.f = followon_step(state.trace.f, tr.rho, gamma);
    state.t += 1;
    check_divergence(state);
}

void etd_lambda_step(LearnerState& state, const Transition& tr, double eta,
                     const FeatureMap& features, double gamma, const ProjectionBall& ball) {
    if (state.diverged) {
        return;
    }
    const double lambda = state.config.lambda;
    TraceState& trace = state.trace;
    if (!trace.started) {
        trace.f = 1.0;
        trace.m = 1.0;
        trace.e = features.row(tr.s).transpose();
        trace.started = true;
    } else {
        trace.f = followon_step(trace.f, trace.rho_prev, gamma);
        trace.m = lambda + (1.0 - lambda) * trace.f;
        trace.e = (gamma * lambda * trace.rho_prev) * trace.e +
                  trace.m * features.row(tr.s).transpose();
    }
    const double delta = td_error(state.theta, tr, gamma, features);
    state.theta = project_ball(state.theta + (eta * tr.rho * delta) * trace.e, ball);
    trace.rho_prev = tr.rho;
    state.t += 1;
    check_divergence(state);
}

Eigen::VectorXd empirical_operator0(const SampleWindow& window, const Eigen::VectorXd& theta,
                                    double gamma, const FeatureMap& features) {
    validate_window(window);
    const int b = window.b();
    double f = 1.0;
    for (int tau = 0; tau < b; ++tau) {
        f = followon_step(f, window.steps[static_cast<std::size_t>(tau)].rho, gamma);
    }
    const Transition& last = window.steps.back();
    const Eigen::VectorXd direction = f * features.row(last.s).transpose();
    return scale_direction(operator_coefficient(window, theta, gamma, features), direction);
}

Eigen::VectorXd empirical_operator_lambda(const SampleWindow& window,
                                          const Eigen::VectorXd& theta, double gamma,
                                          double lambda, const FeatureMap& features) {
    validate_window(window);
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    const int b = window.b();
    double f = 1.0;
    double m = 1.0;
    Eigen::VectorXd e = features.row(window.steps.front().s).transpose();
    for (int tau = 1; tau <= b; ++tau) {
        const double rho_prev = window.steps[static_cast<std::size_t>(tau - 1)].rho;
        f = followon_step(f, rho_prev, gamma);
        m = lambda + (1.0 - lambda) * f;
        e = (gamma * lambda * rho_prev) * e +
            m * features.row(window.steps[static_cast<std::size_t>(tau)].s).transpose();
    }
    return scale_direction(operator_coefficient(window, theta, gamma, features), e);
}

namespace {

SampleWindow draw_window(TrajectorySampler& sampler, int b) {
    SampleWindow window;
    window.steps.reserve(static_cast<std::size_t>(b) + 1);
    for (int i = 0; i <= b; ++i) {
        window.steps.push_back(sampler.sample_transition());
    }
    return window;
}

void periodic_iterate(LearnerState& state, TrajectorySampler& sampler,
                      const StepsizeSchedule& schedule, double gamma,
                      const FeatureMap& features, const ProjectionBall& ball,
                      bool use_lambda) {
    if (state.config.b < 1) {
        throw std::invalid_argument("periodic restarts need b >= 1");
    }
    if (state.diverged) {
        return;
    }
    const SampleWindow window = draw_window(sampler, state.config.b);
    const double eta = stepsize_at(schedule, state.t);
    const Eigen::VectorXd op =
        use_lambda
            ? empirical_operator_lambda(window, state.theta, gamma, state.config.lambda, features)
            : empirical_operator0(window, state.theta, gamma, features);
    state.theta = project_ball(state.theta - eta * op, ball);
    state.t += 1;
    if (!state.theta.allFinite() || state.theta.norm() > kDivergenceThreshold) {
        state.diverged = true;
    }
}

} // namespace

void per_etd0_iterate(LearnerState& state, TrajectorySampler& sampler,
                      const StepsizeSchedule& schedule, double gamma,
                      const FeatureMap& features, const ProjectionBall& ball) {
    periodic_iterate(state, sampler, schedule, gamma, features, ball, false);
}

void per_etd_lambda_iterate(LearnerState& state, TrajectorySampler& sampler,
                            const StepsizeSchedule& schedule, double gamma,
                            const FeatureMap& features, const ProjectionBall& ball) {
    periodic_iterate(state, sampler, schedule, gamma, features, ball, true);
}

TrainingResult run_training(const AlgoConfig& config, const FiniteMdp& mdp,
                            const Policy& target, const Policy& behavior,
                            const FeatureMap& features, const StepsizeSchedule& schedule,
                            const ProjectionBall& ball, long T, std::uint64_t seed,
                            long stride, std::optional<Eigen::VectorXd> theta0,
                            std::optional<int> start_state) {
    if (T < 0) {
        throw std::invalid_argument("T must be non-negative");
    }
    if (stride < 1) {
        throw std::invalid_argument("snapshot stride must be positive");
    }
    if (features.n_states() != mdp.n_states) {
        throw std::invalid_argument("feature map does not match the mdp state count");
    }
    const bool periodic =
        config.algo == Algorithm::PerEtd0 || config.algo == Algorithm::PerEtdLambda;
    const long per_iter = periodic ? static_cast<long>(config.b) + 1 : 1;

    LearnerState state = theta0.has_value()
                             ? LearnerState(config, std::move(*theta0))
                             : LearnerState(config, features.dim());
    if (state.theta.size() != features.dim()) {
        throw std::invalid_argument("theta0 dimension does not match the feature map");
    }
    TrajectorySampler sampler(mdp, target, behavior, seed, start_state);

    TrainingResult result;
    result.snapshots.push_back({0, 0, state.theta});
    for (long t = 1; t <= T; ++t) {
        switch (config.algo) {
        case Algorithm::Td0: {
            const Transition tr = sampler.sample_transition();
            const double eta = stepsize_at(schedule, state.t);
            state.theta = td0_step(state.theta, tr, eta, features, mdp.gamma);
            state.t += 1;
            if (!state.theta.allFinite() || state.theta.norm() > kDivergenceThreshold) {
                state.diverged = true;
            }
            break;
        }
        case Algorithm::Etd0: {
            const Transition tr = sampler.sample_transition();
            etd0_step(state, tr, stepsize_at(schedule, state.t), features, mdp.gamma, ball);
            break;
        }
        case Algorithm::EtdLambda: {
            const Transition tr = sampler.sample_transition();
            etd_lambda_step(state, tr, stepsize_at(schedule, state.t), features, mdp.gamma,
                            ball);
            break;
        }
        case Algorithm::PerEtd0:
            per_etd0_iterate(state, sampler, schedule, mdp.gamma, features, ball);
            break;
        case Algorithm::PerEtdLambda:
            per_etd_lambda_iterate(state, sampler, schedule, mdp.gamma, features, ball);
            break;
        }
        if (t % stride == 0 || t == T || state.diverged) {
            result.snapshots.push_back({t, t * per_iter, state.theta});
        }
        if (state.diverged) {
            result.diverged = true;
            break;
        }
    }
    return result;
}

} // namespace peretd
