#include "peretd/mdp.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace peretd {

namespace {

void check_probability_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                           const std::string& what) {
    if ((row.array() < 0.0).any()) {
        throw std::invalid_argument(what + " has a negative probability entry");
    }
    const double sum = row.sum();
    if (std::abs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument(what + " does not sum to one (sum = " +
                                    std::to_string(sum) + ")");
    }
}

} // namespace

FiniteMdp::FiniteMdp(std::vector<Eigen::MatrixXd> transition_in, Eigen::MatrixXd reward_in,
                     double gamma_in)
    : transition(std::move(transition_in)), reward(std::move(reward_in)), gamma(gamma_in) {
    n_actions = static_cast<int>(transition.size());
    if (n_actions == 0) {
        throw std::invalid_argument("mdp needs at least one action");
    }
    n_states = static_cast<int>(transition[0].rows());
    if (n_states == 0) {
        throw std::invalid_argument("mdp needs at least one state");
    }
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie strictly inside (0, 1)");
    }
    for (int a = 0; a < n_actions; ++a) {
        const Eigen::MatrixXd& p = transition[static_cast<std::size_t>(a)];
        if (p.rows() != n_states || p.cols() != n_states) {
            throw std::invalid_argument("transition matrix for action " + std::to_string(a) +
                                        " has inconsistent shape");
        }
        for (int s = 0; s < n_states; ++s) {
            check_probability_row(p.row(s), "transition row (s=" + std::to_string(s) +
                                                ", a=" + std::to_string(a) + ")");
        }
    }
    if (reward.rows() != n_states || reward.cols() != n_actions) {
        throw std::invalid_argument("reward matrix must be n_states x n_actions");
    }
    if (!reward.allFinite()) {
        throw std::invalid_argument("rewards must be finite");
    }
    r_max = reward.cwiseAbs().maxCoeff();
}

Policy::Policy(Eigen::MatrixXd probs_in) : probs(std::move(probs_in)) {
    if (probs.rows() == 0 || probs.cols() == 0) {
        throw std::invalid_argument("policy must have at least one state and action");
    }
    for (int s = 0; s < probs.rows(); ++s) {
        check_probability_row(probs.row(s), "policy row (s=" + std::to_string(s) + ")");
    }
}

double importance_ratio(const Policy& target, const Policy& behavior, int s, int a) {
    const double pi = target.probs(s, a);
    const double mu = behavior.probs(s, a);
    if (mu == 0.0) {
        if (pi > 0.0) {
            throw CoverageError("behavior policy does not cover the target policy: "
                                "pi(a|s) > 0 but mu(a|s) = 0 at s=" +
                                std::to_string(s) + ", a=" + std::to_string(a) +
                                " (coverage assumption violated)");
        }
        return 0.0;
    }
    return pi / mu;
}

TrajectorySampler::TrajectorySampler(const FiniteMdp& mdp, const Policy& target,
                                     const Policy& behavior, std::uint64_t seed,
                                     std::optional<int> start_state)
    : mdp_(&mdp), target_(&target), behavior_(&behavior), rng_(seed), state_(0) {
    if (target.n_states() != mdp.n_states || target.n_actions() != mdp.n_actions ||
        behavior.n_states() != mdp.n_states || behavior.n_actions() != mdp.n_actions) {
        throw std::invalid_argument("policy shape does not match the mdp");
    }
    if (start_state.has_value()) {
        if (*start_state < 0 || *start_state >= mdp.n_states) {
            throw std::invalid_argument("start_state out of range");
        }
        state_ = *start_state;
    } else {
        const Eigen::VectorXd d_mu =
            stationary_distribution(induced_chain(mdp, behavior).p_pi);
        state_ = sample_categorical(d_mu.transpose());
    }
}

double TrajectorySampler::next_uniform() {
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

int TrajectorySampler::sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
    const double u = next_uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (int i = 0; i < probs.size(); ++i) {
        const double p = probs(i);
        if (p > 0.0) {
            last_positive = i;
        }
        acc += p;
        if (u < acc) {
            return i;
        }
    }
    return last_positive;
}

Transition TrajectorySampler::sample_transition() {
    Transition tr;
    tr.s = state_;
    tr.a = sample_categorical(behavior_->probs.row(tr.s));
    tr.r = mdp_->reward(tr.s, tr.a);
    tr.s_next = sample_categorical(mdp_->transition_row(tr.s, tr.a));
    tr.rho = importance_ratio(*target_, *behavior_, tr.s, tr.a);
    state_ = tr.s_next;
    return tr;
}

std::tuple<FiniteMdp, Policy, Policy> baird_mdp(double p_solid_target,
                                                double p_solid_behavior) {
    if (!(p_solid_target > 0.0) || !(p_solid_target < 1.0)) {
        throw std::invalid_argument("p_solid_target must lie strictly inside (0, 1)");
    }
    if (!(p_solid_behavior > 0.0) || !(p_solid_behavior < 1.0)) {
        throw std::invalid_argument("p_solid_behavior must lie strictly inside (0, 1)");
    }
    constexpr int n = 7;
    Eigen::MatrixXd dashed = Eigen::MatrixXd::Zero(n, n);
    dashed.leftCols(n - 1).setConstant(1.0 / (n - 1));
    Eigen::MatrixXd solid = Eigen::MatrixXd::Zero(n, n);
    solid.col(n - 1).setOnes();
    Eigen::MatrixXd reward(n, 2);
    reward.col(0).setZero();
    reward.col(1).setOnes();
    FiniteMdp mdp({dashed, solid}, reward, 0.99);

    Eigen::MatrixXd target_probs(n, 2);
    target_probs.col(0).setConstant(1.0 - p_solid_target);
    target_probs.col(1).setConstant(p_solid_target);
    Eigen::MatrixXd behavior_probs(n, 2);
    behavior_probs.col(0).setConstant(1.0 - p_solid_behavior);
    behavior_probs.col(1).setConstant(p_solid_behavior);
    return {std::move(mdp), Policy(std::move(target_probs)), Policy(std::move(behavior_probs))};
}

InducedChain induced_chain(const FiniteMdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
        throw std::invalid_argument("policy shape does not match the mdp");
    }
    InducedChain chain;
    chain.p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    chain.r_pi = Eigen::VectorXd::Zero(mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a) {
        chain.p_pi += policy.probs.col(a).asDiagonal() * mdp.transition[static_cast<std::size_t>(a)];
        chain.r_pi += policy.probs.col(a).cwiseProduct(mdp.reward.col(a));
    }
    return chain;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, double tol) {
    const int n = static_cast<int>(p.rows());
    if (n == 0 || p.cols() != n) {
        throw std::invalid_argument("transition matrix must be square and non-empty");
    }
    for (int s = 0; s < n; ++s) {
        if ((p.row(s).array() < 0.0).any() || std::abs(p.row(s).sum() - 1.0) > 1e-9) {
            throw std::invalid_argument("transition matrix must be row-stochastic");
        }
    }
    if (n == 1) {
        return Eigen::VectorXd::Ones(1);
    }

    const Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < n - 1) {
        throw ErgodicityError("stationary distribution is not unique: the chain has "
                              "more than one recurrent class (ergodicity violated)");
    }

    Eigen::MatrixXd a_aug(n + 1, n);
    a_aug.topRows(n) = a;
    a_aug.bottomRows(1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    Eigen::VectorXd d = a_aug.colPivHouseholderQr().solve(b);

    const auto acceptable = [&](const Eigen::VectorXd& cand) {
        return cand.allFinite() && cand.minCoeff() >= -1e-12 &&
               (cand.transpose() * p - cand.transpose()).cwiseAbs().sum() <= tol;
    };

    if (!acceptable(d)) {
        d = Eigen::VectorXd::Constant(n, 1.0 / n);
        constexpr long max_iters = 1000000;
        bool converged = false;
        for (long it = 0; it < max_iters; ++it) {
            Eigen::VectorXd next = p.transpose() * d;
            next /= next.sum();
            const double change = (next - d).cwiseAbs().sum();
            d = std::move(next);
            if (change <= tol) {
                converged = true;
                break;
            }
        }
        if (!converged || !acceptable(d)) {
            throw ErgodicityError("power iteration failed to converge to a stationary "
                                  "distribution (ergodicity violated)");
        }
    }

    d = d.cwiseMax(0.0);
    d /= d.sum();
    return d;
}

Eigen::VectorXd value_function(const InducedChain& chain, double gamma) {
    const int n = static_cast<int>(chain.p_pi.rows());
    if (chain.r_pi.size() != n) {
        throw std::invalid_argument("induced chain has inconsistent shapes");
    }
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie strictly inside (0, 1)");
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - gamma * chain.p_pi;
    const Eigen::VectorXd v = a.partialPivLu().solve(chain.r_pi);
    const double residual = (a * v - chain.r_pi).norm();
    if (!(residual <= 1e-10 * (1.0 + chain.r_pi.norm()))) {
        throw NumericalError("value function solve did not reach the required residual");
    }
    return v;
}

double rho_max(const Policy& target, const Policy& behavior) {
    if (target.probs.rows() != behavior.probs.rows() ||
        target.probs.cols() != behavior.probs.cols()) {
        throw std::invalid_argument("target and behavior policies must share a shape");
    }
    double best = 0.0;
    for (int s = 0; s < target.probs.rows(); ++s) {
        for (int a = 0; a < target.probs.cols(); ++a) {
            if (target.probs(s, a) > 0.0) {
                best = std::max(best, importance_ratio(target, behavior, s, a));
            }
        }
    }
    return best;
}

namespace {

[[noreturn]] void malformed(const std::string& what) {
    throw std::invalid_argument("malformed file: " + what);
}

} // namespace

FiniteMdp load_mdp(std::istream& in) {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    if (!(in >> n_states >> n_actions >> gamma)) {
        malformed("expected header `n_states n_actions gamma`");
    }
    if (n_states < 1 || n_actions < 1) {
        malformed("state and action counts must be positive");
    }
    std::vector<Eigen::MatrixXd> transition(
        static_cast<std::size_t>(n_actions),
        Eigen::MatrixXd::Zero(n_states, n_states));
    Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(n_states, n_actions);
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(n_states),
                                        std::vector<bool>(static_cast<std::size_t>(n_actions)));
    for (int line = 0; line < n_states * n_actions; ++line) {
        int s = 0;
        int a = 0;
        double r = 0.0;
        if (!(in >> s >> a >> r)) {
            malformed("expected `s a reward p(0) ... p(n_states-1)` for every "
                      "(state, action) pair");
        }
        if (s < 0 || s >= n_states || a < 0 || a >= n_actions) {
            malformed("state or action index out of range on row " + std::to_string(line));
        }
        if (seen[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) {
            malformed("duplicate row for s=" + std::to_string(s) + ", a=" + std::to_string(a));
        }
        seen[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = true;
        for (int s2 = 0; s2 < n_states; ++s2) {
            if (!(in >> transition[static_cast<std::size_t>(a)](s, s2))) {
                malformed("probability row for s=" + std::to_string(s) +
                          ", a=" + std::to_string(a) + " is incomplete");
            }
        }
        reward(s, a) = r;
    }
    return FiniteMdp(std::move(transition), std::move(reward), gamma);
}

FiniteMdp load_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open mdp file: " + path);
    }
    return load_mdp(in);
}

Policy load_policy(std::istream& in) {
    int n_states = 0;
    int n_actions = 0;
    if (!(in >> n_states >> n_actions)) {
        malformed("expected header `n_states n_actions`");
    }
    if (n_states < 1 || n_actions < 1) {
        malformed("state and action counts must be positive");
    }
    Eigen::MatrixXd probs(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            if (!(in >> probs(s, a))) {
                malformed("policy row for s=" + std::to_string(s) + " is incomplete");
            }
        }
    }
    return Policy(std::move(probs));
}

Policy load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open policy file: " + path);
    }
    return load_policy(in);
}

} // namespace peretd
