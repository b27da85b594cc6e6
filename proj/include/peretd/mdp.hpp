#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "peretd/errors.hpp"

namespace peretd {

/// Finite Markov decision process with deterministic rewards per (state, action).
///
/// Transition probabilities are stored per action: `transition[a](s, s2)` is the
/// probability of moving from `s` to `s2` when taking action `a`. Each such row
/// must be a probability vector. The discount factor lies strictly inside (0, 1).
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transition; ///< one row-stochastic matrix per action
    Eigen::MatrixXd reward;                  ///< (n_states x n_actions), deterministic
    double gamma = 0.0;
    double r_max = 0.0;                      ///< max |reward|, recorded at construction

    FiniteMdp() = default;
    FiniteMdp(std::vector<Eigen::MatrixXd> transition_in, Eigen::MatrixXd reward_in,
              double gamma_in);

    /// Probability row over successor states for one (state, action) pair.
    Eigen::MatrixXd::ConstRowXpr transition_row(int s, int a) const {
        return transition[static_cast<std::size_t>(a)].row(s);
    }
};

/// Stationary Markov policy: `probs(s, a)` is the probability of action `a` in
/// state `s`. Rows must sum to one within 1e-12.
struct Policy {
    Eigen::MatrixXd probs;

    Policy() = default;
    explicit Policy(Eigen::MatrixXd probs_in);

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }
};

/// State-to-state chain induced by running a policy in an MDP.
struct InducedChain {
    Eigen::MatrixXd p_pi; ///< row-stochastic (n_states x n_states)
    Eigen::VectorXd r_pi; ///< expected one-step reward per state
};

/// One sampled step, tagged with the importance ratio of the action taken.
struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    double rho = 1.0; ///< target probability over behavior probability, finite and >= 0
};

/// Importance ratio pi(a|s) / mu(a|s); raises CoverageError when mu(a|s) = 0
/// while pi(a|s) > 0.
double importance_ratio(const Policy& target, const Policy& behavior, int s, int a);

/// Draws a trajectory under the behavior policy, tagging each transition with
/// its importance ratio. Two samplers constructed with the same seed produce
/// bit-identical streams.
class TrajectorySampler {
public:
    /// Starts from `start_state` when given, otherwise from a draw of the
    /// behavior chain's stationary distribution.
    TrajectorySampler(const FiniteMdp& mdp, const Policy& target, const Policy& behavior,
                      std::uint64_t seed, std::optional<int> start_state = std::nullopt);

    /// Advances the trajectory by one step and returns the transition.
    Transition sample_transition();

    int current_state() const { return state_; }

private:
    const FiniteMdp* mdp_;
    const Policy* target_;
    const Policy* behavior_;
    std::mt19937_64 rng_;
    int state_;

    double next_uniform();
    int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs);
};

/// Builds the seven-state counterexample MDP together with its target and
/// behavior policies. Action 0 is the dashed action (uniform over the first
/// six states, reward 0), action 1 the solid action (to the last state,
/// reward 1). Both solid-action probabilities must lie strictly inside (0, 1).
std::tuple<FiniteMdp, Policy, Policy> baird_mdp(double p_solid_target,
                                                double p_solid_behavior);

/// State chain and expected rewards induced by `policy` in `mdp`.
InducedChain induced_chain(const FiniteMdp& mdp, const Policy& policy);

/// Unique stationary distribution of a row-stochastic matrix, solved from the
/// null space of (P^T - I) with a power-iteration fallback. Raises
/// ErgodicityError when the distribution is not unique or iteration fails to
/// converge.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, double tol = 1e-12);

/// Exact value function of an induced chain: solves (I - gamma P) v = r.
Eigen::VectorXd value_function(const InducedChain& chain, double gamma);

/// Largest importance ratio over pairs the target policy can actually take.
/// Raises CoverageError when the behavior policy fails to cover the target.
double rho_max(const Policy& target, const Policy& behavior);

/// Reads an MDP from a text stream. Format: a header line
/// `n_states n_actions gamma`, then one line per (state, action) pair:
/// `s a reward p(0) p(1) ... p(n_states-1)`.
FiniteMdp load_mdp(std::istream& in);
FiniteMdp load_mdp_file(const std::string& path);

/// Reads a policy from a text stream. Format: a header line
/// `n_states n_actions`, then one row of action probabilities per state.
Policy load_policy(std::istream& in);
Policy load_policy_file(const std::string& path);

} // namespace peretd
