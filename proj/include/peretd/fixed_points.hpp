#pragma once

#include <optional>

#include <Eigen/Dense>

#include "peretd/features.hpp"
#include "peretd/mdp.hpp"

namespace peretd {

/// Per-state emphatic weights: f solves f = d_mu + gamma * P_pi^T f, and
/// m = lambda * d_mu + (1 - lambda) * f componentwise.
struct EmphaticWeights {
    Eigen::VectorXd f;
    Eigen::VectorXd m;
};

/// Analytic affine operator: value at theta is a_matrix * theta - c_vector,
/// so the fixed point satisfies a_matrix * theta = c_vector.
struct OperatorModel {
    Eigen::MatrixXd a_matrix;
    Eigen::VectorXd c_vector;

    Eigen::VectorXd value_at(const Eigen::VectorXd& theta) const {
        return a_matrix * theta - c_vector;
    }
};

/// Operator model together with its fixed point and the condition number of
/// the key matrix.
struct FixedPointResult {
    OperatorModel model;
    Eigen::VectorXd theta;
    double condition = 0.0;
};

/// Constants entering the diminishing-stepsize analysis.
struct TheoryConstants {
    double mu = 0.0;         ///< strong-monotonicity constant of the key matrix
    double lip = 0.0;        ///< Lipschitz (spectral-norm) constant
    double t0 = 0.0;         ///< 8 * lip^2 / mu^2
    double eps_approx = 0.0; ///< sup-norm distance of the fixed point to V_pi
};

/// Inputs to the period-length selector. `c_b` is a user-supplied bias
/// constant; when absent the selector's first branch is skipped.
struct BSelectorParams {
    double xi = 0.0; ///< max{gamma, chi} with chi the chain's mixing rate, in (0,1)
    std::optional<double> c_b;
    double rho_max = 1.0;
};

enum class SelectorVariant { Etd0, EtdLambda };

/// Solves (I - gamma * P_pi^T) f = d_mu; residual held to 1e-10.
Eigen::VectorXd emphatic_f(const Eigen::VectorXd& d_mu, const Eigen::MatrixXd& p_pi,
                           double gamma);

/// Emphatic f together with the lambda-mixed weights m.
EmphaticWeights emphatic_weights(const Eigen::VectorXd& d_mu, const Eigen::MatrixXd& p_pi,
                                 double gamma, double lambda);

/// Fixed point of emphatic TD(0): A = Phi^T F (I - gamma P_pi) Phi,
/// c = Phi^T F r_pi, theta = A^{-1} c.
FixedPointResult etd0_fixed_point(const FeatureMap& features, const Eigen::VectorXd& f,
                                  const Eigen::MatrixXd& p_pi, const Eigen::VectorXd& r_pi,
                                  double gamma);

/// Fixed point of emphatic TD(lambda):
/// A = Phi^T M (I - gamma lambda P_pi)^{-1} (I - gamma P_pi) Phi and
/// c = Phi^T M (I - gamma lambda P_pi)^{-1} r_pi with M = diag(m).
FixedPointResult etd_lambda_fixed_point(const FeatureMap& features, const Eigen::VectorXd& f,
                                        const Eigen::VectorXd& d_mu,
                                        const Eigen::MatrixXd& p_pi,
                                        const Eigen::VectorXd& r_pi, double gamma,
                                        double lambda);

/// Fixed point targeted by periodic restarts with period b: runs the truncated
/// weight recursions f_tau = d_mu + gamma P_pi^T f_{tau-1} and
/// beta_tau = lambda Phi^T D_mu + (1 - lambda) Phi^T F_tau + gamma lambda beta_{tau-1} P_pi
/// for b steps and solves (beta_b (I - gamma P_pi) Phi) theta = beta_b r_pi.
FixedPointResult finite_b_fixed_point(const FeatureMap& features, const Eigen::VectorXd& d_mu,
                                      const Eigen::MatrixXd& p_pi, const Eigen::VectorXd& r_pi,
                                      double gamma, double lambda, int b);

/// Smallest eigenvalue of the symmetric part (A + A^T) / 2; raises
/// PositiveDefinitenessError when it is not strictly positive.
double monotonicity_constant(const Eigen::MatrixXd& a_matrix);

/// Spectral norm (largest singular value).
double lipschitz_constant(const Eigen::MatrixXd& a_matrix);

/// Sup-norm approximation error ||Phi theta_star - v_pi||_inf.
double approx_error(const FeatureMap& features, const Eigen::VectorXd& theta_star,
                    const Eigen::VectorXd& v_pi);

/// Bundles the monotonicity, Lipschitz, stepsize-offset, and approximation
/// constants of one operator model.
TheoryConstants theory_constants(const OperatorModel& model, const FeatureMap& features,
                                 const Eigen::VectorXd& theta_star,
                                 const Eigen::VectorXd& v_pi);

/// Period length prescribed by the diminishing-stepsize theory: the maximum of
/// the bias branch (skipped when c_b is absent) and the variance branch for
/// the chosen variant, rounded up and floored at 1.
int select_b(const BSelectorParams& params, double gamma, long T, double mu, double b_phi,
             SelectorVariant variant);

} // namespace peretd
