#include "peretd/fixed_points.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "peretd/errors.hpp"

namespace peretd {

namespace {

double condition_number(const Eigen::MatrixXd& a) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smallest = sv(sv.size() - 1);
    if (smallest == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return sv(0) / smallest;
}

/// Pivoted-LU solve with a condition estimate; rejects systems whose condition
/// number exceeds 1e12 and verifies the residual afterwards.
Eigen::VectorXd solve_checked(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                              const std::string& context, double* condition_out) {
    const double cond = condition_number(a);
    if (condition_out != nullptr) {
        *condition_out = cond;
    }
    if (!(cond <= 1e12)) {
        throw NumericalError(context + ": key matrix is singular or ill-conditioned "
                             "(condition estimate " + std::to_string(cond) + ")");
    }
    const Eigen::VectorXd x = a.partialPivLu().solve(c);
    const double residual = (a * x - c).norm();
    if (!(residual <= 1e-10 * (1.0 + c.norm()))) {
        throw NumericalError(context + ": linear solve did not reach the required residual");
    }
    return x;
}

void check_chain_inputs(const Eigen::VectorXd& d_mu, const Eigen::MatrixXd& p_pi,
                        double gamma) {
    const Eigen::Index n = p_pi.rows();
    if (n == 0 || p_pi.cols() != n || d_mu.size() != n) {
        throw std::invalid_argument("d_mu and p_pi must share a non-empty state count");
    }
    if (!(gamma >= 0.0) || !(gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie in [0, 1)");
    }
}

} // namespace

Eigen::VectorXd emphatic_f(const Eigen::VectorXd& d_mu, const Eigen::MatrixXd& p_pi,
                           double gamma) {
    check_chain_inputs(d_mu, p_pi, gamma);
    const Eigen::Index n = p_pi.rows();
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(n, n) - gamma * p_pi.transpose();
    return solve_checked(a, d_mu, "emphatic weights", nullptr);
}

EmphaticWeights emphatic_weights(const Eigen::VectorXd& d_mu, const Eigen::MatrixXd& p_pi,
                                 double gamma, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    EmphaticWeights weights;
    weights.f = emphatic_f(d_mu, p_pi, gamma);
    weights.m = lambda * d_mu + (1.0 - lambda) * weights.f;
    return weights;
}

FixedPointResult etd0_fixed_point(const FeatureMap& features, const Eigen::VectorXd& f,
                                  const Eigen::MatrixXd& p_pi, const Eigen::VectorXd& r_pi,
                                  double gamma) {
    check_chain_inputs(f, p_pi, gamma);
    if (features.n_states() != p_pi.rows() || r_pi.size() != p_pi.rows()) {
        throw std::invalid_argument("feature map, f, and r_pi must share the state count");
    }
    const Eigen::Index n = p_pi.rows();
    const Eigen::MatrixXd bellman = Eigen::MatrixXd::Identity(n, n) - gamma * p_pi;
    FixedPointResult result;
    result.model.a_matrix =
        features.phi.transpose() * f.asDiagonal() * bellman * features.phi;
    result.model.c_vector = features.phi.transpose() * f.asDiagonal() * r_pi;
    result.theta = solve_checked(result.model.a_matrix, result.model.c_vector,
                                 "etd0 fixed point", &result.condition);
    return result;
}

FixedPointResult etd_lambda_fixed_point(const FeatureMap& features, const Eigen::VectorXd& f,
                                        const Eigen::VectorXd& d_mu,
                                        const Eigen::MatrixXd& p_pi,
                                        const Eigen::VectorXd& r_pi, double gamma,
                                        double lambda) {
    check_chain_inputs(d_mu, p_pi, gamma);
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    if (features.n_states() != p_pi.rows() || r_pi.size() != p_pi.rows() ||
        f.size() != p_pi.rows()) {
        throw std::invalid_argument("feature map, f, d_mu, and r_pi must share the state count");
    }
    const Eigen::Index n = p_pi.rows();
    const Eigen::VectorXd m = lambda * d_mu + (1.0 - lambda) * f;
    const Eigen::MatrixXd lambda_resolvent =
        Eigen::MatrixXd::Identity(n, n) - gamma * lambda * p_pi;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lambda_resolvent);
    const Eigen::MatrixXd bellman = Eigen::MatrixXd::Identity(n, n) - gamma * p_pi;

    FixedPointResult result;
    result.model.a_matrix =
        features.phi.transpose() * m.asDiagonal() * lu.solve(bellman * features.phi);
    result.model.c_vector = features.phi.transpose() * m.asDiagonal() * lu.solve(r_pi);
    result.theta = solve_checked(result.model.a_matrix, result.model.c_vector,
                                 "etd-lambda fixed point", &result.condition);
    return result;
}

FixedPointResult finite_b_fixed_point(const FeatureMap& features, const Eigen::VectorXd& d_mu,
                                      const Eigen::MatrixXd& p_pi, const Eigen::VectorXd& r_pi,
                                      double gamma, double lambda, int b) {
    check_chain_inputs(d_mu, p_pi, gamma);
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    if (b < 0) {
        throw std::invalid_argument("b must be non-negative");
    }
    if (features.n_states() != p_pi.rows() || r_pi.size() != p_pi.rows()) {
        throw std::invalid_argument("feature map, d_mu, and r_pi must share the state count");
    }
    const Eigen::MatrixXd phi_d_mu = features.phi.transpose() * d_mu.asDiagonal();
    Eigen::VectorXd f_bar = d_mu;
    Eigen::MatrixXd beta_bar = phi_d_mu;
    for (int tau = 1; tau <= b; ++tau) {
        f_bar = d_mu + gamma * p_pi.transpose() * f_bar;
        beta_bar = lambda * phi_d_mu +
                   (1.0 - lambda) * features.phi.transpose() * f_bar.asDiagonal() +
                   gamma * lambda * beta_bar * p_pi;
    }
    const Eigen::Index n = p_pi.rows();
    const Eigen::MatrixXd bellman = Eigen::MatrixXd::Identity(n, n) - gamma * p_pi;

    FixedPointResult result;
    result.model.a_matrix = beta_bar * bellman * features.phi;
    result.model.c_vector = beta_bar * r_pi;
    result.theta = solve_checked(result.model.a_matrix, result.model.c_vector,
                                 "finite-b fixed point (b = " + std::to_string(b) + ")",
                                 &result.condition);
    return result;
}

double monotonicity_constant(const Eigen::MatrixXd& a_matrix) {
    if (a_matrix.rows() == 0 || a_matrix.rows() != a_matrix.cols()) {
        throw std::invalid_argument("key matrix must be square and non-empty");
    }
    const Eigen::MatrixXd sym = 0.5 * (a_matrix + a_matrix.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const double mu = eig.eigenvalues()(0);
    if (!(mu > 0.0)) {
        throw PositiveDefinitenessError(
            "key matrix is not positive definite: smallest symmetric-part eigenvalue is " +
            std::to_string(mu));
    }
    return mu;
}

double lipschitz_constant(const Eigen::MatrixXd& a_matrix) {
    if (a_matrix.rows() == 0) {
        throw std::invalid_argument("matrix must be non-empty");
    }
    return a_matrix.jacobiSvd().singularValues()(0);
}

double approx_error(const FeatureMap& features, const Eigen::VectorXd& theta_star,
                    const Eigen::VectorXd& v_pi) {
    if (v_pi.size() != features.n_states()) {
        throw std::invalid_argument("v_pi must have one entry per state");
    }
    return (value_estimate(features, theta_star) - v_pi).cwiseAbs().maxCoeff();
}

TheoryConstants theory_constants(const OperatorModel& model, const FeatureMap& features,
                                 const Eigen::VectorXd& theta_star,
                                 const Eigen::VectorXd& v_pi) {
    TheoryConstants out;
    out.mu = monotonicity_constant(model.a_matrix);
    out.lip = lipschitz_constant(model.a_matrix);
    out.t0 = 8.0 * out.lip * out.lip / (out.mu * out.mu);
    out.eps_approx = approx_error(features, theta_star, v_pi);
    return out;
}

int select_b(const BSelectorParams& params, double gamma, long T, double mu, double b_phi,
             SelectorVariant variant) {
    if (!(params.xi > 0.0) || !(params.xi < 1.0)) {
        throw std::invalid_argument("xi must lie strictly inside (0, 1)");
    }
    if (params.c_b.has_value() && !(*params.c_b > 0.0)) {
        throw std::invalid_argument("c_b must be positive");
    }
    if (!(params.rho_max > 0.0)) {
        throw std::invalid_argument("rho_max must be positive");
    }
    if (T < 2) {
        throw std::invalid_argument("T must be at least 2");
    }
    const double log_inv_xi = std::log(1.0 / params.xi);

    double best = 0.0;
    if (params.c_b.has_value()) {
        if (!(mu > 0.0) || !(b_phi > 0.0)) {
            throw std::invalid_argument("mu and b_phi must be positive for the bias branch");
        }
        const double bias_branch =
            std::ceil((std::log(mu) - std::log(5.0 * *params.c_b * b_phi)) / std::log(params.xi));
        best = std::max(best, bias_branch);
    }

    double denom = log_inv_xi;
    if (variant == SelectorVariant::Etd0) {
        const double growth = gamma * gamma * params.rho_max;
        if (growth > 1.0) {
            denom = std::log(growth) + log_inv_xi;
        }
    } else {
        denom = std::log(params.rho_max) + log_inv_xi;
    }
    if (!(denom > 0.0)) {
        throw std::invalid_argument("variance branch is undefined: rho_max and xi make the "
                                    "log denominator non-positive");
    }
    best = std::max(best, std::log(static_cast<double>(T)) / denom);

    const double rounded = std::ceil(best);
    return static_cast<int>(std::max(1.0, rounded));
}

} // namespace peretd
