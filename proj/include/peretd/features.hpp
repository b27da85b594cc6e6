#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "peretd/errors.hpp"

namespace peretd {

/// Linear feature map over a finite state space. Row s holds phi(s). The
/// matrix must have full column rank (checked at construction with a relative
/// singular-value tolerance of 1e-10); `b_phi` records the largest row norm.
struct FeatureMap {
    Eigen::MatrixXd phi; ///< (n_states x d)
    double b_phi = 0.0;

    FeatureMap() = default;
    explicit FeatureMap(Eigen::MatrixXd phi_in);

    int n_states() const { return static_cast<int>(phi.rows()); }
    int dim() const { return static_cast<int>(phi.cols()); }
    Eigen::MatrixXd::ConstRowXpr row(int s) const { return phi.row(s); }
};

/// Euclidean ball the iterates are projected onto; disabled means no projection.
struct ProjectionBall {
    std::optional<double> radius;

    static ProjectionBall disabled() { return ProjectionBall{}; }
    static ProjectionBall with_radius(double radius);
    bool enabled() const { return radius.has_value(); }
};

/// Value estimate over all states: phi * theta.
Eigen::VectorXd value_estimate(const FeatureMap& features, const Eigen::VectorXd& theta);

/// Euclidean projection onto the ball; identity when the ball is disabled.
Eigen::VectorXd project_ball(Eigen::VectorXd theta, const ProjectionBall& ball);

/// Weighted least-squares projection of a state-value vector onto the feature
/// span: solves the normal equations phi^T W phi theta = phi^T W v. Raises
/// RankDeficiencyError when the weighted Gram matrix is singular.
Eigen::VectorXd weighted_projection(const Eigen::VectorXd& v, const FeatureMap& features,
                                    const Eigen::VectorXd& weights);

/// Projection radius ||phi^T||_2 * r_max / ((1 - gamma) * mu) used by the
/// diminishing-stepsize theory; mu must be positive.
double default_radius(const FeatureMap& features, double r_max, double gamma, double mu);

/// Seven-state feature presets and the exact tabular (one-hot) map.
FeatureMap phi1();
FeatureMap phi2();
FeatureMap phi3();
FeatureMap tabular_features(int n_states);

/// Looks up a preset by name: "phi1", "phi2", "phi3", or "tabular:<n>".
FeatureMap feature_preset(const std::string& name);

/// Loads a feature matrix from a CSV file with one row per state.
FeatureMap load_features_csv(const std::string& path);

} // namespace peretd
