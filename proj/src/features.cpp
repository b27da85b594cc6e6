#include "peretd/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace peretd {

FeatureMap::FeatureMap(Eigen::MatrixXd phi_in) : phi(std::move(phi_in)) {
    if (phi.rows() == 0 || phi.cols() == 0) {
        throw std::invalid_argument("feature matrix must be non-empty");
    }
    if (!phi.allFinite()) {
        throw std::invalid_argument("feature matrix must be finite");
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = 1e-10 * sv(0);
    if (phi.cols() > phi.rows() || sv(sv.size() - 1) <= cutoff) {
        throw RankDeficiencyError("feature matrix does not have full column rank");
    }
    b_phi = phi.rowwise().norm().maxCoeff();
}

ProjectionBall ProjectionBall::with_radius(double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw std::invalid_argument("projection radius must be positive and finite");
    }
    ProjectionBall ball;
    ball.radius = radius;
    return ball;
}

Eigen::VectorXd value_estimate(const FeatureMap& features, const Eigen::VectorXd& theta) {
    if (theta.size() != features.dim()) {
        throw std::invalid_argument("theta dimension does not match the feature map");
    }
    return features.phi * theta;
}

Eigen::VectorXd project_ball(Eigen::VectorXd theta, const ProjectionBall& ball) {
    if (!ball.enabled()) {
        return theta;
    }
    const double norm = theta.norm();
    if (norm > *ball.radius) {
        theta *= *ball.radius / norm;
    }
    return theta;
}

Eigen::VectorXd weighted_projection(const Eigen::VectorXd& v, const FeatureMap& features,
                                    const Eigen::VectorXd& weights) {
    if (v.size() != features.n_states() || weights.size() != features.n_states()) {
        throw std::invalid_argument("value and weight vectors must have one entry per state");
    }
    if ((weights.array() < 0.0).any()) {
        throw std::invalid_argument("projection weights must be non-negative");
    }
    const Eigen::MatrixXd weighted = weights.cwiseSqrt().asDiagonal() * features.phi;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(weighted);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv(0) == 0.0 || sv(sv.size() - 1) <= 1e-12 * sv(0)) {
        throw RankDeficiencyError("weighted projection is rank-deficient: the weights "
                                  "do not touch enough of the feature span");
    }
    const Eigen::MatrixXd gram = features.phi.transpose() * weights.asDiagonal() * features.phi;
    const Eigen::VectorXd rhs = features.phi.transpose() * weights.asDiagonal() * v;
    return gram.ldlt().solve(rhs);
}

double default_radius(const FeatureMap& features, double r_max, double gamma, double mu) {
    if (mu <= 0.0) {
        throw std::invalid_argument("mu must be positive to derive a projection radius");
    }
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie strictly inside (0, 1)");
    }
    if (r_max < 0.0) {
        throw std::invalid_argument("r_max must be non-negative");
    }
    const double phi_norm = features.phi.jacobiSvd().singularValues()(0);
    return phi_norm * r_max / ((1.0 - gamma) * mu);
}

FeatureMap phi1() {
    Eigen::MatrixXd phi(7, 1);
    phi << 0.35, 0.35, 0.35, 0.35, 0.35, 0.35, 0.37;
    return FeatureMap(std::move(phi));
}

FeatureMap phi2() {
    Eigen::MatrixXd phi(7, 2);
    phi << 0.3425, 0.0171,
           0.1902, 0.4248,
           0.1354, 0.7600,
           0.1357, 0.7973,
           0.8674, 0.8774,
           0.5166, 0.9493,
           0.3094, 0.8535;
    return FeatureMap(std::move(phi));
}

FeatureMap phi3() {
    Eigen::MatrixXd phi(7, 2);
    phi << 0.5162, 0.9013,
           0.5128, 0.5999,
           0.2890, 0.4649,
           0.3399, 0.5334,
           0.3150, 0.2278,
           0.6670, 0.4610,
           0.3706, 0.1457;
    return FeatureMap(std::move(phi));
}

FeatureMap tabular_features(int n_states) {
    if (n_states < 1) {
        throw std::invalid_argument("tabular feature map needs at least one state");
    }
    return FeatureMap(Eigen::MatrixXd::Identity(n_states, n_states));
}

FeatureMap feature_preset(const std::string& name) {
    if (name == "phi1") {
        return phi1();
    }
    if (name == "phi2") {
        return phi2();
    }
    if (name == "phi3") {
        return phi3();
    }
    if (name.rfind("tabular:", 0) == 0) {
        const std::string count = name.substr(8);
        std::size_t used = 0;
        int n = 0;
        try {
            n = std::stoi(count, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("unknown feature preset: " + name);
        }
        if (used != count.size()) {
            throw std::invalid_argument("unknown feature preset: " + name);
        }
        return tabular_features(n);
    }
    throw std::invalid_argument("unknown feature preset: " + name);
}

FeatureMap load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open feature file: " + path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) {
                    ++used;
                }
                if (used != cell.size()) {
                    throw std::invalid_argument("");
                }
            } catch (const std::exception&) {
                throw std::invalid_argument("feature file has a non-numeric cell: " + cell);
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::invalid_argument("feature file rows have inconsistent widths");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw std::invalid_argument("feature file is empty: " + path);
    }
    Eigen::MatrixXd phi(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int s = 0; s < phi.rows(); ++s) {
        for (int j = 0; j < phi.cols(); ++j) {
            phi(s, j) = rows[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
        }
    }
    return FeatureMap(std::move(phi));
}

} // namespace peretd
