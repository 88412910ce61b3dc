#pragma once

#include <Eigen/Dense>

namespace acekit {

// Y | (X, T) ~ N(d + delta*T + b'X, phi), T ~ Bernoulli(theta),
// X | T ~ N(mu_T, Sigma_T). Homoscedastic when sigma0 == sigma1.
struct NormalLinearModel {
    Eigen::Index p = 0;
    double d = 0.0;
    double delta = 0.0;
    Eigen::VectorXd b;
    double phi = 1.0;
    double theta = 0.5;
    Eigen::VectorXd mu0;
    Eigen::VectorXd mu1;
    Eigen::MatrixXd sigma0;
    Eigen::MatrixXd sigma1;

    bool homoscedastic() const { return sigma0 == sigma1; }
    // Throws WrongShape / DomainError / NotPositiveDefinite.
    void validate() const;
};

// All-binary model: X_j ~ Bernoulli(pi_j) independently,
// logit P(T=1 | X) = c + a'X, logit P(Y=1 | T, X) = d + delta*T + b'X.
struct BinaryLogisticModel {
    Eigen::Index p = 0;
    Eigen::VectorXd pi;
    double c = 0.0;
    Eigen::VectorXd a;
    double d = 0.0;
    double delta = 0.0;
    Eigen::VectorXd b;

    void validate() const;
};

// Continuous covariates with logistic treatment assignment:
// X ~ N(mean, cov), logit P(T=1 | X) = c + a'X,
// Y = d + delta*T + b'X + T*h'X + N(0, phi). The average effect is delta + h'mean.
struct LogisticAssignmentModel {
    Eigen::Index p = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double c = 0.0;
    Eigen::VectorXd a;
    double d = 0.0;
    double delta = 0.0;
    Eigen::VectorXd b;
    Eigen::VectorXd effect_modifier;  // h; zero means a constant effect
    double phi = 1.0;

    void validate() const;
    double true_ace() const { return delta + effect_modifier.dot(mean); }
    // E(Y | X = x, T = t)
    double outcome_mean(int t, const Eigen::VectorXd& x) const;
    double propensity(const Eigen::VectorXd& x) const;
};

}  // namespace acekit
