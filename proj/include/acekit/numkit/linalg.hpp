#pragma once

#include <Eigen/Dense>

namespace acekit::numkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double expit(double eta) noexcept;
double logit(double p);

// log(1 + exp(eta)) without overflow.
double softplus(double eta) noexcept;

struct OlsFit {
    VectorXd coefficients;
    double residual_variance = 0.0;  // RSS / (n - k)
    MatrixXd covariance;             // residual_variance * (X'X)^{-1}
    VectorXd residuals;

    double standard_error(Eigen::Index j) const;
};

// Least squares through a column-pivoted QR factorization. The coefficient
// covariance comes from triangular solves against R; X'X is never inverted.
// Throws DimensionMismatch (rows differ, or n <= k) and RankDeficient.
OlsFit ols(const MatrixXd& design, const VectorXd& response);

struct LogisticOptions {
    int max_iterations = 100;
    double tolerance = 1e-10;          // on max-abs score X'(y - p)
    double coefficient_bound = 1e4;    // max-abs coefficient before declaring separation
    double pinned_probability = 1e-8;  // fitted min(p, 1-p) below this counts as pinned
    bool throw_on_separation = true;
};

struct LogisticFit {
    VectorXd coefficients;
    VectorXd fitted;  // fitted probabilities
    bool converged = false;
    bool separated = false;
    int iterations = 0;
    double score_norm = 0.0;
    double log_likelihood = 0.0;
};

// Bernoulli maximum likelihood by Newton / IRLS from a zero start, with step
// halving whenever the log-likelihood decreases.
LogisticFit logistic_irls(const MatrixXd& design, const VectorXd& response01,
                          const LogisticOptions& options = {});

double logistic_log_likelihood(const MatrixXd& design, const VectorXd& response01,
                               const VectorXd& coefficients);

// Prepends a column of ones.
MatrixXd with_intercept(const MatrixXd& columns);

}  // namespace acekit::numkit
