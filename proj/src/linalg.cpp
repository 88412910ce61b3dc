#include "acekit/numkit/linalg.hpp"

#include <cmath>
#include <string>

#include "acekit/error.hpp"

namespace acekit::numkit {

double expit(double eta) noexcept {
    if (eta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        fail(ErrorKind::DomainError, "logit requires p in (0,1), got " + std::to_string(p));
    }
    return std::log(p / (1.0 - p));
}

double softplus(double eta) noexcept {
    if (eta > 0.0) {
        return eta + std::log1p(std::exp(-eta));
    }
    return std::log1p(std::exp(eta));
}

double OlsFit::standard_error(Eigen::Index j) const {
    return std::sqrt(std::max(covariance(j, j), 0.0));
}

namespace {

void require_finite(const MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        fail(ErrorKind::DomainError, std::string(what) + " contains non-finite entries");
    }
}

}  // namespace

OlsFit ols(const MatrixXd& design, const VectorXd& response) {
    const Eigen::Index n = design.rows();
    const Eigen::Index k = design.cols();
    if (response.size() != n) {
        fail(ErrorKind::DimensionMismatch, "ols: design has " + std::to_string(n) +
                                               " rows but response has " +
                                               std::to_string(response.size()));
    }
    if (n <= k) {
        fail(ErrorKind::DimensionMismatch, "ols: need more rows than columns (n=" +
                                               std::to_string(n) + ", k=" + std::to_string(k) +
                                               ")");
    }
    require_finite(design, "ols design");
    require_finite(response, "ols response");

    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    if (qr.rank() < k) {
        fail(ErrorKind::RankDeficient, "ols: design has rank " + std::to_string(qr.rank()) +
                                           " < " + std::to_string(k) + " columns");
    }

    OlsFit fit;
    fit.coefficients = qr.solve(response);
    fit.residuals = response - design * fit.coefficients;
    fit.residual_variance = fit.residuals.squaredNorm() / static_cast<double>(n - k);

    // (X'X)^{-1} = P R^{-1} R^{-T} P'
    const MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
    const MatrixXd permuted = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation();
    MatrixXd xtx_inv = perm * permuted * perm.transpose();
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.transpose()).eval();
    fit.covariance = fit.residual_variance * xtx_inv;
    return fit;
}

double logistic_log_likelihood(const MatrixXd& design, const VectorXd& response01,
                               const VectorXd& coefficients) {
    const VectorXd eta = design * coefficients;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += response01(i) * eta(i) - softplus(eta(i));
    }
    return ll;
}

LogisticFit logistic_irls(const MatrixXd& design, const VectorXd& response01,
                          const LogisticOptions& options) {
    const Eigen::Index n = design.rows();
    const Eigen::Index k = design.cols();
    if (response01.size() != n) {
        fail(ErrorKind::DimensionMismatch, "logistic_irls: design/response row mismatch");
    }
    if (n <= k) {
        fail(ErrorKind::DimensionMismatch, "logistic_irls: need more rows than columns");
    }
    require_finite(design, "logistic design");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (response01(i) != 0.0 && response01(i) != 1.0) {
            fail(ErrorKind::DomainError, "logistic_irls: response row " + std::to_string(i) +
                                             " is not 0/1");
        }
    }
    {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
        if (qr.rank() < k) {
            fail(ErrorKind::RankDeficient, "logistic_irls: design is rank deficient");
        }
    }

    LogisticFit fit;
    fit.coefficients = VectorXd::Zero(k);
    VectorXd fitted(n);
    auto refresh = [&](const VectorXd& beta) {
        const VectorXd eta = design * beta;
        for (Eigen::Index i = 0; i < n; ++i) {
            fitted(i) = expit(eta(i));
        }
    };

    double ll = logistic_log_likelihood(design, response01, fit.coefficients);
    refresh(fit.coefficients);
    VectorXd score = design.transpose() * (response01 - fitted);
    bool diverged = false;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        fit.score_norm = score.lpNorm<Eigen::Infinity>();
        if (fit.score_norm < options.tolerance) {
            fit.converged = true;
            break;
        }
        fit.iterations = iter + 1;
        const VectorXd w = fitted.array() * (1.0 - fitted.array());
        const MatrixXd info = design.transpose() * w.asDiagonal() * design;
        Eigen::LLT<MatrixXd> llt(info);
        if (llt.info() != Eigen::Success) {
            diverged = true;
            break;
        }
        const VectorXd step = llt.solve(score);
        // Decreases below this are summation noise, not overshoot.
        const double slack = 1e-12 * (1.0 + std::abs(ll));
        double scale = 1.0;
        VectorXd candidate = fit.coefficients + step;
        double ll_candidate = logistic_log_likelihood(design, response01, candidate);
        for (int halving = 0; halving < 40 && !(ll_candidate >= ll - slack); ++halving) {
            scale *= 0.5;
            candidate = fit.coefficients + scale * step;
            ll_candidate = logistic_log_likelihood(design, response01, candidate);
        }
        if (!(ll_candidate >= ll - slack)) {
            // No ascent available at machine precision.
            break;
        }
        const bool stalled = (scale * step).lpNorm<Eigen::Infinity>() <
                             1e-15 * (1.0 + fit.coefficients.lpNorm<Eigen::Infinity>());
        fit.coefficients = candidate;
        ll = ll_candidate;
        refresh(fit.coefficients);
        score = design.transpose() * (response01 - fitted);
        if (fit.coefficients.lpNorm<Eigen::Infinity>() > options.coefficient_bound) {
            diverged = true;
            break;
        }
        if (stalled) {
            break;
        }
    }
    fit.score_norm = score.lpNorm<Eigen::Infinity>();
    fit.converged = fit.converged || fit.score_norm < options.tolerance;
    fit.log_likelihood = ll;

    bool pinned = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::min(fitted(i), 1.0 - fitted(i)) < options.pinned_probability) {
            pinned = true;
            break;
        }
    }
    fit.separated = diverged || pinned;
    if (fit.separated) {
        fit.converged = false;
        if (options.throw_on_separation) {
            fail(ErrorKind::Separation,
                 "logistic_irls: fitted probabilities pinned to 0/1 (coefficient max-abs " +
                     std::to_string(fit.coefficients.lpNorm<Eigen::Infinity>()) +
                     "); the classes appear separable");
        }
    }
    fit.fitted = fitted;
    return fit;
}

MatrixXd with_intercept(const MatrixXd& columns) {
    MatrixXd out(columns.rows(), columns.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(columns.cols()) = columns;
    return out;
}

}  // namespace acekit::numkit
