#include "acekit/dataset.hpp"

#include <string>

#include "acekit/error.hpp"

namespace acekit {

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd t, Eigen::VectorXd y,
                 std::optional<MissingMask> missing)
    : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)), missing_(std::move(missing)) {
    if (x_.rows() != t_.size() || y_.size() != t_.size()) {
        fail(ErrorKind::DimensionMismatch,
             "dataset: X has " + std::to_string(x_.rows()) + " rows, T has " +
                 std::to_string(t_.size()) + ", Y has " + std::to_string(y_.size()));
    }
    if (missing_ && (missing_->rows() != x_.rows() || missing_->cols() != x_.cols())) {
        fail(ErrorKind::DimensionMismatch, "dataset: missingness mask shape differs from X");
    }
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
        if (t_(i) != 0.0 && t_(i) != 1.0) {
            fail(ErrorKind::DomainError,
                 "dataset: treatment at row " + std::to_string(i) + " is not 0/1");
        }
    }
    const bool has_missing = missing_ && missing_->any();
    if (!has_missing && (!x_.allFinite() || !y_.allFinite())) {
        fail(ErrorKind::DomainError, "dataset: non-finite covariate or response value");
    }
}

Eigen::Index Dataset::treated_count() const {
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
        count += t_(i) == 1.0 ? 1 : 0;
    }
    return count;
}

void Dataset::require_complete() const {
    if (missing_ && missing_->any()) {
        fail(ErrorKind::MissingData,
             "dataset has missing covariate values; impute before estimating");
    }
}

}  // namespace acekit
