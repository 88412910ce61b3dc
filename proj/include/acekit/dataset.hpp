#pragma once

#include <optional>

#include <Eigen/Dense>

namespace acekit {

using MissingMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// n observations of (covariates X, binary treatment T, response Y). Row i of
// x() belongs to unit i.
class Dataset {
public:
    Dataset() = default;
    // Throws DimensionMismatch or DomainError (T not 0/1, non-finite values).
    Dataset(Eigen::MatrixXd x, Eigen::VectorXd t, Eigen::VectorXd y,
            std::optional<MissingMask> missing = std::nullopt);

    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::VectorXd& t() const { return t_; }
    const Eigen::VectorXd& y() const { return y_; }
    const std::optional<MissingMask>& missing() const { return missing_; }

    Eigen::Index n() const { return t_.size(); }
    Eigen::Index p() const { return x_.cols(); }
    Eigen::Index treated_count() const;
    Eigen::Index control_count() const { return n() - treated_count(); }
    bool treated(Eigen::Index i) const { return t_(i) == 1.0; }

    // Throws MissingData if a missingness mask flags any cell.
    void require_complete() const;

    // Number of times the generator redrew T to avoid an empty arm.
    int treatment_redraws = 0;

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd t_;
    Eigen::VectorXd y_;
    std::optional<MissingMask> missing_;
};

}  // namespace acekit
