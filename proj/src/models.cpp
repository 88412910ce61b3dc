#include "acekit/models.hpp"

#include <string>

#include "acekit/error.hpp"
#include "acekit/numkit/linalg.hpp"

namespace acekit {

namespace {

void require_size(const Eigen::VectorXd& v, Eigen::Index p, const char* name) {
    if (v.size() != p) {
        fail(ErrorKind::WrongShape, std::string(name) + " must have length " +
                                        std::to_string(p) + ", got " +
                                        std::to_string(v.size()));
    }
}

void require_spd(const Eigen::MatrixXd& m, Eigen::Index p, const char* name) {
    if (m.rows() != p || m.cols() != p) {
        fail(ErrorKind::WrongShape, std::string(name) + " must be " + std::to_string(p) + "x" +
                                        std::to_string(p));
    }
    if (!m.isApprox(m.transpose(), 1e-12) ) {
        fail(ErrorKind::NotPositiveDefinite, std::string(name) + " is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        fail(ErrorKind::NotPositiveDefinite, std::string(name) + " is not positive definite");
    }
}

}  // namespace

void NormalLinearModel::validate() const {
    require_size(b, p, "b");
    require_size(mu0, p, "mu0");
    require_size(mu1, p, "mu1");
    require_spd(sigma0, p, "sigma0");
    require_spd(sigma1, p, "sigma1");
    if (!(phi > 0.0)) {
        fail(ErrorKind::DomainError, "phi must be positive");
    }
    if (!(theta > 0.0 && theta < 1.0)) {
        fail(ErrorKind::DomainError, "theta must lie in (0,1)");
    }
}

void BinaryLogisticModel::validate() const {
    require_size(pi, p, "pi");
    require_size(a, p, "a");
    require_size(b, p, "b");
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(pi(j) > 0.0 && pi(j) < 1.0)) {
            fail(ErrorKind::DomainError, "pi components must lie in (0,1)");
        }
    }
}

void LogisticAssignmentModel::validate() const {
    require_size(mean, p, "mean");
    require_size(a, p, "a");
    require_size(b, p, "b");
    require_size(effect_modifier, p, "effect_modifier");
    require_spd(cov, p, "cov");
    if (!(phi > 0.0)) {
        fail(ErrorKind::DomainError, "phi must be positive");
    }
}

double LogisticAssignmentModel::outcome_mean(int t, const Eigen::VectorXd& x) const {
    return d + delta * t + b.dot(x) + t * effect_modifier.dot(x);
}

double LogisticAssignmentModel::propensity(const Eigen::VectorXd& x) const {
    return numkit::expit(c + a.dot(x));
}

}  // namespace acekit
